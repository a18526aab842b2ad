use clap::Parser;

fn main() {
    let cli = permon::cli::Cli::parse();
    std::process::exit(permon::cli::run(cli));
}
