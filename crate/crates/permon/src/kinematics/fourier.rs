//! Fourier-series trajectory family.
//!
//! Each coordinate is a truncated sine series in the path parameter. The
//! x base frequency is an optimization variable; the y base frequency is
//! held constant so the frequency ratio (and with it the overall shape
//! class) stays fixed during descent.

use super::{CurveEval, Partials};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Fourier trajectory coefficients.
///
/// `a[0]`/`b[0]` are constant offsets; `a[1..]`/`b[1..]` are harmonic
/// amplitudes with phases `phix`/`phiy` (one per harmonic). Parameter
/// vector layout: `[fx, a0..aGx, b0..bGy, phix1..phixGx, phiy1..phiyGy]`
/// (`fy` is excluded from optimization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierParams {
    pub fx: f64,
    pub fy: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub phix: Vec<f64>,
    pub phiy: Vec<f64>,
}

impl FourierParams {
    /// Harmonic count of the x series.
    pub fn gx(&self) -> usize {
        self.a.len() - 1
    }

    /// Harmonic count of the y series.
    pub fn gy(&self) -> usize {
        self.b.len() - 1
    }

    pub fn param_count(&self) -> usize {
        3 + 2 * self.gx() + 2 * self.gy()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.a.len() < 2 || self.b.len() < 2 {
            return Err("each coordinate needs an offset and at least one harmonic".into());
        }
        if self.phix.len() != self.gx() {
            return Err(format!(
                "phix must have one entry per x harmonic (got {}, expected {})",
                self.phix.len(),
                self.gx()
            ));
        }
        if self.phiy.len() != self.gy() {
            return Err(format!(
                "phiy must have one entry per y harmonic (got {}, expected {})",
                self.phiy.len(),
                self.gy()
            ));
        }
        if !(self.fx > 0.0) {
            return Err(format!("fx must be positive (fx={})", self.fx));
        }
        if !(self.fy > 0.0) {
            return Err(format!("fy must be positive (fy={})", self.fy));
        }
        Ok(())
    }

    pub fn position(&self, psi: f64) -> Vec2 {
        let mut x = self.a[0];
        for g in 1..self.a.len() {
            x += self.a[g] * (TAU * g as f64 * self.fx * psi + self.phix[g - 1]).sin();
        }
        let mut y = self.b[0];
        for g in 1..self.b.len() {
            y += self.b[g] * (TAU * g as f64 * self.fy * psi + self.phiy[g - 1]).sin();
        }
        Vec2::new(x, y)
    }

    pub fn eval(&self, psi: f64) -> CurveEval {
        let (x, e1x, e2x, e3x) = series_eval(&self.a, &self.phix, self.fx, psi);
        let (y, e1y, e2y, e3y) = series_eval(&self.b, &self.phiy, self.fy, psi);
        CurveEval {
            pos: Vec2::new(x, y),
            e1: Vec2::new(e1x, e1y),
            e2: Vec2::new(e2x, e2y),
            e3: Vec2::new(e3x, e3y),
        }
    }

    pub fn pos_partials(&self, psi: f64) -> Partials {
        let p = self.param_count();
        let mut out = Partials::zeros(p);
        let lay = self.layout();
        // d s_x / d fx picks up the frequency appearing inside every phase.
        let mut dfx = 0.0;
        for g in 1..self.a.len() {
            let gamma = g as f64;
            let theta = TAU * gamma * self.fx * psi + self.phix[g - 1];
            let (st, ct) = theta.sin_cos();
            dfx += TAU * psi * gamma * self.a[g] * ct;
            out.x[lay.a + g] = st;
            out.x[lay.phix + g - 1] = self.a[g] * ct;
        }
        out.x[lay.fx] = dfx;
        out.x[lay.a] = 1.0;
        for g in 1..self.b.len() {
            let gamma = g as f64;
            let theta = TAU * gamma * self.fy * psi + self.phiy[g - 1];
            let (st, ct) = theta.sin_cos();
            out.y[lay.b + g] = st;
            out.y[lay.phiy + g - 1] = self.b[g] * ct;
        }
        out.y[lay.b] = 1.0;
        out
    }

    pub fn e1_partials(&self, psi: f64) -> Partials {
        let p = self.param_count();
        let mut out = Partials::zeros(p);
        let lay = self.layout();
        let mut dfx = 0.0;
        for g in 1..self.a.len() {
            let gamma = g as f64;
            let w = TAU * gamma * self.fx;
            let theta = w * psi + self.phix[g - 1];
            let (st, ct) = theta.sin_cos();
            dfx += TAU * gamma * self.a[g] * ct - TAU * psi * gamma * w * self.a[g] * st;
            out.x[lay.a + g] = w * ct;
            out.x[lay.phix + g - 1] = -self.a[g] * w * st;
        }
        out.x[lay.fx] = dfx;
        for g in 1..self.b.len() {
            let gamma = g as f64;
            let w = TAU * gamma * self.fy;
            let theta = w * psi + self.phiy[g - 1];
            let (st, ct) = theta.sin_cos();
            out.y[lay.b + g] = w * ct;
            out.y[lay.phiy + g - 1] = -self.b[g] * w * st;
        }
        out
    }

    pub fn e2_partials(&self, psi: f64) -> Partials {
        let p = self.param_count();
        let mut out = Partials::zeros(p);
        let lay = self.layout();
        let mut dfx = 0.0;
        for g in 1..self.a.len() {
            let gamma = g as f64;
            let w = TAU * gamma * self.fx;
            let theta = w * psi + self.phix[g - 1];
            let (st, ct) = theta.sin_cos();
            dfx += -2.0 * TAU * gamma * w * self.a[g] * st - TAU * psi * gamma * w * w * self.a[g] * ct;
            out.x[lay.a + g] = -w * w * st;
            out.x[lay.phix + g - 1] = -self.a[g] * w * w * ct;
        }
        out.x[lay.fx] = dfx;
        for g in 1..self.b.len() {
            let gamma = g as f64;
            let w = TAU * gamma * self.fy;
            let theta = w * psi + self.phiy[g - 1];
            let (st, ct) = theta.sin_cos();
            out.y[lay.b + g] = -w * w * st;
            out.y[lay.phiy + g - 1] = -self.b[g] * w * w * ct;
        }
        out
    }

    fn layout(&self) -> Layout {
        let gx = self.gx();
        let gy = self.gy();
        Layout {
            fx: 0,
            a: 1,
            b: 2 + gx,
            phix: 3 + gx + gy,
            phiy: 3 + 2 * gx + gy,
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.push(self.fx);
        v.extend_from_slice(&self.a);
        v.extend_from_slice(&self.b);
        v.extend_from_slice(&self.phix);
        v.extend_from_slice(&self.phiy);
        v
    }

    pub fn set_from_vector(&mut self, v: &[f64]) {
        let lay = self.layout();
        self.fx = v[lay.fx];
        let na = self.a.len();
        self.a.copy_from_slice(&v[lay.a..lay.a + na]);
        let nb = self.b.len();
        self.b.copy_from_slice(&v[lay.b..lay.b + nb]);
        let nx = self.phix.len();
        self.phix.copy_from_slice(&v[lay.phix..lay.phix + nx]);
        let ny = self.phiy.len();
        self.phiy.copy_from_slice(&v[lay.phiy..lay.phiy + ny]);
    }

    pub fn component_names(&self) -> Vec<String> {
        let mut names = vec!["fx".to_string()];
        for g in 0..self.a.len() {
            names.push(format!("a{g}"));
        }
        for g in 0..self.b.len() {
            names.push(format!("b{g}"));
        }
        for g in 1..=self.gx() {
            names.push(format!("phix{g}"));
        }
        for g in 1..=self.gy() {
            names.push(format!("phiy{g}"));
        }
        names
    }
}

struct Layout {
    fx: usize,
    a: usize,
    b: usize,
    phix: usize,
    phiy: usize,
}

/// One coordinate's series value and its first three path derivatives.
fn series_eval(coef: &[f64], phases: &[f64], freq: f64, psi: f64) -> (f64, f64, f64, f64) {
    let mut v = coef[0];
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    let mut d3 = 0.0;
    for g in 1..coef.len() {
        let w = TAU * g as f64 * freq;
        let (st, ct) = (w * psi + phases[g - 1]).sin_cos();
        v += coef[g] * st;
        d1 += coef[g] * w * ct;
        d2 -= coef[g] * w * w * st;
        d3 -= coef[g] * w * w * w * ct;
    }
    (v, d1, d2, d3)
}
