//! Per-target uncertainty dynamics.
//!
//! Each target's uncertainty grows at its own rate while unobserved and
//! decays in proportion to the joint detection probability, floored at
//! zero. Integration is explicit Euler on the scenario grid; zero
//! crossings inside a step are reported as events with linearly
//! interpolated times.

use crate::ipa::{Event, EventKind};

/// Uncertainty values for all targets plus exact-zero flags.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyState {
    values: Vec<f64>,
    at_zero: Vec<bool>,
}

impl UncertaintyState {
    pub fn new(initial: Vec<f64>) -> Self {
        debug_assert!(initial.iter().all(|r| *r >= 0.0));
        let at_zero = initial.iter().map(|r| *r == 0.0).collect();
        UncertaintyState {
            values: initial,
            at_zero,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_at_zero(&self, i: usize) -> bool {
        self.at_zero[i]
    }
}

/// Instantaneous uncertainty rate for one target. At the zero floor with
/// enough sensing pressure the value is pinned and the rate is zero.
pub fn rate(r: f64, p: f64, growth: f64, decay: f64) -> f64 {
    if r == 0.0 && growth <= decay * p {
        0.0
    } else {
        growth - decay * p
    }
}

/// One Euler step for all targets. Zero crossings clamp to zero and emit a
/// hit-zero event at the interpolated time; departures from zero emit a
/// leave-zero event stamped at the interval start.
pub fn step(
    state: &mut UncertaintyState,
    rates: &[f64],
    dt: f64,
    t_start: f64,
    events: &mut Vec<Event>,
) {
    debug_assert_eq!(rates.len(), state.values.len());
    for (i, (r, rate)) in state.values.iter_mut().zip(rates).enumerate() {
        if state.at_zero[i] {
            if *rate > 0.0 {
                events.push(Event {
                    kind: EventKind::UncertaintyLeavesZero { target: i },
                    time: t_start,
                });
                *r = rate * dt;
                state.at_zero[i] = false;
            }
            // Pinned at zero otherwise; a negative rate cannot occur here.
            continue;
        }
        let next = *r + rate * dt;
        if next <= 0.0 {
            let crossing = if *rate < 0.0 { (*r / -*rate).min(dt) } else { dt };
            events.push(Event {
                kind: EventKind::UncertaintyHitsZero { target: i },
                time: t_start + crossing,
            });
            *r = 0.0;
            state.at_zero[i] = true;
        } else {
            *r = next;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_branches() {
        // Pinned at the floor under strong observation.
        assert_eq!(rate(0.0, 0.5, 1.0, 15.0), 0.0);
        // Unobserved growth.
        assert_eq!(rate(2.0, 0.0, 1.0, 15.0), 1.0);
        // At the floor but observation too weak to pin.
        assert!((rate(0.0, 0.05, 1.0, 15.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn crossing_is_interpolated() {
        let mut st = UncertaintyState::new(vec![0.005]);
        let mut events = Vec::new();
        step(&mut st, &[-1.0], 0.01, 1.0, &mut events);
        assert_eq!(st.values(), &[0.0]);
        assert!(st.is_at_zero(0));
        assert_eq!(events.len(), 1);
        assert!(matches!(events[0].kind, EventKind::UncertaintyHitsZero { target: 0 }));
        assert!((events[0].time - 1.005).abs() < 1e-12);
    }

    #[test]
    fn resting_at_zero_is_quiet() {
        let mut st = UncertaintyState::new(vec![0.0]);
        let mut events = Vec::new();
        step(&mut st, &[0.0], 0.01, 0.0, &mut events);
        assert_eq!(st.values(), &[0.0]);
        assert!(events.is_empty());
    }

    #[test]
    fn leaving_zero_is_stamped_at_interval_start() {
        let mut st = UncertaintyState::new(vec![0.0]);
        let mut events = Vec::new();
        step(&mut st, &[0.25], 0.01, 2.0, &mut events);
        assert!((st.values()[0] - 0.0025).abs() < 1e-15);
        assert!(!st.is_at_zero(0));
        assert_eq!(events.len(), 1);
        assert!(matches!(events[0].kind, EventKind::UncertaintyLeavesZero { target: 0 }));
        assert_eq!(events[0].time, 2.0);
    }

    #[test]
    fn unobserved_growth_is_exact_on_grid() {
        let mut st = UncertaintyState::new(vec![0.5]);
        let mut events = Vec::new();
        let dt = 0.01;
        for m in 0..1000 {
            step(&mut st, &[1.0], dt, m as f64 * dt, &mut events);
        }
        assert!((st.values()[0] - (0.5 + 1000.0 * dt)).abs() < 1e-9);
        assert!(events.is_empty());
    }

    #[test]
    fn full_observation_reaches_zero_and_stays() {
        let growth = 1.0;
        let decay = 15.0;
        let mut st = UncertaintyState::new(vec![1.0]);
        let mut events = Vec::new();
        let dt = 0.01;
        let r = rate(1.0, 1.0, growth, decay);
        assert_eq!(r, growth - decay);
        for m in 0..200 {
            let r = rate(st.values()[0], 1.0, growth, decay);
            step(&mut st, &[r], dt, m as f64 * dt, &mut events);
            assert!(st.values()[0] >= 0.0);
        }
        assert_eq!(st.values()[0], 0.0);
        assert_eq!(events.len(), 1);
    }
}
