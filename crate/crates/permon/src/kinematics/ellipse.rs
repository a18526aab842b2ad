//! Elliptical trajectory family: position, anomaly derivatives, and
//! parameter partials.

use super::{CurveEval, Partials};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};

/// Ellipse described by center, semi-axes, and orientation. The path
/// parameter is the eccentric anomaly.
///
/// Parameter vector layout: `[X, Y, a, b, phi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipseParams {
    #[serde(rename = "X")]
    pub cx: f64,
    #[serde(rename = "Y")]
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    pub phi: f64,
}

pub const PARAM_COUNT: usize = 5;

impl EllipseParams {
    pub fn new(cx: f64, cy: f64, a: f64, b: f64, phi: f64) -> Self {
        EllipseParams { cx, cy, a, b, phi }
    }

    pub fn validate(&self, b_min: f64) -> Result<(), String> {
        if !(self.b >= b_min) {
            return Err(format!("minor axis must be at least {b_min} (b={})", self.b));
        }
        if !(self.a >= self.b) {
            return Err(format!("major axis must dominate minor (a={}, b={})", self.a, self.b));
        }
        Ok(())
    }

    pub fn position(&self, psi: f64) -> Vec2 {
        let (sp, cp) = psi.sin_cos();
        let (sf, cf) = self.phi.sin_cos();
        Vec2::new(
            self.cx + self.a * cp * cf - self.b * sp * sf,
            self.cy + self.a * cp * sf + self.b * sp * cf,
        )
    }

    /// Position and the first three anomaly derivatives in one pass.
    pub fn eval(&self, psi: f64) -> CurveEval {
        let (sp, cp) = psi.sin_cos();
        let (sf, cf) = self.phi.sin_cos();
        let pos = Vec2::new(
            self.cx + self.a * cp * cf - self.b * sp * sf,
            self.cy + self.a * cp * sf + self.b * sp * cf,
        );
        let e1 = Vec2::new(
            -self.a * sp * cf - self.b * cp * sf,
            -self.a * sp * sf + self.b * cp * cf,
        );
        let e2 = Vec2::new(
            -self.a * cp * cf + self.b * sp * sf,
            -self.a * cp * sf - self.b * sp * cf,
        );
        // Third anomaly derivative of the ellipse is -e1.
        let e3 = -e1;
        CurveEval { pos, e1, e2, e3 }
    }

    pub fn pos_partials(&self, psi: f64) -> Partials {
        let (sp, cp) = psi.sin_cos();
        let (sf, cf) = self.phi.sin_cos();
        Partials {
            x: vec![
                1.0,
                0.0,
                cp * cf,
                -sp * sf,
                -self.a * cp * sf - self.b * sp * cf,
            ],
            y: vec![
                0.0,
                1.0,
                cp * sf,
                sp * cf,
                self.a * cp * cf - self.b * sp * sf,
            ],
        }
    }

    /// Partials of `ds/dpsi` with respect to the parameters.
    pub fn e1_partials(&self, psi: f64) -> Partials {
        let (sp, cp) = psi.sin_cos();
        let (sf, cf) = self.phi.sin_cos();
        Partials {
            x: vec![
                0.0,
                0.0,
                -sp * cf,
                -cp * sf,
                self.a * sp * sf - self.b * cp * cf,
            ],
            y: vec![
                0.0,
                0.0,
                -sp * sf,
                cp * cf,
                -self.a * sp * cf - self.b * cp * sf,
            ],
        }
    }

    /// Partials of `d2s/dpsi2` with respect to the parameters.
    pub fn e2_partials(&self, psi: f64) -> Partials {
        let (sp, cp) = psi.sin_cos();
        let (sf, cf) = self.phi.sin_cos();
        Partials {
            x: vec![
                0.0,
                0.0,
                -cp * cf,
                sp * sf,
                self.a * cp * sf + self.b * sp * cf,
            ],
            y: vec![
                0.0,
                0.0,
                -cp * sf,
                -sp * cf,
                -self.a * cp * cf + self.b * sp * sf,
            ],
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        vec![self.cx, self.cy, self.a, self.b, self.phi]
    }

    pub fn set_from_vector(&mut self, v: &[f64]) {
        self.cx = v[0];
        self.cy = v[1];
        self.a = v[2];
        self.b = v[3];
        self.phi = v[4];
    }

    pub fn component_names() -> Vec<String> {
        ["X", "Y", "a", "b", "phi"].iter().map(|s| s.to_string()).collect()
    }
}
