//! Reference-frame transformations and angle bookkeeping.
//!
//! Three-phase quantities are projected onto a frame rotating at angle `α`
//! with [`t1_transform`]. Two rotating frames offset by `δ` are related by
//! the rotation [`t2_rotation`]: `f_dq = T₂(δ) f_DQ`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Vector2, Vector3};

/// A pair of direct/quadrature components, in per unit.
pub type DqPair = Vector2<f64>;

/// 2×2 real matrix acting on [`DqPair`]s.
pub type Mat2 = Matrix2<f64>;

pub const E1: DqPair = Vector2::new(1.0, 0.0);
pub const E2: DqPair = Vector2::new(0.0, 1.0);

#[inline]
pub fn dq(d: f64, q: f64) -> DqPair {
    DqPair::new(d, q)
}

/// `T₂(α) = [[cos α, sin α], [-sin α, cos α]]`.
#[inline]
pub fn t2_rotation(alpha: f64) -> Mat2 {
    let (s, c) = alpha.sin_cos();
    Mat2::new(c, s, -s, c)
}

/// `T₂(π/2) = [[0, 1], [-1, 0]]`, exact.
#[inline]
pub fn t2_quarter() -> Mat2 {
    Mat2::new(0.0, 1.0, -1.0, 0.0)
}

/// Rotate a dq pair by `T₂(π/2)` without forming the matrix.
#[inline]
pub fn quarter(v: &DqPair) -> DqPair {
    Vector2::new(v.y, -v.x)
}

/// Project a three-phase set onto the frame at angle `alpha`.
pub fn t1_transform(alpha: f64, f_abc: &Vector3<f64>) -> DqPair {
    let shift = 2.0 * PI / 3.0;
    let angles = [alpha, alpha - shift, alpha + shift];
    let mut out = DqPair::zeros();
    for (k, a) in angles.iter().enumerate() {
        out.x += a.cos() * f_abc[k];
        out.y -= a.sin() * f_abc[k];
    }
    out * (2.0 / 3.0)
}

/// Balanced three-phase set `m·cos(φ + [0, -2π/3, 2π/3])`.
pub fn balanced_set(magnitude: f64, phase: f64) -> Vector3<f64> {
    let shift = 2.0 * PI / 3.0;
    Vector3::new(
        magnitude * phase.cos(),
        magnitude * (phase - shift).cos(),
        magnitude * (phase + shift).cos(),
    )
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Inverter angle relative to the nominal rotating frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleState {
    delta: f64,
    /// Instantaneous angular frequency, rad/s.
    pub omega: f64,
}

impl AngleState {
    pub fn new(delta: f64, omega: f64) -> Self {
        Self {
            delta: wrap_angle(delta),
            omega,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Advance `δ` by `increment` radians, keeping it wrapped.
    pub fn advance(&mut self, increment: f64) {
        self.delta = wrap_angle(self.delta + increment);
    }

    /// Absolute angle `θ = δ + ω_b t`.
    pub fn theta(&self, omega_b: f64, t: f64) -> f64 {
        self.delta + omega_b * t
    }
}
