//! Twelfth-order averaged inverter model: dVOC reference generation, LCL
//! filter, PI voltage loop with anti-windup, smooth current-reference
//! limiter and PI current loop, all in per unit with time in seconds.
//!
//! State ordering is fixed:
//! `[δ, E*, I_gd, I_gq, I_id, I_iq, E_d, E_q, Φ_d, Φ_q, Γ_d, Γ_q]`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{dq, quarter, t2_rotation, DqPair, E1};
use crate::limiter::rho_smooth;
use crate::params::ParameterSet;

pub const FULL_DIM: usize = 12;

/// Names of the full-model state slots, in storage order.
pub const FULL_STATE_NAMES: [&str; FULL_DIM] = [
    "delta", "E_star", "Igd", "Igq", "Iid", "Iiq", "Ed", "Eq", "Phid", "Phiq", "Gammad", "Gammaq",
];

/// Active and reactive power `[P, Q]`, per unit.
pub type PowerPair = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub delta: f64,
    pub e_star: f64,
    pub i_g: DqPair,
    pub i_i: DqPair,
    pub e: DqPair,
    pub phi: DqPair,
    pub gamma: DqPair,
}

impl FullState {
    pub fn from_array(x: &[f64; FULL_DIM]) -> Self {
        Self {
            delta: x[0],
            e_star: x[1],
            i_g: dq(x[2], x[3]),
            i_i: dq(x[4], x[5]),
            e: dq(x[6], x[7]),
            phi: dq(x[8], x[9]),
            gamma: dq(x[10], x[11]),
        }
    }

    pub fn to_array(&self) -> [f64; FULL_DIM] {
        [
            self.delta,
            self.e_star,
            self.i_g.x,
            self.i_g.y,
            self.i_i.x,
            self.i_i.y,
            self.e.x,
            self.e.y,
            self.phi.x,
            self.phi.y,
            self.gamma.x,
            self.gamma.y,
        ]
    }
}

/// Exogenous inputs: power setpoints and the infinite-bus voltage phasor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    /// `[P*, Q*]`.
    pub s_star: PowerPair,
    pub v_dq: DqPair,
}

impl Inputs {
    pub fn new(p_star: f64, q_star: f64, v_d: f64, v_q: f64) -> Self {
        Self {
            s_star: PowerPair::new(p_star, q_star),
            v_dq: dq(v_d, v_q),
        }
    }
}

/// Algebraic outputs of the full model at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outputs {
    pub s: PowerPair,
    /// Inverter angular frequency, rad/s.
    pub omega: f64,
    pub rho: f64,
    /// Unsaturated current reference `I*_idq`.
    pub i_ref: DqPair,
}

/// Power delivered at the filter capacitor: `P = Eᵀ I_g`, `Q = Eᵀ T₂(-π/2) I_g`.
#[inline]
pub fn power_from_capacitor(e: &DqPair, i_g: &DqPair) -> PowerPair {
    // T₂(-π/2) I_g = -T₂(π/2) I_g.
    PowerPair::new(e.dot(i_g), -e.dot(&quarter(i_g)))
}

/// dVOC rates `(δ̇, Ė*, ω)`.
pub fn dvoc_rates(
    e_star: f64,
    s: &PowerPair,
    s_star: &PowerPair,
    p: &ParameterSet,
) -> Result<(f64, f64, f64)> {
    if !(e_star > 0.0) {
        return Err(Error::NonPositiveEStar(e_star));
    }
    let err = t2_rotation(p.psi - FRAC_PI_2) * (s_star - s);
    let gain = p.omega_b * p.kappa1;
    let omega = p.omega_b + gain / (e_star * e_star) * err.x;
    let e_star_dot = gain / e_star * err.y
        + p.omega_b * p.kappa2 * (p.e_b * p.e_b - e_star * e_star) * e_star;
    Ok((omega - p.omega_b, e_star_dot, omega))
}

/// Current reference from the voltage loop before limiting:
/// `K_Pv e₁E* + K_Iv Φ + I_g − (K_Pv I + (ω/ω_b) C T₂(π/2)) E`.
#[inline]
pub fn unsaturated_reference(state: &FullState, omega: f64, p: &ParameterSet) -> DqPair {
    let w = omega / p.omega_b;
    E1 * (p.k_pv * state.e_star) + state.phi * p.k_iv + state.i_g
        - state.e * p.k_pv
        - quarter(&state.e) * (w * p.c)
}

/// Rates of the four fast dq blocks `[İ_i, Ė, Φ̇, Γ̇]` at frequency `omega`.
/// `ρ` and the reference are evaluated at the same `omega`.
fn fast_blocks(state: &FullState, omega: f64, p: &ParameterSet) -> ([DqPair; 4], f64, DqPair) {
    let wb = p.omega_b;
    let i_ref = unsaturated_reference(state, omega, p);
    let rho = rho_smooth(i_ref.norm(), p.i_max, p.eps_sat);
    let limited = i_ref * rho;
    let d_ii = (limited * p.k_pi + state.gamma * p.k_ii - state.i_i * (p.r_i + p.k_pi)) * (wb / p.l_i);
    let d_e = quarter(&state.e) * omega + (state.i_i - state.i_g) * (wb / p.c);
    let d_phi = (E1 * state.e_star - state.e + i_ref * (p.k_b * (rho - 1.0))) * wb;
    let d_gamma = (limited - state.i_i) * wb;
    ([d_ii, d_e, d_phi, d_gamma], rho, i_ref)
}

/// Outputs `(S, ω, ρ, I*)` at a state.
pub fn full_outputs(state: &FullState, inputs: &Inputs, p: &ParameterSet) -> Result<Outputs> {
    let s = power_from_capacitor(&state.e, &state.i_g);
    let (_, _, omega) = dvoc_rates(state.e_star, &s, &inputs.s_star, p)?;
    let i_ref = unsaturated_reference(state, omega, p);
    Ok(Outputs {
        s,
        omega,
        rho: rho_smooth(i_ref.norm(), p.i_max, p.eps_sat),
        i_ref,
    })
}

/// Full-model right-hand side, in per unit per second.
pub fn full_rhs(state: &FullState, inputs: &Inputs, p: &ParameterSet) -> Result<[f64; FULL_DIM]> {
    full_rhs_with_outputs(state, inputs, p).map(|(dx, _)| dx)
}

/// [`full_rhs`] together with the [`Outputs`] computed along the way.
pub fn full_rhs_with_outputs(
    state: &FullState,
    inputs: &Inputs,
    p: &ParameterSet,
) -> Result<([f64; FULL_DIM], Outputs)> {
    let wb = p.omega_b;
    let s = power_from_capacitor(&state.e, &state.i_g);
    let (d_delta, d_e_star, omega) = dvoc_rates(state.e_star, &s, &inputs.s_star, p)?;
    let grid = t2_rotation(state.delta) * inputs.v_dq;
    let d_ig = quarter(&state.i_g) * omega - state.i_g * (wb * p.r_g / p.l_g)
        + (state.e - grid) * (wb / p.l_g);
    let ([d_ii, d_e, d_phi, d_gamma], rho, i_ref) = fast_blocks(state, omega, p);
    let dx = [
        d_delta, d_e_star, d_ig.x, d_ig.y, d_ii.x, d_ii.y, d_e.x, d_e.y, d_phi.x, d_phi.y,
        d_gamma.x, d_gamma.y,
    ];
    Ok((dx, Outputs { s, omega, rho, i_ref }))
}

/// Time-scale parameter of the fast subsystem, `1/260`.
pub const FAST_EPSILON: f64 = 1.0 / 260.0;

/// `ε`-scaled residual of the fast blocks `[İ_i, Ė, Φ̇, Γ̇]` with the
/// frequency pinned to `ω_b`. Zero exactly on the reduced-order manifold.
pub fn fast_residual_at_nominal(state: &FullState, p: &ParameterSet) -> [f64; 8] {
    let (b, _, _) = fast_blocks(state, p.omega_b, p);
    [b[0].x, b[0].y, b[1].x, b[1].y, b[2].x, b[2].y, b[3].x, b[3].y].map(|v| v * FAST_EPSILON)
}

/// Averaged inverter terminal voltage `U*_dq` commanded by the current loop.
pub fn inverter_voltage_reference(
    state: &FullState,
    inputs: &Inputs,
    p: &ParameterSet,
) -> Result<DqPair> {
    let (dx, out) = full_rhs_with_outputs(state, inputs, p)?;
    let d_gamma = dq(dx[10], dx[11]);
    let w = out.omega / p.omega_b;
    Ok(d_gamma * (p.k_pi / p.omega_b) + state.gamma * p.k_ii + state.e
        - quarter(&state.i_i) * (w * p.l_i))
}
