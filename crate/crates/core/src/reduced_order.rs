//! Reduced-order DAE models obtained by replacing the fast states
//! (`I_i`, `E`, `Φ`, `Γ`, and for resistive lines also `I_g`) with their
//! zero-order manifold at nominal frequency.
//!
//! * Inductive lines: 4 states `[δ, E*, I_gd, I_gq]`.
//! * Resistive lines: 2 states `[δ, E*]`, with `I_g` algebraic.
//!
//! The limiter survives the reduction as the scalar constraint of
//! [`crate::limiter::solve_rho_reduced`]; [`LimiterMode::None`] pins `ρ = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{quarter, t2_rotation, DqPair, Mat2, E1};
use crate::full_order::{dvoc_rates, FullState, Inputs, PowerPair};
use crate::limiter::{
    gain_matrices, reduced_reference_norm, reduced_rho_residual, solve_rho_reduced_with,
    solve_rho_with, GainMatrices, RhoSolution,
};
use crate::params::ParameterSet;
use crate::roots::RootOptions;

pub const REDUCED_L_DIM: usize = 4;
pub const REDUCED_R_DIM: usize = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimiterMode {
    #[default]
    Smooth,
    /// Limiter ignored: `ρ = 1`.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedStateL {
    pub delta: f64,
    pub e_star: f64,
    pub i_g: DqPair,
}

impl ReducedStateL {
    pub fn from_array(x: &[f64; REDUCED_L_DIM]) -> Self {
        Self {
            delta: x[0],
            e_star: x[1],
            i_g: DqPair::new(x[2], x[3]),
        }
    }

    pub fn to_array(&self) -> [f64; REDUCED_L_DIM] {
        [self.delta, self.e_star, self.i_g.x, self.i_g.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedStateR {
    pub delta: f64,
    pub e_star: f64,
}

impl ReducedStateR {
    pub fn from_array(x: &[f64; REDUCED_R_DIM]) -> Self {
        Self {
            delta: x[0],
            e_star: x[1],
        }
    }

    pub fn to_array(&self) -> [f64; REDUCED_R_DIM] {
        [self.delta, self.e_star]
    }
}

/// Fast states reconstructed on the manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldPoint {
    pub i_i: DqPair,
    pub e: DqPair,
    pub phi: DqPair,
    pub gamma: DqPair,
    pub rho: f64,
}

impl ManifoldPoint {
    /// Assemble the equivalent full-model state.
    pub fn full_state(&self, delta: f64, e_star: f64, i_g: DqPair) -> FullState {
        FullState {
            delta,
            e_star,
            i_g,
            i_i: self.i_i,
            e: self.e,
            phi: self.phi,
            gamma: self.gamma,
        }
    }
}

fn effective_rho(rho: f64, mode: LimiterMode) -> f64 {
    match mode {
        LimiterMode::Smooth => rho,
        LimiterMode::None => 1.0,
    }
}

fn pq_with_gains(e_star: f64, i_g: &DqPair, rho: f64, g: &GainMatrices, p: &ParameterSet) -> PowerPair {
    let qt = Mat2::new(0.0, -1.0, 1.0, 0.0); // T₂(π/2)ᵀ
    let a1t = g.a1.transpose();
    let k = rho / p.c;
    let p_quad = (a1t * qt * k - qt / p.c) * i_g;
    let p_lin = (qt.transpose() * g.a2 * E1).dot(i_g) * (k * e_star);
    let q_quad = (Mat2::identity() / p.c - a1t * k) * i_g;
    let q_lin = (g.a2 * E1).dot(i_g) * (k * e_star);
    PowerPair::new(i_g.dot(&p_quad) + p_lin, i_g.dot(&q_quad) - q_lin)
}

/// `[P, Q]` on the manifold, as a function of `(E*, I_g, ρ)`.
pub fn reduced_pq(e_star: f64, i_g: &DqPair, rho: f64, p: &ParameterSet) -> Result<PowerPair> {
    let g = gain_matrices(rho, p)?;
    Ok(pq_with_gains(e_star, i_g, rho, &g, p))
}

/// Manifold values of the fast states for slow states `(E*, I_g)`.
pub fn manifold_states(
    e_star: f64,
    i_g: &DqPair,
    rho: f64,
    p: &ParameterSet,
    mode: LimiterMode,
) -> Result<ManifoldPoint> {
    let rho = effective_rho(rho, mode);
    if !(rho > 0.0) {
        return Err(Error::SingularGain {
            rho,
            what: "manifold integrator state needs rho > 0",
        });
    }
    let g = gain_matrices(rho, p)?;
    Ok(manifold_with_gains(e_star, i_g, rho, &g, p))
}

/// [`manifold_states`] and [`reduced_pq`] at the same point, sharing one
/// evaluation of the gain matrices.
pub fn manifold_and_pq(
    e_star: f64,
    i_g: &DqPair,
    rho: f64,
    p: &ParameterSet,
    mode: LimiterMode,
) -> Result<(ManifoldPoint, PowerPair)> {
    let rho = effective_rho(rho, mode);
    if !(rho > 0.0) {
        return Err(Error::SingularGain {
            rho,
            what: "manifold integrator state needs rho > 0",
        });
    }
    let g = gain_matrices(rho, p)?;
    Ok((manifold_with_gains(e_star, i_g, rho, &g, p), pq_with_gains(e_star, i_g, rho, &g, p)))
}

fn manifold_with_gains(e_star: f64, i_g: &DqPair, rho: f64, g: &GainMatrices, p: &ParameterSet) -> ManifoldPoint {
    let i_i = (g.a1 * i_g + g.a2 * E1 * e_star) * rho;
    let e = quarter(&(i_i - i_g)) / p.c;
    let phi = i_i * ((rho - 1.0) * (p.k_b * p.k_pv - 1.0) / (rho * p.k_iv));
    let gamma = i_i * (p.r_i / p.k_ii);
    ManifoldPoint { i_i, e, phi, gamma, rho }
}

/// Solve for `ρ` in the inductive model; `None` mode returns `ρ = 1`.
pub fn rho_for_mode(
    e_star: f64,
    i_g: &DqPair,
    p: &ParameterSet,
    mode: LimiterMode,
    guess: Option<f64>,
) -> Result<RhoSolution> {
    match mode {
        LimiterMode::Smooth => solve_rho_reduced_with(e_star, i_g, p, guess, RootOptions::default()),
        LimiterMode::None => {
            if !(e_star > 0.0) {
                return Err(Error::NonPositiveEStar(e_star));
            }
            Ok(RhoSolution {
                rho: 1.0,
                residual: 0.0,
                iterations: 0,
                saturated: false,
            })
        }
    }
}

/// Inductive-line reduced model with a warm-start `ρ`. Returns the
/// derivative and the solved `ρ`.
pub fn reduced_l_rhs_warm(
    state: &ReducedStateL,
    inputs: &Inputs,
    p: &ParameterSet,
    mode: LimiterMode,
    guess: Option<f64>,
) -> Result<([f64; REDUCED_L_DIM], RhoSolution)> {
    let sol = rho_for_mode(state.e_star, &state.i_g, p, mode, guess)?;
    let rho = sol.rho;
    let g = gain_matrices(rho, p)?;
    let s = pq_with_gains(state.e_star, &state.i_g, rho, &g, p);
    let (d_delta, d_e_star, _) = dvoc_rates(state.e_star, &s, &inputs.s_star, p)?;

    let wb = p.omega_b;
    let id = Mat2::identity();
    let q = crate::frames::t2_quarter();
    let a = (q * (id - (id - g.a1 * rho) / (p.l_g * p.c)) - id * (p.r_g / p.l_g)) * wb;
    let drive = q * g.a2 * E1 * (rho * state.e_star / p.c) - t2_rotation(state.delta) * inputs.v_dq;
    let d_ig = a * state.i_g + drive * (wb / p.l_g);
    Ok(([d_delta, d_e_star, d_ig.x, d_ig.y], sol))
}

/// Inductive-line reduced model `[δ̇, Ė*, İ_gd, İ_gq]`.
pub fn reduced_l_rhs(
    state: &ReducedStateL,
    inputs: &Inputs,
    p: &ParameterSet,
    mode: LimiterMode,
) -> Result<[f64; REDUCED_L_DIM]> {
    reduced_l_rhs_warm(state, inputs, p, mode, None).map(|(dx, _)| dx)
}

/// `I_g = A₃(ρ) e₁E* + A₄(ρ) T₂(δ) V_DQ` at a given `ρ`.
pub fn resistive_grid_current(
    delta: f64,
    e_star: f64,
    v_dq: &DqPair,
    rho: f64,
    p: &ParameterSet,
) -> Result<DqPair> {
    let g = gain_matrices(rho, p)?;
    Ok(g.a3 * E1 * e_star + g.a4 * t2_rotation(delta) * v_dq)
}

/// Resistive-line algebraic grid current and the `ρ` consistent with it.
pub fn solve_ig_resistive(
    delta: f64,
    e_star: f64,
    v_dq: &DqPair,
    p: &ParameterSet,
    mode: LimiterMode,
    guess: Option<f64>,
) -> Result<(DqPair, RhoSolution)> {
    if !(e_star > 0.0) {
        return Err(Error::NonPositiveEStar(e_star));
    }
    let grid = t2_rotation(delta) * v_dq;
    let current = |rho: f64| -> Result<DqPair> {
        let g = gain_matrices(rho, p)?;
        Ok(g.a3 * E1 * e_star + g.a4 * grid)
    };
    let sol = match mode {
        LimiterMode::None => RhoSolution {
            rho: 1.0,
            residual: 0.0,
            iterations: 0,
            saturated: false,
        },
        LimiterMode::Smooth => {
            let residual = |rho: f64| match current(rho) {
                Ok(i_g) => {
                    let n = reduced_reference_norm(e_star, &i_g, p);
                    if n < 1e-12 {
                        rho - 1.0
                    } else {
                        reduced_rho_residual(rho, n, p)
                    }
                }
                Err(_) => f64::NAN,
            };
            solve_rho_with(residual, p, guess, RootOptions::default())?
        }
    };
    Ok((current(sol.rho)?, sol))
}

/// Resistive-line reduced model with a warm-start `ρ`. Returns the
/// derivative, the algebraic `I_g` and the solved `ρ`.
pub fn reduced_r_rhs_warm(
    state: &ReducedStateR,
    inputs: &Inputs,
    p: &ParameterSet,
    mode: LimiterMode,
    guess: Option<f64>,
) -> Result<([f64; REDUCED_R_DIM], DqPair, RhoSolution)> {
    let (i_g, sol) = solve_ig_resistive(state.delta, state.e_star, &inputs.v_dq, p, mode, guess)?;
    let s = reduced_pq(state.e_star, &i_g, sol.rho, p)?;
    let (d_delta, d_e_star, _) = dvoc_rates(state.e_star, &s, &inputs.s_star, p)?;
    Ok(([d_delta, d_e_star], i_g, sol))
}

/// Resistive-line reduced model `[δ̇, Ė*]`.
pub fn reduced_r_rhs(
    state: &ReducedStateR,
    inputs: &Inputs,
    p: &ParameterSet,
    mode: LimiterMode,
) -> Result<[f64; REDUCED_R_DIM]> {
    reduced_r_rhs_warm(state, inputs, p, mode, None).map(|(dx, _, _)| dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{dq, E2};
    use crate::full_order::{fast_residual_at_nominal, power_from_capacitor, unsaturated_reference};
    use crate::limiter::solve_rho_reduced;
    use crate::params::LineType;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn inductive() -> ParameterSet {
        ParameterSet::table1_for(LineType::Inductive)
    }

    #[test]
    fn unity_rho_power() {
        let p = inductive();
        let i_g = dq(0.8, -0.3);
        let s = reduced_pq(1.05, &i_g, 1.0, &p).unwrap();
        assert_abs_diff_eq!(s, PowerPair::new(1.05 * 0.8, 1.05 * 0.3), epsilon = 1e-12);
        assert_eq!(reduced_pq(1.05, &DqPair::zeros(), 0.7, &p).unwrap(), PowerPair::zeros());
    }

    #[test]
    fn unity_rho_manifold() {
        let p = inductive();
        let e_star = 1.02;
        let i_g = dq(0.6, 0.25);
        let m = manifold_states(e_star, &i_g, 1.0, &p, LimiterMode::Smooth).unwrap();
        let i_i = E2 * (p.c * e_star) + i_g;
        assert_abs_diff_eq!(m.i_i, i_i, epsilon = 1e-12);
        assert_abs_diff_eq!(m.e, E1 * e_star, epsilon = 1e-12);
        assert_eq!(m.phi, DqPair::zeros());
        assert_abs_diff_eq!(m.gamma, i_i * (p.r_i / p.k_ii), epsilon = 1e-12);
        assert_abs_diff_eq!(p.r_i / p.k_ii, 0.0139 / 0.6944, epsilon = 1e-15);
        assert_abs_diff_eq!(p.r_i / p.k_ii, 0.02002, epsilon = 1e-5);
        // Mode none ignores the supplied ρ.
        let n = manifold_states(e_star, &i_g, 0.4, &p, LimiterMode::None).unwrap();
        assert_eq!(n, m);
        assert!(manifold_states(e_star, &i_g, 0.0, &p, LimiterMode::Smooth).is_err());
    }

    #[test]
    fn no_limiter_grid_current_steady_state() {
        let p = inductive();
        let x = ReducedStateL { delta: 0.1, e_star: 1.0, i_g: DqPair::zeros() };
        let u = Inputs::new(0.0, 0.0, 0.95, 0.05);
        let g1 = gain_matrices(1.0, &p).unwrap();
        // İ_g = 0 at I_g = A₃(1)(e₁E* − T₂(δ)V).
        let i_g = g1.a3 * (E1 * x.e_star - t2_rotation(x.delta) * u.v_dq);
        let dx = reduced_l_rhs(&ReducedStateL { i_g, ..x }, &u, &p, LimiterMode::None).unwrap();
        assert!(dx[2].abs() < 1e-9 && dx[3].abs() < 1e-9, "{dx:?}");
    }

    #[test]
    fn equilibrium_of_slow_rates() {
        let p = inductive();
        let i_g = dq(0.5, 0.1);
        let rho = solve_rho_reduced(p.e_b, &i_g, &p).unwrap().rho;
        let s = reduced_pq(p.e_b, &i_g, rho, &p).unwrap();
        let u = Inputs { s_star: s, v_dq: dq(1.0, 0.0) };
        let x = ReducedStateL { delta: 0.0, e_star: p.e_b, i_g };
        let dx = reduced_l_rhs(&x, &u, &p, LimiterMode::Smooth).unwrap();
        assert_abs_diff_eq!(dx[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dx[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn smooth_matches_none_when_limit_is_huge() {
        let mut p = inductive();
        p.i_max = 1e6;
        let x = ReducedStateL { delta: 0.2, e_star: 0.97, i_g: dq(1.5, -0.7) };
        let u = Inputs::new(1.0, 0.3, 1.0, 0.0);
        let a = reduced_l_rhs(&x, &u, &p, LimiterMode::Smooth).unwrap();
        let b = reduced_l_rhs(&x, &u, &p, LimiterMode::None).unwrap();
        for i in 0..REDUCED_L_DIM {
            assert_abs_diff_eq!(a[i], b[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn resistive_no_limiter_closed_form() {
        let p = ParameterSet::table1_for(LineType::Resistive);
        let (i_g, sol) =
            solve_ig_resistive(0.0, 1.0, &dq(1.0, 0.0), &p, LimiterMode::None, None).unwrap();
        assert_eq!(sol.rho, 1.0);
        assert_abs_diff_eq!(i_g, DqPair::zeros(), epsilon = 1e-12);

        let (i_g, _) =
            solve_ig_resistive(0.3, 1.1, &dq(0.9, 0.1), &p, LimiterMode::None, None).unwrap();
        let g = gain_matrices(1.0, &p).unwrap();
        let expect = g.a3 * E1 * 1.1 + g.a4 * t2_rotation(0.3) * dq(0.9, 0.1);
        assert_abs_diff_eq!(i_g, expect, epsilon = 1e-14);
    }

    #[test]
    fn resistive_solution_satisfies_both_constraints() {
        let p = ParameterSet::table1_for(LineType::Resistive);
        for (delta, v) in [(0.0, 1.0), (0.2, 0.5), (-0.4, 0.3), (0.05, 0.95)] {
            let (i_g, sol) =
                solve_ig_resistive(delta, 1.0, &dq(v, 0.0), &p, LimiterMode::Smooth, None).unwrap();
            let n = reduced_reference_norm(1.0, &i_g, &p);
            assert!(reduced_rho_residual(sol.rho, n, &p).abs() < 1e-10);
            let direct = resistive_grid_current(delta, 1.0, &dq(v, 0.0), sol.rho, &p).unwrap();
            assert!((direct - i_g).norm() < 1e-10);
        }
    }

    #[test]
    fn resistive_equilibrium_and_omega() {
        let p = ParameterSet::table1_for(LineType::Resistive);
        let x = ReducedStateR { delta: 0.05, e_star: p.e_b };
        let v = dq(1.0, 0.0);
        let (i_g, sol) = solve_ig_resistive(x.delta, x.e_star, &v, &p, LimiterMode::Smooth, None).unwrap();
        let s = reduced_pq(x.e_star, &i_g, sol.rho, &p).unwrap();
        let u = Inputs { s_star: s, v_dq: v };
        let dx = reduced_r_rhs(&x, &u, &p, LimiterMode::Smooth).unwrap();
        assert_abs_diff_eq!(dx[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dx[1], 0.0, epsilon = 1e-12);

        let u = Inputs::new(0.4, 0.1, 1.0, 0.0);
        let (dx, i_g, sol) = reduced_r_rhs_warm(&x, &u, &p, LimiterMode::None, None).unwrap();
        let s = reduced_pq(x.e_star, &i_g, sol.rho, &p).unwrap();
        let (dd, _, w) = dvoc_rates(x.e_star, &s, &u.s_star, &p).unwrap();
        assert!(dx[0].is_finite());
        assert_eq!(dx[0], dd);
        assert_abs_diff_eq!(dd, w - p.omega_b, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn unity_manifold_identity(e_star in 0.5f64..1.5, d in -3.0f64..3.0, q in -3.0f64..3.0) {
            let p = inductive();
            let g = gain_matrices(1.0, &p).unwrap();
            let lhs = g.a1 * dq(d, q) + g.a2 * E1 * e_star;
            let rhs = E2 * (p.c * e_star) + dq(d, q);
            prop_assert!((lhs - rhs).amax() < 1e-12);
        }

        #[test]
        fn manifold_power_and_fast_residual(e_star in 0.6f64..1.4, d in -4.0f64..4.0,
                                            q in -4.0f64..4.0, delta in -3.0f64..3.0) {
            let p = inductive();
            let i_g = dq(d, q);
            let sol = solve_rho_reduced_with(e_star, &i_g, &p, None,
                RootOptions { tol: 1e-15, max_iter: 200 }).unwrap();
            let m = manifold_states(e_star, &i_g, sol.rho, &p, LimiterMode::Smooth).unwrap();
            let s_red = reduced_pq(e_star, &i_g, sol.rho, &p).unwrap();
            let s_cap = power_from_capacitor(&m.e, &i_g);
            prop_assert!((s_red - s_cap).amax() < 1e-9);
            prop_assert!(m.i_i.norm() <= p.i_max * (1.0 + 1e-12));

            let full = m.full_state(delta, e_star, i_g);
            // The unsaturated reference on the manifold equals I_i / ρ.
            let r = unsaturated_reference(&full, p.omega_b, &p);
            prop_assert!((r - m.i_i / sol.rho).amax() < 1e-9);
            let res = fast_residual_at_nominal(&full, &p);
            let norm = res.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(norm < 1e-8, "residual {norm:e}");
        }
    }
}
