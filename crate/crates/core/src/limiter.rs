//! Current-reference limiter algebra.
//!
//! The hard limiter scales the current reference by
//! `min(1, I_max/‖I*‖)`. The models use the smooth log-sum-exp
//! approximation [`rho_smooth`], which stays within `ε ln 2` below the hard
//! limit. After the fast states are eliminated, `ρ` is no longer explicit:
//! it solves the scalar constraint evaluated by [`reduced_rho_residual`],
//! and the fast-state manifold is expressed through the gain matrices
//! `A₁(ρ)…A₄(ρ)` built by [`gain_matrices`].

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::frames::{t2_quarter, DqPair, Mat2, E2};
use crate::params::ParameterSet;
use crate::roots::{bracketed_root, RootOptions};

/// `ln(eᵃ + eᵇ)` without overflow or underflow.
#[inline]
pub fn log_sum_exp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// Hard limiter factor `min(1, I_max/‖I*‖)`, equal to 1 at zero reference.
pub fn rho_exact_min(ref_norm: f64, i_max: f64) -> f64 {
    if ref_norm <= 0.0 {
        1.0
    } else {
        (i_max / ref_norm).min(1.0)
    }
}

/// Smooth limiter factor `-ε ln(exp(-1/ε) + exp(-I_max/(ε‖I*‖)))`.
pub fn rho_smooth(ref_norm: f64, i_max: f64, eps: f64) -> f64 {
    if ref_norm <= 0.0 {
        return 1.0;
    }
    -eps * log_sum_exp2(-1.0 / eps, -i_max / (eps * ref_norm))
}

/// Limiter gains of the reduced-order models at a given `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainMatrices {
    pub a1: Mat2,
    pub a2: Mat2,
    pub a3: Mat2,
    pub a4: Mat2,
    /// `f₁(ρ)…f₅(ρ)`; empty (NaN) when produced by the inverse-form oracle.
    pub f: [f64; 5],
}

/// `C²K_b²(ρ-1)² + ρ²`, the common denominator of `A₁` and `A₂`.
#[inline]
pub fn gain_denominator(rho: f64, p: &ParameterSet) -> f64 {
    let ck = p.c * p.k_b * (rho - 1.0);
    ck * ck + rho * rho
}

/// Closed-form `A₁…A₄` and `f₁…f₅`.
pub fn gain_matrices(rho: f64, p: &ParameterSet) -> Result<GainMatrices> {
    let den = gain_denominator(rho, p);
    if !(den > f64::MIN_POSITIVE) {
        return Err(Error::SingularGain {
            rho,
            what: "A1/A2 denominator vanishes",
        });
    }
    let (c, kb, lg, rg) = (p.c, p.k_b, p.l_g, p.r_g);
    let r1 = rho - 1.0;
    let a1 = Mat2::new(rho, -c * kb * r1, c * kb * r1, rho) / den;
    let a2 = Mat2::new(-c * c * kb * r1, -c * rho, c * rho, -c * c * kb * r1) / den;

    let clg1 = c * lg - 1.0;
    let f1 = clg1 * kb * rho * r1 + rg * rho * rho;
    let f2 = c * rg * kb * rho * r1 - lg * rho * rho;
    let f3 = kb * rho * r1 - rg * den;
    let f4 = lg * rho * rho + c * kb * kb * r1 * r1 * clg1;
    let f5 = clg1 * clg1 * kb * kb * r1 * r1 + (c * rg).powi(2) * kb * kb * r1 * r1
        - 2.0 * kb * rg * rho * r1
        + rho * rho * (rg * rg + lg * lg);
    if !(f5 > 0.0) {
        return Err(Error::SingularGain {
            rho,
            what: "f5 is not positive",
        });
    }
    let a3 = Mat2::new(f1, -f2, f2, f1) / f5;
    let a4 = Mat2::new(f3, -f4, f4, f3) / f5;
    Ok(GainMatrices {
        a1,
        a2,
        a3,
        a4,
        f: [f1, f2, f3, f4, f5],
    })
}

/// `A₁…A₄` computed by explicit 2×2 inversion of the fast-subsystem
/// equations rather than from the closed forms.
pub fn gain_matrices_oracle(rho: f64, p: &ParameterSet) -> Result<GainMatrices> {
    let q = t2_quarter();
    let id = Mat2::identity();
    let m = q * (rho / p.c) - id * (p.k_b * (rho - 1.0));
    let m_inv = m.try_inverse().ok_or(Error::SingularGain {
        rho,
        what: "voltage-loop matrix is singular",
    })?;
    let a1 = m_inv * q / p.c;
    let a2 = m_inv;
    let n = id * (p.r_g / p.l_g) - q * (id - (id - a1 * rho) / (p.l_g * p.c));
    let n_inv = n.try_inverse().ok_or(Error::SingularGain {
        rho,
        what: "grid-current matrix is singular",
    })?;
    let a3 = n_inv * q * a2 * (rho / (p.l_g * p.c));
    let a4 = -n_inv / p.l_g;
    Ok(GainMatrices {
        a1,
        a2,
        a3,
        a4,
        f: [f64::NAN; 5],
    })
}

/// `‖C e₂ E* + I_g‖`, the reference norm the reduced constraint depends on.
#[inline]
pub fn reduced_reference_norm(e_star: f64, i_g: &DqPair, p: &ParameterSet) -> f64 {
    (E2 * (p.c * e_star) + i_g).norm()
}

/// Residual `g(ρ) = ρ + ε ln(exp(-1/ε) + exp(-I_max √den(ρ) / (ε n)))` of the
/// reduced limiter constraint, for reference norm `n`.
#[inline]
pub fn reduced_rho_residual(rho: f64, ref_norm: f64, p: &ParameterSet) -> f64 {
    let eps = p.eps_sat;
    let arg = -p.i_max * gain_denominator(rho, p).sqrt() / (eps * ref_norm);
    rho + eps * log_sum_exp2(-1.0 / eps, arg)
}

/// [`reduced_rho_residual`] with its first and second derivatives in `ρ`.
#[inline]
pub fn reduced_rho_residual_derivs(rho: f64, ref_norm: f64, p: &ParameterSet) -> [f64; 3] {
    let eps = p.eps_sat;
    let ck2 = (p.c * p.k_b).powi(2);
    let den = gain_denominator(rho, p);
    let root = den.sqrt();
    let k = p.i_max / (eps * ref_norm);
    let a = -1.0 / eps;
    let b = -k * root;
    let t = (-(a - b).abs()).exp();
    let lse = a.max(b) + t.ln_1p();
    // d lse / db
    let w = if b > a { 1.0 / (1.0 + t) } else { t / (1.0 + t) };
    let d_den = 2.0 * (ck2 * (rho - 1.0) + rho);
    let dd_den = 2.0 * (ck2 + 1.0);
    let db = -k * d_den / (2.0 * root);
    let ddb = -k * (dd_den / (2.0 * root) - d_den * d_den / (4.0 * den * root));
    [
        rho + eps * lse,
        1.0 + eps * w * db,
        eps * (w * (1.0 - w) * db * db + w * ddb),
    ]
}

/// Newton iteration from a warm start, kept inside [`rho_bracket`]. A step
/// whose second-order residual bound is already far below `tol` is accepted
/// without another evaluation. Returns `None` when it does not converge
/// quickly so the caller can bracket.
fn newton_from_guess(ref_norm: f64, p: &ParameterSet, guess: f64, opts: RootOptions) -> Option<RhoSolution> {
    let (lo, hi) = rho_bracket(p);
    let inside = |x: f64| x > lo && x < hi;
    let done = |rho: f64, residual: f64, iterations| RhoSolution {
        rho,
        residual,
        iterations,
        saturated: rho < 1.0 - p.eps_sat * LN_2,
    };
    let mut x = guess;
    for k in 1..=6 {
        if !inside(x) {
            return None;
        }
        let [g, dg, ddg] = reduced_rho_residual_derivs(x, ref_norm, p);
        if !g.is_finite() {
            return None;
        }
        if g.abs() < opts.tol {
            return Some(done(x, g, k));
        }
        if !(dg.is_finite() && dg > 0.0) {
            return None;
        }
        let step = g / dg;
        let bound = 0.5 * ddg.abs() * step * step;
        x -= step;
        if bound < 1e-3 * opts.tol && inside(x) {
            return Some(done(x, bound, k));
        }
    }
    None
}

/// Solution of the reduced limiter constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSolution {
    pub rho: f64,
    /// `g(ρ)`, or a second-order bound on `|g(ρ)|` when the final Newton
    /// step was not re-evaluated.
    pub residual: f64,
    pub iterations: usize,
    /// `ρ < 1 - ε ln 2`: the reference is past the limiter knee.
    pub saturated: bool,
}

/// Bracket that provably contains the root of [`reduced_rho_residual`].
pub fn rho_bracket(p: &ParameterSet) -> (f64, f64) {
    (-p.eps_sat * LN_2 - 1e-9, 1.0 + 1e-12)
}

/// Solve a scalar limiter constraint `residual(ρ) = 0` on [`rho_bracket`].
pub(crate) fn solve_rho_with<F>(
    residual: F,
    p: &ParameterSet,
    guess: Option<f64>,
    opts: RootOptions,
) -> Result<RhoSolution>
where
    F: FnMut(f64) -> f64,
{
    let (lo, hi) = rho_bracket(p);
    let root = bracketed_root(residual, lo, hi, guess, opts).map_err(|f| Error::RhoSolver {
        lo: f.lo,
        hi: f.hi,
        iterations: f.iterations,
    })?;
    Ok(RhoSolution {
        rho: root.x,
        residual: root.residual,
        iterations: root.iterations,
        saturated: root.x < 1.0 - p.eps_sat * LN_2,
    })
}

/// Solve the reduced-model limiter constraint for `ρ` at `(E*, I_g)`.
pub fn solve_rho_reduced(e_star: f64, i_g: &DqPair, p: &ParameterSet) -> Result<RhoSolution> {
    solve_rho_reduced_with(e_star, i_g, p, None, RootOptions::default())
}

/// [`solve_rho_reduced`] with a warm-start guess and explicit tolerances.
pub fn solve_rho_reduced_with(
    e_star: f64,
    i_g: &DqPair,
    p: &ParameterSet,
    guess: Option<f64>,
    opts: RootOptions,
) -> Result<RhoSolution> {
    if !(e_star > 0.0) {
        return Err(Error::NonPositiveEStar(e_star));
    }
    let n = reduced_reference_norm(e_star, i_g, p);
    if n < 1e-12 {
        return Ok(RhoSolution {
            rho: 1.0,
            residual: 0.0,
            iterations: 0,
            saturated: false,
        });
    }
    if let Some(sol) = guess.and_then(|g| newton_from_guess(n, p, g, opts)) {
        return Ok(sol);
    }
    solve_rho_with(|r| reduced_rho_residual(r, n, p), p, guess, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{dq, t2_rotation};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn table1() -> ParameterSet {
        ParameterSet::table1_for(crate::params::LineType::Inductive)
    }

    #[test]
    fn exact_min_examples() {
        assert_eq!(rho_exact_min(0.6, 1.2), 1.0);
        assert_eq!(rho_exact_min(2.4, 1.2), 0.5);
        assert_eq!(rho_exact_min(1.2, 1.2), 1.0);
        assert_eq!(rho_exact_min(0.0, 1.2), 1.0);
    }

    #[test]
    fn smooth_examples() {
        // At x = I_max both exponentials are exp(-10): ρ = 1 - ε ln 2.
        assert_abs_diff_eq!(rho_smooth(1.2, 1.2, 0.1), 1.0 - 0.1 * LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_smooth(1.2, 1.2, 0.1), 0.930685, epsilon = 1e-6);
        assert_eq!(rho_smooth(0.0, 1.2, 0.1), 1.0);
        assert_abs_diff_eq!(rho_smooth(1e-9, 1.2, 0.1), 1.0, epsilon = 1e-15);
        // Direct evaluation: -0.1 ln(e^-10 + e^-5).
        let direct = -0.1 * ((-10f64).exp() + (-5f64).exp()).ln();
        let v = rho_smooth(2.4, 1.2, 0.1);
        assert_abs_diff_eq!(v, direct, epsilon = 1e-15);
        assert!(v >= 0.5 - 0.1 * LN_2 && v <= 0.5);
    }

    #[test]
    fn smooth_survives_small_eps() {
        let v = rho_smooth(1.2, 1.2, 0.001);
        assert_abs_diff_eq!(v, 1.0 - 0.001 * LN_2, epsilon = 1e-14);
        assert!(rho_smooth(2.4, 1.2, 0.001).is_finite());
    }

    #[test]
    fn gains_at_unity() {
        let p = table1();
        let g = gain_matrices(1.0, &p).unwrap();
        assert_abs_diff_eq!(g.a1, Mat2::identity(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.a2, t2_rotation(-FRAC_PI_2) * p.c, epsilon = 1e-15);
        let a3 = Mat2::new(p.r_g, p.l_g, -p.l_g, p.r_g) / (p.r_g.powi(2) + p.l_g.powi(2));
        assert_abs_diff_eq!(g.a3, a3, epsilon = 1e-12);
        assert_abs_diff_eq!(g.a4, -a3, epsilon = 1e-12);
        let o = gain_matrices_oracle(1.0, &p).unwrap();
        for (x, y) in [(g.a1, o.a1), (g.a2, o.a2), (g.a3, o.a3), (g.a4, o.a4)] {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn gains_match_oracle_at_sample_points() {
        for line in [crate::params::LineType::Inductive, crate::params::LineType::Resistive] {
            let p = ParameterSet::table1_for(line);
            for rho in [0.5, 0.7, 0.99] {
                let g = gain_matrices(rho, &p).unwrap();
                let o = gain_matrices_oracle(rho, &p).unwrap();
                for (x, y) in [(g.a1, o.a1), (g.a2, o.a2), (g.a3, o.a3), (g.a4, o.a4)] {
                    assert_abs_diff_eq!(x, y, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn unsaturated_rho_is_one() {
        let p = table1();
        let s = solve_rho_reduced(1.0, &dq(0.3, -0.1), &p).unwrap();
        assert_abs_diff_eq!(s.rho, 1.0, epsilon = 1e-6);
        assert!(!s.saturated);
        let d = solve_rho_reduced(1.0, &dq(0.0, -p.c), &p).unwrap();
        assert_eq!(d.rho, 1.0);
        assert!(matches!(
            solve_rho_reduced(0.0, &dq(0.0, 0.0), &p),
            Err(Error::NonPositiveEStar(_))
        ));
    }

    #[test]
    fn saturated_rho_caps_manifold_current() {
        let p = table1();
        // ‖C e₂ E* + I_g‖ equals the unsaturated reference norm at ρ = 1.
        let target = 2.0 * p.i_max;
        let i_g = dq(target * 0.6, target * 0.8) - E2 * p.c;
        let s = solve_rho_reduced(1.0, &i_g, &p).unwrap();
        assert!(s.saturated);
        assert!(s.residual.abs() < 1e-12);
        let g = gain_matrices(s.rho, &p).unwrap();
        let i_star = g.a1 * i_g + g.a2 * crate::frames::E1;
        assert!(s.rho * i_star.norm() <= p.i_max);
        // The converged value is also the smooth limiter of ‖I*(ρ)‖.
        assert_abs_diff_eq!(s.rho, rho_smooth(i_star.norm(), p.i_max, p.eps_sat), epsilon = 1e-12);
    }

    #[test]
    fn resolve_is_idempotent() {
        let p = table1();
        let i_g = dq(1.9, 1.3);
        let s = solve_rho_reduced(1.05, &i_g, &p).unwrap();
        let again = solve_rho_reduced_with(1.05, &i_g, &p, Some(s.rho), RootOptions::default()).unwrap();
        assert!(again.iterations <= 2);
        assert_eq!(again.rho, s.rho);
    }

    #[test]
    fn residual_derivatives_match_differences() {
        let p = table1();
        let h = 1e-5;
        for n in [0.3, 1.0, 1.25, 2.0, 10.0] {
            for rho in [0.05, 0.3, 0.7, 0.95, 1.0] {
                let g = |r| reduced_rho_residual(r, n, &p);
                let [g0, dg, ddg] = reduced_rho_residual_derivs(rho, n, &p);
                assert_abs_diff_eq!(g0, g(rho), epsilon = 1e-15);
                let fd1 = (g(rho + h) - g(rho - h)) / (2.0 * h);
                let fd2 = (g(rho + h) - 2.0 * g(rho) + g(rho - h)) / (h * h);
                assert!((dg - fd1).abs() < 1e-6 * fd1.abs().max(1.0), "n={n} rho={rho}: {dg} vs {fd1}");
                assert!((ddg - fd2).abs() < 1e-3 * fd2.abs().max(1.0), "n={n} rho={rho}: {ddg} vs {fd2}");
            }
        }
    }

    #[test]
    fn warm_start_agrees_with_cold_solve() {
        let p = table1();
        let i_g = DqPair::new(1.1, -0.7);
        let cold = solve_rho_reduced(1.0, &i_g, &p).unwrap();
        for guess in [0.01, 0.2, cold.rho + 1e-3, 0.99, 1.0] {
            let warm = solve_rho_reduced_with(1.0, &i_g, &p, Some(guess), RootOptions::default()).unwrap();
            assert!((warm.rho - cold.rho).abs() < 1e-11, "{guess}: {warm:?} vs {cold:?}");
        }
    }

    proptest! {
        #[test]
        fn smooth_bound_and_cap(x in 1e-4f64..1e3, eps in 0.01f64..0.5) {
            let exact = rho_exact_min(x, 1.2);
            let smooth = rho_smooth(x, 1.2, eps);
            let gap = exact - smooth;
            prop_assert!(gap >= -1e-15 && gap <= eps * LN_2 + 1e-15);
            prop_assert!(smooth * x <= 1.2 * (1.0 + 1e-15));
        }

        #[test]
        fn smooth_is_decreasing(x in 1e-3f64..1e2, dx in 1e-3f64..1.0) {
            prop_assert!(rho_smooth(x + dx, 1.2, 0.1) < rho_smooth(x, 1.2, 0.1));
        }

        #[test]
        fn reduced_solution_is_valid(e_star in 0.5f64..1.5, d in -4.0f64..4.0, q in -4.0f64..4.0) {
            let p = table1();
            let s = solve_rho_reduced(e_star, &dq(d, q), &p).unwrap();
            prop_assert!(s.rho <= 1.0 && s.rho >= -p.eps_sat * LN_2);
            let n = reduced_reference_norm(e_star, &dq(d, q), &p);
            if n >= 1e-12 {
                prop_assert!(reduced_rho_residual(s.rho, n, &p).abs() < 1e-12);
            }
        }
    }
}
