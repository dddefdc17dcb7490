//! Root finding: a safeguarded bracketing solver for scalars and a damped
//! Newton iteration for small nonlinear systems.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Converged once `|f(x)| < tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRoot {
    pub x: f64,
    pub residual: f64,
    /// Function evaluations spent, including the starting guess but not the
    /// bracket endpoints.
    pub iterations: usize,
}

/// Failure of [`bracketed_root`], carrying the last bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketFailure {
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

/// Find a root of `f` in `[lo, hi]` by secant steps safeguarded with
/// bisection (Dekker). A `guess` inside the bracket is tried first; if it
/// already satisfies the tolerance the endpoints are never evaluated.
pub fn bracketed_root<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    guess: Option<f64>,
    opts: RootOptions,
) -> std::result::Result<ScalarRoot, BracketFailure>
where
    F: FnMut(f64) -> f64,
{
    let mut iterations = 0;
    let mut start = None;
    if let Some(g) = guess.filter(|g| *g > lo && *g < hi) {
        let fg = f(g);
        iterations += 1;
        if fg.abs() < opts.tol {
            return Ok(ScalarRoot {
                x: g,
                residual: fg,
                iterations,
            });
        }
        start = Some((g, fg));
    }

    let (mut a, mut fa) = (lo, f(lo));
    let (mut b, mut fb) = (hi, f(hi));
    let fail = |a: f64, b: f64, it| BracketFailure {
        lo: a.min(b),
        hi: a.max(b),
        iterations: it,
    };
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(fail(a, b, iterations));
    }
    if fa == 0.0 {
        return Ok(ScalarRoot { x: a, residual: fa, iterations });
    }
    if fb == 0.0 {
        return Ok(ScalarRoot { x: b, residual: fb, iterations });
    }

    // Invariant: f(a) and f(b) have opposite signs, |f(b)| <= |f(a)|, and
    // (c, fc) is the previous value of (b, fb).
    if let Some((g, fg)) = start {
        if fg.signum() == fa.signum() {
            a = g;
            fa = fg;
        } else {
            b = g;
            fb = fg;
        }
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut width = (b - a).abs();
    let mut stalls = 0;

    while iterations < opts.max_iter {
        let mid = 0.5 * (a + b);
        let secant = if fb != fc { b - fb * (b - c) / (fb - fc) } else { mid };
        let between = (secant - b) * (secant - mid) < 0.0 || secant == b;
        let mut x = if between && stalls < 2 { secant } else { mid };
        let resolution = 4.0 * f64::EPSILON * b.abs().max(1.0);
        if (x - b).abs() < resolution {
            x = b + resolution.copysign(mid - b);
        }

        let fx = f(x);
        iterations += 1;
        if !fx.is_finite() {
            return Err(fail(a, b, iterations));
        }
        c = b;
        fc = fb;
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
        } else {
            a = b;
            fa = fb;
            b = x;
            fb = fx;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
        if fb.abs() < opts.tol || fb == 0.0 {
            return Ok(ScalarRoot { x: b, residual: fb, iterations });
        }
        if (a - b).abs() <= 2.0 * resolution {
            let (x, r) = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
            if r.abs() < opts.tol {
                return Ok(ScalarRoot { x, residual: r, iterations });
            }
            return Err(fail(a, b, iterations));
        }
        let new_width = (b - a).abs();
        stalls = if new_width > 0.5 * width { stalls + 1 } else { 0 };
        width = new_width;
    }
    Err(fail(a, b, iterations))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Converged once the residual's infinity norm is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step for the Jacobian.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            fd_step: 1e-7,
        }
    }
}

/// Damped Newton iteration with a finite-difference Jacobian and
/// backtracking on the residual norm.
pub fn newton_solve<F>(mut f: F, x0: DVector<f64>, opts: NewtonOptions) -> Result<DVector<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut x = x0;
    let mut fx = f(&x)?;
    let mut norm = fx.amax();
    for it in 0..opts.max_iter {
        if norm < opts.tol {
            return Ok(x);
        }
        let jac = crate::modal::jacobian_fd(&mut f, &x, opts.fd_step)?;
        let step = jac
            .lu()
            .solve(&(-&fx))
            .ok_or(Error::NewtonFailed { residual: norm, iterations: it })?;
        let mut lambda = 1.0;
        loop {
            let trial = &x + &step * lambda;
            match f(&trial) {
                Ok(ft) if ft.iter().all(|v| v.is_finite()) && ft.amax() < norm * (1.0 - 1e-4 * lambda) => {
                    x = trial;
                    fx = ft;
                    norm = fx.amax();
                    break;
                }
                _ if lambda > 1e-6 => lambda *= 0.5,
                _ => {
                    // Accept the full step anyway once near the rounding floor.
                    if norm < opts.tol * 1e3 {
                        return Ok(x);
                    }
                    return Err(Error::NewtonFailed { residual: norm, iterations: it });
                }
            }
        }
    }
    if norm < opts.tol {
        Ok(x)
    } else {
        Err(Error::NewtonFailed {
            residual: norm,
            iterations: opts.max_iter,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bracketed_root(|x| x * x - 2.0, 0.0, 2.0, None, RootOptions::default()).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-12);
        assert!(r.residual.abs() < 1e-12);
    }

    #[test]
    fn guess_short_circuits() {
        let root = 2f64.sqrt();
        let r = bracketed_root(|x| x * x - 2.0, 0.0, 2.0, Some(root), RootOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.x, root);
    }

    #[test]
    fn no_sign_change_reports_bracket() {
        let e = bracketed_root(|x| x * x + 1.0, -1.0, 2.0, None, RootOptions::default()).unwrap_err();
        assert_eq!((e.lo, e.hi), (-1.0, 2.0));
    }

    #[test]
    fn survives_flat_and_steep_functions() {
        // Secant alone stalls on this; bisection fallback must rescue it.
        let f = |x: f64| (x - 0.3).powi(3) * 1e6;
        let r = bracketed_root(f, -1.0, 1.0, Some(0.9), RootOptions { tol: 1e-12, max_iter: 500 })
            .unwrap();
        assert!((r.x - 0.3).abs() < 1e-5);
        let g = |x: f64| (20.0 * (x - 0.1)).tanh();
        let r = bracketed_root(g, -5.0, 5.0, None, RootOptions::default()).unwrap();
        assert!((r.x - 0.1).abs() < 1e-12);
    }

    #[test]
    fn newton_on_coupled_system() {
        let f = |x: &DVector<f64>| -> Result<DVector<f64>> {
            Ok(DVector::from_vec(vec![
                x[0] * x[0] + x[1] * x[1] - 4.0,
                x[0] - x[1].exp() + 1.0,
            ]))
        };
        let x = newton_solve(f, DVector::from_vec(vec![1.0, 1.0]), NewtonOptions::default()).unwrap();
        let r = f(&x).unwrap();
        assert!(r.amax() < 1e-10);
    }
}
