//! Linearization, eigenanalysis and participation factors.
//!
//! The participation of state `i` in mode `j` is
//! `|r_ij| |l_ij| / Σ_i |r_ij| |l_ij|`, with right eigenvectors `r` and left
//! eigenvectors `l` taken as the rows of the inverse right-eigenvector
//! matrix. Each column is then rescaled by its maximum for display and
//! classification. Eigenvalues with real part below `-cutoff` are fast; a
//! state is fast when it participates more in some fast mode than in any
//! slow one.

use std::fmt::Write as _;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::equilibrium::full_equilibrium;
use crate::error::{Error, Result};
use crate::full_order::{full_rhs, FullState, Inputs, FULL_DIM, FULL_STATE_NAMES};
use crate::params::ParameterSet;

/// Default slow/fast cut-off, rad/s.
pub const DEFAULT_CUTOFF: f64 = 260.0;
/// Largest accepted condition number of the eigenvector matrix.
pub const MAX_EIGENVECTOR_CONDITION: f64 = 1e12;
/// Participation differences below this are reported as ties.
pub const TIE_TOLERANCE: f64 = 1e-6;

/// Central-difference Jacobian of `f` at `x0`. Column `i` uses the step
/// `max(step, step·|x0_i|)`.
pub fn jacobian_fd<F>(f: &mut F, x0: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = x0.len();
    let mut jac: Option<DMatrix<f64>> = None;
    let mut x = x0.clone();
    for i in 0..n {
        let h = step.max(step * x0[i].abs());
        x[i] = x0[i] + h;
        let fp = f(&x)?;
        x[i] = x0[i] - h;
        let fm = f(&x)?;
        x[i] = x0[i];
        let col = (fp - fm) / (2.0 * h);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("finite-difference Jacobian"));
        }
        let m = jac.get_or_insert_with(|| DMatrix::zeros(col.len(), n));
        m.set_column(i, &col);
    }
    jac.ok_or(Error::Dimension { expected: 1, got: 0 })
}

/// Default relative step for model Jacobians.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Jacobian of the full model at `state` under constant `inputs`.
pub fn linearize_full(state: &FullState, inputs: &Inputs, p: &ParameterSet, step: f64) -> Result<DMatrix<f64>> {
    let mut f = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let a: [f64; FULL_DIM] = std::array::from_fn(|i| x[i]);
        Ok(DVector::from_row_slice(&full_rhs(&FullState::from_array(&a), inputs, p)?))
    };
    jacobian_fd(&mut f, &DVector::from_row_slice(&state.to_array()), step)
}

/// Locate the full-model equilibrium at `inputs` and analyse its modes.
pub fn full_model_report(inputs: &Inputs, p: &ParameterSet, cutoff: f64) -> Result<(FullState, ModalReport)> {
    let x = full_equilibrium(inputs, p)?;
    let a = linearize_full(&x, inputs, p, DEFAULT_FD_STEP)?;
    let mut report = participation_matrix(&a)?.with_state_names(&FULL_STATE_NAMES);
    report.relabel(cutoff);
    Ok((x, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeLabel {
    Slow,
    Fast,
}

/// Eigenvalues and participation factors of a state matrix.
#[derive(Debug, Clone)]
pub struct ModalReport {
    pub state_names: Vec<String>,
    pub jacobian: DMatrix<f64>,
    pub eigenvalues: Vec<Eigenvalue>,
    /// State × mode; each column sums to one.
    pub pf: DMatrix<f64>,
    /// [`Self::pf`] with each column divided by its maximum.
    pub pf_max_normalized: DMatrix<f64>,
    pub labels: Vec<ModeLabel>,
    pub cutoff: f64,
    pub eigenvector_condition: f64,
}

/// Slow/fast partition of the states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatePartition {
    pub slow: Vec<usize>,
    pub fast: Vec<usize>,
    /// States whose slow and fast participation tie; never silently assigned.
    pub ambiguous: Vec<usize>,
}

/// Eigendecompose `a` and compute participation factors. Modes are labelled
/// against [`DEFAULT_CUTOFF`]; use [`ModalReport::relabel`] to change it.
pub fn participation_matrix(a: &DMatrix<f64>) -> Result<ModalReport> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension { expected: n, got: a.ncols() });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state matrix"));
    }
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let evd = m.eigen().map_err(|_| Error::Eigen)?;
    let right = evd.U().to_owned();
    let values = evd.S();

    let sv = right.singular_values().map_err(|_| Error::Eigen)?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_EIGENVECTOR_CONDITION) {
        return Err(Error::NearDefective(condition));
    }
    let left = right.full_piv_lu().inverse();

    let mut pf = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut total = 0.0;
        for i in 0..n {
            let v = right[(i, j)].norm() * left[(j, i)].norm();
            pf[(i, j)] = v;
            total += v;
        }
        for i in 0..n {
            pf[(i, j)] /= total;
        }
    }
    let mut normalized = pf.clone();
    for mut col in normalized.column_iter_mut() {
        let max = col.max();
        col /= max;
    }
    let eigenvalues: Vec<Eigenvalue> = (0..n)
        .map(|k| {
            let z = values[k];
            Eigenvalue { re: z.re, im: z.im }
        })
        .collect();
    let mut report = ModalReport {
        state_names: (0..n).map(|i| format!("x{i}")).collect(),
        jacobian: a.clone(),
        eigenvalues,
        pf,
        pf_max_normalized: normalized,
        labels: Vec::new(),
        cutoff: DEFAULT_CUTOFF,
        eigenvector_condition: condition,
    };
    report.relabel(DEFAULT_CUTOFF);
    Ok(report)
}

impl ModalReport {
    pub fn with_state_names<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        self.state_names = names.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    /// Re-label modes: fast iff `Re(λ) < -cutoff`.
    pub fn relabel(&mut self, cutoff: f64) {
        self.cutoff = cutoff;
        self.labels = self
            .eigenvalues
            .iter()
            .map(|l| if l.re < -cutoff { ModeLabel::Fast } else { ModeLabel::Slow })
            .collect();
    }

    /// Index of the mode in which state `i` participates most.
    pub fn dominant_mode(&self, state: usize) -> usize {
        self.pf_max_normalized
            .row(state)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, _)| j)
            .unwrap_or(0)
    }

    /// Mode with the largest summed participation of `states`.
    pub fn mode_most_participated_by(&self, states: &[usize]) -> usize {
        (0..self.eigenvalues.len())
            .max_by(|&a, &b| {
                let sa: f64 = states.iter().map(|&i| self.pf[(i, a)]).sum();
                let sb: f64 = states.iter().map(|&i| self.pf[(i, b)]).sum();
                sa.total_cmp(&sb)
            })
            .unwrap_or(0)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().cloned().collect()).collect()
        };
        let partition = classify_states(self, self.cutoff);
        serde_json::json!({
            "state_names": self.state_names,
            "cutoff_rad_per_s": self.cutoff,
            "eigenvalues": self.eigenvalues,
            "labels": self.labels,
            "eigenvector_condition": self.eigenvector_condition,
            "jacobian": rows(&self.jacobian),
            "pf": rows(&self.pf),
            "pf_max_normalized": rows(&self.pf_max_normalized),
            "partition": {
                "slow": partition.slow.iter().map(|&i| &self.state_names[i]).collect::<Vec<_>>(),
                "fast": partition.fast.iter().map(|&i| &self.state_names[i]).collect::<Vec<_>>(),
                "ambiguous": partition.ambiguous.iter().map(|&i| &self.state_names[i]).collect::<Vec<_>>(),
            }
        })
    }

    /// Aligned text grid of column-normalized participation factors, one
    /// row per state and one column per eigenvalue. Fast modes (the region
    /// left of `-cutoff`) are marked with `*`.
    pub fn to_table(&self) -> String {
        let n = self.eigenvalues.len();
        let width = self.state_names.iter().map(|s| s.len()).max().unwrap_or(4).max(8);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "modes marked * have Re(lambda) < -{} rad/s (fast)",
            self.cutoff
        );
        let _ = write!(out, "{:>width$}", "Re");
        for l in &self.eigenvalues {
            let _ = write!(out, " {:>11.3}", l.re);
        }
        let _ = write!(out, "\n{:>width$}", "Im");
        for l in &self.eigenvalues {
            let _ = write!(out, " {:>11.3}", l.im);
        }
        let _ = write!(out, "\n{:>width$}", "");
        for label in &self.labels {
            let _ = write!(out, " {:>11}", if *label == ModeLabel::Fast { "*" } else { "" });
        }
        out.push('\n');
        for (i, name) in self.state_names.iter().enumerate() {
            let _ = write!(out, "{name:>width$}");
            for j in 0..n {
                let _ = write!(out, " {:>11.4}", self.pf_max_normalized[(i, j)]);
            }
            out.push('\n');
        }
        out
    }
}

/// Partition states into slow and fast at `cutoff` rad/s.
pub fn classify_states(report: &ModalReport, cutoff: f64) -> StatePartition {
    let fast_mode: Vec<bool> = report.eigenvalues.iter().map(|l| l.re < -cutoff).collect();
    let mut part = StatePartition {
        slow: Vec::new(),
        fast: Vec::new(),
        ambiguous: Vec::new(),
    };
    for i in 0..report.state_names.len() {
        let (mut slow_max, mut fast_max) = (0.0f64, 0.0f64);
        for (j, &fast) in fast_mode.iter().enumerate() {
            let v = report.pf_max_normalized[(i, j)];
            if fast {
                fast_max = fast_max.max(v);
            } else {
                slow_max = slow_max.max(v);
            }
        }
        if (fast_max - slow_max).abs() <= TIE_TOLERANCE {
            part.ambiguous.push(i);
        } else if fast_max > slow_max {
            part.fast.push(i);
        } else {
            part.slow.push(i);
        }
    }
    part
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn jacobian_of_linear_map() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.5, 0.0, 3.0, 4.0, -7.0, 0.1, 2.0]);
        let mut f = |x: &DVector<f64>| -> Result<DVector<f64>> { Ok(&a * x) };
        let x0 = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let j = jacobian_fd(&mut f, &x0, 1e-6).unwrap();
        assert!((j - &a).amax() < 1e-8);
    }

    #[test]
    fn jacobian_step_halving_is_second_order() {
        let mut f = |x: &DVector<f64>| -> Result<DVector<f64>> {
            Ok(DVector::from_vec(vec![x[0].sin() * x[1], (x[0] * x[1]).exp()]))
        };
        let x0 = DVector::from_vec(vec![0.4, 0.9]);
        let exact = DMatrix::from_row_slice(
            2,
            2,
            &[0.4f64.cos() * 0.9, 0.4f64.sin(), 0.9 * (0.36f64).exp(), 0.4 * (0.36f64).exp()],
        );
        let e1 = (jacobian_fd(&mut f, &x0, 1e-3).unwrap() - &exact).amax();
        let e2 = (jacobian_fd(&mut f, &x0, 5e-4).unwrap() - &exact).amax();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn non_finite_rhs_is_an_error() {
        let mut f = |x: &DVector<f64>| -> Result<DVector<f64>> { Ok(x.map(|v| 1.0 / (v - 0.5))) };
        let x0 = DVector::from_vec(vec![0.5]);
        assert!(jacobian_fd(&mut f, &x0, 1e-300).is_err());
    }

    #[test]
    fn diagonal_matrix_has_identity_participation() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -300.0, -5.0, -1000.0]));
        let r = participation_matrix(&a).unwrap();
        for j in 0..4 {
            let l = r.eigenvalues[j];
            let i = (0..4).find(|&i| a[(i, i)] == l.re).unwrap();
            assert!((r.pf[(i, j)] - 1.0).abs() < 1e-12);
            assert!((r.pf.column(j).sum() - 1.0).abs() < 1e-12);
        }
        let part = classify_states(&r, 260.0);
        assert_eq!(part.slow, vec![0, 2]);
        assert_eq!(part.fast, vec![1, 3]);
        let all_slow = classify_states(&r, f64::INFINITY);
        assert_eq!(all_slow.slow, vec![0, 1, 2, 3]);
    }

    fn random_similar(seed: u64, n: usize) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let d = DVector::from_fn(n, |i, _| -(i as f64 + 1.0) * 3.0);
        let a = &t * DMatrix::from_diagonal(&d) * t.clone().try_inverse().unwrap();
        (a, t, d)
    }

    #[test]
    fn participation_is_scale_invariant() {
        let (a, t, d) = random_similar(7, 5);
        let r1 = participation_matrix(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ts = t.clone();
        for mut c in ts.column_iter_mut() {
            c *= rng.random_range(0.1..10.0) * if rng.random_bool(0.5) { -1.0 } else { 1.0 };
        }
        let a2 = &ts * DMatrix::from_diagonal(&d) * ts.clone().try_inverse().unwrap();
        let r2 = participation_matrix(&a2).unwrap();
        // Match modes by eigenvalue.
        for j in 0..5 {
            let k = (0..5)
                .min_by(|&x, &y| {
                    (r2.eigenvalues[x].re - r1.eigenvalues[j].re)
                        .abs()
                        .total_cmp(&(r2.eigenvalues[y].re - r1.eigenvalues[j].re).abs())
                })
                .unwrap();
            assert!((r1.pf.column(j) - r2.pf.column(k)).amax() < 1e-9);
            assert!((r1.pf.column(j).sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn conjugate_pairs_share_participation() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                -1.0, 20.0, 0.3, 0.0, -20.0, -1.0, 0.0, 0.1, 0.2, 0.0, -50.0, 3.0, 0.0, 0.4, -3.0, -50.0,
            ],
        );
        let r = participation_matrix(&a).unwrap();
        for j in 0..4 {
            let l = r.eigenvalues[j];
            if l.im > 0.0 {
                let k = (0..4)
                    .find(|&k| (r.eigenvalues[k].re - l.re).abs() < 1e-9 && (r.eigenvalues[k].im + l.im).abs() < 1e-9)
                    .unwrap();
                assert!((r.pf.column(j) - r.pf.column(k)).amax() < 1e-9);
            }
            let max = r.pf_max_normalized.column(j).max();
            assert!((max - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn defective_matrix_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[-3.0, 1.0, 0.0, -3.0]);
        assert!(matches!(participation_matrix(&a), Err(Error::NearDefective(_)) | Err(Error::Eigen)));
    }

    #[test]
    fn table_and_json_render() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -300.0]));
        let r = participation_matrix(&a).unwrap().with_state_names(&["slow", "fast"]);
        let t = r.to_table();
        assert!(t.contains("slow") && t.contains('*'));
        let j = r.to_json();
        assert_eq!(j["partition"]["fast"][0], "fast");
    }
}
