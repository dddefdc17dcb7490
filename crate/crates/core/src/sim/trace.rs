use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::wrap_angle;
use crate::full_order::{FULL_DIM, FULL_STATE_NAMES};

use super::solver::{SolverConfig, StepStats};
use super::ModelKind;

/// CSV column order of exported traces.
pub const CSV_HEADER: &str = "t,delta,E_star,Igd,Igq,Iid,Iiq,Ed,Eq,Phid,Phiq,Gammad,Gammaq,P,Q,omega,rho";

/// A recorded trajectory on a uniform time grid.
#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub model: ModelKind,
    pub state_names: Vec<String>,
    pub times: Vec<f64>,
    /// Integrated states, `model.dim()` entries per sample.
    pub states: Vec<Vec<f64>>,
    /// Full-order state per sample; reconstructed fast states for reduced models.
    pub columns: Vec<[f64; FULL_DIM]>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub omega: Vec<f64>,
    pub rho: Vec<f64>,
    /// Seconds spent integrating and reconstructing outputs.
    pub wall_time: f64,
    pub stats: StepStats,
    pub solver: SolverConfig,
    pub omega_b: f64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map_or(&[], |s| s.as_slice())
    }

    pub fn step_count(&self) -> usize {
        self.stats.steps
    }

    /// Index of the sample closest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let dt = self.solver.record_dt;
        ((t / dt).round().max(0.0) as usize).min(self.len().saturating_sub(1))
    }

    pub fn signal(&self, s: Signal) -> Vec<f64> {
        let norm = |i: usize| -> Vec<f64> { self.columns.iter().map(|c| c[i].hypot(c[i + 1])).collect() };
        match s {
            Signal::Column(i) => self.columns.iter().map(|c| c[i]).collect(),
            Signal::P => self.p.clone(),
            Signal::Q => self.q.clone(),
            Signal::Omega => self.omega.clone(),
            Signal::Rho => self.rho.clone(),
            Signal::ENorm => norm(6),
            Signal::IgNorm => norm(2),
            Signal::IiNorm => norm(4),
        }
    }

    /// One CSV row per sample, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 17 * 24 + CSV_HEADER.len() + 1);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for k in 0..self.len() {
            let row = std::iter::once(self.times[k])
                .chain(self.columns[k].iter().copied())
                .chain([self.p[k], self.q[k], self.omega[k], self.rho[k]]);
            for (j, v) in row.enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }

    /// Run metadata for the JSON sidecar.
    pub fn metadata(&self, violations: &[Violation], eps: f64) -> serde_json::Value {
        serde_json::json!({
            "model": self.model,
            "state_names": self.state_names,
            "samples": self.len(),
            "horizon_s": self.times.last().copied().unwrap_or(0.0),
            "solver": self.solver,
            "wall_time_s": self.wall_time,
            "step_count": self.stats.steps,
            "rejected_steps": self.stats.rejected_steps,
            "rhs_evals": self.stats.rhs_evals,
            "final_state": self.final_state(),
            "assumption1": {
                "eps": eps,
                "band_hz": band_hz(self.omega_b, eps),
                "violation_count": violations.len(),
                "violations": violations,
            },
        })
    }

    /// Write `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write_files(&self, dir: &Path, stem: &str, violations: &[Violation], eps: f64) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join(format!("{stem}.csv")), self.to_csv().as_bytes())?;
        let meta = serde_json::to_string_pretty(&self.metadata(violations, eps))?;
        write_atomic(&dir.join(format!("{stem}.json")), meta.as_bytes())
    }
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// A scalar per-sample signal of a [`Trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    /// Column `i` of the full-order state.
    Column(usize),
    P,
    Q,
    Omega,
    Rho,
    ENorm,
    IgNorm,
    IiNorm,
}

impl Signal {
    pub const DELTA: Signal = Signal::Column(0);
    pub const E_STAR: Signal = Signal::Column(1);

    /// Every signal, in CSV order followed by the norms.
    pub fn all() -> Vec<Signal> {
        let mut v: Vec<Signal> = (0..FULL_DIM).map(Signal::Column).collect();
        v.extend([Signal::P, Signal::Q, Signal::Omega, Signal::Rho, Signal::ENorm, Signal::IgNorm, Signal::IiNorm]);
        v
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Signal::Column(i) => FULL_STATE_NAMES.get(*i).copied().unwrap_or("?"),
            Signal::P => "P",
            Signal::Q => "Q",
            Signal::Omega => "omega",
            Signal::Rho => "rho",
            Signal::ENorm => "|E|",
            Signal::IgNorm => "|Ig|",
            Signal::IiNorm => "|Ii|",
        };
        f.write_str(s)
    }
}

impl FromStr for Signal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(i) = FULL_STATE_NAMES.iter().position(|n| *n == s) {
            return Ok(Signal::Column(i));
        }
        Ok(match s {
            "P" => Signal::P,
            "Q" => Signal::Q,
            "omega" => Signal::Omega,
            "rho" => Signal::Rho,
            "|E|" | "E_norm" => Signal::ENorm,
            "|Ig|" | "Ig_norm" => Signal::IgNorm,
            "|Ii|" | "Ii_norm" => Signal::IiNorm,
            _ => return Err(Error::Scenario(format!("unknown signal `{s}`"))),
        })
    }
}

impl Serialize for Signal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Signal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn check_grids(a: &Trace, b: &Trace) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    if let Some(k) = (0..a.len()).find(|&k| (a.times[k] - b.times[k]).abs() > 1e-9) {
        return Err(Error::GridMismatch(format!("sample {k}: t = {} vs {}", a.times[k], b.times[k])));
    }
    Ok(())
}

/// Per-sample difference of a signal; angle differences are wrapped.
pub fn signal_difference(a: &Trace, b: &Trace, s: Signal) -> Result<Vec<f64>> {
    check_grids(a, b)?;
    let (x, y) = (a.signal(s), b.signal(s));
    Ok(x.iter()
        .zip(&y)
        .map(|(u, v)| if s == Signal::DELTA { wrap_angle(u - v) } else { u - v })
        .collect())
}

/// Root-mean-square difference of `s` between two traces on the same grid.
pub fn rmse(a: &Trace, b: &Trace, s: Signal) -> Result<f64> {
    let d = signal_difference(a, b, s)?;
    if d.is_empty() {
        return Ok(0.0);
    }
    Ok((d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt())
}

/// A sample outside the frequency band of the reduced models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub omega: f64,
    /// `|ω − ω_b| / ω_b`.
    pub deviation: f64,
}

/// Frequency band `[f_lo, f_hi]` in Hz allowed by `eps`.
pub fn band_hz(omega_b: f64, eps: f64) -> [f64; 2] {
    let f = omega_b / std::f64::consts::TAU;
    [f * (1.0 - eps), f * (1.0 + eps)]
}

/// Every sample with `|ω − ω_b| / ω_b > eps`.
pub fn assumption1_monitor(trace: &Trace, eps: f64) -> Vec<Violation> {
    trace
        .times
        .iter()
        .zip(&trace.omega)
        .filter_map(|(&t, &omega)| {
            let deviation = ((omega - trace.omega_b) / trace.omega_b).abs();
            (deviation > eps).then_some(Violation { t, omega, deviation })
        })
        .collect()
}
