//! Time integration over piecewise-constant input schedules.

mod models;
pub mod schedule;
pub mod solver;
pub mod trace;

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::full_order::{FULL_DIM, FULL_STATE_NAMES};
use crate::params::{LineType, ParameterSet};
use crate::reduced_order::{LimiterMode, REDUCED_L_DIM, REDUCED_R_DIM};

pub use models::Observation;
pub use schedule::{Breakpoint, InputSchedule, Segment};
pub use solver::{Method, SolverConfig, StepStats};
pub use trace::{
    assumption1_monitor, band_hz, rmse, signal_difference, write_atomic, Signal, Trace, Violation, CSV_HEADER,
};

use models::{Full, Observe, ReducedL, ReducedR};
use solver::integrate_samples;

/// Default Assumption-1 band, `|ω − ω_b| / ω_b ≤ 1/260`.
pub const ASSUMPTION1_EPS: f64 = 1.0 / 260.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Full,
    /// Four states `[δ, E*, I_gd, I_gq]`.
    ReducedL,
    /// Two states `[δ, E*]`.
    ReducedR,
}

impl ModelKind {
    pub fn dim(self) -> usize {
        match self {
            ModelKind::Full => FULL_DIM,
            ModelKind::ReducedL => REDUCED_L_DIM,
            ModelKind::ReducedR => REDUCED_R_DIM,
        }
    }

    pub fn state_names(self) -> &'static [&'static str] {
        &FULL_STATE_NAMES[..self.dim()]
    }

    pub fn is_reduced(self) -> bool {
        self != ModelKind::Full
    }

    /// The reduced model derived for `line`.
    pub fn reduced_for(line: LineType) -> Self {
        match line {
            LineType::Inductive => ModelKind::ReducedL,
            LineType::Resistive => ModelKind::ReducedR,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Full => "full",
            ModelKind::ReducedL => "reduced-l",
            ModelKind::ReducedR => "reduced-r",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ModelKind::Full),
            "reduced-l" => Ok(ModelKind::ReducedL),
            "reduced-r" => Ok(ModelKind::ReducedR),
            _ => Err(Error::Scenario(format!("unknown model `{s}`"))),
        }
    }
}

/// Integrate `model` from `x0` over `schedule`. Reduced models use
/// `cfg.dt_max_reduced` as their step bound; `mode` is ignored by the full
/// model, whose limiter is always the smooth one.
pub fn integrate(
    model: ModelKind,
    x0: &[f64],
    schedule: &InputSchedule,
    cfg: &SolverConfig,
    params: &ParameterSet,
    mode: LimiterMode,
) -> Result<Trace> {
    match model {
        ModelKind::Full => run(&Full { p: params }, model, x0, schedule, cfg, params),
        ModelKind::ReducedL => {
            let sys = ReducedL { p: params, mode, warm: Cell::new(None) };
            run(&sys, model, x0, schedule, &cfg.reduced(), params)
        }
        ModelKind::ReducedR => {
            let sys = ReducedR { p: params, mode, warm: Cell::new(None) };
            run(&sys, model, x0, schedule, &cfg.reduced(), params)
        }
    }
}

fn run<const N: usize, S: Observe<N>>(
    sys: &S,
    model: ModelKind,
    x0: &[f64],
    schedule: &InputSchedule,
    cfg: &SolverConfig,
    params: &ParameterSet,
) -> Result<Trace> {
    let x0: [f64; N] = x0.try_into().map_err(|_| Error::Dimension { expected: N, got: x0.len() })?;
    if !(x0[1] > 0.0) {
        return Err(Error::NonPositiveEStar(x0[1]));
    }
    let start = Instant::now();
    let samples = integrate_samples(sys, x0, schedule, cfg)?;
    let n = samples.times.len();
    let mut trace = Trace {
        model,
        state_names: model.state_names().iter().map(|s| s.to_string()).collect(),
        times: samples.times,
        states: Vec::with_capacity(n),
        columns: Vec::with_capacity(n),
        p: Vec::with_capacity(n),
        q: Vec::with_capacity(n),
        omega: Vec::with_capacity(n),
        rho: Vec::with_capacity(n),
        wall_time: 0.0,
        stats: samples.stats,
        solver: *cfg,
        omega_b: params.omega_b,
    };
    for (t, x) in trace.times.iter().zip(&samples.states) {
        let o = sys.observe(x, &schedule.inputs_at(*t)).map_err(|e| e.at_time(*t))?;
        if !(o.columns.iter().all(|v| v.is_finite()) && [o.p, o.q, o.omega, o.rho].iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("recorded outputs").at_time(*t));
        }
        trace.states.push(x.to_vec());
        trace.columns.push(o.columns);
        trace.p.push(o.p);
        trace.q.push(o.q);
        trace.omega.push(o.omega);
        trace.rho.push(o.rho);
    }
    trace.wall_time = start.elapsed().as_secs_f64();
    Ok(trace)
}
