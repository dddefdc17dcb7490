//! Scenario files and the batch operations built on them: single runs,
//! full-versus-reduced comparisons, modal reports and limiter sweeps.

use std::fmt::Write as _;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::equilibrium;
use crate::error::{Error, Result};
use crate::full_order::{FullState, Inputs, FULL_DIM};
use crate::limiter::{rho_bracket, rho_exact_min, rho_smooth};
use crate::modal::{classify_states, full_model_report, ModalReport, StatePartition};
use crate::params::{BaseQuantity, LineType, ParameterSet};
use crate::reduced_order::{manifold_states, rho_for_mode, solve_ig_resistive, LimiterMode};
use crate::sim::{
    assumption1_monitor, integrate, rmse, InputSchedule, ModelKind, Signal, SolverConfig, Trace, Violation,
    ASSUMPTION1_EPS,
};

/// Built-in parameter set name or an inline parameter object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamsRef {
    Named(String),
    Inline(Box<ParameterSet>),
}

/// `"equilibrium"` or an explicit state vector (full-order, or the slow
/// states of the reduced model).
#[derive(Debug, Clone, Default, PartialEq)]
pub enum InitialState {
    #[default]
    Equilibrium,
    Explicit(Vec<f64>),
}

impl Serialize for InitialState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            InitialState::Equilibrium => s.serialize_str("equilibrium"),
            InitialState::Explicit(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for InitialState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            Vector(Vec<f64>),
        }
        match Raw::deserialize(d)? {
            Raw::Word(w) if w == "equilibrium" => Ok(InitialState::Equilibrium),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "initial_state must be \"equilibrium\" or a number array, got \"{w}\""
            ))),
            Raw::Vector(v) => Ok(InitialState::Explicit(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub params: ParamsRef,
    pub line_type: LineType,
    #[serde(default)]
    pub limiter_mode: LimiterMode,
    pub schedule: InputSchedule,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub initial_state: InitialState,
}

/// Names accepted by [`Scenario::bundled`].
pub const BUNDLED: [&str; 3] = ["default-inductive", "default-resistive", "limiter-stress"];

fn bundled_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "default-inductive" => include_str!("../scenarios/default-inductive.json"),
        "default-resistive" => include_str!("../scenarios/default-resistive.json"),
        "limiter-stress" => include_str!("../scenarios/limiter-stress.json"),
        _ => return None,
    })
}

/// Which model of a scenario to run; `Reduced` picks the reduction for the
/// scenario's line type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Full,
    Reduced,
}

impl Scenario {
    pub fn from_json_str(doc: &str, context: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(doc).map_err(|e| Error::parse(context, &e))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let src = bundled_source(name)
            .ok_or_else(|| Error::Scenario(format!("no bundled scenario `{name}` (have {})", BUNDLED.join(", "))))?;
        Self::from_json_str(src, name)
    }

    /// Load a scenario from a path, or a bundled one by name when no such
    /// file exists.
    pub fn load(path_or_name: &str) -> Result<Self> {
        let path = Path::new(path_or_name);
        if !path.exists() && bundled_source(path_or_name).is_some() {
            return Self::bundled(path_or_name);
        }
        let doc = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&doc, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.solver.validate()?;
        self.params()?;
        Ok(())
    }

    /// Resolved parameters. The plain `"table1"` set takes the line row
    /// matching `line_type`.
    pub fn params(&self) -> Result<ParameterSet> {
        let p = match &self.params {
            ParamsRef::Named(n) if n == "table1" => ParameterSet::table1_for(self.line_type),
            ParamsRef::Named(n) => ParameterSet::named(n)?,
            ParamsRef::Inline(p) => **p,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn model(&self, choice: ModelChoice) -> ModelKind {
        match choice {
            ModelChoice::Full => ModelKind::Full,
            ModelChoice::Reduced => ModelKind::reduced_for(self.line_type),
        }
    }

    /// Initial state vector for `model`.
    pub fn initial_state_for(&self, model: ModelKind) -> Result<Vec<f64>> {
        let p = self.params()?;
        let u0 = self.schedule.inputs_at(0.0);
        match &self.initial_state {
            InitialState::Equilibrium => equilibrium(model, &u0, &p, self.limiter_mode),
            InitialState::Explicit(v) => lift_or_project(v, model, &u0, &p, self.limiter_mode),
        }
    }
}

/// Map a full or reduced state vector onto `model`'s state space: slow
/// states are projected, missing fast states are taken from the manifold.
fn lift_or_project(
    v: &[f64],
    model: ModelKind,
    u: &Inputs,
    p: &ParameterSet,
    mode: LimiterMode,
) -> Result<Vec<f64>> {
    let n = model.dim();
    if ![2, 4, FULL_DIM].contains(&v.len()) {
        return Err(Error::Dimension { expected: n, got: v.len() });
    }
    if v.len() >= n {
        return Ok(v[..n].to_vec());
    }
    let (delta, e_star) = (v[0], v[1]);
    let (i_g, rho) = match v.len() {
        4 => {
            let i_g = crate::frames::dq(v[2], v[3]);
            (i_g, rho_for_mode(e_star, &i_g, p, mode, None)?.rho)
        }
        2 => {
            let (i_g, sol) = solve_ig_resistive(delta, e_star, &u.v_dq, p, mode, None)?;
            (i_g, sol.rho)
        }
        got => return Err(Error::Dimension { expected: n, got }),
    };
    let full = manifold_states(e_star, &i_g, rho, p, mode)?.full_state(delta, e_star, i_g);
    Ok(full.to_array()[..n].to_vec())
}

/// A finished run and its Assumption-1 check.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub violations: Vec<Violation>,
    pub params: ParameterSet,
}

pub fn run(s: &Scenario, choice: ModelChoice) -> Result<RunOutput> {
    run_model(s, s.model(choice))
}

pub fn run_model(s: &Scenario, model: ModelKind) -> Result<RunOutput> {
    let params = s.params()?;
    let x0 = s.initial_state_for(model)?;
    let trace = integrate(model, &x0, &s.schedule, &s.solver, &params, s.limiter_mode)?;
    let violations = if model.is_reduced() { assumption1_monitor(&trace, ASSUMPTION1_EPS) } else { Vec::new() };
    Ok(RunOutput { trace, violations, params })
}

/// Invariants every recorded sample must satisfy: `ρ` inside the limiter
/// range and `‖I_i‖ ≤ I_max·(1 + 1e-6)`.
pub fn invariant_breaches(trace: &Trace, p: &ParameterSet) -> Vec<String> {
    let (lo, hi) = rho_bracket(p);
    let mut out = Vec::new();
    for (k, (&t, c)) in trace.times.iter().zip(&trace.columns).enumerate() {
        let rho = trace.rho[k];
        if !(rho >= lo && rho <= hi) {
            out.push(format!("t = {t}: rho = {rho} outside [{lo}, {hi}]"));
        }
        let ii = c[4].hypot(c[5]);
        if ii > p.i_max * (1.0 + 1e-6) {
            out.push(format!("t = {t}: |I_i| = {ii} exceeds I_max = {}", p.i_max));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SignalError {
    pub signal: Signal,
    pub rmse: f64,
}

/// Slow-state and output differences at the end of one schedule segment.
#[derive(Debug, Clone, Serialize)]
pub struct SteadyStateDelta {
    pub t: f64,
    /// Largest difference over `δ`, `E*` and the reduced model's other slow states.
    pub slow_states: f64,
    /// Largest difference over `P`, `Q`, `‖E‖`, `‖I_g‖`.
    pub outputs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub reduced_model: ModelKind,
    pub rmse: Vec<SignalError>,
    pub wall_time_full: f64,
    pub wall_time_reduced: f64,
    pub speedup: f64,
    pub steps_full: usize,
    pub steps_reduced: usize,
    pub violations: Vec<Violation>,
    pub steady_state: Vec<SteadyStateDelta>,
}

impl ComparisonReport {
    pub fn rmse_of(&self, s: Signal) -> Option<f64> {
        self.rmse.iter().find(|e| e.signal == s).map(|e| e.rmse)
    }

    pub fn max_steady_state_delta(&self) -> f64 {
        self.steady_state.iter().map(|d| d.slow_states.max(d.outputs)).fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {} (full vs {})", self.scenario, self.reduced_model);
        let _ = writeln!(out, "{:>8}  {:>12}", "signal", "rmse [pu]");
        for e in &self.rmse {
            let _ = writeln!(out, "{:>8}  {:>12.4e}", e.signal.to_string(), e.rmse);
        }
        let _ = writeln!(
            out,
            "wall time: full {:.4} s ({} steps), reduced {:.4} s ({} steps), speedup {:.1}x",
            self.wall_time_full, self.steps_full, self.wall_time_reduced, self.steps_reduced, self.speedup
        );
        for d in &self.steady_state {
            let _ = writeln!(
                out,
                "steady state at t = {:>6.3} s: slow-state delta {:.3e}, output delta {:.3e}",
                d.t, d.slow_states, d.outputs
            );
        }
        let _ = writeln!(out, "assumption-1 violations (reduced): {}", self.violations.len());
        out
    }
}

/// Signals compared by [`compare`].
pub fn comparison_signals() -> Vec<Signal> {
    vec![
        Signal::P,
        Signal::Q,
        Signal::ENorm,
        Signal::IgNorm,
        Signal::IiNorm,
        Signal::DELTA,
        Signal::E_STAR,
        Signal::Omega,
        Signal::Rho,
    ]
}

/// Build the comparison from two finished traces of the same scenario.
pub fn comparison_report(s: &Scenario, full: &Trace, reduced: &Trace) -> Result<ComparisonReport> {
    let rmse = comparison_signals()
        .into_iter()
        .map(|signal| Ok(SignalError { signal, rmse: rmse(full, reduced, signal)? }))
        .collect::<Result<Vec<_>>>()?;
    let slow: Vec<Signal> = (0..reduced.model.dim()).map(Signal::Column).collect();
    let outputs = [Signal::P, Signal::Q, Signal::ENorm, Signal::IgNorm];
    let mut steady_state = Vec::new();
    for seg in s.schedule.segments() {
        // The last sample before the inputs change.
        let t = if seg.t1 < s.schedule.horizon { seg.t1 - s.solver.record_dt } else { seg.t1 };
        let k = full.index_at(t);
        let delta = |sig: &[Signal]| -> Result<f64> {
            let mut m = 0.0f64;
            for &x in sig {
                let d = crate::sim::signal_difference(full, reduced, x)?;
                m = m.max(d[k].abs());
            }
            Ok(m)
        };
        steady_state.push(SteadyStateDelta { t: full.times[k], slow_states: delta(&slow)?, outputs: delta(&outputs)? });
    }
    Ok(ComparisonReport {
        scenario: s.name.clone(),
        reduced_model: reduced.model,
        rmse,
        wall_time_full: full.wall_time,
        wall_time_reduced: reduced.wall_time,
        speedup: full.wall_time / reduced.wall_time,
        steps_full: full.stats.steps,
        steps_reduced: reduced.stats.steps,
        violations: assumption1_monitor(reduced, ASSUMPTION1_EPS),
        steady_state,
    })
}

/// Run the full model and the matching reduced model and compare them.
/// The two runs are sequential so their wall times are not contended.
pub fn compare(s: &Scenario) -> Result<(ComparisonReport, RunOutput, RunOutput)> {
    let full = run(s, ModelChoice::Full)?;
    let reduced = run(s, ModelChoice::Reduced)?;
    let report = comparison_report(s, &full.trace, &reduced.trace)?;
    Ok((report, full, reduced))
}

/// When to linearize in [`modal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModalPoint {
    T0,
    Time(f64),
}

impl std::str::FromStr for ModalPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "t0" {
            return Ok(ModalPoint::T0);
        }
        s.parse::<f64>()
            .ok()
            .filter(|t| t.is_finite() && *t >= 0.0)
            .map(ModalPoint::Time)
            .ok_or_else(|| Error::Scenario(format!("--at expects `t0` or a time in seconds, got `{s}`")))
    }
}

/// Linearize the full model at the equilibrium for the inputs in force at
/// `at`, and report its modes.
pub fn modal(s: &Scenario, at: ModalPoint, cutoff: f64) -> Result<(FullState, ModalReport)> {
    let t = match at {
        ModalPoint::T0 => 0.0,
        ModalPoint::Time(t) => t,
    };
    full_model_report(&s.schedule.inputs_at(t), &s.params()?, cutoff)
}

/// One operating point of [`modal_sweep`].
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub s_star: [f64; 2],
    pub v_dq: [f64; 2],
    pub slow: Vec<String>,
    pub fast: Vec<String>,
    pub ambiguous: Vec<String>,
    pub gamma_mode_re: f64,
    pub error: Option<String>,
}

/// Classify states at `n` random operating points drawn from `seed`:
/// `P*, Q* ∈ [-1, 2]`, `V_D ∈ [0.9, 1.1]`, `V_Q ∈ [-0.1, 0.1]`.
pub fn modal_sweep(s: &Scenario, n: usize, seed: u64, cutoff: f64) -> Result<Vec<SweepPoint>> {
    let p = s.params()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let s_star = [rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0)];
        let v_dq = [rng.random_range(0.9..1.1), rng.random_range(-0.1..0.1)];
        let u = Inputs::new(s_star[0], s_star[1], v_dq[0], v_dq[1]);
        let point = match full_model_report(&u, &p, cutoff) {
            Ok((_, r)) => {
                let part: StatePartition = classify_states(&r, cutoff);
                let names = |ix: &[usize]| ix.iter().map(|&i| r.state_names[i].clone()).collect();
                let g = r.mode_most_participated_by(&[10, 11]);
                SweepPoint {
                    s_star,
                    v_dq,
                    slow: names(&part.slow),
                    fast: names(&part.fast),
                    ambiguous: names(&part.ambiguous),
                    gamma_mode_re: r.eigenvalues[g].re,
                    error: None,
                }
            }
            Err(e) => SweepPoint {
                s_star,
                v_dq,
                slow: vec![],
                fast: vec![],
                ambiguous: vec![],
                gamma_mode_re: f64::NAN,
                error: Some(e.to_string()),
            },
        };
        out.push(point);
    }
    Ok(out)
}

/// Tabulate `min(1, I_max/x)` against the smooth limiter for each `ε` over
/// `n` log-spaced norms in `[x_min, x_max]`, as CSV.
pub fn limiter_sweep(i_max: f64, eps: &[f64], x_min: f64, x_max: f64, n: usize) -> Result<String> {
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !(positive(i_max) && positive(x_min) && positive(x_max) && x_max > x_min && n >= 2) {
        return Err(Error::Scenario("limiter sweep needs 0 < x_min < x_max, I_max > 0 and n >= 2".into()));
    }
    if eps.is_empty() || !eps.iter().all(|&e| e > 0.0 && e < 1.0) {
        return Err(Error::Scenario("every eps must lie in (0, 1)".into()));
    }
    let mut out = String::from("x,min_exact");
    for e in eps {
        let _ = write!(out, ",rho_eps_{e}");
    }
    out.push('\n');
    let (l0, l1) = (x_min.ln(), x_max.ln());
    for k in 0..n {
        let x = (l0 + (l1 - l0) * k as f64 / (n - 1) as f64).exp();
        let _ = write!(out, "{x:.16e},{:.16e}", rho_exact_min(x, i_max));
        for &e in eps {
            let _ = write!(out, ",{:.16e}", rho_smooth(x, i_max, e));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parameter listing: JSON followed by per-unit and SI values.
pub fn params_show(p: &ParameterSet) -> Result<String> {
    let mut out = serde_json::to_string_pretty(p)?;
    out.push_str("\n\nfield        pu/raw          SI\n");
    let value = serde_json::to_value(p)?;
    if let Some(map) = value.as_object() {
        for (k, v) in map {
            let Some(x) = v.as_f64() else { continue };
            match BaseQuantity::for_field(k) {
                Some(q) => {
                    let _ = writeln!(out, "{k:<12} {x:<15.6} {:.6e}", p.to_si(q, x));
                }
                None => {
                    let _ = writeln!(out, "{k:<12} {x:<15.6} -");
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_and_round_trip() {
        for name in BUNDLED {
            let s = Scenario::bundled(name).unwrap();
            let again = Scenario::from_json_str(&s.to_json_string().unwrap(), "round trip").unwrap();
            assert_eq!(s, again);
        }
        assert!(Scenario::bundled("nope").is_err());
    }

    #[test]
    fn parse_errors_carry_position() {
        let doc = "{\n  \"name\": \"x\",\n  \"params\": \"table1\",\n  \"line_type\": \"sideways\"\n}";
        match Scenario::from_json_str(doc, "test.json") {
            Err(Error::Parse { line, context, .. }) => {
                assert_eq!(line, 4);
                assert_eq!(context, "test.json");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn table1_follows_line_type() {
        let mut s = Scenario::bundled("default-inductive").unwrap();
        let l = s.params().unwrap();
        s.line_type = LineType::Resistive;
        let r = s.params().unwrap();
        assert_eq!(l, ParameterSet::table1_for(LineType::Inductive));
        assert_eq!(r, ParameterSet::table1_for(LineType::Resistive));
    }

    #[test]
    fn initial_state_forms() {
        let mut s = Scenario::bundled("default-resistive").unwrap();
        let full = s.initial_state_for(ModelKind::Full).unwrap();
        assert_eq!(full.len(), FULL_DIM);
        s.initial_state = InitialState::Explicit(full.clone());
        assert_eq!(s.initial_state_for(ModelKind::ReducedR).unwrap(), full[..2].to_vec());
        s.initial_state = InitialState::Explicit(full[..2].to_vec());
        let lifted = s.initial_state_for(ModelKind::Full).unwrap();
        for i in 0..FULL_DIM {
            assert!((lifted[i] - full[i]).abs() < 1e-8, "{i}");
        }
        s.initial_state = InitialState::Explicit(vec![0.0; 3]);
        assert!(s.initial_state_for(ModelKind::Full).is_err());
        let bad = r#"{"name":"x","params":"table1","line_type":"inductive","initial_state":"warm",
            "schedule":{"breakpoints":[{"t":0,"s_star":[0,0],"v_dq":[1,0]}],"horizon":1}}"#;
        assert!(Scenario::from_json_str(bad, "x").is_err());
    }

    #[test]
    fn limiter_sweep_rows() {
        let csv = limiter_sweep(1.2, &[0.1, 0.4], 0.1, 10.0, 101).unwrap();
        let rows: Vec<Vec<f64>> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 101);
        for r in &rows {
            assert!(r[2] <= r[1] && r[3] <= r[1]);
        }
        assert!((rho_smooth(1.2, 1.2, 0.1) - (1.0 - 0.1 * 2f64.ln())).abs() < 1e-15);
        assert!(limiter_sweep(1.2, &[1.5], 0.1, 10.0, 10).is_err());
        assert!(limiter_sweep(1.2, &[0.1], 1.0, 0.5, 10).is_err());
    }

    #[test]
    fn modal_point_parsing() {
        assert_eq!("t0".parse::<ModalPoint>().unwrap(), ModalPoint::T0);
        assert_eq!("2.5".parse::<ModalPoint>().unwrap(), ModalPoint::Time(2.5));
        assert!("-1".parse::<ModalPoint>().is_err());
    }

    #[test]
    fn params_listing_has_si_column() {
        let text = params_show(&ParameterSet::table1()).unwrap();
        assert!(text.contains("L_g") && text.contains("e-"));
    }
}
