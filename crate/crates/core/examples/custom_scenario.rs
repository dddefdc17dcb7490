//! Build a scenario in code, round-trip it through JSON and run both models
//! from an explicit initial state.

use dvoc_reduce::reduced_order::LimiterMode;
use dvoc_reduce::scenario::{run, InitialState, ModelChoice, ParamsRef, Scenario};
use dvoc_reduce::sim::{Breakpoint, InputSchedule, SolverConfig};
use dvoc_reduce::LineType;

fn main() -> dvoc_reduce::Result<()> {
    let s = Scenario {
        name: "ramp-and-sag".into(),
        description: Some("hand-built example".into()),
        params: ParamsRef::Named("table1".into()),
        line_type: LineType::Inductive,
        limiter_mode: LimiterMode::Smooth,
        schedule: InputSchedule {
            breakpoints: vec![
                Breakpoint { t: 0.0, s_star: [0.2, 0.0], v_dq: [1.0, 0.0] },
                Breakpoint { t: 1.0, s_star: [1.0, 0.2], v_dq: [1.0, 0.0] },
                Breakpoint { t: 2.0, s_star: [1.0, 0.2], v_dq: [0.7, 0.0] },
            ],
            horizon: 3.0,
        },
        solver: SolverConfig::default(),
        // delta and E*; the remaining states are placed on the manifold.
        initial_state: InitialState::Explicit(vec![0.0, 1.0]),
    };
    let json = s.to_json_string()?;
    println!("{json}");
    let back = Scenario::from_json_str(&json, "inline")?;
    assert_eq!(back, s);

    for choice in [ModelChoice::Full, ModelChoice::Reduced] {
        let out = run(&back, choice)?;
        let t = &out.trace;
        let min_rho = t.rho.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("{}: {} steps, min rho {:.4}, violations {}", t.model, t.step_count(), min_rho, out.violations.len());
    }
    Ok(())
}
