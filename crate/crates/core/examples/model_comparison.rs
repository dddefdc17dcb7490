//! Full against reduced model on the same grid: per-signal RMSE, steady-state
//! agreement and speedup.

use dvoc_reduce::scenario::{compare, Scenario};

fn main() -> dvoc_reduce::Result<()> {
    let names: Vec<String> = std::env::args().skip(1).collect();
    let names = if names.is_empty() { vec!["default-inductive".into(), "default-resistive".into()] } else { names };
    for name in names {
        let (report, _, _) = compare(&Scenario::load(&name)?)?;
        println!("{}", report.to_text());
    }
    Ok(())
}
