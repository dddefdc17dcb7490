//! Eigenvalues and participation factors of the linearized full model, and
//! the slow/fast state partition they imply.

use dvoc_reduce::full_order::Inputs;
use dvoc_reduce::modal::{classify_states, full_model_report, DEFAULT_CUTOFF};
use dvoc_reduce::{LineType, ParameterSet};

fn main() -> dvoc_reduce::Result<()> {
    let u = Inputs::new(2.0, 2.0, 1.0, 0.0);
    for line in [LineType::Inductive, LineType::Resistive] {
        let p = ParameterSet::table1_for(line);
        let (_, report) = full_model_report(&u, &p, DEFAULT_CUTOFF)?;
        println!("== {line} line, S* = [2, 2], cutoff {DEFAULT_CUTOFF} rad/s");
        print!("{}", report.to_table());
        let part = classify_states(&report, DEFAULT_CUTOFF);
        let names = |ix: &[usize]| ix.iter().map(|&i| report.state_names[i].as_str()).collect::<Vec<_>>().join(", ");
        println!("slow: {}\nfast: {}", names(&part.slow), names(&part.fast));
        let g = report.mode_most_participated_by(&[10, 11]);
        println!("integrator mode: {:.3} rad/s\n", report.eigenvalues[g].re);
    }
    Ok(())
}
