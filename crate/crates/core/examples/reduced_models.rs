//! The two reduced models: equilibria, manifold reconstruction of the fast
//! states, and a reduced-model run.

use dvoc_reduce::equilibrium::{full_equilibrium, reduced_l_equilibrium, reduced_r_equilibrium};
use dvoc_reduce::full_order::{fast_residual_at_nominal, Inputs};
use dvoc_reduce::reduced_order::{manifold_states, solve_ig_resistive, LimiterMode};
use dvoc_reduce::scenario::{run, ModelChoice, Scenario};
use dvoc_reduce::{LineType, ParameterSet};

fn main() -> dvoc_reduce::Result<()> {
    let u = Inputs::new(0.8, 0.3, 1.0, 0.0);
    let mode = LimiterMode::Smooth;

    let p = ParameterSet::table1_for(LineType::Inductive);
    let l = reduced_l_equilibrium(&u, &p, mode)?;
    let f = full_equilibrium(&u, &p)?;
    println!("inductive: reduced (delta, E*, Ig) = ({:.6}, {:.6}, {:.6?})", l.delta, l.e_star, l.i_g.as_slice());
    println!("           full    (delta, E*, Ig) = ({:.6}, {:.6}, {:.6?})", f.delta, f.e_star, f.i_g.as_slice());

    let p = ParameterSet::table1_for(LineType::Resistive);
    let r = reduced_r_equilibrium(&u, &p, mode)?;
    let (i_g, sol) = solve_ig_resistive(r.delta, r.e_star, &u.v_dq, &p, mode, None)?;
    let m = manifold_states(r.e_star, &i_g, sol.rho, &p, mode)?;
    let x = m.full_state(r.delta, r.e_star, i_g);
    let res = fast_residual_at_nominal(&x, &p);
    println!("resistive: delta = {:.6}, E* = {:.6}, rho = {:.6}", r.delta, r.e_star, sol.rho);
    println!("           manifold Ii = {:.6?}, fast residual max = {:.1e}", m.i_i.as_slice(),
        res.iter().fold(0.0f64, |a, v| a.max(v.abs())));

    for name in ["default-inductive", "default-resistive"] {
        let s = Scenario::bundled(name)?;
        let out = run(&s, ModelChoice::Reduced)?;
        let t = &out.trace;
        println!("{name}: {} with {} states, {} steps, final {:.6?}", t.model, t.state_names.len(), t.step_count(), t.final_state());
    }
    Ok(())
}
