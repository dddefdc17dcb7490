//! Operating points. At an equilibrium `ω = ω_b`, so the algebraic grid
//! current of the resistive reduction is exact for any line; the 2-state
//! problem in `(δ, E*)` therefore seeds every model, and each is then
//! polished by Newton on its own right-hand side.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::full_order::{full_rhs, FullState, Inputs};
use crate::params::ParameterSet;
use crate::reduced_order::{
    manifold_states, reduced_l_rhs, reduced_r_rhs, solve_ig_resistive, LimiterMode, ReducedStateL, ReducedStateR,
};
use crate::roots::{newton_solve, NewtonOptions};
use crate::sim::{integrate, InputSchedule, ModelKind, SolverConfig};

/// Residual tolerance on the derivative (infinity norm).
pub const EQUILIBRIUM_TOL: f64 = 1e-10;

fn opts() -> NewtonOptions {
    NewtonOptions { tol: EQUILIBRIUM_TOL, max_iter: 60, fd_step: 1e-7 }
}

fn newton<const N: usize>(
    f: impl Fn(&[f64; N]) -> Result<[f64; N]>,
    x0: [f64; N],
) -> Result<[f64; N]> {
    let g = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let a: [f64; N] = std::array::from_fn(|i| x[i]);
        Ok(DVector::from_row_slice(&f(&a)?))
    };
    let x = newton_solve(g, DVector::from_row_slice(&x0), opts())?;
    Ok(std::array::from_fn(|i| x[i]))
}

/// Equilibrium of the 2-state resistive reduced model.
pub fn reduced_r_equilibrium(inputs: &Inputs, p: &ParameterSet, mode: LimiterMode) -> Result<ReducedStateR> {
    let f = |x: &[f64; 2]| reduced_r_rhs(&ReducedStateR::from_array(x), inputs, p, mode);
    let x = match newton(f, [0.0, p.e_b]) {
        Ok(x) => x,
        Err(first) => {
            log::debug!("direct Newton failed ({first}); settling by integration");
            let horizon = 30.0;
            let cfg = SolverConfig { record_dt: horizon, ..SolverConfig::default() };
            let trace = integrate(
                ModelKind::ReducedR,
                &[0.0, p.e_b],
                &InputSchedule::constant(inputs, horizon),
                &cfg,
                p,
                mode,
            )?;
            let end = trace.final_state();
            newton(f, [end[0], end[1]])?
        }
    };
    if !(x[1] > 0.0) {
        return Err(Error::NonPositiveEStar(x[1]));
    }
    Ok(ReducedStateR::from_array(&x))
}

/// Equilibrium of the 4-state inductive reduced model.
pub fn reduced_l_equilibrium(inputs: &Inputs, p: &ParameterSet, mode: LimiterMode) -> Result<ReducedStateL> {
    let s = reduced_r_equilibrium(inputs, p, mode)?;
    let (i_g, _) = solve_ig_resistive(s.delta, s.e_star, &inputs.v_dq, p, mode, None)?;
    let seed = ReducedStateL { delta: s.delta, e_star: s.e_star, i_g }.to_array();
    let f = |x: &[f64; 4]| reduced_l_rhs(&ReducedStateL::from_array(x), inputs, p, mode);
    Ok(ReducedStateL::from_array(&newton(f, seed)?))
}

/// Equilibrium of the full model, seeded from the reduced manifold.
pub fn full_equilibrium(inputs: &Inputs, p: &ParameterSet) -> Result<FullState> {
    let mode = LimiterMode::Smooth;
    let s = reduced_r_equilibrium(inputs, p, mode)?;
    let (i_g, sol) = solve_ig_resistive(s.delta, s.e_star, &inputs.v_dq, p, mode, None)?;
    let seed = manifold_states(s.e_star, &i_g, sol.rho, p, mode)?.full_state(s.delta, s.e_star, i_g);
    let f = |x: &[f64; 12]| full_rhs(&FullState::from_array(x), inputs, p);
    Ok(FullState::from_array(&newton(f, seed.to_array())?))
}

/// Equilibrium state vector of `model`.
pub fn equilibrium(model: ModelKind, inputs: &Inputs, p: &ParameterSet, mode: LimiterMode) -> Result<Vec<f64>> {
    Ok(match model {
        ModelKind::Full => full_equilibrium(inputs, p)?.to_array().to_vec(),
        ModelKind::ReducedL => reduced_l_equilibrium(inputs, p, mode)?.to_array().to_vec(),
        ModelKind::ReducedR => reduced_r_equilibrium(inputs, p, mode)?.to_array().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::LineType;

    fn amax(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn equilibria_are_stationary() {
        for line in [LineType::Inductive, LineType::Resistive] {
            let p = ParameterSet::table1_for(line);
            for u in [Inputs::new(0.0, 0.0, 1.0, 0.0), Inputs::new(0.5, 0.2, 0.98, 0.02), Inputs::new(2.0, 2.0, 1.0, 0.0)] {
                let f = full_equilibrium(&u, &p).unwrap();
                assert!(amax(&full_rhs(&f, &u, &p).unwrap()) < 1e-8, "{line} {u:?}");
                let l = reduced_l_equilibrium(&u, &p, LimiterMode::Smooth).unwrap();
                assert!(amax(&reduced_l_rhs(&l, &u, &p, LimiterMode::Smooth).unwrap()) < 1e-8);
                assert!((l.delta - f.delta).abs() < 1e-6);
                assert!((l.e_star - f.e_star).abs() < 1e-6);
                assert!((l.i_g - f.i_g).amax() < 1e-6);
            }
        }
    }

    #[test]
    fn nominal_inputs_sit_at_nominal_voltage() {
        let p = ParameterSet::table1_for(LineType::Inductive);
        let u = Inputs::new(0.0, 0.0, 1.0, 0.0);
        let r = reduced_r_equilibrium(&u, &p, LimiterMode::None).unwrap();
        assert!(r.delta.abs() < 1e-9 && (r.e_star - 1.0).abs() < 1e-9, "{r:?}");
    }
}
