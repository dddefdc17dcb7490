use std::cell::Cell;

use crate::error::Result;
use crate::full_order::{dvoc_rates, full_outputs, full_rhs, FullState, Inputs, FULL_DIM};
use crate::params::ParameterSet;
use crate::reduced_order::{
    manifold_and_pq, reduced_l_rhs_warm, reduced_r_rhs_warm, rho_for_mode, solve_ig_resistive,
    LimiterMode, ReducedStateL, ReducedStateR, REDUCED_L_DIM, REDUCED_R_DIM,
};

use super::solver::System;

/// Outputs recorded alongside each sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Full-model state, reconstructed on the manifold for reduced models.
    pub columns: [f64; FULL_DIM],
    pub p: f64,
    pub q: f64,
    pub omega: f64,
    pub rho: f64,
}

pub(crate) trait Observe<const N: usize>: System<N> {
    fn observe(&self, x: &[f64; N], u: &Inputs) -> Result<Observation>;
}

pub(crate) struct Full<'a> {
    pub p: &'a ParameterSet,
}

impl System<FULL_DIM> for Full<'_> {
    fn rhs(&self, x: &[f64; FULL_DIM], u: &Inputs) -> Result<[f64; FULL_DIM]> {
        full_rhs(&FullState::from_array(x), u, self.p)
    }
}

impl Observe<FULL_DIM> for Full<'_> {
    fn observe(&self, x: &[f64; FULL_DIM], u: &Inputs) -> Result<Observation> {
        let o = full_outputs(&FullState::from_array(x), u, self.p)?;
        Ok(Observation { columns: *x, p: o.s.x, q: o.s.y, omega: o.omega, rho: o.rho })
    }
}

/// Inductive-line reduced model; the last solved `ρ` seeds the next solve.
pub(crate) struct ReducedL<'a> {
    pub p: &'a ParameterSet,
    pub mode: LimiterMode,
    pub warm: Cell<Option<f64>>,
}

impl System<REDUCED_L_DIM> for ReducedL<'_> {
    fn rhs(&self, x: &[f64; REDUCED_L_DIM], u: &Inputs) -> Result<[f64; REDUCED_L_DIM]> {
        let (dx, sol) = reduced_l_rhs_warm(&ReducedStateL::from_array(x), u, self.p, self.mode, self.warm.get())?;
        self.warm.set(Some(sol.rho));
        Ok(dx)
    }

    fn restart(&self) {
        self.warm.set(None);
    }
}

impl Observe<REDUCED_L_DIM> for ReducedL<'_> {
    fn observe(&self, x: &[f64; REDUCED_L_DIM], u: &Inputs) -> Result<Observation> {
        let s = ReducedStateL::from_array(x);
        let sol = rho_for_mode(s.e_star, &s.i_g, self.p, self.mode, self.warm.get())?;
        self.warm.set(Some(sol.rho));
        let (m, pq) = manifold_and_pq(s.e_star, &s.i_g, sol.rho, self.p, self.mode)?;
        let (_, _, omega) = dvoc_rates(s.e_star, &pq, &u.s_star, self.p)?;
        Ok(Observation {
            columns: m.full_state(s.delta, s.e_star, s.i_g).to_array(),
            p: pq.x,
            q: pq.y,
            omega,
            rho: m.rho,
        })
    }
}

/// Resistive-line reduced model with algebraic grid current.
pub(crate) struct ReducedR<'a> {
    pub p: &'a ParameterSet,
    pub mode: LimiterMode,
    pub warm: Cell<Option<f64>>,
}

impl System<REDUCED_R_DIM> for ReducedR<'_> {
    fn rhs(&self, x: &[f64; REDUCED_R_DIM], u: &Inputs) -> Result<[f64; REDUCED_R_DIM]> {
        let (dx, _, sol) = reduced_r_rhs_warm(&ReducedStateR::from_array(x), u, self.p, self.mode, self.warm.get())?;
        self.warm.set(Some(sol.rho));
        Ok(dx)
    }

    fn restart(&self) {
        self.warm.set(None);
    }
}

impl Observe<REDUCED_R_DIM> for ReducedR<'_> {
    fn observe(&self, x: &[f64; REDUCED_R_DIM], u: &Inputs) -> Result<Observation> {
        let s = ReducedStateR::from_array(x);
        let (i_g, sol) = solve_ig_resistive(s.delta, s.e_star, &u.v_dq, self.p, self.mode, self.warm.get())?;
        self.warm.set(Some(sol.rho));
        let (m, pq) = manifold_and_pq(s.e_star, &i_g, sol.rho, self.p, self.mode)?;
        let (_, _, omega) = dvoc_rates(s.e_star, &pq, &u.s_star, self.p)?;
        Ok(Observation {
            columns: m.full_state(s.delta, s.e_star, i_g).to_array(),
            p: pq.x,
            q: pq.y,
            omega,
            rho: m.rho,
        })
    }
}
