use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::full_order::Inputs;

/// Inputs held constant from `t` until the next breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Breakpoint {
    pub t: f64,
    /// `[P*, Q*]`, pu.
    pub s_star: [f64; 2],
    /// Infinite-bus phasor `[V_D, V_Q]`, pu.
    pub v_dq: [f64; 2],
}

impl Breakpoint {
    pub fn inputs(&self) -> Inputs {
        Inputs::new(self.s_star[0], self.s_star[1], self.v_dq[0], self.v_dq[1])
    }
}

/// Piecewise-constant input profile over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSchedule {
    pub breakpoints: Vec<Breakpoint>,
    pub horizon: f64,
}

/// A maximal interval of constant inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub inputs: Inputs,
}

impl InputSchedule {
    pub fn constant(inputs: &Inputs, horizon: f64) -> Self {
        Self {
            breakpoints: vec![Breakpoint {
                t: 0.0,
                s_star: [inputs.s_star.x, inputs.s_star.y],
                v_dq: [inputs.v_dq.x, inputs.v_dq.y],
            }],
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .breakpoints
            .first()
            .ok_or_else(|| Error::Schedule("no breakpoints".into()))?;
        if first.t != 0.0 {
            return Err(Error::Schedule(format!("first breakpoint at t = {}, expected 0", first.t)));
        }
        for b in &self.breakpoints {
            if !(b.t.is_finite() && b.s_star.iter().chain(&b.v_dq).all(|v| v.is_finite())) {
                return Err(Error::Schedule(format!("non-finite entry at t = {}", b.t)));
            }
        }
        if let Some(w) = self.breakpoints.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Error::Schedule(format!(
                "breakpoint times must strictly increase ({} then {})",
                w[0].t, w[1].t
            )));
        }
        let last = self.breakpoints.last().map_or(0.0, |b| b.t);
        if !(self.horizon.is_finite() && self.horizon > 0.0 && self.horizon >= last) {
            return Err(Error::Schedule(format!(
                "horizon {} must be positive and not before the last breakpoint {last}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Inputs in force at time `t` (right-continuous).
    pub fn inputs_at(&self, t: f64) -> Inputs {
        let i = self.breakpoints.partition_point(|b| b.t <= t);
        self.breakpoints[i.saturating_sub(1)].inputs()
    }

    /// Non-empty constant-input intervals covering `[0, horizon]`.
    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::with_capacity(self.breakpoints.len());
        for (i, b) in self.breakpoints.iter().enumerate() {
            let t1 = self.breakpoints.get(i + 1).map_or(self.horizon, |n| n.t).min(self.horizon);
            if t1 > b.t {
                out.push(Segment { t0: b.t, t1, inputs: b.inputs() });
            }
        }
        out
    }

    /// The same profile restricted to `[t0, horizon]` and shifted to start at 0.
    pub fn tail_from(&self, t0: f64) -> Result<Self> {
        if !(t0 >= 0.0 && t0 < self.horizon) {
            return Err(Error::Schedule(format!("split time {t0} outside (0, {})", self.horizon)));
        }
        let first = Breakpoint { t: 0.0, ..self.breakpoints[self.breakpoints.partition_point(|b| b.t <= t0) - 1] };
        let mut breakpoints = vec![first];
        breakpoints.extend(
            self.breakpoints
                .iter()
                .filter(|b| b.t > t0)
                .map(|b| Breakpoint { t: b.t - t0, ..*b }),
        );
        Ok(Self { breakpoints, horizon: self.horizon - t0 })
    }

    /// The same profile truncated at `t1`.
    pub fn head_until(&self, t1: f64) -> Result<Self> {
        if !(t1 > 0.0 && t1 <= self.horizon) {
            return Err(Error::Schedule(format!("split time {t1} outside (0, {}]", self.horizon)));
        }
        Ok(Self {
            breakpoints: self.breakpoints.iter().filter(|b| b.t < t1).cloned().collect(),
            horizon: t1,
        })
    }
}
