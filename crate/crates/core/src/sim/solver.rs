use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::wrap_angle;
use crate::full_order::Inputs;

use super::schedule::InputSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "rk4-fixed")]
    Rk4Fixed,
    #[serde(rename = "rk45-adaptive")]
    Rk45Adaptive,
}

/// Integration settings. `dt` is used by [`Method::Rk4Fixed`] only; the
/// tolerances and step bounds by [`Method::Rk45Adaptive`] only. Reduced
/// models take `dt_max_reduced` in place of `dt_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub dt: f64,
    pub rtol: f64,
    pub atol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub dt_max_reduced: f64,
    pub record_dt: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk45Adaptive,
            dt: 5e-5,
            rtol: 1e-6,
            atol: 1e-8,
            dt_min: 1e-12,
            dt_max: 1e-3,
            dt_max_reduced: 5e-3,
            record_dt: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn rk4(dt: f64, record_dt: f64) -> Self {
        Self { method: Method::Rk4Fixed, dt, record_dt, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::SolverConfig(format!("{what} must be positive and finite, got {v}")));
        for (what, v) in [
            ("dt", self.dt),
            ("atol", self.atol),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
            ("dt_max_reduced", self.dt_max_reduced),
            ("record_dt", self.record_dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(what, v);
            }
        }
        if !(self.rtol >= 1e-12 && self.rtol.is_finite()) {
            return Err(Error::SolverConfig(format!("rtol must be at least 1e-12, got {}", self.rtol)));
        }
        if self.dt_min > self.dt_max.min(self.dt_max_reduced) {
            return Err(Error::SolverConfig("dt_min exceeds dt_max".into()));
        }
        Ok(())
    }

    /// The settings used for a reduced model.
    pub fn reduced(&self) -> Self {
        Self { dt_max: self.dt_max_reduced, ..*self }
    }
}

/// An autonomous (per segment) ODE `ẋ = f(x, u)`.
pub(crate) trait System<const N: usize> {
    /// State slot holding an angle, wrapped into `(-π, π]` after each step.
    const ANGLE: Option<usize> = Some(0);

    fn rhs(&self, x: &[f64; N], u: &Inputs) -> Result<[f64; N]>;

    /// Drop any state cached between calls; invoked at each segment start.
    fn restart(&self) {}
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
}

/// States sampled on the uniform record grid.
#[derive(Debug)]
pub(crate) struct Samples<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub stats: StepStats,
}

fn axpy<const N: usize>(x: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *x;
    for (c, k) in terms {
        if *c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

fn wrap<const N: usize, S: System<N>>(x: &mut [f64; N]) {
    if let Some(i) = S::ANGLE {
        x[i] = wrap_angle(x[i]);
    }
}

fn check_finite<const N: usize>(x: &[f64; N], t: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("state").at_time(t))
    }
}

struct Recorder<const N: usize> {
    record_dt: f64,
    next: usize,
    last: usize,
    out: Samples<N>,
}

impl<const N: usize> Recorder<N> {
    fn new(x0: &[f64; N], horizon: f64, record_dt: f64) -> Self {
        let last = (horizon / record_dt + 1e-9).floor() as usize;
        let mut out = Samples {
            times: Vec::with_capacity(last + 1),
            states: Vec::with_capacity(last + 1),
            stats: StepStats::default(),
        };
        out.times.push(0.0);
        out.states.push(*x0);
        Self { record_dt, next: 1, last, out }
    }

    fn time(&self, k: usize) -> f64 {
        k as f64 * self.record_dt
    }

    /// Emit every pending sample in `(t, t + h]` using `interp(s)` for the
    /// interior and `x_end` at the right end.
    fn emit(
        &mut self,
        angle: Option<usize>,
        t: f64,
        h: f64,
        x_end: &[f64; N],
        mut interp: impl FnMut(f64) -> [f64; N],
    ) {
        let t_end = t + h;
        let slack = 1e-9 * self.record_dt;
        while self.next <= self.last && self.time(self.next) <= t_end + slack {
            let tk = self.time(self.next);
            let x = if (tk - t_end).abs() <= slack {
                *x_end
            } else {
                let mut x = interp(((tk - t) / h).clamp(0.0, 1.0));
                if let Some(i) = angle {
                    x[i] = wrap_angle(x[i]);
                }
                x
            };
            self.out.times.push(tk);
            self.out.states.push(x);
            self.next += 1;
        }
    }
}

/// Integrate over the whole schedule, restarting at each breakpoint.
pub(crate) fn integrate_samples<const N: usize, S: System<N>>(
    sys: &S,
    x0: [f64; N],
    schedule: &InputSchedule,
    cfg: &SolverConfig,
) -> Result<Samples<N>> {
    schedule.validate()?;
    cfg.validate()?;
    check_finite(&x0, 0.0)?;
    let mut x = x0;
    wrap::<N, S>(&mut x);
    let mut rec = Recorder::new(&x, schedule.horizon, cfg.record_dt);
    for seg in schedule.segments() {
        sys.restart();
        x = match cfg.method {
            Method::Rk45Adaptive => dopri_segment(sys, x, seg.t0, seg.t1, &seg.inputs, cfg, &mut rec)?,
            Method::Rk4Fixed => rk4_segment(sys, x, seg.t0, seg.t1, &seg.inputs, cfg, &mut rec)?,
        };
    }
    Ok(rec.out)
}

// Dormand–Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    -71.0 / 57600.0,
    0.0,
    71.0 / 16695.0,
    -71.0 / 1920.0,
    17253.0 / 339200.0,
    -22.0 / 525.0,
    1.0 / 40.0,
];
// Continuous extension: y(t + s h) = y + h Σ_j k_j Σ_m P[j][m] s^(m+1).
const P: [[f64; 4]; 7] = [
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
];

fn error_norm<const N: usize>(err: &[f64; N], x: &[f64; N], y: &[f64; N], cfg: &SolverConfig) -> f64 {
    let sum: f64 = (0..N)
        .map(|i| {
            let sc = cfg.atol + cfg.rtol * x[i].abs().max(y[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / N as f64).sqrt()
}

fn initial_step<const N: usize, S: System<N>>(
    sys: &S,
    x: &[f64; N],
    f0: &[f64; N],
    u: &Inputs,
    cfg: &SolverConfig,
    stats: &mut StepStats,
) -> Result<f64> {
    let norm = |v: &[f64; N]| {
        let s: f64 = (0..N).map(|i| (v[i] / (cfg.atol + cfg.rtol * x[i].abs())).powi(2)).sum();
        (s / N as f64).sqrt()
    };
    let d0 = norm(x);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(cfg.dt_max);
    let x1 = axpy(x, h0, &[(1.0, f0)]);
    let f1 = sys.rhs(&x1, u)?;
    stats.rhs_evals += 1;
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(cfg.dt_max))
}

fn dopri_segment<const N: usize, S: System<N>>(
    sys: &S,
    mut x: [f64; N],
    t0: f64,
    t1: f64,
    u: &Inputs,
    cfg: &SolverConfig,
    rec: &mut Recorder<N>,
) -> Result<[f64; N]> {
    // Segment-local time.
    let span = t1 - t0;
    let mut t = 0.0;
    let mut f = sys.rhs(&x, u).map_err(|e| e.at_time(t0))?;
    rec.out.stats.rhs_evals += 1;
    let mut h = initial_step(sys, &x, &f, u, cfg, &mut rec.out.stats).map_err(|e| e.at_time(t0))?;
    let mut rejected_last = false;
    while t < span {
        let remaining = span - t;
        let last = h * 1.01 >= remaining;
        if last {
            h = remaining;
        }
        let stage = |x: &[f64; N], k: &[(f64, &[f64; N])], h: f64| -> Result<[f64; N]> {
            sys.rhs(&axpy(x, h, k), u)
        };
        let k1 = f;
        let attempt = (|| -> Result<_> {
            let k2 = stage(&x, &[(A2[0], &k1)], h)?;
            let k3 = stage(&x, &[(A3[0], &k1), (A3[1], &k2)], h)?;
            let k4 = stage(&x, &[(A4[0], &k1), (A4[1], &k2), (A4[2], &k3)], h)?;
            let k5 = stage(&x, &[(A5[0], &k1), (A5[1], &k2), (A5[2], &k3), (A5[3], &k4)], h)?;
            let k6 = stage(
                &x,
                &[(A6[0], &k1), (A6[1], &k2), (A6[2], &k3), (A6[3], &k4), (A6[4], &k5)],
                h,
            )?;
            let y = axpy(&x, h, &[(B[0], &k1), (B[2], &k3), (B[3], &k4), (B[4], &k5), (B[5], &k6)]);
            let k7 = sys.rhs(&y, u)?;
            Ok((y, [k1, k2, k3, k4, k5, k6, k7]))
        })();
        rec.out.stats.rhs_evals += 6;

        let (y, k, err) = match attempt {
            Ok((y, k)) if y.iter().all(|v| v.is_finite()) => {
                let e: [f64; N] = std::array::from_fn(|i| h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>());
                let err = error_norm(&e, &x, &y, cfg);
                (y, k, err)
            }
            // A failed or non-finite stage is treated as a rejected step.
            Ok(_) | Err(_) if h > cfg.dt_min * 4.0 => {
                rec.out.stats.rejected_steps += 1;
                h *= 0.25;
                rejected_last = true;
                continue;
            }
            Ok(_) => return Err(Error::NonFinite("state").at_time(t0 + t)),
            Err(e) => return Err(e.at_time(t0 + t)),
        };

        if err <= 1.0 {
            let t_new = if last { span } else { t + h };
            let mut y_wrapped = y;
            wrap::<N, S>(&mut y_wrapped);
            let x_old = x;
            rec.emit(S::ANGLE, t0 + t, t_new - t, &y_wrapped, |s| {
                let powers = [s, s * s, s * s * s, s * s * s * s];
                std::array::from_fn(|i| {
                    let mut acc = 0.0;
                    for j in 0..7 {
                        let b: f64 = (0..4).map(|m| P[j][m] * powers[m]).sum();
                        acc += b * k[j][i];
                    }
                    x_old[i] + h * acc
                })
            });
            rec.out.stats.steps += 1;
            x = y_wrapped;
            f = k[6];
            t = t_new;
            let growth = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
            h = (h * if rejected_last { growth.min(1.0) } else { growth }).min(cfg.dt_max);
            rejected_last = false;
        } else {
            rec.out.stats.rejected_steps += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            rejected_last = true;
        }
        if h < cfg.dt_min && t < span {
            return Err(Error::StepUnderflow { t: t0 + t, dt: h });
        }
    }
    Ok(x)
}

fn rk4_segment<const N: usize, S: System<N>>(
    sys: &S,
    mut x: [f64; N],
    t0: f64,
    t1: f64,
    u: &Inputs,
    cfg: &SolverConfig,
    rec: &mut Recorder<N>,
) -> Result<[f64; N]> {
    let n = ((t1 - t0) / cfg.dt - 1e-9).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    let mut f = sys.rhs(&x, u).map_err(|e| e.at_time(t0))?;
    rec.out.stats.rhs_evals += 1;
    for step in 0..n {
        let t = t0 + step as f64 * h;
        let t_new = if step + 1 == n { t1 } else { t0 + (step + 1) as f64 * h };
        let eval = |y: [f64; N]| sys.rhs(&y, u).map_err(|e| e.at_time(t));
        let k1 = f;
        let k2 = eval(axpy(&x, h, &[(0.5, &k1)]))?;
        let k3 = eval(axpy(&x, h, &[(0.5, &k2)]))?;
        let k4 = eval(axpy(&x, h, &[(1.0, &k3)]))?;
        let y = axpy(&x, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]);
        check_finite(&y, t_new)?;
        let f_new = eval(y)?;
        rec.out.stats.rhs_evals += 4;
        let mut y_wrapped = y;
        wrap::<N, S>(&mut y_wrapped);
        let x_old = x;
        rec.emit(S::ANGLE, t, t_new - t, &y_wrapped, |s| {
            // Cubic Hermite between the step endpoints.
            let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
            let h10 = s * (1.0 - s) * (1.0 - s);
            let h01 = s * s * (3.0 - 2.0 * s);
            let h11 = s * s * (s - 1.0);
            std::array::from_fn(|i| h00 * x_old[i] + h10 * h * k1[i] + h01 * y[i] + h11 * h * f_new[i])
        });
        rec.out.stats.steps += 1;
        x = y_wrapped;
        f = f_new;
    }
    Ok(x)
}
