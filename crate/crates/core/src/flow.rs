//! Characteristic-flow integration.
//!
//! Integrates `dX/ds = F(X)` with an embedded Dormand-Prince 4(5) pair and
//! accumulates the path integrals of the absorption `h` and the divergence
//! `div F` inside the same pass (as augmented state components), so the
//! integrals every spectral formula consumes share the step error control.
//! Domain membership is checked at every accepted step endpoint; on a sign
//! change the crossing time is refined by bisection, each probe re-running
//! the integrator from the last state known to be inside.

use std::io::Write;

use crate::linalg::norm;
use crate::problem::Problem;

/// Integration parameters. Defaults favor accuracy over speed: spectral
/// estimates downstream subtract time averages at 1e-3 scales.
#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Bisection tolerance for the boundary-crossing time.
    pub t_tol: f64,
    /// Cap on the step size; lower it to mitigate grazing re-entry within
    /// one step, which this engine does not otherwise detect.
    pub h_max: f64,
    pub max_steps: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            rtol: 1e-9,
            atol: 1e-12,
            t_tol: 1e-9,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum FlowError {
    #[error("starting point lies outside the domain")]
    OutsideDomain,
    #[error("trajectory left the domain at |t| = {t_exit}")]
    LeftDomain { t_exit: f64 },
    #[error("integration step failure at |t| = {at}: {reason}")]
    StepFailure { at: f64, reason: String },
}

/// Terminal condition of a flow integration.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowStatus {
    /// Reached the requested time inside the domain.
    Ok,
    /// Domain exit detected; `t_exit` is the unsigned crossing time along
    /// the requested direction, refined to within `t_tol`.
    LeftDomain { t_exit: f64 },
    /// Step-size underflow or a non-finite state.
    StepFailure { at: f64, reason: String },
}

/// Endpoint and accumulated path integrals of one flow integration.
///
/// The integrals are `int_0^{|t|} g(Phi(x, sigma * s)) ds` with `sigma`
/// the sign of the requested time, for `g` in `{nu, div F, Sigma_p}`.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub endpoint: Vec<f64>,
    /// Unsigned time actually covered (equals `|t|` when status is `Ok`).
    pub t_reached: f64,
    pub int_nu: f64,
    pub int_div: f64,
    pub int_sigma_p: f64,
    pub steps: u64,
    pub status: FlowStatus,
}

impl FlowResult {
    pub fn is_ok(&self) -> bool {
        matches!(self.status, FlowStatus::Ok)
    }
}

/// Exit time in one direction: exact (boundary reached) or censored at
/// the integration horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau {
    Exact(f64),
    CensoredAt(f64),
}

impl Tau {
    pub fn is_censored(&self) -> bool {
        matches!(self, Tau::CensoredAt(_))
    }

    /// Finite value when exact.
    pub fn exact(&self) -> Option<f64> {
        match self {
            Tau::Exact(v) => Some(*v),
            Tau::CensoredAt(_) => None,
        }
    }

    /// Treat a censored exit as infinite (the summary-level convention).
    pub fn value_or_inf(&self) -> f64 {
        match self {
            Tau::Exact(v) => *v,
            Tau::CensoredAt(_) => f64::INFINITY,
        }
    }
}

/// Forward and backward stay times of a point, with the horizon used.
#[derive(Debug, Clone, Copy)]
pub struct ExitTimeResult {
    pub tau_minus: Tau,
    pub tau_plus: Tau,
    pub horizon: f64,
}

impl ExitTimeResult {
    /// Length of the maximal interval, infinite when either side is
    /// censored.
    pub fn tau_total(&self) -> f64 {
        self.tau_minus.value_or_inf() + self.tau_plus.value_or_inf()
    }
}

// Dormand-Prince 4(5) tableau. The characteristic system is autonomous,
// so the stage abscissae are never needed.
const STAGES: usize = 7;
const A: [[f64; 6]; STAGES] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; STAGES] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; STAGES] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Augmented integration state: position plus running integrals of the
/// absorption and the divergence, from which all three reported path
/// integrals are linear combinations.
#[derive(Debug, Clone)]
struct AugState {
    x: Vec<f64>,
    int_h: f64,
    int_div: f64,
    /// Unsigned elapsed time along the requested direction.
    s: f64,
}

struct Stepper<'a> {
    problem: &'a Problem,
    sign: f64,
    cfg: &'a FlowConfig,
    dim: usize,
    stages: Vec<Vec<f64>>,
    scratch: Vec<f64>,
    steps_taken: u64,
}

enum StepOutcome {
    Accepted { next: AugState, h_next: f64 },
    Rejected { h_next: f64 },
}

impl<'a> Stepper<'a> {
    fn new(problem: &'a Problem, sign: f64, cfg: &'a FlowConfig) -> Self {
        // two augmented components beyond the position
        let dim = problem.dimension() + 2;
        Stepper {
            problem,
            sign,
            cfg,
            dim,
            stages: vec![vec![0.0; dim]; STAGES],
            scratch: vec![0.0; dim],
            steps_taken: 0,
        }
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let n = self.problem.dimension();
        self.problem.field().eval_into(&y[..n], &mut out[..n]);
        for v in out[..n].iter_mut() {
            *v *= self.sign;
        }
        out[n] = self.problem.h(&y[..n]);
        out[n + 1] = self.problem.field().divergence(&y[..n]);
    }

    fn pack(&self, state: &AugState, out: &mut [f64]) {
        let n = self.problem.dimension();
        out[..n].copy_from_slice(&state.x);
        out[n] = state.int_h;
        out[n + 1] = state.int_div;
    }

    fn unpack(&self, y: &[f64], s: f64) -> AugState {
        let n = self.problem.dimension();
        AugState {
            x: y[..n].to_vec(),
            int_h: y[n],
            int_div: y[n + 1],
            s,
        }
    }

    fn initial_step(&self, state: &AugState, remaining: f64) -> f64 {
        let n = self.problem.dimension();
        let mut f = vec![0.0; self.dim];
        let mut y = vec![0.0; self.dim];
        self.pack(state, &mut y);
        self.rhs(&y, &mut f);
        let speed = norm(&f[..n]);
        let scale = 1.0 + norm(&state.x);
        let h = 0.01 * scale / (1.0 + speed);
        h.min(remaining).min(self.cfg.h_max).max(1e-10)
    }

    /// One embedded step of size `h` from `state`. Does not check domain
    /// membership.
    fn step(&mut self, state: &AugState, h: f64) -> StepOutcome {
        let dim = self.dim;
        let mut y0 = vec![0.0; dim];
        self.pack(state, &mut y0);

        {
            let (first, _) = self.stages.split_at_mut(1);
            let mut out = std::mem::take(&mut first[0]);
            self.rhs(&y0, &mut out);
            self.stages[0] = out;
        }
        for (i, row) in A.iter().enumerate().take(STAGES).skip(1) {
            for (j, slot) in self.scratch.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, stage) in self.stages.iter().enumerate().take(i) {
                    acc += row[k] * stage[j];
                }
                *slot = y0[j] + h * acc;
            }
            let mut out = std::mem::take(&mut self.stages[i]);
            let probe = self.scratch.clone();
            self.rhs(&probe, &mut out);
            self.stages[i] = out;
        }

        let mut y5 = vec![0.0; dim];
        let mut err_norm = 0.0_f64;
        for j in 0..dim {
            let mut sum5 = 0.0;
            let mut sum4 = 0.0;
            for (k, stage) in self.stages.iter().enumerate() {
                sum5 += B5[k] * stage[j];
                sum4 += B4[k] * stage[j];
            }
            y5[j] = y0[j] + h * sum5;
            let scale = self.cfg.atol + self.cfg.rtol * y0[j].abs().max(y5[j].abs());
            err_norm = err_norm.max((h * (sum5 - sum4)).abs() / scale);
        }

        self.steps_taken += 1;
        let factor = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        let h_next = (h * factor).min(self.cfg.h_max);
        if err_norm <= 1.0 && y5.iter().all(|v| v.is_finite()) {
            StepOutcome::Accepted {
                next: self.unpack(&y5, state.s + h),
                h_next,
            }
        } else {
            StepOutcome::Rejected { h_next }
        }
    }

    /// Advance a copy of `state` by `dt >= 0` without domain checks.
    fn advance_plain(&mut self, state: &AugState, dt: f64) -> Result<AugState, FlowError> {
        let mut current = state.clone();
        if dt <= 0.0 {
            return Ok(current);
        }
        let target = state.s + dt;
        let mut h = self.initial_step(&current, dt);
        loop {
            let remaining = target - current.s;
            if remaining <= 1e-14 * (1.0 + target.abs()) {
                current.s = target;
                return Ok(current);
            }
            h = h.min(remaining);
            if h < 1e-14 * (1.0 + current.s) {
                return Err(FlowError::StepFailure {
                    at: current.s,
                    reason: "step size underflow".into(),
                });
            }
            if self.steps_taken > self.cfg.max_steps {
                return Err(FlowError::StepFailure {
                    at: current.s,
                    reason: "maximum step count exceeded".into(),
                });
            }
            match self.step(&current, h) {
                StepOutcome::Accepted { next, h_next } => {
                    current = next;
                    h = h_next;
                }
                StepOutcome::Rejected { h_next } => {
                    h = h_next;
                }
            }
        }
    }

    fn inside(&self, state: &AugState) -> bool {
        self.problem.domain().contains(&state.x)
    }

    /// Bisect the crossing time inside `(from.s, from.s + h_out]`, where
    /// the state `h_out` ahead of `from` is known to be outside. Probes
    /// restart the integrator from the latest inside state, so the
    /// located time tracks the true trajectory to integration accuracy.
    fn bisect_exit(&mut self, from: &AugState, h_out: f64) -> Result<(AugState, f64), FlowError> {
        let mut inside_state = from.clone();
        let mut lo = 0.0_f64;
        let mut hi = h_out;
        while hi - lo > self.cfg.t_tol {
            let mid = 0.5 * (lo + hi);
            let probe = self.advance_plain(&inside_state, mid - lo)?;
            if self.inside(&probe) {
                inside_state = probe;
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let crossing = from.s + 0.5 * (lo + hi);
        Ok((inside_state, crossing))
    }
}

fn result_from(problem: &Problem, state: AugState, steps: u64, status: FlowStatus) -> FlowResult {
    let int_nu = state.int_h + state.int_div;
    let int_sigma_p = state.int_h + problem.conjugate_weight() * state.int_div;
    FlowResult {
        endpoint: state.x,
        t_reached: state.s,
        int_nu,
        int_div: state.int_div,
        int_sigma_p,
        steps,
        status,
    }
}

/// Integrate the characteristic flow from `x` to signed time `t`,
/// accumulating the path integrals of `nu`, `div F` and `Sigma_p` along
/// the way. Requires `x` in the domain; a domain exit en route yields
/// `FlowStatus::LeftDomain` with the crossing time refined to `t_tol`.
pub fn advance_flow(
    problem: &Problem,
    x: &[f64],
    t: f64,
    cfg: &FlowConfig,
) -> Result<FlowResult, FlowError> {
    if !problem.domain().contains(x) {
        return Err(FlowError::OutsideDomain);
    }
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    let total = t.abs();
    let mut stepper = Stepper::new(problem, sign, cfg);
    let mut current = AugState {
        x: x.to_vec(),
        int_h: 0.0,
        int_div: 0.0,
        s: 0.0,
    };
    if total == 0.0 {
        return Ok(result_from(problem, current, 0, FlowStatus::Ok));
    }
    let mut h = stepper.initial_step(&current, total);
    loop {
        let remaining = total - current.s;
        if remaining <= 1e-14 * (1.0 + total) {
            current.s = total;
            let steps = stepper.steps_taken;
            return Ok(result_from(problem, current, steps, FlowStatus::Ok));
        }
        h = h.min(remaining);
        if h < 1e-14 * (1.0 + current.s) {
            let steps = stepper.steps_taken;
            let at = current.s;
            return Ok(result_from(
                problem,
                current,
                steps,
                FlowStatus::StepFailure {
                    at,
                    reason: "step size underflow".into(),
                },
            ));
        }
        if stepper.steps_taken > cfg.max_steps {
            let steps = stepper.steps_taken;
            let at = current.s;
            return Ok(result_from(
                problem,
                current,
                steps,
                FlowStatus::StepFailure {
                    at,
                    reason: "maximum step count exceeded".into(),
                },
            ));
        }
        match stepper.step(&current, h) {
            StepOutcome::Accepted { next, h_next } => {
                if stepper.inside(&next) {
                    current = next;
                    h = h_next;
                } else {
                    let (inside_state, crossing) = match stepper.bisect_exit(&current, h) {
                        Ok(pair) => pair,
                        Err(FlowError::StepFailure { at, reason }) => {
                            let steps = stepper.steps_taken;
                            return Ok(result_from(
                                problem,
                                current,
                                steps,
                                FlowStatus::StepFailure { at, reason },
                            ));
                        }
                        Err(e) => return Err(e),
                    };
                    let steps = stepper.steps_taken;
                    return Ok(result_from(
                        problem,
                        inside_state,
                        steps,
                        FlowStatus::LeftDomain { t_exit: crossing },
                    ));
                }
            }
            StepOutcome::Rejected { h_next } => {
                h = h_next;
            }
        }
    }
}

/// Stay times of the forward and backward trajectories through `x`, each
/// integrated up to `horizon` and censored there if no exit is found.
pub fn exit_time(
    problem: &Problem,
    x: &[f64],
    horizon: f64,
    cfg: &FlowConfig,
) -> Result<ExitTimeResult, FlowError> {
    let tau_of = |result: FlowResult| -> Result<Tau, FlowError> {
        match result.status {
            FlowStatus::Ok => Ok(Tau::CensoredAt(horizon)),
            FlowStatus::LeftDomain { t_exit } => Ok(Tau::Exact(t_exit)),
            FlowStatus::StepFailure { at, reason } => Err(FlowError::StepFailure { at, reason }),
        }
    };
    let tau_plus = tau_of(advance_flow(problem, x, horizon, cfg)?)?;
    let tau_minus = tau_of(advance_flow(problem, x, -horizon, cfg)?)?;
    Ok(ExitTimeResult {
        tau_minus,
        tau_plus,
        horizon,
    })
}

/// Volume distortion `exp[int_0^t div F(Phi(x, s)) ds]` of the flow map,
/// for signed `t` with the trajectory staying in the domain on the way.
pub fn radon_nikodym(
    problem: &Problem,
    x: &[f64],
    t: f64,
    cfg: &FlowConfig,
) -> Result<f64, FlowError> {
    let result = advance_flow(problem, x, t, cfg)?;
    match result.status {
        FlowStatus::Ok => Ok((t.signum() * result.int_div).exp()),
        FlowStatus::LeftDomain { t_exit } => Err(FlowError::LeftDomain { t_exit }),
        FlowStatus::StepFailure { at, reason } => Err(FlowError::StepFailure { at, reason }),
    }
}

/// Dump a trajectory as CSV rows `t, x1..xN, int_nu, int_div, int_sigma_p`
/// at `rows + 1` uniformly spaced times from 0 to `t`. Stops early if the
/// trajectory leaves the domain.
pub fn write_trajectory_csv<W: Write>(
    problem: &Problem,
    x: &[f64],
    t: f64,
    rows: usize,
    cfg: &FlowConfig,
    out: &mut W,
) -> std::io::Result<()> {
    write!(out, "t")?;
    for i in 0..problem.dimension() {
        write!(out, ",x{i}")?;
    }
    writeln!(out, ",int_nu,int_div,int_sigma_p")?;
    let mut row = |time: f64, point: &[f64], nu: f64, div: f64, sp: f64| {
        let coords = point
            .iter()
            .map(|c| format!("{c:.12e}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{time:.12e},{coords},{nu:.12e},{div:.12e},{sp:.12e}")
    };
    row(0.0, x, 0.0, 0.0, 0.0)?;
    let rows = rows.max(1);
    let sign = t.signum();
    let mut point = x.to_vec();
    let mut acc_nu = 0.0;
    let mut acc_div = 0.0;
    let mut acc_sp = 0.0;
    let mut reached = 0.0;
    for k in 1..=rows {
        let target = t * k as f64 / rows as f64;
        let leg = advance_flow(problem, &point, target - reached * sign, cfg)
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        acc_nu += leg.int_nu;
        acc_div += leg.int_div;
        acc_sp += leg.int_sigma_p;
        reached += leg.t_reached;
        let done = !leg.is_ok();
        point = leg.endpoint;
        row(sign * reached, &point, acc_nu, acc_div, acc_sp)?;
        if done {
            break;
        }
    }
    Ok(())
}
