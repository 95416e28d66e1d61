//! Simulation of piecewise-constant inputs and the sampled-data closed
//! loop.
//!
//! In the loop the state is measured only at the partition times `T_i`.
//! Within `[T_i, T_{i+1})` decrease steps are chained open-loop on the
//! model prediction started from `x(T_i)`, so the applied input is a
//! function of `x(T_i)` and `t` alone. The plant is the same model and is
//! integrated segment by segment with the same settings, which makes its
//! states at step boundaries bit-identical to the predictions.

use thiserror::Error;

use crate::certify::{Case, SystemDef};
use crate::exec::Exec;
use crate::lie::LieError;
use crate::ode::{self, DenseStep, OdeError, OdeOptions};
use crate::symcalc::EvalPoint;
use crate::synth::{ControlProgram, Segment, Strategy, SynthError, Synthesizer};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// End state and the largest `V` seen while running a program.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgramRun {
    pub end: Vec<f64>,
    pub v_end: f64,
    pub v_max: f64,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Integrates one constant-input segment in place. `on_step` sees each
/// accepted step with times local to the segment.
fn flow_segment<S>(sys: &SystemDef, x: &mut [f64], u: f64, duration: f64, opts: &OdeOptions, on_step: S) -> Result<(), SimError>
where
    S: FnMut(&DenseStep<'_>),
{
    let rhs = |y: &[f64], dy: &mut [f64]| sys.rhs(y, u, dy).map_err(|e| OdeError::Rhs(e.to_string()));
    ode::integrate(rhs, x, duration, opts, on_step)?;
    Ok(())
}

/// Largest `V` over a step: its end point and three interior points.
fn step_v_max(sys: &SystemDef, s: &DenseStep<'_>, buf: &mut [f64]) -> Result<f64, LieError> {
    let mut m = sys.v_at(s.y1)?;
    for q in [0.25, 0.5, 0.75] {
        s.interpolate(s.t0 + q * s.h, buf);
        m = m.max(sys.v_at(buf)?);
    }
    Ok(m)
}

/// Runs `program` from `x0` segment by segment.
pub fn run_program(sys: &SystemDef, x0: &[f64], program: &ControlProgram, opts: &OdeOptions) -> Result<ProgramRun, SimError> {
    if x0.len() != sys.dim() {
        return Err(LieError::DimensionMismatch(sys.dim(), x0.len()).into());
    }
    let mut x = x0.to_vec();
    let mut v_max = sys.v_at(&x)?;
    let mut buf = vec![0.0; x.len()];
    for seg in program.segments() {
        let mut err = None;
        flow_segment(sys, &mut x, seg.value, seg.duration, opts, |s| match step_v_max(sys, s, &mut buf) {
            Ok(m) => v_max = v_max.max(m),
            Err(e) => {
                err.get_or_insert(e);
            }
        })?;
        if let Some(e) = err {
            return Err(e.into());
        }
    }
    let v_end = sys.v_at(&x)?;
    Ok(ProgramRun {
        end: x,
        v_end,
        v_max: v_max.max(v_end),
    })
}

/// Sampling times `T_1 = 0 < T_2 < ...`.
#[derive(Clone, Debug, PartialEq)]
pub enum Partition {
    Uniform { step: f64 },
    /// Listed times, then a uniform continuation with spacing `then`.
    Explicit { times: Vec<f64>, then: f64 },
}

impl Partition {
    pub fn uniform(step: f64) -> Result<Self, SimError> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(SimError::InvalidArgument(format!("partition step {step} must be positive")));
        }
        Ok(Partition::Uniform { step })
    }

    pub fn explicit(times: Vec<f64>, then: f64) -> Result<Self, SimError> {
        if times.first() != Some(&0.0) {
            return Err(SimError::InvalidArgument("partition must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) || times.iter().any(|t| !t.is_finite()) {
            return Err(SimError::InvalidArgument("partition times must be strictly increasing".into()));
        }
        if !(then > 0.0) || !then.is_finite() {
            return Err(SimError::InvalidArgument(format!("continuation step {then} must be positive")));
        }
        Ok(Partition::Explicit { times, then })
    }

    /// Partition times below `horizon`, followed by `horizon` itself.
    pub fn times_until(&self, horizon: f64) -> Vec<f64> {
        let (listed, last, step): (&[f64], f64, f64) = match self {
            Partition::Uniform { step } => (&[], 0.0, *step),
            Partition::Explicit { times, then } => (times, *times.last().unwrap_or(&0.0), *then),
        };
        let mut out: Vec<f64> = listed.iter().copied().filter(|t| *t < horizon).collect();
        if out.is_empty() {
            out.push(0.0);
        }
        if last < horizon {
            let mut k = 1u64;
            loop {
                let t = last + k as f64 * step;
                if t >= horizon {
                    break;
                }
                out.push(t);
                k += 1;
            }
        }
        out.push(horizon);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: f64,
    /// Index into [`Trajectory::segments`] of the segment active from `t`.
    pub segment: usize,
    /// The state at a boundary between chained decrease steps.
    pub checkpoint: bool,
}

/// A constant input held on `[t_start, t_end)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AppliedSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub u: f64,
    /// Partition interval the segment belongs to.
    pub interval: usize,
    /// Decrease step (global count) the segment belongs to.
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub samples: Vec<Sample>,
    pub segments: Vec<AppliedSegment>,
}

impl Trajectory {
    fn new(dim: usize) -> Self {
        Trajectory {
            dim,
            samples: Vec::new(),
            segments: Vec::new(),
        }
    }

    pub fn checkpoints(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| s.checkpoint)
    }

    /// Input switch times.
    pub fn events(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.t_start).collect()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }
}

/// Grid of sample times `anchor + j*spacing`.
struct Sampler {
    anchor: f64,
    spacing: f64,
    next: u64,
}

impl Sampler {
    fn time(&self) -> f64 {
        self.anchor + self.next as f64 * self.spacing
    }

    fn skip_to(&mut self, t: f64) {
        while self.time() <= t {
            self.next += 1;
        }
    }
}

/// Integrates a segment that starts at absolute time `t0`, recording
/// grid samples strictly inside it. Returns the largest `V` seen.
#[allow(clippy::too_many_arguments)]
fn record_segment(
    sys: &SystemDef,
    x: &mut [f64],
    t0: f64,
    seg: Segment,
    seg_index: usize,
    opts: &OdeOptions,
    sampler: &mut Sampler,
    samples: &mut Vec<Sample>,
) -> Result<f64, SimError> {
    let t_end = t0 + seg.duration;
    sampler.skip_to(t0);
    let mut err = None;
    let mut v_max = f64::NEG_INFINITY;
    let mut buf = vec![0.0; x.len()];
    let guard = 1e-9 * sampler.spacing;
    flow_segment(sys, x, seg.value, seg.duration, opts, |s| {
        match step_v_max(sys, s, &mut buf) {
            Ok(m) => v_max = v_max.max(m),
            Err(e) => {
                err.get_or_insert(e);
            }
        }
        while sampler.time() <= t0 + s.t1() && sampler.time() < t_end - guard {
            let t = sampler.time();
            s.interpolate(t - t0, &mut buf);
            match sys.v_at(&buf) {
                Ok(v) => {
                    v_max = v_max.max(v);
                    samples.push(Sample {
                        t,
                        x: buf.clone(),
                        v,
                        segment: seg_index,
                        checkpoint: false,
                    });
                }
                Err(e) => {
                    err.get_or_insert(e);
                }
            }
            sampler.next += 1;
        }
    })?;
    if let Some(e) = err {
        return Err(e.into());
    }
    Ok(v_max)
}

/// Options for [`integrate`].
#[derive(Clone, Debug, PartialEq)]
pub struct IntegrateOptions {
    pub ode: OdeOptions,
    /// Dense sample spacing; `None` means a hundredth of the duration.
    pub sample_spacing: Option<f64>,
}

/// Simulates `program` from `x0` with samples at a fixed spacing, the
/// segment boundaries and the end point.
pub fn integrate(sys: &SystemDef, x0: &EvalPoint, program: &ControlProgram, tol: f64) -> Result<Trajectory, SimError> {
    integrate_with(
        sys,
        x0,
        program,
        &IntegrateOptions {
            ode: OdeOptions::with_tol(tol),
            sample_spacing: None,
        },
    )
}

pub fn integrate_with(
    sys: &SystemDef,
    x0: &EvalPoint,
    program: &ControlProgram,
    opts: &IntegrateOptions,
) -> Result<Trajectory, SimError> {
    if x0.dim() != sys.dim() {
        return Err(LieError::DimensionMismatch(sys.dim(), x0.dim()).into());
    }
    let total = program.duration();
    let spacing = opts.sample_spacing.unwrap_or(total / 100.0);
    if !(spacing > 0.0) {
        return Err(SimError::InvalidArgument(format!("sample spacing {spacing} must be positive")));
    }
    let mut traj = Trajectory::new(sys.dim());
    let mut x = x0.coords().to_vec();
    let mut t = 0.0;
    let mut sampler = Sampler {
        anchor: 0.0,
        spacing,
        next: 0,
    };
    for (k, seg) in program.segments().iter().enumerate() {
        traj.samples.push(Sample {
            t,
            x: x.clone(),
            v: sys.v_at(&x)?,
            segment: k,
            checkpoint: k == 0,
        });
        record_segment(sys, &mut x, t, *seg, k, &opts.ode, &mut sampler, &mut traj.samples)?;
        traj.segments.push(AppliedSegment {
            t_start: t,
            t_end: t + seg.duration,
            u: seg.value,
            interval: 0,
            step: 0,
        });
        t += seg.duration;
    }
    traj.samples.push(Sample {
        t,
        x: x.clone(),
        v: sys.v_at(&x)?,
        segment: program.segments().len() - 1,
        checkpoint: true,
    });
    Ok(traj)
}

/// Settings of [`run_closed_loop`] beyond the partition and horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopConfig {
    /// The run stops once `|x|` is at most this.
    pub stop_radius: f64,
    pub divergence_bound: f64,
    /// Dense samples per partition interval.
    pub samples_per_interval: usize,
    pub max_steps_per_interval: usize,
    /// Integrator tolerance for the plant; should match the synthesizer's.
    pub tol: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            stop_radius: 1e-3,
            divergence_bound: 1e6,
            samples_per_interval: 100,
            max_steps_per_interval: 200,
            tol: 1e-10,
        }
    }
}

/// Summary of one decrease step inside the loop.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSummary {
    pub t_start: f64,
    pub duration: f64,
    pub case: Case,
    pub n: usize,
    pub rho: f64,
    pub u1: f64,
    pub drop: f64,
    pub sup_ratio: f64,
    pub strategy: Strategy,
}

#[derive(Clone, Debug, PartialEq)]
pub enum IntervalStatus {
    Completed,
    /// The stop radius was reached inside the interval.
    Stopped,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntervalOutcome {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// The measured state `x(T_i)`.
    pub x_start: Vec<f64>,
    pub steps: Vec<StepSummary>,
    pub status: IntervalStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopReport {
    pub converged: bool,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub final_norm: f64,
    pub final_v: f64,
    /// `(t, V)` at every checkpoint.
    pub checkpoint_v: Vec<(f64, f64)>,
    /// Largest `V(x(s)) / V(checkpoint before s)`.
    pub max_overshoot: f64,
    /// Smallest drop between consecutive checkpoints.
    pub min_drop: f64,
    /// `(mu, first checkpoint time with V <= mu)` for `mu = V0 * 10^-k`.
    pub threshold_times: Vec<(f64, Option<f64>)>,
    pub intervals: Vec<IntervalOutcome>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("closed loop stopped at t = {time}: {source}")]
pub struct LoopError {
    pub time: f64,
    pub source: LoopFailure,
    /// Everything recorded before the failure.
    pub partial: Box<(Trajectory, LoopReport)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoopFailure {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("more than {0} decrease steps in one interval")]
    StepLimit(usize),
}

/// Planned input for one interval, computed from `x(T_i)` alone.
struct IntervalPlan {
    /// `(t_start, segment, step index within the interval)`.
    segments: Vec<(f64, Segment, usize)>,
    steps: Vec<StepSummary>,
    stopped: bool,
    failure: Option<LoopFailure>,
}

/// Chains decrease steps on the model over `[a, b)` starting from `x_a`.
pub(crate) fn plan_interval_segments(
    synth: &Synthesizer,
    x_a: &[f64],
    a: f64,
    b: f64,
    xi_cap: f64,
    cfg: &LoopConfig,
) -> Vec<(f64, Segment, usize)> {
    plan_interval(synth, x_a, a, b, xi_cap, cfg).segments
}

fn plan_interval(synth: &Synthesizer, x_a: &[f64], a: f64, b: f64, xi_cap: f64, cfg: &LoopConfig) -> IntervalPlan {
    let snap = 1e-9 * (b - a);
    let mut plan = IntervalPlan {
        segments: Vec::new(),
        steps: Vec::new(),
        stopped: false,
        failure: None,
    };
    let mut z = x_a.to_vec();
    let mut tau = a;
    loop {
        if norm(&z) <= cfg.stop_radius {
            plan.stopped = true;
            return plan;
        }
        let remaining = b - tau;
        if remaining <= snap {
            return plan;
        }
        if plan.steps.len() >= cfg.max_steps_per_interval {
            plan.failure = Some(LoopFailure::StepLimit(cfg.max_steps_per_interval));
            return plan;
        }
        let step = match synth.step(&EvalPoint::new(z.clone()), xi_cap.min(remaining)) {
            Ok(s) => s,
            Err(e) => {
                plan.failure = Some(e.into());
                return plan;
            }
        };
        let index = plan.steps.len();
        let mut s = tau;
        for seg in step.program.segments() {
            plan.segments.push((s, *seg, index));
            s += seg.duration;
        }
        if b - s <= snap {
            // Close the interval exactly at its end time.
            let (start, last, _) = plan.segments.last_mut().expect("program has segments");
            last.duration = b - *start;
            s = b;
        }
        plan.steps.push(StepSummary {
            t_start: tau,
            duration: s - tau,
            case: step.certificate.case,
            n: step.certificate.n,
            rho: step.rho,
            u1: step.u1,
            drop: step.drop,
            sup_ratio: step.sup_ratio,
            strategy: step.strategy,
        });
        tau = s;
        z = step.end_state;
    }
}

struct LoopState {
    traj: Trajectory,
    intervals: Vec<IntervalOutcome>,
    max_overshoot: f64,
    v0: f64,
}

impl LoopState {
    fn report(&self, stop_radius: f64) -> LoopReport {
        let last = self.traj.last().expect("trajectory has a sample");
        let checkpoint_v: Vec<(f64, f64)> = self.traj.checkpoints().map(|s| (s.t, s.v)).collect();
        let min_drop = checkpoint_v
            .windows(2)
            .map(|w| w[0].1 - w[1].1)
            .fold(f64::INFINITY, f64::min);
        let threshold_times = (1..=6)
            .map(|k| {
                let mu = self.v0 * 10f64.powi(-k);
                (mu, checkpoint_v.iter().find(|(_, v)| *v <= mu).map(|(t, _)| *t))
            })
            .collect();
        let final_norm = norm(&last.x);
        LoopReport {
            converged: final_norm <= stop_radius,
            final_time: last.t,
            final_state: last.x.clone(),
            final_norm,
            final_v: last.v,
            checkpoint_v,
            max_overshoot: self.max_overshoot,
            min_drop,
            threshold_times,
            intervals: self.intervals.clone(),
        }
    }
}

/// Runs the sampled-data loop on `[0, horizon]` (or until `|x|` falls to
/// the stop radius) with steps of duration at most `xi_cap`.
pub fn run_closed_loop(
    synth: &Synthesizer,
    x0: &EvalPoint,
    partition: &Partition,
    horizon: f64,
    xi_cap: f64,
    cfg: &LoopConfig,
) -> Result<(Trajectory, LoopReport), LoopError> {
    let sys = synth.system();
    let fail_early = |e: SimError| LoopError {
        time: 0.0,
        source: e.into(),
        partial: Box::new((Trajectory::new(sys.dim()), empty_report(x0.coords()))),
    };
    if x0.dim() != sys.dim() {
        return Err(fail_early(LieError::DimensionMismatch(sys.dim(), x0.dim()).into()));
    }
    if !(horizon > 0.0) || !(xi_cap > 0.0) {
        return Err(fail_early(SimError::InvalidArgument(format!(
            "horizon {horizon} and xi cap {xi_cap} must be positive"
        ))));
    }
    let v0 = sys.v_at(x0.coords()).map_err(|e| fail_early(e.into()))?;
    let ode = OdeOptions {
        divergence_bound: cfg.divergence_bound,
        ..OdeOptions::with_tol(cfg.tol)
    };
    let mut st = LoopState {
        traj: Trajectory::new(sys.dim()),
        intervals: Vec::new(),
        max_overshoot: if v0 > 0.0 { 1.0 } else { 0.0 },
        v0,
    };
    st.traj.samples.push(Sample {
        t: 0.0,
        x: x0.coords().to_vec(),
        v: v0,
        segment: 0,
        checkpoint: true,
    });
    if x0.norm() <= cfg.stop_radius {
        return Ok((st.traj.clone(), st.report(cfg.stop_radius)));
    }

    let times = partition.times_until(horizon);
    let mut x = x0.coords().to_vec();
    let mut step_count = 0;
    for (i, w) in times.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let plan = plan_interval(synth, &x, a, b, xi_cap, cfg);
        let mut outcome = IntervalOutcome {
            index: i,
            t_start: a,
            t_end: b,
            x_start: x.clone(),
            steps: plan.steps.clone(),
            status: IntervalStatus::Completed,
        };
        let mut sampler = Sampler {
            anchor: a,
            spacing: (b - a) / cfg.samples_per_interval.max(1) as f64,
            next: 0,
        };
        let mut t = a;
        let mut checkpoint_v = st.traj.last().map_or(v0, |s| s.v);
        for (k, (start, seg, step)) in plan.segments.iter().enumerate() {
            let seg_index = st.traj.segments.len();
            // The sample at the segment start already exists when a step
            // boundary was just recorded; re-label it to this segment.
            let opens_step = k == 0 || plan.segments[k - 1].2 != *step;
            if opens_step {
                if let Some(last) = st.traj.samples.last_mut() {
                    last.segment = seg_index;
                }
            } else {
                let v = sys.v_at(&x).map_err(|e| st.fail(t, SimError::from(e).into(), cfg))?;
                st.traj.samples.push(Sample {
                    t: *start,
                    x: x.clone(),
                    v,
                    segment: seg_index,
                    checkpoint: false,
                });
            }
            let v_max = record_segment(sys, &mut x, *start, *seg, seg_index, &ode, &mut sampler, &mut st.traj.samples)
                .map_err(|e| st.fail(*start, e.into(), cfg))?;
            if checkpoint_v > 0.0 {
                st.max_overshoot = st.max_overshoot.max(v_max / checkpoint_v);
            }
            t = start + seg.duration;
            st.traj.segments.push(AppliedSegment {
                t_start: *start,
                t_end: t,
                u: seg.value,
                interval: i,
                step: step_count + step,
            });
            let closes_step = plan.segments.get(k + 1).is_none_or(|n| n.2 != *step);
            if closes_step {
                let v = sys.v_at(&x).map_err(|e| st.fail(t, SimError::from(e).into(), cfg))?;
                st.traj.samples.push(Sample {
                    t,
                    x: x.clone(),
                    v,
                    segment: seg_index,
                    checkpoint: true,
                });
                checkpoint_v = v;
            }
        }
        step_count += plan.steps.len();
        if let Some(failure) = plan.failure {
            outcome.status = IntervalStatus::Failed(failure.to_string());
            st.intervals.push(outcome);
            return Err(LoopError {
                time: t,
                source: failure,
                partial: Box::new((st.traj.clone(), st.report(cfg.stop_radius))),
            });
        }
        if plan.stopped {
            outcome.status = IntervalStatus::Stopped;
            st.intervals.push(outcome);
            break;
        }
        st.intervals.push(outcome);
    }
    let report = st.report(cfg.stop_radius);
    Ok((st.traj, report))
}

impl LoopState {
    fn fail(&self, time: f64, source: LoopFailure, cfg: &LoopConfig) -> LoopError {
        LoopError {
            time,
            source,
            partial: Box::new((self.traj.clone(), self.report(cfg.stop_radius))),
        }
    }
}

fn empty_report(x0: &[f64]) -> LoopReport {
    LoopReport {
        converged: false,
        final_time: 0.0,
        final_state: x0.to_vec(),
        final_norm: norm(x0),
        final_v: f64::NAN,
        checkpoint_v: Vec::new(),
        max_overshoot: f64::NAN,
        min_drop: f64::NAN,
        threshold_times: Vec::new(),
        intervals: Vec::new(),
    }
}

/// Re-plans interval `i` of a finished run from its recorded `x(T_i)` and
/// returns the input segments as `(t_start, t_end, u)`.
pub fn replay_interval(
    synth: &Synthesizer,
    outcome: &IntervalOutcome,
    xi_cap: f64,
    cfg: &LoopConfig,
) -> Vec<(f64, f64, f64)> {
    plan_interval_segments(synth, &outcome.x_start, outcome.t_start, outcome.t_end, xi_cap, cfg)
        .into_iter()
        .map(|(s, seg, _)| (s, s + seg.duration, seg.value))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Checks the Lyapunov facts on a finished run: strict decrease at
/// checkpoints, the growth bound `V(x(s)) <= 2 V(last checkpoint)`, and
/// that every level reached at a checkpoint is never left afterwards by
/// more than the growth factor.
pub fn verify_facts(traj: &Trajectory, report: &LoopReport) -> Vec<FactCheck> {
    const A: f64 = 2.0;
    const SLACK: f64 = 1e-9;
    let mut out = Vec::new();

    let cps: Vec<&Sample> = traj.checkpoints().collect();
    let bad = cps.windows(2).position(|w| !(w[1].v < w[0].v));
    let min_drop = cps.windows(2).map(|w| w[0].v - w[1].v).fold(f64::INFINITY, f64::min);
    out.push(FactCheck {
        name: "checkpoint_decrease",
        passed: bad.is_none(),
        detail: match bad {
            Some(k) => format!("V rises from {:e} to {:e} at t = {}", cps[k].v, cps[k + 1].v, cps[k + 1].t),
            None if cps.len() < 2 => "fewer than two checkpoints".into(),
            None => format!("{} checkpoints, smallest drop {min_drop:e}", cps.len()),
        },
    });

    let mut worst: f64 = 0.0;
    let mut violation = None;
    let mut reference = None;
    for s in &traj.samples {
        if s.checkpoint {
            reference = Some(s.v);
        }
        let Some(r) = reference else { continue };
        if s.v > A * r * (1.0 + SLACK) + SLACK * f64::MIN_POSITIVE.max(r) {
            violation.get_or_insert(s.t);
        }
        if r > 0.0 {
            worst = worst.max(s.v / r);
        }
    }
    let overshoot_ok = report.max_overshoot.is_nan() || report.max_overshoot <= A + SLACK;
    out.push(FactCheck {
        name: "growth_bound",
        passed: violation.is_none() && overshoot_ok,
        detail: match violation {
            Some(t) => format!("V exceeds {A} x checkpoint value at t = {t}"),
            None => format!(
                "max sampled ratio {worst:.6}, max probed ratio {:.6}",
                report.max_overshoot
            ),
        },
    });

    let mut attract_fail = None;
    for (mu, reached) in &report.threshold_times {
        let Some(tau) = reached else { continue };
        if let Some(s) = traj.samples.iter().find(|s| s.t >= *tau && s.v > A * mu * (1.0 + SLACK)) {
            attract_fail.get_or_insert((*mu, s.t));
        }
    }
    let reached = report.threshold_times.iter().filter(|(_, t)| t.is_some()).count();
    out.push(FactCheck {
        name: "attractivity",
        passed: attract_fail.is_none(),
        detail: match attract_fail {
            Some((mu, t)) => format!("after reaching V <= {mu:e}, V exceeds {A} x that level at t = {t}"),
            None => format!(
                "{reached} of {} levels reached and kept; final V {:e}",
                report.threshold_times.len(),
                report.final_v
            ),
        },
    });
    out
}

/// One closed-loop run request.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub x0: EvalPoint,
    pub partition: Partition,
}

/// Independent closed-loop runs, results in input order.
pub fn run_many(
    synth: &Synthesizer,
    runs: &[RunSpec],
    horizon: f64,
    xi_cap: f64,
    cfg: &LoopConfig,
    exec: Exec,
) -> Vec<Result<(Trajectory, LoopReport), LoopError>> {
    exec.map(runs, |r| run_closed_loop(synth, &r.x0, &r.partition, horizon, xi_cap, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{ScalarField, VectorField};

    fn dblint() -> SystemDef {
        SystemDef::new(
            VectorField::parse(&["x2", "0"], 2).unwrap(),
            VectorField::parse(&["0", "1"], 2).unwrap(),
            ScalarField::parse("0.5*(x1^2+x2^2)", 2).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_input_quadratic() {
        let p = ControlProgram::constant(1.0, 1.0).unwrap();
        let tr = integrate(&dblint(), &EvalPoint::new(vec![0.0, 0.0]), &p, 1e-12).unwrap();
        let end = tr.last().unwrap();
        assert_eq!(end.t, 1.0);
        assert!((end.x[0] - 0.5).abs() < 1e-10 && (end.x[1] - 1.0).abs() < 1e-10);
        assert!(tr.samples.windows(2).all(|w| w[0].t <= w[1].t));
        for s in &tr.samples {
            assert!((s.x[0] - s.t * s.t / 2.0).abs() < 1e-9, "{s:?}");
        }
    }

    #[test]
    fn partition_times() {
        let p = Partition::uniform(0.5).unwrap();
        assert_eq!(p.times_until(1.2), vec![0.0, 0.5, 1.0, 1.2]);
        let e = Partition::explicit(vec![0.0, 0.1, 0.7, 0.8, 2.0], 0.5).unwrap();
        assert_eq!(e.times_until(3.0), vec![0.0, 0.1, 0.7, 0.8, 2.0, 2.5, 3.0]);
        assert_eq!(e.times_until(0.5), vec![0.0, 0.1, 0.5]);
        assert!(Partition::explicit(vec![0.0, 0.2, 0.2], 0.5).is_err());
        assert!(Partition::explicit(vec![0.1], 0.5).is_err());
        assert!(Partition::uniform(0.0).is_err());
    }

    #[test]
    fn start_inside_stop_radius() {
        let synth = Synthesizer::new(&dblint(), 4, Default::default(), Exec::Sequential).unwrap();
        let (tr, rep) = run_closed_loop(
            &synth,
            &EvalPoint::new(vec![1e-4, 0.0]),
            &Partition::uniform(0.5).unwrap(),
            10.0,
            0.5,
            &LoopConfig::default(),
        )
        .unwrap();
        assert!(tr.segments.is_empty());
        assert_eq!(tr.samples.len(), 1);
        assert!(rep.converged);
    }
}
