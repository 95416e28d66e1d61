//! One-step decrease synthesis and the diagnostics behind it.
//!
//! A step is either a single constant input or the two-segment program
//! `u2 = -rho*u1` on `[0, t]` followed by `u1` on `(t, t + rho*t]`. The
//! composed flow `R(t)` ends at the second switch and `m(t) = V(R(t))`.
//! Every emitted program has been re-simulated: `V` drops and never
//! exceeds `a * V(x0)` along the way (`a = 2` by default).

use std::fmt;

use thiserror::Error;

use crate::certify::{Case, Certificate, Certifier, CertifyError, SystemDef};
use crate::exec::Exec;
use crate::lie::{iterated_adjoint, LieError, LieWord, VectorField};
use crate::ode::OdeOptions;
use crate::simloop::{run_program, SimError};
use crate::symcalc::EvalPoint;

/// Integrator tolerance for the diagnostics.
pub const DIAG_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("x0 is at the origin")]
    AtOrigin,
    #[error("invalid control program: {0}")]
    InvalidProgram(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("certificate is inconclusive: {0}")]
    Inconclusive(Box<Certificate>),
    #[error("no candidate verified within the budget (best V-drop {best_drop:e})")]
    SynthesisFailed { best_drop: f64, certificate: Box<Certificate> },
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Lie(#[from] LieError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub value: f64,
    pub duration: f64,
}

/// Piecewise-constant input; segments are applied in order.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlProgram {
    segments: Vec<Segment>,
}

impl ControlProgram {
    pub fn new(segments: Vec<Segment>) -> Result<Self, SynthError> {
        if segments.is_empty() {
            return Err(SynthError::InvalidProgram("no segments".into()));
        }
        for s in &segments {
            if !(s.duration > 0.0) || !s.duration.is_finite() {
                return Err(SynthError::InvalidProgram(format!("duration {} is not positive", s.duration)));
            }
            if !s.value.is_finite() {
                return Err(SynthError::InvalidProgram(format!("value {} is not finite", s.value)));
            }
        }
        Ok(ControlProgram { segments })
    }

    pub fn constant(value: f64, duration: f64) -> Result<Self, SynthError> {
        Self::new(vec![Segment { value, duration }])
    }

    /// `-rho*u1` for `t`, then `u1` for `rho*t`.
    pub fn omega(rho: f64, u1: f64, t: f64) -> Result<Self, SynthError> {
        Self::new(vec![
            Segment {
                value: -rho * u1,
                duration: t,
            },
            Segment {
                value: u1,
                duration: rho * t,
            },
        ])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Total duration `ε`.
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Input applied at local time `s` (segments are left-closed).
    pub fn value_at(&self, s: f64) -> f64 {
        let mut end = 0.0;
        for seg in &self.segments {
            end += seg.duration;
            if s < end {
                return seg.value;
            }
        }
        self.segments.last().map_or(0.0, |s| s.value)
    }
}

impl fmt::Display for ControlProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "u={} for {}", s.value, s.duration)?;
        }
        Ok(())
    }
}

fn check_omega_args(rho: f64, t: f64) -> Result<(), SynthError> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(SynthError::InvalidArgument(format!("rho = {rho} must be positive")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(SynthError::InvalidArgument(format!("t = {t} must be nonnegative")));
    }
    Ok(())
}

fn diag_options(x0: &[f64], tol: f64) -> OdeOptions {
    let scale = x0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    OdeOptions {
        rtol: tol,
        atol: tol * scale.max(f64::MIN_POSITIVE),
        ..OdeOptions::default()
    }
}

/// `R(t)`: flow `Y = f - rho*u1*g` for `t`, then `X = f + u1*g` for `rho*t`.
pub fn composed_flow(sys: &SystemDef, x0: &EvalPoint, rho: f64, u1: f64, t: f64) -> Result<EvalPoint, SynthError> {
    composed_flow_with(sys, x0, rho, u1, t, &diag_options(x0.coords(), DIAG_TOL))
}

pub fn composed_flow_with(
    sys: &SystemDef,
    x0: &EvalPoint,
    rho: f64,
    u1: f64,
    t: f64,
    ode: &OdeOptions,
) -> Result<EvalPoint, SynthError> {
    check_omega_args(rho, t)?;
    if x0.dim() != sys.dim() {
        return Err(LieError::DimensionMismatch(sys.dim(), x0.dim()).into());
    }
    if t == 0.0 {
        return Ok(x0.clone());
    }
    let program = ControlProgram::omega(rho, u1, t)?;
    Ok(EvalPoint::new(run_program(sys, x0.coords(), &program, ode)?.end))
}

/// `m(t) = V(R(t))`.
pub fn m_of_t(sys: &SystemDef, x0: &EvalPoint, rho: f64, u1: f64, t: f64) -> Result<f64, SynthError> {
    let r = composed_flow(sys, x0, rho, u1, t)?;
    Ok(sys.v_at(r.coords())?)
}

/// Estimates of `m^(n)(0)`, `n = 1..`, with error indicators.
#[derive(Clone, Debug, PartialEq)]
pub struct MDerivatives {
    /// `values[n-1]` estimates `m^(n)(0)`.
    pub values: Vec<f64>,
    /// Propagated integration-noise bound per order.
    pub noise: Vec<f64>,
    /// Extrapolation-error estimate per order.
    pub truncation: Vec<f64>,
    /// Orders whose estimate is dominated by noise or truncation.
    pub ill_conditioned: Vec<bool>,
}

impl MDerivatives {
    pub fn bound(&self, n: usize) -> f64 {
        self.noise[n - 1] + self.truncation[n - 1]
    }

    pub fn any_ill_conditioned(&self) -> bool {
        self.ill_conditioned.iter().any(|b| *b)
    }
}

/// Largest order accepted by [`m_derivative_estimates`].
pub const M_ORDER_MAX: usize = 4;

/// Base step for order `n`; larger steps at higher orders keep the
/// noise amplification `2^n / h^n` in check.
fn m_step(n: usize, rho: f64) -> f64 {
    0.04 * 2f64.powi(n as i32 - 1) / (1.0 + rho)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `n`-th forward difference quotient from samples `m(j*step)`,
/// `j = 0, stride, 2*stride, ...`.
fn forward_difference(samples: &[f64], n: usize, stride: usize, step: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..=n {
        let sign = if (n - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        acc += sign * binomial(n, j) * samples[j * stride];
    }
    acc / step.powi(n as i32)
}

struct OrderEstimate {
    value: f64,
    noise: f64,
    truncation: f64,
}

/// Forward differences at steps `h`, `h/2`, `h/4`, `h/8` combined by
/// three Richardson levels (ratio 2, leading errors `O(h)`, `O(h^2)`,
/// `O(h^3)`). The truncation estimate is the change made by the last
/// level.
fn estimate_order<M>(m: M, n: usize, h: f64, delta: f64) -> Result<OrderEstimate, SynthError>
where
    M: Fn(f64) -> Result<f64, SynthError>,
{
    const LEVELS: usize = 4;
    let stride0 = 1usize << (LEVELS - 1);
    let fine = h / stride0 as f64;
    let samples: Vec<f64> = (0..=stride0 * n).map(|j| m(j as f64 * fine)).collect::<Result<_, _>>()?;
    // Column 0: plain differences, coarsest first, with their noise bounds.
    let mut values: Vec<f64> = Vec::with_capacity(LEVELS);
    let mut noise: Vec<f64> = Vec::with_capacity(LEVELS);
    for l in 0..LEVELS {
        let stride = stride0 >> l;
        let step = fine * stride as f64;
        values.push(forward_difference(&samples, n, stride, step));
        noise.push(delta * 2f64.powi(n as i32) / step.powi(n as i32));
    }
    let mut last_change = 0.0;
    for level in 1..LEVELS {
        let w = 2f64.powi(level as i32);
        for k in 0..LEVELS - level {
            let refined = (w * values[k + 1] - values[k]) / (w - 1.0);
            if k == LEVELS - level - 1 {
                last_change = (refined - values[k + 1]).abs();
            }
            values[k] = refined;
            noise[k] = (w * noise[k + 1] + noise[k]) / (w - 1.0);
        }
    }
    Ok(OrderEstimate {
        value: values[0],
        noise: noise[0],
        truncation: last_change,
    })
}

/// Estimates `m^(1)(0)..m^(order_max)(0)` for the program with `(rho, u1)`.
pub fn m_derivative_estimates(
    sys: &SystemDef,
    x0: &EvalPoint,
    rho: f64,
    u1: f64,
    order_max: usize,
) -> Result<MDerivatives, SynthError> {
    if order_max == 0 || order_max > M_ORDER_MAX {
        return Err(SynthError::InvalidArgument(format!(
            "order_max = {order_max} must be in 1..={M_ORDER_MAX}"
        )));
    }
    let mut out = MDerivatives {
        values: Vec::new(),
        noise: Vec::new(),
        truncation: Vec::new(),
        ill_conditioned: Vec::new(),
    };
    for n in 1..=order_max {
        let e = m_derivative(sys, x0, rho, u1, n, DIAG_TOL)?;
        let scale = e.value.abs().max(1.0);
        out.ill_conditioned.push(e.noise > 1e-3 * scale || e.truncation > 1e-3 * scale);
        out.values.push(e.value);
        out.noise.push(e.noise);
        out.truncation.push(e.truncation);
    }
    Ok(out)
}

fn m_derivative(
    sys: &SystemDef,
    x0: &EvalPoint,
    rho: f64,
    u1: f64,
    n: usize,
    tol: f64,
) -> Result<OrderEstimate, SynthError> {
    check_omega_args(rho, 0.0)?;
    let ode = diag_options(x0.coords(), tol);
    let m0 = sys.v_at(x0.coords())?;
    let delta = 1e3 * tol * m0.abs() + f64::MIN_POSITIVE;
    let m = |t: f64| -> Result<f64, SynthError> {
        let r = composed_flow_with(sys, x0, rho, u1, t, &ode)?;
        Ok(sys.v_at(r.coords())?)
    };
    estimate_order(m, n, m_step(n, rho), delta)
}

/// Largest `k` accepted by [`cbh_residual`].
pub const CBH_ORDER_MAX: usize = 4;

/// `|R'(t) - sum_{i<=k} (rho t)^i / i! A_i(R(t))|` where `A_0 = rho X + Y`
/// and `A_i = [..[Y,X],X..]` with `i` brackets. `R'` is taken numerically.
pub fn cbh_residual(sys: &SystemDef, x0: &EvalPoint, rho: f64, u1: f64, k: usize, t: f64) -> Result<f64, SynthError> {
    CbhSeries::new(sys, rho, u1, k)?.residual(sys, x0, t)
}

/// The truncated series fields for fixed `(rho, u1, k)`, reusable across `t`.
pub struct CbhSeries {
    rho: f64,
    u1: f64,
    fields: Vec<VectorField>,
}

impl CbhSeries {
    pub fn new(sys: &SystemDef, rho: f64, u1: f64, k: usize) -> Result<Self, SynthError> {
        check_omega_args(rho, 0.0)?;
        if k > CBH_ORDER_MAX {
            return Err(SynthError::InvalidArgument(format!("k = {k} exceeds {CBH_ORDER_MAX}")));
        }
        let x = sys.f.combine(1.0, &sys.g, u1)?;
        let y = sys.f.combine(1.0, &sys.g, -rho * u1)?;
        let mut fields = vec![x.combine(rho, &y, 1.0)?];
        for i in 1..=k {
            fields.push(iterated_adjoint(&y, &x, i)?);
        }
        Ok(CbhSeries { rho, u1, fields })
    }

    pub fn residual(&self, sys: &SystemDef, x0: &EvalPoint, t: f64) -> Result<f64, SynthError> {
        check_omega_args(self.rho, t)?;
        let ode = diag_options(x0.coords(), DIAG_TOL);
        let r = |s: f64| composed_flow_with(sys, x0, self.rho, self.u1, s, &ode).map(EvalPoint::into_vec);
        let h = 1e-3;
        let n = sys.dim();
        let mut rdot = vec![0.0; n];
        if t >= 2.0 * h {
            let (a, b, c, d) = (r(t - 2.0 * h)?, r(t - h)?, r(t + h)?, r(t + 2.0 * h)?);
            for i in 0..n {
                rdot[i] = (a[i] - 8.0 * b[i] + 8.0 * c[i] - d[i]) / (12.0 * h);
            }
        } else {
            let p: Vec<Vec<f64>> = (0..5).map(|j| r(t + j as f64 * h)).collect::<Result<_, _>>()?;
            for i in 0..n {
                rdot[i] = (-25.0 * p[0][i] + 48.0 * p[1][i] - 36.0 * p[2][i] + 16.0 * p[3][i] - 3.0 * p[4][i])
                    / (12.0 * h);
            }
        }
        let at = r(t)?;
        let mut series = vec![0.0; n];
        let mut coef = 1.0;
        for (i, field) in self.fields.iter().enumerate() {
            if i > 0 {
                coef *= self.rho * t / i as f64;
            }
            let v = field.eval(&at)?;
            for j in 0..n {
                series[j] += coef * v[j];
            }
        }
        Ok(rdot
            .iter()
            .zip(&series)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

/// Search limits for [`Synthesizer::step`].
#[derive(Clone, Debug, PartialEq)]
pub struct SynthBudget {
    /// Magnitudes for constant inputs and large `u1`, ascending.
    pub magnitudes: Vec<f64>,
    /// Magnitudes for small `u1`, descending.
    pub small_magnitudes: Vec<f64>,
    /// Values of `rho` tried when the certificate needs a search over it.
    pub rho_grid: Vec<f64>,
    /// Shortest duration tried, as a fraction of the cap `ξ`.
    pub min_duration_factor: f64,
    /// Worst-case number of simulations per step.
    pub max_simulations: usize,
    /// Integrator tolerance for verification runs.
    pub tol: f64,
    /// Growth bound `a` in `sup V <= a V(x0)`.
    pub a_factor: f64,
    /// Try a generic search when the case strategy fails.
    pub fallback: bool,
}

impl Default for SynthBudget {
    fn default() -> Self {
        let mut rho_grid = vec![1.0];
        for k in 1..=5 {
            rho_grid.push(2f64.powi(k));
            rho_grid.push(2f64.powi(-k));
        }
        SynthBudget {
            magnitudes: (0..=10).map(|k| 2f64.powi(k)).collect(),
            small_magnitudes: (0..=10).map(|k| 2f64.powi(-k)).collect(),
            rho_grid,
            min_duration_factor: 1e-6,
            max_simulations: 10_000,
            tol: 1e-10,
            a_factor: 2.0,
            fallback: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// The search prescribed by the certificate's case.
    Case,
    /// Generic search after the case strategy found nothing.
    Fallback,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub program: ControlProgram,
    pub certificate: Certificate,
    /// `(rho, u1)` for two-segment programs; `u1` is the constant input
    /// for single-segment ones, with `rho = 0`.
    pub rho: f64,
    pub u1: f64,
    pub v0: f64,
    pub v_end: f64,
    /// `V(x0) - V(x(ε))`.
    pub drop: f64,
    /// `max V` along the step over `V(x0)`.
    pub sup_ratio: f64,
    /// State at the end of the program, as predicted by the model.
    pub end_state: Vec<f64>,
    /// Estimate of `m^(N+1)(0)` when it was used to pick the candidate.
    pub m_estimate: Option<f64>,
    pub strategy: Strategy,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    rho: f64,
    u1: f64,
    single: bool,
    /// Require the `m^(order)(0)` estimate to be negative beyond its
    /// error bound before simulating.
    filter_order: Option<usize>,
}

impl Candidate {
    fn single(u: f64) -> Self {
        Candidate {
            rho: 0.0,
            u1: u,
            single: true,
            filter_order: None,
        }
    }

    fn omega(rho: f64, u1: f64, filter_order: Option<usize>) -> Self {
        Candidate {
            rho,
            u1,
            single: false,
            filter_order: filter_order.filter(|n| *n <= M_ORDER_MAX),
        }
    }

    fn cost(&self, levels: usize) -> usize {
        levels + self.filter_order.map_or(0, |n| 4 * n + 1)
    }
}

enum Attempt {
    Success(Box<StepResult>),
    Failure { best_drop: f64 },
}

/// Finds decreasing steps for one system.
#[derive(Debug)]
pub struct Synthesizer {
    certifier: Certifier,
    budget: SynthBudget,
    exec: Exec,
}

impl Synthesizer {
    pub fn new(sys: &SystemDef, n_max: usize, budget: SynthBudget, exec: Exec) -> Result<Self, SynthError> {
        Ok(Synthesizer {
            certifier: Certifier::new(sys, n_max)?,
            budget,
            exec,
        })
    }

    pub fn system(&self) -> &SystemDef {
        self.certifier.system()
    }

    pub fn certifier(&self) -> &Certifier {
        &self.certifier
    }

    pub fn budget(&self) -> &SynthBudget {
        &self.budget
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    /// A program of duration at most `xi` that decreases `V` from `x0`.
    pub fn step(&self, x0: &EvalPoint, xi: f64) -> Result<StepResult, SynthError> {
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(SynthError::InvalidArgument(format!("xi = {xi} must be positive")));
        }
        let certificate = match self.certifier.certify(x0) {
            Ok(c) => c,
            Err(CertifyError::AtOrigin { .. }) => return Err(SynthError::AtOrigin),
            Err(e) => return Err(e.into()),
        };
        if certificate.case == Case::Inconclusive {
            return Err(SynthError::Inconclusive(Box::new(certificate)));
        }
        let v0 = self.system().v_at(x0.coords())?;
        let levels = self.duration_levels(xi).len();
        let mut spent = 0;
        let mut best_drop = f64::NEG_INFINITY;

        let plan = [
            (Strategy::Case, self.case_candidates(&certificate)),
            (
                Strategy::Fallback,
                if self.budget.fallback {
                    self.fallback_candidates(&certificate)
                } else {
                    Vec::new()
                },
            ),
        ];
        for (strategy, candidates) in plan {
            let mut affordable = Vec::new();
            for c in candidates {
                let cost = c.cost(levels);
                if spent + cost > self.budget.max_simulations {
                    break;
                }
                spent += cost;
                affordable.push(c);
            }
            match self.search(x0, v0, xi, &certificate, &affordable, strategy) {
                Ok(found) => return Ok(found),
                Err(d) => best_drop = best_drop.max(d),
            }
        }
        Err(SynthError::SynthesisFailed {
            best_drop,
            certificate: Box::new(certificate),
        })
    }

    fn duration_levels(&self, xi: f64) -> Vec<f64> {
        let floor = self.budget.min_duration_factor * xi;
        let mut out = Vec::new();
        let mut eps = xi;
        while eps >= floor && out.len() < 64 {
            out.push(eps);
            eps *= 0.5;
        }
        out
    }

    fn case_candidates(&self, cert: &Certificate) -> Vec<Candidate> {
        let b = &self.budget;
        let n = cert.n;
        match cert.case {
            Case::Transversal => {
                let s = -cert.gv().signum();
                b.magnitudes.iter().map(|c| Candidate::single(s * c)).collect()
            }
            Case::ArtsteinSontag => vec![Candidate::single(0.0)],
            Case::P1 => vec![Candidate::omega(1.0, 0.0, None)],
            Case::P2 => {
                let s = -cert.decisive_value().unwrap_or(1.0).signum();
                b.magnitudes
                    .iter()
                    .flat_map(|c| {
                        [
                            Candidate::omega(1.0, s * c, Some(n + 1)),
                            Candidate::omega(1.0, -s * c, Some(n + 1)),
                        ]
                    })
                    .collect()
            }
            Case::P3 => b.magnitudes.iter().map(|c| Candidate::omega(1.0, *c, None)).collect(),
            Case::P4 => b
                .rho_grid
                .iter()
                .flat_map(|rho| {
                    b.small_magnitudes.iter().flat_map(move |c| {
                        [
                            Candidate::omega(*rho, *c, Some(n + 1)),
                            Candidate::omega(*rho, -c, Some(n + 1)),
                        ]
                    })
                })
                .collect(),
            Case::Inconclusive => Vec::new(),
        }
    }

    fn fallback_candidates(&self, cert: &Certificate) -> Vec<Candidate> {
        let b = &self.budget;
        let s = if cert.gv() > 0.0 { -1.0 } else { 1.0 };
        let mut out = vec![Candidate::single(0.0)];
        for c in &b.magnitudes {
            out.push(Candidate::single(s * c));
            out.push(Candidate::single(-s * c));
        }
        let mut mags: Vec<f64> = b.small_magnitudes.iter().rev().copied().collect();
        mags.extend(b.magnitudes.iter().copied());
        mags.sort_by(f64::total_cmp);
        mags.dedup();
        for rho in &b.rho_grid {
            for c in &mags {
                out.push(Candidate::omega(*rho, *c, None));
                out.push(Candidate::omega(*rho, -c, None));
            }
        }
        out
    }

    /// First verified candidate in list order, or the best drop seen.
    fn search(
        &self,
        x0: &EvalPoint,
        v0: f64,
        xi: f64,
        cert: &Certificate,
        candidates: &[Candidate],
        strategy: Strategy,
    ) -> Result<StepResult, f64> {
        let batch = match self.exec {
            Exec::Sequential => 1,
            Exec::Parallel => parallelism(),
        };
        let mut best = f64::NEG_INFINITY;
        for chunk in candidates.chunks(batch) {
            let attempts = self.exec.map(chunk, |c| self.attempt(x0, v0, xi, cert, c, strategy));
            for a in attempts {
                match a {
                    Attempt::Success(r) => return Ok(*r),
                    Attempt::Failure { best_drop } => best = best.max(best_drop),
                }
            }
        }
        Err(best)
    }

    fn attempt(
        &self,
        x0: &EvalPoint,
        v0: f64,
        xi: f64,
        cert: &Certificate,
        cand: &Candidate,
        strategy: Strategy,
    ) -> Attempt {
        let mut m_estimate = None;
        if let Some(order) = cand.filter_order {
            match m_derivative(self.system(), x0, cand.rho, cand.u1, order, DIAG_TOL) {
                Ok(e) if e.value < -(e.noise + e.truncation) => m_estimate = Some(e.value),
                _ => {
                    return Attempt::Failure {
                        best_drop: f64::NEG_INFINITY,
                    }
                }
            }
        }
        let ode = OdeOptions::with_tol(self.budget.tol);
        // Drops below this are indistinguishable from integration error.
        let min_drop = 100.0 * self.budget.tol * (1.0 + v0);
        // Keep clear of the growth bound so that a re-simulation at a
        // tighter tolerance cannot cross it.
        let v_limit = self.budget.a_factor * v0 * (1.0 - 1e-3);
        let mut best_drop = f64::NEG_INFINITY;
        for eps in self.duration_levels(xi) {
            let program = if cand.single {
                ControlProgram::constant(cand.u1, eps)
            } else {
                let t = eps / (1.0 + cand.rho);
                ControlProgram::omega(cand.rho, cand.u1, t)
            };
            let Ok(program) = program else { continue };
            let Ok(run) = run_program(self.system(), x0.coords(), &program, &ode) else {
                continue;
            };
            let drop = v0 - run.v_end;
            best_drop = best_drop.max(drop);
            if drop > min_drop && run.v_max <= v_limit {
                return Attempt::Success(Box::new(StepResult {
                    program,
                    certificate: cert.clone(),
                    rho: cand.rho,
                    u1: cand.u1,
                    v0,
                    v_end: run.v_end,
                    drop,
                    sup_ratio: run.v_max / v0,
                    end_state: run.end,
                    m_estimate,
                    strategy,
                }));
            }
        }
        Attempt::Failure { best_drop }
    }
}

fn parallelism() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads().max(1)
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// One-shot step with default budget and `N_max`.
pub fn synthesize_step(sys: &SystemDef, x0: &EvalPoint, xi: f64) -> Result<StepResult, SynthError> {
    Synthesizer::new(sys, crate::lie::DEFAULT_N_MAX, SynthBudget::default(), Exec::default())?.step(x0, xi)
}

/// The bracket word whose value decided a bracket certificate.
pub fn decisive_word(cert: &Certificate) -> Option<LieWord> {
    match cert.case {
        Case::P2 | Case::P3 => Some(LieWord::f_ad_g(cert.n)),
        Case::P4 => Some(LieWord::g_ad_f(cert.n)),
        _ => None,
    }
}
