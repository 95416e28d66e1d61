//! Dormand–Prince 5(4) with step-size control and continuous extension.
//!
//! Every call integrates one autonomous segment from local time 0 to a
//! fixed end time and lands on that end time exactly. Callers chain
//! segments to integrate piecewise-constant inputs; each segment restarts
//! the step-size selection so results depend only on the segment's own
//! initial state.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("state norm {norm:e} exceeded the divergence bound at t = {t:e}")]
    Divergence { t: f64, norm: f64 },
    #[error("too many steps ({0})")]
    TooManySteps(usize),
    #[error("right-hand side could not be evaluated: {0}")]
    Rhs(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub divergence_bound: f64,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol,
            ..Default::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 1_000_000,
            divergence_bound: 1e6,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step together with its interpolant.
pub struct DenseStep<'a> {
    pub t0: f64,
    pub h: f64,
    pub y0: &'a [f64],
    pub y1: &'a [f64],
    rcont: &'a [Vec<f64>; 5],
}

impl DenseStep<'_> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// State at `t` in `[t0, t0 + h]`.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        let theta = if self.h == 0.0 { 1.0 } else { (t - self.t0) / self.h };
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn scaled_norm(v: &[f64], y: &[f64], opts: &OdeOptions) -> f64 {
    let n = v.len().max(1) as f64;
    (v.iter()
        .zip(y)
        .map(|(vi, yi)| {
            let sc = opts.atol + opts.rtol * yi.abs();
            (vi / sc).powi(2)
        })
        .sum::<f64>()
        / n)
        .sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Integrates `x' = rhs(x)` over `[0, duration]` starting from `y`, which
/// holds the end state on success. `on_step` sees every accepted step.
pub fn integrate<F, S>(
    rhs: F,
    y: &mut [f64],
    duration: f64,
    opts: &OdeOptions,
    mut on_step: S,
) -> Result<SegmentStats, OdeError>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), OdeError>,
    S: FnMut(&DenseStep<'_>),
{
    let n = y.len();
    let mut stats = SegmentStats {
        accepted: 0,
        rejected: 0,
        evaluations: 0,
    };
    if duration <= 0.0 || n == 0 {
        return Ok(stats);
    }
    let eval = |x: &[f64], out: &mut [f64], stats: &mut SegmentStats| -> Result<(), OdeError> {
        stats.evaluations += 1;
        rhs(x, out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::Rhs("non-finite derivative".into()));
        }
        Ok(())
    };

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut rcont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);

    eval(y, &mut k1, &mut stats)?;

    // Initial step guess.
    let mut h = {
        let d0 = scaled_norm(y, y, opts);
        let d1 = scaled_norm(&k1, y, opts);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(duration);
        for i in 0..n {
            ytmp[i] = y[i] + h0 * k1[i];
        }
        eval(&ytmp, &mut k2, &mut stats)?;
        for i in 0..n {
            err[i] = (k2[i] - k1[i]) / h0;
        }
        let d2 = scaled_norm(&err, y, opts);
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dm).powf(0.2)
        };
        (100.0 * h0).min(h1).min(duration)
    };

    let mut t = 0.0;
    let mut reject_streak = false;
    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        let last = t + h >= duration * (1.0 - 4.0 * f64::EPSILON);
        if last {
            h = duration - t;
        }
        if h <= 8.0 * f64::EPSILON * duration {
            return Err(OdeError::StepUnderflow { t, h });
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        eval(&ytmp, &mut k2, &mut stats)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        eval(&ytmp, &mut k3, &mut stats)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        eval(&ytmp, &mut k4, &mut stats)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        eval(&ytmp, &mut k5, &mut stats)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        eval(&ytmp, &mut k6, &mut stats)?;
        for i in 0..n {
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        eval(&ynew, &mut k7, &mut stats)?;
        for i in 0..n {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let scale: Vec<f64> = y.iter().zip(&ynew).map(|(a, b)| a.abs().max(b.abs())).collect();
        let e = scaled_norm(&err, &scale, opts);

        if e <= 1.0 {
            for i in 0..n {
                let dy = ynew[i] - y[i];
                let bspl = h * k1[i] - dy;
                rcont[0][i] = y[i];
                rcont[1][i] = dy;
                rcont[2][i] = bspl;
                rcont[3][i] = dy - h * k7[i] - bspl;
                rcont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let t_next = if last { duration } else { t + h };
            {
                let step = DenseStep {
                    t0: t,
                    h: t_next - t,
                    y0: y,
                    y1: &ynew,
                    rcont: &rcont,
                };
                on_step(&step);
            }
            stats.accepted += 1;
            y.copy_from_slice(&ynew);
            std::mem::swap(&mut k1, &mut k7);
            t = t_next;
            let nrm = norm(y);
            if !nrm.is_finite() || nrm > opts.divergence_bound {
                return Err(OdeError::Divergence { t, norm: nrm });
            }
            if last {
                return Ok(stats);
            }
            let fac = if e == 0.0 { 10.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 10.0) };
            let fac = if reject_streak { fac.min(1.0) } else { fac };
            reject_streak = false;
            h *= fac;
        } else {
            stats.rejected += 1;
            reject_streak = true;
            h *= (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
}
