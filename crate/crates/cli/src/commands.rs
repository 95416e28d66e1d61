//! Command-line parsing and dispatch.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sdstab::certify::{certify_grid, Case, Certifier, GridBox, GridOutcome, SystemDef};
use sdstab::lie::DEFAULT_N_MAX;
use sdstab::simloop::{run_closed_loop, verify_facts, IntervalStatus, LoopConfig, LoopFailure, LoopReport, Partition, Trajectory};
use sdstab::symcalc::EvalPoint;
use sdstab::synth::{m_derivative_estimates, CbhSeries, SynthBudget, SynthError, Synthesizer, CBH_ORDER_MAX, M_ORDER_MAX};
use sdstab::Exec;

use crate::csvout;
use crate::sysfile::load_system;

#[derive(Parser, Debug)]
#[command(name = "sdstab", version, about = "Certify and stabilize control-affine systems with sampled-data feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify one point.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        at: Point,
    },
    /// Classify every point of a grid over a box.
    CertifyGrid {
        #[command(flatten)]
        common: Common,
        /// `lo1:hi1,lo2:hi2,...`
        #[arg(long = "box", value_parser = parse_box, allow_hyphen_values = true)]
        bx: GridBox,
        /// Points per axis, one value for all axes or one per axis.
        #[arg(long, value_delimiter = ',', default_value = "11")]
        res: Vec<usize>,
    },
    /// Synthesize one decrease step.
    Step {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        at: Point,
        /// Upper bound on the step duration.
        #[arg(long, default_value_t = 0.5)]
        xi: f64,
    },
    /// Run the sampled-data closed loop.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        x0: Point,
        /// `uniform:STEP` or `explicit:0,t2,...[:STEP]`; explicit times continue
        /// with spacing STEP, or with the last gap when STEP is omitted.
        #[arg(long, value_parser = parse_partition, default_value = "uniform:0.5")]
        partition: Partition,
        #[arg(long, default_value_t = 50.0)]
        horizon: f64,
        /// Upper bound on the duration of each decrease step.
        #[arg(long, default_value_t = 0.5)]
        xi: f64,
        /// Stop once |x| is at most this.
        #[arg(long, default_value_t = 1e-3)]
        stop_radius: f64,
    },
    /// Estimate derivatives of V along the two-segment program at t = 0.
    DiagnoseM {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        at: Point,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        u1: f64,
        #[arg(long, default_value_t = 2)]
        order: usize,
    },
    /// Compare the composed flow with the truncated exponential series.
    CbhCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        at: Point,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        u1: f64,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Times at which to evaluate the residual.
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.0178,0.0316,0.0562,0.1")]
        t: Vec<f64>,
    },
}

#[derive(Args, Debug)]
pub struct Common {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    pub nmax: usize,
    /// Integrator tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Directory for CSV files, report and plot script.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run on one thread.
    #[arg(long)]
    pub sequential: bool,
}

impl Common {
    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }

    fn load(&self) -> Result<SystemDef> {
        load_system(&self.system).with_context(|| format!("loading {}", self.system.display()))
    }

    fn synthesizer(&self, sys: &SystemDef) -> Result<Synthesizer> {
        let budget = SynthBudget {
            tol: self.tol,
            ..SynthBudget::default()
        };
        Ok(Synthesizer::new(sys, self.nmax, budget, self.exec())?)
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        if let Some(dir) = &self.out {
            write_file(dir, name, contents)?;
        }
        Ok(())
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// How a command finished when it did not error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Inconclusive certificate or no verified step.
    Undecided,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Undecided => 2,
        }
    }
}

/// Comma-separated coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(pub Vec<f64>);

impl std::str::FromStr for Point {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_point(s).map(Point)
    }
}

pub fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("'{c}': {e}")))
        .collect()
}

pub fn parse_box(s: &str) -> Result<GridBox, String> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in s.split(',') {
        let (a, b) = part.split_once(':').ok_or_else(|| format!("'{part}' is not lo:hi"))?;
        let a: f64 = a.trim().parse().map_err(|e| format!("'{a}': {e}"))?;
        let b: f64 = b.trim().parse().map_err(|e| format!("'{b}': {e}"))?;
        if !(a <= b) {
            return Err(format!("empty interval {a}:{b}"));
        }
        lo.push(a);
        hi.push(b);
    }
    Ok(GridBox { lo, hi })
}

pub fn parse_partition(s: &str) -> Result<Partition, String> {
    let (kind, rest) = s.split_once(':').ok_or("expected uniform:STEP or explicit:t1,t2,...")?;
    match kind {
        "uniform" => {
            let step: f64 = rest.trim().parse().map_err(|e| format!("'{rest}': {e}"))?;
            Partition::uniform(step).map_err(|e| e.to_string())
        }
        "explicit" => {
            let (list, step) = match rest.split_once(':') {
                Some((list, step)) => (list, Some(step.trim().parse::<f64>().map_err(|e| format!("'{step}': {e}"))?)),
                None => (rest, None),
            };
            let times = parse_point(list)?;
            if times.len() < 2 {
                return Err("an explicit partition needs at least two times".into());
            }
            let then = step.unwrap_or(times[times.len() - 1] - times[times.len() - 2]);
            Partition::explicit(times, then).map_err(|e| e.to_string())
        }
        other => Err(format!("unknown partition kind '{other}'")),
    }
}

fn point(Point(x): Point, sys: &SystemDef) -> Result<EvalPoint> {
    if x.len() != sys.dim() {
        bail!("point has {} coordinates, the system has dimension {}", x.len(), sys.dim());
    }
    Ok(EvalPoint::new(x))
}

/// Runs one command, writing the summary to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<Status> {
    match cli.command {
        Command::Certify { common, at } => certify(&common, at, stdout),
        Command::CertifyGrid { common, bx, res } => grid(&common, bx, res, stdout),
        Command::Step { common, at, xi } => step(&common, at, xi, stdout),
        Command::Simulate {
            common,
            x0,
            partition,
            horizon,
            xi,
            stop_radius,
        } => simulate(&common, x0, &partition, horizon, xi, stop_radius, stdout),
        Command::DiagnoseM {
            common,
            at,
            rho,
            u1,
            order,
        } => diagnose_m(&common, at, rho, u1, order, stdout),
        Command::CbhCheck {
            common,
            at,
            rho,
            u1,
            k,
            t,
        } => cbh_check(&common, at, rho, u1, k, &t, stdout),
    }
}

fn certify(common: &Common, at: Point, stdout: &mut dyn Write) -> Result<Status> {
    let sys = common.load()?;
    let x = point(at, &sys)?;
    let cert = Certifier::new(&sys, common.nmax)?.certify(&x)?;
    writeln!(stdout, "{cert}")?;
    for w in &cert.witnesses {
        writeln!(stdout, "  {} = {:e}", w.name, w.value)?;
    }
    common.write("certificate.csv", &csvout::certificate_csv(x.coords(), &cert))?;
    Ok(if cert.case == Case::Inconclusive { Status::Undecided } else { Status::Ok })
}

fn grid(common: &Common, bx: GridBox, mut res: Vec<usize>, stdout: &mut dyn Write) -> Result<Status> {
    let sys = common.load()?;
    if bx.lo.len() != sys.dim() {
        bail!("box has {} axes, the system has dimension {}", bx.lo.len(), sys.dim());
    }
    if res.len() == 1 {
        res = vec![res[0]; sys.dim()];
    }
    let entries = certify_grid(&sys, &bx, &res, common.nmax, common.exec())?;
    let mut counts: Vec<(String, usize)> = Vec::new();
    let mut bump = |name: String| match counts.iter_mut().find(|(n, _)| *n == name) {
        Some((_, c)) => *c += 1,
        None => counts.push((name, 1)),
    };
    let mut inconclusive = false;
    let mut failed = 0;
    for e in &entries {
        match &e.outcome {
            GridOutcome::Certified(c) => {
                inconclusive |= c.case == Case::Inconclusive;
                bump(format!("{} N={}", c.case, c.n));
            }
            GridOutcome::SkippedOrigin => bump("skipped (origin)".into()),
            GridOutcome::Failed(_) => {
                failed += 1;
                bump("error".into());
            }
        }
    }
    counts.sort();
    writeln!(stdout, "{} points", entries.len())?;
    for (name, c) in &counts {
        writeln!(stdout, "  {name}: {c}")?;
    }
    common.write("certificate_grid.csv", &csvout::grid_csv(sys.dim(), &entries))?;
    if failed > 0 {
        let first = entries.iter().find_map(|e| match &e.outcome {
            GridOutcome::Failed(err) => Some(format!("{err} at {:?}", e.point.coords())),
            _ => None,
        });
        bail!("{failed} grid points failed; first: {}", first.unwrap_or_default());
    }
    Ok(if inconclusive { Status::Undecided } else { Status::Ok })
}

/// Prints undecided synthesis outcomes and maps them to [`Status::Undecided`].
fn undecided(e: &SynthError, stdout: &mut dyn Write) -> Result<Option<Status>> {
    match e {
        SynthError::Inconclusive(c) => {
            writeln!(stdout, "{c}")?;
            Ok(Some(Status::Undecided))
        }
        SynthError::SynthesisFailed { certificate, .. } => {
            writeln!(stdout, "{certificate}")?;
            writeln!(stdout, "{e}")?;
            Ok(Some(Status::Undecided))
        }
        _ => Ok(None),
    }
}

fn step(common: &Common, at: Point, xi: f64, stdout: &mut dyn Write) -> Result<Status> {
    let sys = common.load()?;
    let x = point(at, &sys)?;
    let synth = common.synthesizer(&sys)?;
    let r = match synth.step(&x, xi) {
        Ok(r) => r,
        Err(e) => match undecided(&e, stdout)? {
            Some(s) => return Ok(s),
            None => return Err(e.into()),
        },
    };
    writeln!(stdout, "{}", r.certificate)?;
    writeln!(stdout, "program: {}", r.program)?;
    writeln!(
        stdout,
        "V: {:e} -> {:e} (drop {:e}, sup ratio {:.6})",
        r.v0, r.v_end, r.drop, r.sup_ratio
    )?;
    let mut prog = String::from("segment,value,duration\n");
    for (i, s) in r.program.segments().iter().enumerate() {
        let _ = writeln!(prog, "{i},{},{}", csvout::num(s.value), csvout::num(s.duration));
    }
    common.write("program.csv", &prog)?;
    common.write("certificate.csv", &csvout::certificate_csv(x.coords(), &r.certificate))?;
    Ok(Status::Ok)
}

/// Human-readable summary of a closed-loop run, facts included.
pub fn report_text(traj: &Trajectory, report: &LoopReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "converged: {}", report.converged);
    let _ = writeln!(s, "final time: {}", report.final_time);
    let _ = writeln!(s, "final state: {:?}", report.final_state);
    let _ = writeln!(s, "final |x|: {:e}", report.final_norm);
    let _ = writeln!(s, "final V: {:e}", report.final_v);
    let _ = writeln!(s, "max overshoot V/V(0): {:.6}", report.max_overshoot);
    let _ = writeln!(s, "min checkpoint drop: {:e}", report.min_drop);
    let _ = writeln!(s, "intervals: {}", report.intervals.len());
    let _ = writeln!(s, "segments applied: {}", traj.segments.len());
    for (level, t) in &report.threshold_times {
        match t {
            Some(t) => _ = writeln!(s, "V <= {level:e} first at t = {t}"),
            None => _ = writeln!(s, "V <= {level:e} not reached"),
        }
    }
    for fact in verify_facts(traj, report) {
        let mark = if fact.passed { "ok" } else { "FAILED" };
        let _ = writeln!(s, "fact {}: {mark} ({})", fact.name, fact.detail);
    }
    s
}

/// One line per partition interval.
pub fn interval_table(report: &LoopReport) -> String {
    let mut s = String::from("interval, t_start, t_end, steps, status\n");
    for iv in &report.intervals {
        let status = match &iv.status {
            IntervalStatus::Completed => "completed".to_string(),
            IntervalStatus::Stopped => "stopped".to_string(),
            IntervalStatus::Failed(m) => format!("failed: {m}"),
        };
        let _ = writeln!(s, "{}, {}, {}, {}, {status}", iv.index, iv.t_start, iv.t_end, iv.steps.len());
    }
    s
}

fn simulate(
    common: &Common,
    x0: Point,
    partition: &Partition,
    horizon: f64,
    xi: f64,
    stop_radius: f64,
    stdout: &mut dyn Write,
) -> Result<Status> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        bail!("horizon {horizon} must be positive");
    }
    if !(xi > 0.0) || !xi.is_finite() {
        bail!("xi {xi} must be positive");
    }
    let sys = common.load()?;
    let x = point(x0, &sys)?;
    let synth = common.synthesizer(&sys)?;
    let cfg = LoopConfig {
        stop_radius,
        tol: common.tol,
        ..LoopConfig::default()
    };
    let (traj, report, failure) = match run_closed_loop(&synth, &x, partition, horizon, xi, &cfg) {
        Ok((t, r)) => (t, r, None),
        Err(e) => {
            let (t, r) = *e.partial;
            (t, r, Some((e.time, e.source)))
        }
    };
    let text = report_text(&traj, &report);
    write!(stdout, "{text}")?;
    let text = format!("{text}{}", interval_table(&report));
    common.write("trajectory.csv", &csvout::trajectory_csv(&traj))?;
    common.write("report.txt", &text)?;
    common.write("plot_trajectory.py", &csvout::plot_script("trajectory.csv", traj.dim))?;
    match failure {
        None => Ok(Status::Ok),
        Some((t, LoopFailure::Synth(e))) => {
            writeln!(stdout, "stopped at t = {t}")?;
            match undecided(&e, stdout)? {
                Some(s) => Ok(s),
                None => Err(anyhow::Error::from(e).context(format!("closed loop failed at t = {t}"))),
            }
        }
        Some((t, e)) => Err(anyhow::Error::from(e).context(format!("closed loop failed at t = {t}"))),
    }
}

fn diagnose_m(common: &Common, at: Point, rho: f64, u1: f64, order: usize, stdout: &mut dyn Write) -> Result<Status> {
    if order == 0 || order > M_ORDER_MAX {
        bail!("--order must be in 1..={M_ORDER_MAX}");
    }
    let sys = common.load()?;
    let x = point(at, &sys)?;
    let d = m_derivative_estimates(&sys, &x, rho, u1, order)?;
    for i in 0..d.values.len() {
        let flag = if d.ill_conditioned[i] { " (ill-conditioned)" } else { "" };
        writeln!(stdout, "m^({})(0) = {:.10e} +/- {:.1e}{flag}", i + 1, d.values[i], d.bound(i + 1))?;
    }
    common.write("m_derivatives.csv", &csvout::m_derivatives_csv(&d))?;
    Ok(Status::Ok)
}

/// Least-squares slope of `log r` against `log t`, over the positive
/// residuals.
pub fn log_log_slope(rows: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|(t, r)| *t > 0.0 && *r > 0.0).map(|(t, r)| (t.ln(), r.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[allow(clippy::too_many_arguments)]
fn cbh_check(
    common: &Common,
    at: Point,
    rho: f64,
    u1: f64,
    k: usize,
    ts: &[f64],
    stdout: &mut dyn Write,
) -> Result<Status> {
    if k > CBH_ORDER_MAX {
        bail!("--k must be at most {CBH_ORDER_MAX}");
    }
    let sys = common.load()?;
    let x = point(at, &sys)?;
    let series = CbhSeries::new(&sys, rho, u1, k)?;
    let mut rows = Vec::with_capacity(ts.len());
    for &t in ts {
        let r = series.residual(&sys, &x, t)?;
        writeln!(stdout, "t = {t:e}: residual {r:.6e}")?;
        rows.push((t, r));
    }
    match log_log_slope(&rows) {
        Some(s) => writeln!(stdout, "log-log slope: {s:.4}")?,
        None => writeln!(stdout, "log-log slope: n/a")?,
    }
    common.write("cbh.csv", &csvout::cbh_csv(k, &rows))?;
    Ok(Status::Ok)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 when undecided, 1 on any error.
pub fn execute<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit with 2 on usage errors, which is taken here.
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return 1;
            }
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    match run(cli, stdout) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            1
        }
    }
}
