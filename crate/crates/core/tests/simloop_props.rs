mod common;

use common::{dblint, example2, system};
use sdstab::ode::{integrate, OdeError, OdeOptions};
use sdstab::simloop::{
    integrate as integrate_program, replay_interval, run_closed_loop, run_many, verify_facts, LoopConfig, Partition, RunSpec,
};
use sdstab::symcalc::EvalPoint;
use sdstab::synth::{ControlProgram, SynthBudget, Synthesizer};
use sdstab::Exec;

/// x' = A x for a stiff-free linear system with a closed-form solution
/// (damped rotation).
fn damped(x: &[f64], dx: &mut [f64]) -> Result<(), OdeError> {
    dx[0] = -0.1 * x[0] + x[1];
    dx[1] = -x[0] - 0.1 * x[1];
    Ok(())
}

fn damped_exact(t: f64) -> [f64; 2] {
    let e = (-0.1 * t).exp();
    [e * t.cos(), -e * t.sin()]
}

fn error_and_steps(tol: f64) -> (f64, usize) {
    let mut y = [1.0, 0.0];
    let stats = integrate(damped, &mut y, 10.0, &OdeOptions::with_tol(tol), |_| {}).unwrap();
    let exact = damped_exact(10.0);
    ((y[0] - exact[0]).hypot(y[1] - exact[1]), stats.accepted)
}

#[test]
fn integrator_order_is_at_least_four() {
    let pts: Vec<(f64, f64)> = [1e-5, 1e-6, 1e-7, 1e-8, 1e-9]
        .iter()
        .map(|tol| {
            let (err, steps) = error_and_steps(*tol);
            ((steps as f64).ln(), err.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    // error ~ steps^(-order)
    assert!(-slope >= 4.0, "observed order {}", -slope);
}

#[test]
fn tighter_tolerance_gives_smaller_error() {
    let (coarse, _) = error_and_steps(1e-6);
    let (fine, _) = error_and_steps(1e-7);
    assert!(fine * 10.0 <= coarse * 1.5, "{coarse} -> {fine}");
    assert!(fine < coarse);
}

#[test]
fn zero_dynamics_leave_the_state_unchanged() {
    let sys = system(&["0", "0"], &["0", "0"], "x1^2 + x2^2");
    let program = ControlProgram::new(vec![
        sdstab::synth::Segment { value: 3.0, duration: 0.4 },
        sdstab::synth::Segment { value: -1.0, duration: 1.1 },
    ])
    .unwrap();
    let traj = integrate_program(&sys, &EvalPoint::new(vec![0.3, -0.7]), &program, 1e-10).unwrap();
    for s in &traj.samples {
        assert_eq!(s.x, vec![0.3, -0.7]);
    }
    assert!((traj.last().unwrap().t - 1.5).abs() < 1e-15);
}

#[test]
fn constant_input_matches_closed_form_on_the_double_integrator() {
    let program = ControlProgram::constant(-0.5, 2.0).unwrap();
    let traj = integrate_program(&dblint(), &EvalPoint::new(vec![1.0, 0.2]), &program, 1e-12).unwrap();
    for s in &traj.samples {
        let t = s.t;
        let x1 = 1.0 + 0.2 * t - 0.25 * t * t;
        let x2 = 0.2 - 0.5 * t;
        assert!((s.x[0] - x1).abs() < 1e-10 && (s.x[1] - x2).abs() < 1e-10, "t = {t}");
    }
}

fn loop_run(sys: &sdstab::certify::SystemDef, x0: &[f64], partition: Partition, horizon: f64, exec: Exec) -> (sdstab::simloop::Trajectory, sdstab::simloop::LoopReport, Synthesizer) {
    let synth = Synthesizer::new(sys, 4, SynthBudget::default(), exec).unwrap();
    let (traj, report) = run_closed_loop(&synth, &EvalPoint::new(x0.to_vec()), &partition, horizon, 0.5, &LoopConfig::default()).unwrap();
    (traj, report, synth)
}

#[test]
fn inputs_depend_only_on_the_state_at_sampling_times() {
    let partition = Partition::explicit(vec![0.0, 0.1, 0.7, 0.8, 2.0], 0.5).unwrap();
    let (traj, report, synth) = loop_run(&example2(), &[1.0, 0.0, 0.0], partition, 8.0, Exec::default());
    assert!(report.intervals.len() >= 8);
    for iv in &report.intervals {
        let replayed = replay_interval(&synth, iv, 0.5, &LoopConfig::default());
        let recorded: Vec<(f64, f64, f64)> =
            traj.segments.iter().filter(|s| s.interval == iv.index).map(|s| (s.t_start, s.t_end, s.u)).collect();
        assert_eq!(replayed, recorded, "interval {}", iv.index);
    }
    // Every input switch lies inside one partition interval.
    for s in &traj.segments {
        let iv = &report.intervals[s.interval];
        assert!(s.t_start >= iv.t_start && s.t_end <= iv.t_end + 1e-12);
    }
}

#[test]
fn closed_loop_runs_are_deterministic_across_execution_modes() {
    let p = Partition::uniform(0.5).unwrap();
    let (a, ra, _) = loop_run(&dblint(), &[1.0, 0.0], p.clone(), 12.0, Exec::Sequential);
    let (b, rb, _) = loop_run(&dblint(), &[1.0, 0.0], p.clone(), 12.0, Exec::Parallel);
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    let synth = Synthesizer::new(&dblint(), 4, SynthBudget::default(), Exec::Parallel).unwrap();
    let specs = vec![
        RunSpec { x0: EvalPoint::new(vec![1.0, 0.0]), partition: p.clone() },
        RunSpec { x0: EvalPoint::new(vec![-0.5, 0.5]), partition: Partition::explicit(vec![0.0, 0.3, 1.0], 0.4).unwrap() },
    ];
    let seq = run_many(&synth, &specs, 12.0, 0.5, &LoopConfig::default(), Exec::Sequential);
    let par = run_many(&synth, &specs, 12.0, 0.5, &LoopConfig::default(), Exec::Parallel);
    assert_eq!(seq, par);
    assert_eq!(seq[0].as_ref().unwrap().0, a);
}

#[test]
fn verify_facts_flags_an_injected_increase() {
    let (mut traj, report, _) = loop_run(&dblint(), &[1.0, 0.0], Partition::uniform(0.5).unwrap(), 10.0, Exec::default());
    assert!(verify_facts(&traj, &report).iter().all(|f| f.passed));
    let k = traj.samples.iter().enumerate().filter(|(_, s)| s.checkpoint).nth(3).unwrap().0;
    traj.samples[k].v *= 10.0;
    let facts = verify_facts(&traj, &report);
    let decrease = facts.iter().find(|f| f.name == "checkpoint_decrease").unwrap();
    assert!(!decrease.passed, "{}", decrease.detail);
}

#[test]
fn verify_facts_flags_an_overshoot_between_checkpoints() {
    let (mut traj, report, _) = loop_run(&dblint(), &[1.0, 0.0], Partition::uniform(0.5).unwrap(), 10.0, Exec::default());
    let k = traj.samples.iter().position(|s| !s.checkpoint && s.t > 1.0).unwrap();
    traj.samples[k].v = 5.0;
    let facts = verify_facts(&traj, &report);
    assert!(!facts.iter().find(|f| f.name == "growth_bound").unwrap().passed);
}

#[test]
fn run_starting_at_the_origin_passes_vacuously() {
    let (traj, report, _) = loop_run(&dblint(), &[0.0, 0.0], Partition::uniform(0.5).unwrap(), 5.0, Exec::default());
    assert!(report.converged);
    assert_eq!(traj.samples[0].x, vec![0.0, 0.0]);
    assert!(verify_facts(&traj, &report).iter().all(|f| f.passed));
}

#[test]
fn checkpoints_sit_on_the_partition() {
    let times = vec![0.0, 0.1, 0.7, 0.8, 2.0];
    let partition = Partition::explicit(times.clone(), 0.5).unwrap();
    let expected = partition.times_until(6.0);
    let (traj, _, _) = loop_run(&dblint(), &[1.0, 0.0], partition, 6.0, Exec::default());
    let cps: Vec<f64> = traj.checkpoints().map(|s| s.t).collect();
    // Steps ending inside an interval add checkpoints of their own.
    for t in &expected {
        assert!(cps.contains(t), "no checkpoint at {t}");
    }
    let mut v = f64::INFINITY;
    for s in traj.checkpoints() {
        assert!(s.v < v);
        v = s.v;
    }
}
