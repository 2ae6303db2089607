//! Acceptance criteria for the gliding-top toolkit. Prints one PASS/FAIL
//! line per criterion and exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use gltop::analysis::{
    classify_stability, detect_convergence, e2_boundary_derivative, verify_no_gn_zero_solutions, ConvergenceCriteria,
    Limit, VerticalSpin,
};
use gltop::chart::{euler_to_vector, vector_to_euler};
use gltop::checks::{euler_rate_scales, random_interior_state};
use gltop::dynamics::{
    derivatives_euler, derivatives_vector, energy_dissipation_rate, total_energy_euler, vertical_momentum_rate,
};
use gltop::integrator::{integrate, IntegratorConfig, Termination, Trajectory};
use gltop::{ConstantFriction, PhysicalParams, VectorState};
use gltop_validation::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn outcome(id: u32, title: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome {
        id,
        title,
        passed,
        detail,
    }
}

fn plain_run(start: &VectorState, p: &PhysicalParams, mu: f64, t_end: f64) -> Trajectory {
    let cfg = IntegratorConfig {
        t_end,
        convergence: None,
        ..Default::default()
    };
    let friction = ConstantFriction::new(mu).unwrap();
    integrate(start, p, &friction, &cfg).expect("integration runs")
}

fn criterion_1(p: &PhysicalParams, traj: &Trajectory) -> Outcome {
    let l30 = traj.samples[0].scalars.l3;
    let drift = traj.max_l3_drift() / l30.abs();
    let full = traj.termination == Termination::TimeEnd;
    outcome(
        1,
        "axial momentum conservation",
        full && drift < L3_REL_DRIFT,
        format!(
            "max |dL3|/|L3| = {drift:.3e} (< {L3_REL_DRIFT:e}) over {:.1} s, termination {:?}, L3 = {l30:.6} (I3*150 = {:.6})",
            traj.last().t,
            traj.termination,
            p.i3() * 150.0
        ),
    )
}

fn criterion_2(p: &PhysicalParams, traj: &Trajectory) -> Outcome {
    let friction = ConstantFriction::new(0.3).unwrap();
    let eps_e = ENERGY_STEP_SLACK * (1.0 + traj.samples[0].scalars.energy.abs());
    let rise = traj.max_energy_increase();
    let mut worst = 0.0f64;
    let mut used = 0usize;
    for s in &traj.samples {
        if s.scalars.va_norm <= MIN_GLIDE {
            continue;
        }
        let energy = |v: &VectorState| total_energy_euler(&vector_to_euler(v, p).unwrap().0, p);
        let fd = flow_rate(&s.state, p, &friction, &energy).unwrap();
        let exact = energy_dissipation_rate(&s.state, p, &friction).unwrap();
        worst = worst.max((fd - exact).abs() / exact.abs());
        used += 1;
    }
    outcome(
        2,
        "energy monotonicity and dissipation identity",
        rise <= eps_e && used > 0 && worst < RATE_LAW_REL,
        format!(
            "max E rise {rise:.3e} J (eps_E {eps_e:.3e}); FD dE/dt vs -mu gn |vA|^2 max rel err {worst:.3e} (< {RATE_LAW_REL:e}) on {used} samples"
        ),
    )
}

fn criterion_3(p: &PhysicalParams, traj: &Trajectory) -> Outcome {
    let friction = ConstantFriction::new(0.3).unwrap();
    let mut worst = 0.0f64;
    let mut used = 0usize;
    for s in &traj.samples {
        let Ok((e, _)) = vector_to_euler(&s.state, p) else {
            continue;
        };
        if e.nuy.abs() <= MIN_GLIDE {
            continue;
        }
        let fd = flow_rate(&s.state, p, &friction, &|v: &VectorState| v.momentum.z).unwrap();
        let exact = vertical_momentum_rate(&e, p, &friction).unwrap();
        worst = worst.max((fd - exact).abs() / exact.abs());
        used += 1;
    }
    outcome(
        3,
        "vertical momentum rate law",
        used > 0 && worst < RATE_LAW_REL,
        format!("FD d(L.z)/dt vs l mu gn nu_y sin(theta) max rel err {worst:.3e} (< {RATE_LAW_REL:e}) on {used} samples"),
    )
}

fn criterion_4(p: &PhysicalParams) -> Outcome {
    let traj = plain_run(&tilted_start(p), p, 0.0, 10.0);
    let first = traj.samples[0].scalars;
    let e_drift = traj
        .samples
        .iter()
        .map(|s| (s.scalars.energy - first.energy).abs() / first.energy.abs())
        .fold(0.0, f64::max);
    let lz_drift = traj
        .samples
        .iter()
        .map(|s| (s.scalars.lz - first.lz).abs() / first.lz.abs())
        .fold(0.0, f64::max);
    let full = traj.termination == Termination::TimeEnd;
    outcome(
        4,
        "frictionless limit",
        full && e_drift < CLASSICAL_REL_DRIFT && lz_drift < CLASSICAL_REL_DRIFT,
        format!(
            "max rel drift E {e_drift:.3e}, L.z {lz_drift:.3e} (< {CLASSICAL_REL_DRIFT:e}) over {:.1} s",
            traj.last().t
        ),
    )
}

fn criterion_5(p: &PhysicalParams) -> Outcome {
    let friction = ConstantFriction::new(0.3).unwrap();
    let mg = p.m() * p.g();
    let mut max_rate = 0.0f64;
    let mut max_gn_ulps = 0.0f64;
    let mut max_wander = 0.0f64;
    for omega3 in [-300.0, -20.0, 0.0, 75.0, 400.0] {
        for start in [VectorState::upright_spin(p, omega3), VectorState::inverted_spin(p, omega3)] {
            let d = derivatives_vector(&start, p, &friction).unwrap();
            max_rate = max_rate.max(d.rate.norm());
            max_gn_ulps = max_gn_ulps.max((d.gn - mg).abs() / (f64::EPSILON * mg));
            let traj = plain_run(&start, p, 0.3, 5.0);
            let y0 = start.to_flat();
            let wander = traj
                .samples
                .iter()
                .map(|s| (s.state.to_flat() - y0).amax())
                .fold(0.0, f64::max);
            max_wander = max_wander.max(wander);
        }
    }
    outcome(
        5,
        "vertical spins are fixed points",
        max_rate < FIXED_POINT_RATE && max_gn_ulps <= 4.0 && max_wander == 0.0,
        format!(
            "max rate norm {max_rate:.3e} (< {FIXED_POINT_RATE:e}), max |gn - mg| {max_gn_ulps:.1} ulp, max state change over 5 s {max_wander:.1e}"
        ),
    )
}

#[derive(Debug)]
struct LaunchResult {
    ratio: f64,
    limit: Limit,
    left_cap_at: Option<f64>,
}

fn launch_and_watch(theta0: f64, ratio: f64, p: &PhysicalParams, t_end: f64) -> LaunchResult {
    let friction = ConstantFriction::new(0.3).unwrap();
    let start = launch(theta0, ratio * p.upright_threshold(), p);
    let cfg = IntegratorConfig {
        t_end,
        ..Default::default()
    };
    let traj = integrate(&start, p, &friction, &cfg).unwrap();
    let limit = detect_convergence(&traj, p, &ConvergenceCriteria::default()).limit;
    let cap = TILT_CAP.cos();
    let left_cap_at = traj.samples.iter().find(|s| s.state.axis.z < cap).map(|s| s.t);
    LaunchResult {
        ratio,
        limit,
        left_cap_at,
    }
}

fn criterion_6(p: &PhysicalParams) -> Outcome {
    let threshold = p.upright_threshold();
    let threshold_ok = (threshold - REFERENCE_THRESHOLD).abs() <= 4.0 * f64::EPSILON * REFERENCE_THRESHOLD;

    let above = launch_and_watch(0.3, 1.3, p, 300.0);
    let below = launch_and_watch(0.3, 0.7, p, 300.0);
    let above_ok = above.limit == Limit::Upright;
    let below_ok = below.limit != Limit::Upright && (below.limit == Limit::Inverted || below.left_cap_at.is_some());

    let mut disagreements = Vec::new();
    for ratio in [0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 2.0] {
        let predicted = classify_stability(ratio * threshold, p).upright_stable;
        let observed = launch_and_watch(0.3, ratio, p, 300.0);
        if predicted != (observed.limit == Limit::Upright) {
            disagreements.push(format!("{ratio}x predicted stable={predicted} observed {:?}", observed.limit));
        }
    }
    outcome(
        6,
        "upright stability threshold",
        threshold_ok && above_ok && below_ok && disagreements.is_empty(),
        format!(
            "threshold {threshold:.12} (hand value {REFERENCE_THRESHOLD:.12}); 1.3x -> {:?} (left {TILT_CAP} rad at {:?} s), expected Upright; \
             0.7x -> {:?} (left at {:?} s); classifier disagreements: [{}]",
            above.limit,
            above.left_cap_at,
            below.limit,
            below.left_cap_at,
            disagreements.join("; ")
        ),
    )
}

fn criterion_7(p: &PhysicalParams) -> Outcome {
    let threshold = p.upright_threshold();
    let mut ok = true;
    let mut parts = Vec::new();
    for ratio in [0.0, 0.5, 1.0, 2.0] {
        let r = launch_and_watch(PI - 0.3, ratio, p, 300.0);
        let d = e2_boundary_derivative(VerticalSpin::Inverted, ratio * threshold, p);
        ok &= r.limit == Limit::Inverted && d > 0.0;
        parts.push(format!("{}x -> {:?}, E2'(-1) = {d:.4}", r.ratio, r.limit));
    }
    outcome(7, "inverted spin always stable", ok, parts.join("; "))
}

fn criterion_8(p: &PhysicalParams) -> Outcome {
    let friction = ConstantFriction::new(0.3).unwrap();
    let report = verify_no_gn_zero_solutions(p, &friction, 2400, 8).unwrap();
    let mg = p.m() * p.g();
    outcome(
        8,
        "no solutions on gn = 0",
        report.departed >= 1000 && report.counterexamples == 0 && report.max_initial_gn < 1e-9 * mg,
        format!(
            "{} states constructed ({} directions without a root): {} departed within 1e-2 s, {} stayed, \
             {} runs hit a singular reaction-force denominator first; smallest departure {:.3e}, max |gn| at start {:.2e} N",
            report.constructed,
            report.root_find_failures,
            report.departed,
            report.counterexamples,
            report.breakdowns,
            report.min_departure,
            report.max_initial_gn
        ),
    )
}

fn criterion_9(p: &PhysicalParams) -> Outcome {
    let friction = ConstantFriction::new(0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut rate_err, mut trip_err) = (0.0f64, 0.0f64);
    let mut n = 0;
    while n < 10_000 {
        let (e, phi) = random_interior_state(&mut rng);
        let v = euler_to_vector(&e, phi, p);
        let (Ok(ed), Ok(vd)) = (derivatives_euler(&e, p, &friction), derivatives_vector(&v, p, &friction)) else {
            continue;
        };
        n += 1;
        let pushed = pushforward_fd(&v, &vd.rate.to_flat(), p).unwrap();
        let direct = ed.rate.to_array();
        let scales = euler_rate_scales(&e, ed.gn, ed.mu, p);
        for k in 0..6 {
            let denom = direct[k].abs().max(pushed[k].abs()).max(scales[k]);
            if denom > 0.0 {
                rate_err = rate_err.max((direct[k] - pushed[k]).abs() / denom);
            }
        }
        let (back, phi_back) = vector_to_euler(&v, p).unwrap();
        for (a, b) in back.to_array().iter().zip(e.to_array()) {
            trip_err = trip_err.max((a - b).abs() / b.abs().max(1.0));
        }
        let dphi = (phi_back - phi).rem_euclid(2.0 * PI);
        trip_err = trip_err.max(dphi.min(2.0 * PI - dphi));
    }
    outcome(
        9,
        "cross-chart equivalence",
        rate_err < CROSS_CHART_REL && trip_err < ROUND_TRIP,
        format!(
            "{n} states: max componentwise rel err {rate_err:.3e} (< {CROSS_CHART_REL:e}), round trip {trip_err:.3e} (< {ROUND_TRIP:e})"
        ),
    )
}

fn criterion_10(p: &PhysicalParams) -> Outcome {
    let friction = ConstantFriction::frictionless();
    let start = tilted_start(p);
    // Richardson-extrapolated reference from two much finer runs.
    let fine = rk4_endpoint(&start, 1.0 / 8192.0, 8192, p, &friction).unwrap();
    let finer = rk4_endpoint(&start, 1.0 / 16384.0, 16384, p, &friction).unwrap();
    let reference = finer + (finer - fine) / 15.0;

    let errors: Vec<f64> = [250usize, 500, 1000, 2000]
        .iter()
        .map(|&n| (rk4_endpoint(&start, 1.0 / n as f64, n, p, &friction).unwrap() - reference).amax())
        .collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|r| (RK4_RATIO.0..=RK4_RATIO.1).contains(r));
    outcome(
        10,
        "fixed RK4 order",
        ok,
        format!(
            "endpoint errors {:?} for h = 1/250..1/2000; ratios {:?} (in [{}, {}])",
            errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>(),
            RK4_RATIO.0,
            RK4_RATIO.1
        ),
    )
}

fn main() -> ExitCode {
    let p = reference_params();
    let shared = plain_run(&tilted_start(&p), &p, 0.3, 10.0);

    let criteria: Vec<(u32, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, Box::new(|| criterion_1(&p, &shared))),
        (2, Box::new(|| criterion_2(&p, &shared))),
        (3, Box::new(|| criterion_3(&p, &shared))),
        (4, Box::new(|| criterion_4(&p))),
        (5, Box::new(|| criterion_5(&p))),
        (6, Box::new(|| criterion_6(&p))),
        (7, Box::new(|| criterion_7(&p))),
        (8, Box::new(|| criterion_8(&p))),
        (9, Box::new(|| criterion_9(&p))),
        (10, Box::new(|| criterion_10(&p))),
    ];

    let mut failed = Vec::new();
    for (id, run) in &criteria {
        let t0 = Instant::now();
        let o = run();
        println!("{o} [{:.2} s]", t0.elapsed().as_secs_f64());
        if !o.passed {
            failed.push(*id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of {} criteria failed: {failed:?}", failed.len(), criteria.len());
        ExitCode::FAILURE
    }
}
