//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails. Tolerances are pinned below.

use std::process::ExitCode;
use std::time::Instant;

use swarmctl::config::{InitialData, RunConfig};
use swarmctl::diagnostics::{check_invariants, max_speed, velocity_bound_cv, wellposedness_margin};
use swarmctl::dynamics::{ModelParams, Order};
use swarmctl::geometry::Particles;
use swarmctl::integrate::{integrate_forward, ControlGrid, SwarmState, TimeGrid};
use swarmctl::objective::{
    finite_difference_gradient, position_variance, probe_control, relative_error, FdOptions,
    Problem,
};
use swarmctl::optimizer::{optimize, OptimizeConfig, Termination};

const GRADCHECK_TOL: f64 = 1e-3;
const UNRENORM_DRIFT_TOL: f64 = 1e-6;
const RENORM_DRIFT_TOL: f64 = 1e-12;
const GEODESIC_TOL: f64 = 1e-8;
const HALVING_RATIO: (f64, f64) = (12.0, 20.0);
const ZERO_CONTROL_BOUND_PER_T: f64 = 4.0;
const CONSENSUS_VARIANCE_TOL: f64 = 1e-3;
const VARIANCE_REDUCTION: f64 = 0.5;

const ORDERS: [Order; 2] = [Order::First, Order::Second];

struct Check {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Check);

fn check(pass: bool, detail: String) -> Check {
    Check { pass, detail }
}

fn config(order: Order, seed: u64) -> RunConfig {
    RunConfig {
        order,
        seed,
        ..RunConfig::default()
    }
}

fn problem(cfg: &RunConfig) -> Problem {
    Problem::new(
        cfg.order,
        cfg.initial_state().unwrap(),
        cfg.model_params(),
        cfg.renorm,
    )
    .unwrap()
}

fn gradient_consistency() -> Check {
    let mut worst: f64 = 0.0;
    for order in ORDERS {
        for seed in 0..5 {
            let mut cfg = config(order, seed);
            cfg.params.n = 3;
            cfg.params.horizon = 1.0;
            cfg.velocity_scale = 0.3;
            let p = problem(&cfg);
            let grid = p.grid();
            let u = probe_control(&grid, 3, 3, seed);
            let g = p.evaluate(&u).unwrap().gradient;
            let fd = finite_difference_gradient(
                &p,
                &u,
                &FdOptions {
                    seed,
                    ..FdOptions::default()
                },
            )
            .unwrap();
            worst = worst.max(relative_error(&g, &fd, &grid));
        }
    }
    check(
        worst <= GRADCHECK_TOL,
        format!("worst relative error {worst:.3e} over 5 seeds x 2 orders (tol {GRADCHECK_TOL:e})"),
    )
}

fn manifold_invariants() -> Check {
    let (mut raw_norm, mut raw_tan, mut ren_norm, mut ren_tan) = (0f64, 0f64, 0f64, 0f64);
    for order in ORDERS {
        for seed in 0..3 {
            for renorm in [false, true] {
                let mut cfg = config(order, seed);
                cfg.renorm = renorm;
                let p = problem(&cfg);
                let u = probe_control(&p.grid(), cfg.params.n, cfg.params.d, seed);
                let traj = p.forward(&u).unwrap();
                let inv = check_invariants(&traj, &u);
                if renorm {
                    ren_norm = ren_norm.max(inv.max_norm_drift);
                    ren_tan = ren_tan.max(inv.max_tangency_drift);
                } else {
                    raw_norm = raw_norm.max(inv.max_norm_drift);
                    raw_tan = raw_tan.max(inv.max_tangency_drift);
                }
            }
        }
    }
    check(
        raw_norm.max(raw_tan) <= UNRENORM_DRIFT_TOL && ren_norm.max(ren_tan) <= RENORM_DRIFT_TOL,
        format!(
            "raw norm {raw_norm:.2e} tangency {raw_tan:.2e} (tol {UNRENORM_DRIFT_TOL:e}); renormalized norm {ren_norm:.2e} tangency {ren_tan:.2e} (tol {RENORM_DRIFT_TOL:e})"
        ),
    )
}

fn geodesic_error(dt: f64) -> f64 {
    let p = ModelParams {
        n: 1,
        kappa: 0.0,
        gamma: 0.0,
        horizon: 1.0,
        dt,
        ..ModelParams::default()
    };
    let grid = TimeGrid::from_params(&p).unwrap();
    let init = SwarmState::second_order(
        Particles::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap(),
        Particles::from_rows(&[vec![0.0, 1.0, 0.0]]).unwrap(),
    )
    .unwrap();
    let traj = integrate_forward(
        Order::Second,
        &init,
        &ControlGrid::zeros(&grid, 1, 3),
        &p,
        false,
    )
    .unwrap();
    let exact = [1f64.cos(), 1f64.sin(), 0.0];
    traj.terminal()
        .x
        .row(0)
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn closed_form_geodesic() -> Check {
    let fine = geodesic_error(0.01);
    let ratio = geodesic_error(0.02) / fine;
    check(
        fine <= GEODESIC_TOL && (HALVING_RATIO.0..=HALVING_RATIO.1).contains(&ratio),
        format!(
            "error {fine:.2e} at dt=0.01 (tol {GEODESIC_TOL:e}); halving ratio {ratio:.2} (range [{}, {}])",
            HALVING_RATIO.0, HALVING_RATIO.1
        ),
    )
}

fn zero_control_bound() -> Check {
    let mut worst: f64 = 0.0;
    let mut bound = 0.0;
    for order in ORDERS {
        for seed in 0..20 {
            let cfg = config(order, seed);
            bound = ZERO_CONTROL_BOUND_PER_T * cfg.params.horizon;
            let p = problem(&cfg);
            worst = worst.max(p.cost(&p.zero_control()).unwrap().total);
        }
    }
    check(
        worst <= bound,
        format!("max J(0) {worst:.4} over 20 seeds x 2 orders (bound {bound})"),
    )
}

fn velocity_bound() -> Check {
    let mut tightest = f64::INFINITY;
    let mut all = true;
    for seed in 0..10 {
        let mut cfg = config(Order::Second, seed);
        cfg.params.horizon = 0.2;
        cfg.params.kappa = 0.1;
        cfg.velocity_scale = 0.5 + 0.25 * seed as f64;
        let p = problem(&cfg);
        let u = p.zero_control();
        let traj = p.forward(&u).unwrap();
        let v0 = max_speed(&p.initial);
        let margin = wellposedness_margin(&p.params, v0, 0.0);
        let cv = velocity_bound_cv(&p.params, v0, 0.0);
        let observed = check_invariants(&traj, &u).max_speed;
        match cv {
            Ok(cv) if margin < 1.0 && observed <= cv => tightest = tightest.min(cv - observed),
            _ => all = false,
        }
    }
    check(
        all,
        format!("10 instances with margin < 1, smallest slack C_V - max_speed {tightest:.3e}"),
    )
}

fn consensus_emergence() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let mut cfg = config(Order::First, seed);
        cfg.initial = InitialData::Hemisphere;
        cfg.params.horizon = 40.0;
        let p = problem(&cfg);
        let traj = p.forward(&p.zero_control()).unwrap();
        worst = worst.max(position_variance(traj.terminal()));
    }
    check(
        worst <= CONSENSUS_VARIANCE_TOL,
        format!("max terminal variance {worst:.2e} over 3 seeds (tol {CONSENSUS_VARIANCE_TOL:e})"),
    )
}

fn controlled_vs_uncontrolled() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for order in ORDERS {
        let cfg = config(order, 0);
        let p = problem(&cfg);
        let report = optimize(&p, &cfg.optimize).unwrap();
        let controlled = position_variance(p.forward(&report.u_star).unwrap().terminal());
        let free = position_variance(p.forward(&p.zero_control()).unwrap().terminal());
        let ratio = controlled / free;
        let j0 = report.history[0].cost.total;
        let best = report.best().cost.total;
        pass &= ratio <= VARIANCE_REDUCTION && best < j0;
        parts.push(format!(
            "order {}: variance ratio {ratio:.2e}, best cost {best:.4} < J(0) {j0:.4}",
            order.as_u8()
        ));
    }
    check(
        pass,
        format!("{} (ratio tol {VARIANCE_REDUCTION})", parts.join("; ")),
    )
}

fn optimizer_hygiene() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for order in ORDERS {
        let mut cfg = config(order, 0);
        cfg.initial = InitialData::Consensus;
        let p = problem(&cfg);
        let r = optimize(&p, &cfg.optimize).unwrap();
        let ok = r.iterations == 0
            && r.termination == Termination::TolReached
            && r.u_star.max_norm() == 0.0;
        pass &= ok;
        parts.push(format!(
            "consensus order {} stops at iteration {}",
            order.as_u8(),
            r.iterations
        ));

        let mut energies = Vec::new();
        for lambda in [0.1, 10.0, 1000.0] {
            let mut cfg = config(order, 0);
            cfg.params.lambda = lambda;
            let p = problem(&cfg);
            let r = optimize(&p, &OptimizeConfig::default()).unwrap();
            let grid = p.grid();
            energies.push(r.u_star.weighted_norm(&grid).powi(2));
        }
        pass &= energies.windows(2).all(|w| w[1] < w[0]);
        parts.push(format!(
            "order {} energies {:.3e} > {:.3e} > {:.3e}",
            order.as_u8(),
            energies[0],
            energies[1],
            energies[2]
        ));
    }
    check(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("gradient consistency", gradient_consistency),
        ("manifold invariants", manifold_invariants),
        ("closed-form geodesic", closed_form_geodesic),
        ("zero-control cost bound", zero_control_bound),
        ("velocity a priori bound", velocity_bound),
        ("control-free consensus", consensus_emergence),
        ("controlled vs uncontrolled", controlled_vs_uncontrolled),
        ("optimizer hygiene", optimizer_hygiene),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let c = f();
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} [{}] {name}: {} ({:.1}s)",
            i + 1,
            c.detail,
            start.elapsed().as_secs_f64()
        );
        failures += usize::from(!c.pass);
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
