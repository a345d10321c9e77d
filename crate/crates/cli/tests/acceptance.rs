//! Acceptance gate. Every criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cuk_pllf::{preset, Scenario, PRESET_NAMES};
use cuk_pllf_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct PresetRun {
    run: SimRun,
    metrics: Metrics,
    equil: EquilibriumPoint,
    wall: Duration,
}

fn simulate(s: &Scenario) -> PresetRun {
    let start = Instant::now();
    let run = run_simulation(&s.params, &s.op, &s.polytope, &s.sim).expect("preset simulates");
    let wall = start.elapsed();
    let equil = equilibrium(&s.params, &s.op).unwrap();
    let window = default_steady_window(&run).expect("steady window");
    let metrics = compute_metrics(&run, &equil, window).expect("metrics");
    PresetRun {
        run,
        metrics,
        equil,
        wall,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reference_op() -> (ConverterParams, OperatingSpec) {
    (
        ConverterParams::reference(),
        OperatingSpec::new(0.5, 1e-5).unwrap(),
    )
}

fn equilibrium_point() -> Outcome {
    let (p, op) = reference_op();
    let x = equilibrium(&p, &op).map_err(|e| e.to_string())?.x_bar;
    let want = [2.0, 2.0, 20.0, -10.0];
    let worst = (0..4).map(|i| rel(x[i], want[i])).fold(0.0, f64::max);
    check(
        worst <= 1e-12,
        format!("x̄ = {:?}, worst relative error {worst:.1e}", x.0),
    )
}

fn coefficients() -> Outcome {
    let expected: [(&str, [Option<f64>; 4]); 4] = [
        ("fig2", [Some(40.0), Some(-20.0), None, None]),
        ("fig3", [Some(40.0), Some(20.0), None, None]),
        ("fig4", [Some(40.0), Some(-20.0), Some(-0.2), None]),
        ("fig5", [Some(40.0), Some(-30.0), Some(-0.2), Some(-0.8)]),
    ];
    let mut worst: f64 = 0.0;
    for (name, k) in expected {
        let s = preset(name).unwrap();
        worst = worst.max(rel(s.polytope.rho(), 2.5e-5));
        for (j, want) in (1..=4).zip(k) {
            match (s.polytope.coefficient(j), want) {
                (Some(got), Some(want)) => worst = worst.max(rel(got, want)),
                (None, None) => {}
                (got, want) => return Err(format!("{name} k{j}: got {got:?}, want {want:?}")),
            }
        }
    }
    check(
        worst <= 1e-12,
        format!("rho and k_j for all presets, worst relative error {worst:.1e}"),
    )
}

fn certificates() -> Outcome {
    let mut count = 0;
    for name in PRESET_NAMES {
        let s = preset(name).unwrap();
        let (on, off) = build_subsystems(&s.params, &s.op).unwrap();
        for pair in paper_certificates(&s.polytope).map_err(|e| e.to_string())? {
            let r = verify_certificate(&pair, &on, &off);
            if !(r.pass && r.lr > 0.0) {
                return Err(format!("{name} j={}: {r:?}", r.j));
            }
            if r.j == 1 && !(r.la1r == 0.0 && rel(r.la2r, -4e4) <= 1e-9) {
                return Err(format!("{name} j=1: LA1R={} LA2R={}", r.la1r, r.la2r));
            }
            count += 1;
        }
    }
    check(
        count == 11,
        format!("{count} certificates pass; j=1 gives LA1R = 0, LA2R = -4e4"),
    )
}

fn fig2_steady_state(fig2: &PresetRun) -> Outcome {
    let m = &fig2.metrics;
    let x_bar = fig2.equil.x_bar;
    let ripple = fig2.equil.ripple;
    let mut failures = Vec::new();
    if rel(m.period_measured, 1e-5) > 0.02 {
        failures.push(format!("period {:.5e}", m.period_measured));
    }
    if rel(m.duty_measured, 0.5) > 0.02 {
        failures.push(format!("duty {:.5}", m.duty_measured));
    }
    for i in 0..4 {
        if (m.mean[i] - x_bar[i]).abs() > ripple[i] / 2.0 {
            failures.push(format!(
                "mean[{i}] {} vs {} ± {}",
                m.mean[i],
                x_bar[i],
                ripple[i] / 2.0
            ));
        }
        let tol = if i == 3 { 0.15 } else { 0.05 };
        if rel(m.ripple_measured[i], ripple[i]) > tol {
            failures.push(format!(
                "ripple[{i}] {} vs {}",
                m.ripple_measured[i], ripple[i]
            ));
        }
    }
    let summary = format!(
        "period {:.4e} s, duty {:.4}, ripple {:?}, {} toggles ({} in the last 2.5 ms), wall {:.0} ms",
        m.period_measured,
        m.duty_measured,
        m.ripple_measured.0,
        m.switch_count,
        fig2.run.toggles().filter(|e| e.t >= 2.5e-3).count(),
        fig2.wall.as_secs_f64() * 1e3
    );
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", failures.join(", ")))
    }
}

fn lyapunov_bound(runs: &BTreeMap<&str, PresetRun>) -> Outcome {
    let worst: Vec<String> = runs
        .iter()
        .map(|(n, r)| format!("{n} {:.9}", r.metrics.max_v_steady))
        .collect();
    check(
        runs.values().all(|r| r.metrics.max_v_steady <= 1.0 + 1e-6),
        format!("max V in steady window: {}", worst.join(", ")),
    )
}

fn polytope_invariance() -> Outcome {
    let s = preset("fig2").unwrap();
    let (on, off) = build_subsystems(&s.params, &s.op).unwrap();
    let x_bar = equilibrium(&s.params, &s.op).unwrap().x_bar;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let mut escapes = 0;
    let mut worst_v: f64 = 0.0;
    let mut worst_eps: f64 = 0.0;
    for _ in 0..100 {
        let mut y0 = Vec4::zeros();
        for j in s.polytope.indices().iter() {
            y0[j - 1] = rng.gen_range(-1.0..=1.0) / s.polytope.coefficient(j).unwrap().abs();
        }
        let mut cfg = SimConfig::defaults(&s.op, 50.0 * s.op.period);
        cfg.x0 = x_bar + y0;
        let run = run_simulation(&s.params, &s.op, &s.polytope, &cfg).map_err(|e| e.to_string())?;
        // Localization bound: the largest realized rate of change of any
        // controlled k_j y_j, times the event tolerance.
        let scaled_rate = |f: Vec4| {
            s.polytope
                .scaled(&f)
                .map(|(_, v)| v.abs())
                .fold(0.0, f64::max)
        };
        let rate = run
            .trace
            .iter()
            .map(|t| {
                let y = t.x - x_bar;
                scaled_rate(on.shifted_field(&y)).max(scaled_rate(off.shifted_field(&y)))
            })
            .fold(0.0, f64::max);
        let eps = rate * cfg.event_tol;
        let v = run.trace.iter().map(|t| t.v).fold(0.0, f64::max);
        worst_eps = worst_eps.max(eps);
        worst_v = worst_v.max(v);
        if v > 1.0 + eps {
            escapes += 1;
        }
    }
    check(
        escapes == 0,
        format!(
            "{escapes}/100 starts leave P; worst V {worst_v:.4}, epsilon up to {worst_eps:.1e}"
        ),
    )
}

fn overshoot_ordering(runs: &BTreeMap<&str, PresetRun>) -> Outcome {
    let (a, b) = (
        &runs["fig2"].metrics.overshoot,
        &runs["fig3"].metrics.overshoot,
    );
    check(
        b[0] > a[0] && b[3] > a[3],
        format!(
            "i_L1: fig3 {:.4} vs fig2 {:.4}; v_C2: fig3 {:.4} vs fig2 {:.4}",
            b[0], a[0], b[3], a[3]
        ),
    )
}

fn transient_ordering(runs: &BTreeMap<&str, PresetRun>) -> Outcome {
    let (f4, f5) = (
        runs["fig4"].metrics.settle_time,
        runs["fig5"].metrics.settle_time,
    );
    let detail = format!("settle fig5 {f5:?} s vs fig4 {f4:?} s");
    match (f4, f5) {
        (Some(a), Some(b)) => check(b > a, detail),
        _ => Err(detail),
    }
}

fn rk4(model: &SubsystemModel, y0: Vec4, horizon: f64, h: f64) -> Vec4 {
    let f = |y: Vec4| model.shifted_field(&y);
    let mut y = y0;
    for _ in 0..(horizon / h).round() as usize {
        let k1 = f(y);
        let k2 = f(y + k1 * (h / 2.0));
        let k3 = f(y + k2 * (h / 2.0));
        let k4 = f(y + k3 * h);
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    y
}

fn integrator_oracle() -> Outcome {
    let (p, op) = reference_op();
    let (on, off) = build_subsystems(&p, &op).unwrap();
    let x_bar = equilibrium(&p, &op).unwrap().x_bar;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut starts = vec![-x_bar, Vec4::zeros()];
    for _ in 0..8 {
        starts.push(Vec4::new([0.0; 4].map(|_| rng.gen_range(-1.0..1.0))) * 5.0);
    }
    let mut worst: f64 = 0.0;
    for model in [&on, &off] {
        for y0 in &starts {
            let exact = propagate_exact(model, y0, 1e-6).map_err(|e| e.to_string())?;
            let oracle = rk4(model, *y0, 1e-6, 1e-10);
            worst = worst.max((exact - oracle).max_abs() / oracle.max_abs());
        }
    }
    check(
        worst <= 1e-8,
        format!(
            "both subsystems, {} starts, worst relative error {worst:.1e}",
            starts.len()
        ),
    )
}

fn algebraic_identities() -> Outcome {
    let p = ConverterParams::reference();
    let (mut worst_res, mut worst_shift): (f64, f64) = (0.0, 0.0);
    for i in 0..20 {
        let d = 0.1 + 0.8 * i as f64 / 19.0;
        let op = OperatingSpec::new(d, 1e-5).unwrap();
        let (on, off) = build_subsystems(&p, &op).unwrap();
        let x_bar = equilibrium(&p, &op).unwrap().x_bar;
        let residual = averaged_balance_residual(&p, &op).unwrap();
        let a = d / (1.0 - d);
        for r in 0..4 {
            // Row magnitude of the terms that cancel in each identity.
            let row = |m: &SubsystemModel| {
                (0..4).map(|c| (m.a[(r, c)] * x_bar[c]).abs()).sum::<f64>() + m.b[r].abs()
            };
            let scale = d * row(&on) + (1.0 - d) * row(&off);
            worst_res = worst_res.max(residual[r].abs() / scale);
            let scale = row(&off).max(a * row(&on));
            worst_shift = worst_shift.max((off.b_shift[r] + a * on.b_shift[r]).abs() / scale);
        }
    }
    check(
        worst_res <= 1e-9 && worst_shift <= 1e-13,
        format!("20 duty ratios in [0.1, 0.9]: residual {worst_res:.1e}, shift identity {worst_shift:.1e}"),
    )
}

fn main() -> ExitCode {
    let runs: BTreeMap<&str, PresetRun> = std::thread::scope(|scope| {
        let handles: Vec<_> = PRESET_NAMES
            .iter()
            .map(|&name| (name, scope.spawn(move || simulate(&preset(name).unwrap()))))
            .collect();
        handles
            .into_iter()
            .map(|(n, h)| (n, h.join().expect("preset run")))
            .collect()
    });

    let criteria: Vec<Criterion> = vec![
        ("equilibrium", Box::new(equilibrium_point)),
        ("coefficients", Box::new(coefficients)),
        ("certificates", Box::new(certificates)),
        (
            "fig2 steady state",
            Box::new(|| fig2_steady_state(&runs["fig2"])),
        ),
        ("Lyapunov bound", Box::new(|| lyapunov_bound(&runs))),
        ("polytope invariance", Box::new(polytope_invariance)),
        ("overshoot ordering", Box::new(|| overshoot_ordering(&runs))),
        ("transient ordering", Box::new(|| transient_ordering(&runs))),
        ("integrator oracle", Box::new(integrator_oracle)),
        ("algebraic identities", Box::new(algebraic_identities)),
    ];
    let mut failed = 0;
    for (n, (name, criterion)) in criteria.iter().enumerate() {
        match criterion() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", n + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
