//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pnhybrid::bounds::{
    audit_a_operator, audit_degree_weights, audit_kernels, audit_norm_equivalence, kernel_functions,
};
use pnhybrid::grid::{l2_norm, MomentField, ScalarField, SpatialGrid};
use pnhybrid::harmonics::{angular_seminorm, MomentVector};
use pnhybrid::harness::config::parse_str;
use pnhybrid::harness::coupling_audit;
use pnhybrid::harness::fit::{fit_and_check, loglog_slope};
use pnhybrid::harness::manufactured::{manufactured, ProblemParams};
use pnhybrid::harness::measure::{measure, OraclePolicy};
use pnhybrid::harness::sweep::{run_sweep, SweepRow};
use pnhybrid::harness::SolverKind;
use pnhybrid::transport::{absorption_wrap, solve_pn, ProblemSpec, Source, TimeProfile};

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn coupling() -> Verdict {
    let c = coupling_audit(9);
    verdict(
        c.passed(),
        match c.violations.first() {
            Some(v) => format!(
                "{} checks, {} violations (first: {v:?})",
                c.evaluated,
                c.violations.len()
            ),
            None => format!("{} checks, 0 violations", c.evaluated),
        },
    )
}

fn approximation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut evaluated, mut worst, mut bad) = (0usize, f64::NEG_INFINITY, 0usize);
    for j in 0..1000 {
        let s = 1 + (j % 3) as u32;
        let l = rng.gen_range(s as usize..=24);
        let mut u = MomentVector::zeros(l);
        for c in u.coeffs_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
        let semi = angular_seminorm(&u, s);
        for n in (s as usize - 1)..=15 {
            let lhs = u.tail(n).norm();
            let rhs = (n as f64 + 1.0).powi(-(s as i32)) * semi;
            evaluated += 1;
            worst = worst.max(lhs / rhs);
            if lhs > rhs + 1e-13 {
                bad += 1;
            }
        }
    }
    verdict(
        bad == 0,
        format!("{evaluated} checks, {bad} violations, max ratio {worst:.6}"),
    )
}

fn norm_equivalence() -> Verdict {
    let [lower, upper] = audit_norm_equivalence(3, 1000, 7);
    verdict(
        lower.passed() && upper.passed(),
        format!(
            "lower: {} violations of {} (first: {}); upper: {} violations of {}",
            lower.violations.len(),
            lower.evaluated,
            lower.violations.first().map(String::as_str).unwrap_or("-"),
            upper.violations.len(),
            upper.evaluated
        ),
    )
}

fn a_operator() -> Verdict {
    let c = audit_a_operator(3);
    verdict(
        c.passed(),
        format!("{} checks, {} violations", c.evaluated, c.violations.len()),
    )
}

fn kernels() -> Verdict {
    let ids = audit_kernels();
    let small = kernel_functions(1e-4).unwrap();
    let large = kernel_functions(100.0).unwrap();
    let mut notes = Vec::new();
    let mut ok = ids.passed();
    for (n, b_small, b_large, fact) in [
        (1, small.beta1, large.beta1, 2.0),
        (2, small.beta2, large.beta2, 6.0),
        (3, small.beta3, large.beta3, 24.0),
    ] {
        let lim = b_small / 1e-4 * fact;
        let far = b_large * 100.0;
        let fine = (lim - 1.0).abs() < 1e-3 && (0.9..=1.1).contains(&far);
        ok &= fine;
        notes.push(format!(
            "beta{n}: (n+1)!·beta/tau={lim:.6} at 1e-4, 100·beta={far:.4} at 100"
        ));
    }
    verdict(
        ok,
        format!(
            "identities {} violations; {}",
            ids.violations.len(),
            notes.join("; ")
        ),
    )
}

fn energy_and_mass() -> Verdict {
    let p = ProblemParams {
        eps: 0.5,
        sigma_t: 1.0,
        ..Default::default()
    };
    let times: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
    let mut ok = true;
    let mut notes = Vec::new();
    for name in ["iso-smooth", "aniso-decay"] {
        let m = manufactured(name, &p).unwrap();
        let traj = solve_pn(&m.spec, 5, &times).unwrap();
        let rise = traj
            .norms
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        let mean0 = traj.states[0].scalar_flux().mean();
        let drift = traj
            .states
            .iter()
            .map(|s| (s.scalar_flux().mean() - mean0).abs())
            .fold(0.0, f64::max);
        ok &= rise <= 1e-10 && drift <= 1e-12;
        let mut note = format!("{name}: max norm rise {rise:.2e}, mean drift {drift:.2e}");
        if name == "aniso-decay" {
            let rel = traj
                .times
                .iter()
                .zip(&traj.states)
                .map(|(&t, s)| {
                    let exact = m.exact_moments(t, 5).unwrap();
                    l2_norm(&s.difference(&exact).unwrap()) / l2_norm(&exact)
                })
                .fold(0.0, f64::max);
            ok &= rel <= 1e-10;
            note += &format!(", decay rel err {rel:.2e}");
        }
        notes.push(note);
    }
    verdict(ok, notes.join("; "))
}

fn streaming_exactness() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for dt in [1.0, 0.25] {
        let m = manufactured(
            "streaming",
            &ProblemParams {
                dt,
                ..Default::default()
            },
        )
        .unwrap();
        let e = measure(&m, SolverKind::Hybrid, 3, &OraclePolicy::default(), None).unwrap();
        ok &= e.error < 1e-8;
        notes.push(format!("dt={dt}: {:.2e}", e.error));
    }
    verdict(ok, notes.join(", "))
}

fn sweep(cfg: &str) -> Vec<SweepRow> {
    run_sweep(&parse_str(cfg).expect("bundled config parses")).expect("sweep runs")
}

fn spectral_rate(rows: &[SweepRow]) -> Verdict {
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64 + 1.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let slope = loglog_slope(&xs, &ys).unwrap_or(f64::NAN);
    verdict(
        slope <= -1.5 && rows.len() == 5,
        format!(
            "slope {slope:.3}, errors {:?}",
            ys.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn diffusion_limit(rows: &[SweepRow]) -> Verdict {
    let mut r: Vec<&SweepRow> = rows.iter().collect();
    r.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let ys: Vec<f64> = r.iter().map(|r| r.error).collect();
    let ok = r.len() == 4 && ys.windows(2).all(|w| w[1] < w[0]);
    verdict(
        ok,
        format!(
            "gaps for eps 0.5..0.0625: {:?}",
            ys.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn hybrid_dt(diffusive: &[SweepRow], streaming: &[SweepRow]) -> Verdict {
    let max = diffusive.iter().map(|r| r.error).fold(0.0, f64::max);
    let min = diffusive
        .iter()
        .map(|r| r.error)
        .fold(f64::INFINITY, f64::min);
    let a = diffusive.len() == 4 && max < 2.0 * min;
    let mut s: Vec<&SweepRow> = streaming.iter().collect();
    s.sort_by(|a, b| b.dt.total_cmp(&a.dt));
    let ys: Vec<f64> = s.iter().map(|r| r.error).collect();
    let xs: Vec<f64> = s.iter().map(|r| r.dt).collect();
    let slope = loglog_slope(&xs, &ys).unwrap_or(f64::NAN);
    let b = s.len() == 4 && ys.windows(2).all(|w| w[1] <= w[0]) && slope >= 1.0;
    verdict(
        a && b,
        format!(
            "(a) max/min {:.4}; (b) errors {:?}, slope {slope:.3}",
            max / min,
            ys.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn conformance(rows: &[SweepRow]) -> Verdict {
    let c = fit_and_check(rows).unwrap();
    let used_all = c.families.iter().all(|f| f.rows_used > 0);
    let flagged: usize = c.families.iter().map(|f| f.flagged).sum();
    let fits: Vec<String> = c
        .families
        .iter()
        .map(|f| {
            format!(
                "{}/{}: C={:.3e} over {} rows",
                f.solver, f.problem, f.c, f.rows_used
            )
        })
        .collect();
    let violations: usize = c.families.iter().map(|f| f.violations.len()).sum();
    let over = rows
        .iter()
        .filter(|r| r.has_bound() && !r.flagged())
        .filter(|r| {
            let f = c
                .families
                .iter()
                .find(|f| f.solver == r.solver.as_str() && f.problem == r.problem)
                .unwrap();
            r.error > f.c * r.bound * (1.0 + 1e-12) + 1e-300
        })
        .count();
    verdict(
        c.passed() && used_all && over == 0 && !c.families.is_empty(),
        format!("{}; {violations} zero-bound violations, {over} rows above C·bound, {flagged} flagged rows excluded", fits.join(", ")),
    )
}

fn absorption() -> Verdict {
    let grid = SpatialGrid::new(1, 5).unwrap();
    let cx = ScalarField::cosine(grid, [1, 0, 0], 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for eps in [1.0, 0.5] {
        for with_source in [false, true] {
            let g = manufactured(
                "sobolev-s",
                &ProblemParams {
                    eps,
                    sigma_t: 1.0,
                    sigma_a: 0.5,
                    ..Default::default()
                },
            )
            .unwrap()
            .spec
            .g;
            let q = if with_source {
                let mut v = MomentVector::zeros(1);
                v.set(0, 0, 1.0);
                v.set(1, 1, 0.4);
                Source::single(
                    MomentField::separable(&cx, &v),
                    TimeProfile {
                        rate: -0.3,
                        poly: vec![1.0, 0.5],
                    },
                )
            } else {
                Source::zero()
            };
            let spec = ProblemSpec {
                eps,
                sigma_t: 1.0,
                sigma_a: 0.5,
                g,
                q,
                t_final: 1.0,
                dt: 1.0,
            };
            let wrap = absorption_wrap(&spec).unwrap();
            let times = [0.25, 0.5, 1.0];
            let direct = solve_pn(&spec, 6, &times).unwrap();
            let tr = solve_pn(&wrap.scattering, 6, &times).unwrap();
            for ((&t, d), s) in direct.times.iter().zip(&direct.states).zip(&tr.states) {
                let back = s.scaled(wrap.post_scale(t));
                worst = worst.max(l2_norm(&back.difference(d).unwrap()));
            }
        }
    }
    verdict(worst < 1e-10, format!("max difference {worst:.2e}"))
}

fn inequality_audit() -> Verdict {
    let c = audit_degree_weights(5, 64);
    verdict(
        c.passed(),
        format!("{} checks, {} violations", c.evaluated, c.violations.len()),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, limit: Duration, run: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = run();
        let took = start.elapsed();
        let in_time = took <= limit;
        let ok = v.ok && in_time;
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2} {:<28} {}{} [{:.2} s]",
            if ok { "PASS" } else { "FAIL" },
            id,
            name,
            v.detail,
            if in_time { "" } else { " (over time limit)" },
            took.as_secs_f64()
        );
    };
    report(1, "coupling oracle", secs(10), &mut coupling);
    report(2, "approximation property", secs(5), &mut approximation);
    report(3, "norm equivalence", secs(5), &mut norm_equivalence);
    report(4, "smoothing operator", secs(30), &mut a_operator);
    report(5, "kernel identities", secs(5), &mut kernels);
    report(6, "energy decay and mass", secs(30), &mut energy_and_mass);
    report(
        7,
        "hybrid streaming exactness",
        secs(60),
        &mut streaming_exactness,
    );

    let mut spectral = Vec::new();
    report(8, "spectral rate", secs(600), &mut || {
        spectral = sweep(include_str!("../../core/configs/spectral_rate.cfg"));
        spectral_rate(&spectral)
    });
    let mut diffusion = Vec::new();
    report(9, "diffusion limit", secs(600), &mut || {
        diffusion = sweep(include_str!("../../core/configs/diffusion_limit.cfg"));
        diffusion_limit(&diffusion)
    });
    let (mut diffusive, mut streaming) = (Vec::new(), Vec::new());
    report(10, "hybrid dt behaviour", secs(900), &mut || {
        diffusive = sweep(include_str!("../../core/configs/hybrid_diffusive.cfg"));
        streaming = sweep(include_str!("../../core/configs/hybrid_streaming.cfg"));
        hybrid_dt(&diffusive, &streaming)
    });
    let all: Vec<SweepRow> = [spectral, diffusion, diffusive, streaming].concat();
    report(11, "bound conformance", secs(5), &mut || conformance(&all));
    report(12, "absorption transform", secs(60), &mut absorption);
    report(13, "inequality audit", secs(1), &mut inequality_audit);

    println!("{} of 13 criteria failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
