//! One PASS/FAIL line per acceptance criterion. Red criteria are reported,
//! not asserted, so the whole list is always printed.
//!
//! Built without the libtest harness so the lines show in a plain
//! `cargo test` run: cargo test -p hybridlink-core --test acceptance

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{params, rel, table2};
use hybridlink::curve::{run_sweep, Evaluators, McSettings, MetricSpec};
use hybridlink::e2e_metrics::*;
use hybridlink::fso_link::{fso_snr_cdf, fso_snr_pdf, gml_pdf, FsoParams, RytovTerms};
use hybridlink::monte_carlo::{sample_rf_gain, simulate_metric, Estimator, Metric, SimulationPlan};
use hybridlink::rf_link::{kg_moment, rf_snr_cdf, rf_snr_pdf, DiscriminantPolicy, RfParams};
use hybridlink::scenario::{Detection, ScenarioConfig, User};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specfun::{bessel_k, gamma, gamma_p, gamma_q, ln_gamma_real, meijer_g, quad, MbOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = std::result::Result<Outcome, String>;

fn outcome(pass: bool, detail: impl Into<String>) -> Check {
    Ok(Outcome { pass, detail: detail.into() })
}

fn run(id: u32, name: &str, f: impl FnOnce() -> Check) -> bool {
    let t = Instant::now();
    let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(o)) => (o.pass, o.detail),
        Ok(Err(e)) => (false, format!("error: {e}")),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    println!(
        "{} [{id}] {name} ({:.1} s): {detail}",
        if pass { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64()
    );
    pass
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn th(cfg: &ScenarioConfig) -> f64 {
    cfg.threshold()
}

fn op_at(cfg: &ScenarioConfig, user: User, db: f64) -> std::result::Result<f64, String> {
    let p = E2EParams::derive(cfg, user, db, DiscriminantPolicy::ComplexModulus).map_err(e)?;
    outage_probability(cfg.threshold(), &p).map_err(e)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

/// Pins the reflection-user mean RF SNR so that OP(π/6, 50 dB) = 0.010.
fn calibrated() -> std::result::Result<(ScenarioConfig, f64), String> {
    let mut cfg = table2();
    cfg.zenith_ogs = PI / 6.0;
    cfg.detection = Detection::Heterodyne;
    let (mut lo, mut hi) = (-50.0, -25.0);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        cfg.gamma_r_override_db.r = Some(mid);
        if op_at(&cfg, User::R, 50.0)? > 0.010 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v = 0.5 * (lo + hi);
    cfg.gamma_r_override_db.r = Some(v);
    Ok((cfg, v))
}

fn angle_sweep(mut cfg: ScenarioConfig, detection: Detection, targets: [f64; 3], tol: f64) -> Check {
    cfg.detection = detection;
    let mut got = Vec::new();
    let mut pass = true;
    for (div, target) in [7.0, 6.0, 5.0].into_iter().zip(targets) {
        cfg.zenith_ogs = PI / div;
        let op = op_at(&cfg, User::R, 50.0)?;
        pass &= rel(op, target) <= tol;
        got.push(op);
    }
    outcome(pass, format!("OP [{}] vs [{}] (±{:.0}%)", fmt_list(&got), fmt_list(&targets), tol * 100.0))
}

fn criterion_1() -> Check {
    let t = Instant::now();
    let (cfg, v) = calibrated()?;
    let mut o = angle_sweep(cfg, Detection::Heterodyne, [0.0079, 0.010, 0.022], 0.2)?;
    o.detail = format!("reflection override {v:.3} dB; {}", o.detail);
    o.pass &= t.elapsed().as_secs_f64() < 60.0;
    Ok(o)
}

fn criterion_2() -> Check {
    let (cfg, _) = calibrated()?;
    angle_sweep(cfg, Detection::Imdd, [0.058, 0.088, 0.14], 0.2)
}

fn criterion_3() -> Check {
    let (mut cfg, _) = calibrated()?;
    let targets = [0.18, 0.043, 0.0011];
    let mut got = Vec::new();
    let mut pass = true;
    for (n, target) in [2, 3, 4].into_iter().zip(targets) {
        cfg.n_fso = n;
        let op = op_at(&cfg, User::R, 50.0)?;
        pass &= rel(op, target) <= 0.25;
        got.push(op);
    }
    outcome(pass, format!("N_F = 2, 3, 4: OP [{}] vs [{}] (±25%)", fmt_list(&got), fmt_list(&targets)))
}

fn capacity_at(cfg: &ScenarioConfig) -> std::result::Result<f64, String> {
    let p = E2EParams::derive(cfg, User::T, 40.0, DiscriminantPolicy::ComplexModulus).map_err(e)?;
    ergodic_capacity(&p, capacity_constant(&p)).map_err(e)
}

fn criterion_4() -> Check {
    let base = table2();
    let a = base.aperture_radius;
    let mut jitter = Vec::new();
    for f in [0.5, 1.0, 1.5] {
        let mut cfg = base.clone();
        cfg.jitter_source = f * a;
        cfg.jitter_oirs = f * a;
        cfg.jitter_lens = f * a;
        jitter.push(capacity_at(&cfg)?);
    }
    let mut elements = Vec::new();
    for n in [9, 16, 36] {
        let mut cfg = base.clone();
        cfg.n_ris = n;
        elements.push(capacity_at(&cfg)?);
    }
    let within = |got: &[f64], want: &[f64]| got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 0.2);
    let ordered = jitter.windows(2).all(|w| w[0] > w[1]) && elements.windows(2).all(|w| w[0] < w[1]);
    let pass = ordered && within(&jitter, &[1.7, 1.2, 0.8]) && within(&elements, &[1.0, 1.6, 1.9]);
    outcome(
        pass,
        format!(
            "jitter 0.5/1/1.5 a_l: [{}] vs [1.7, 1.2, 0.8]; N_R 9/16/36: [{}] vs [1.0, 1.6, 1.9]; ordering {}",
            fmt_list(&jitter),
            fmt_list(&elements),
            if ordered { "ok" } else { "wrong" }
        ),
    )
}

fn criterion_5() -> Check {
    let t = Instant::now();
    let cfg = table2();
    let base = params(&cfg, User::R, 50.0);
    let grid = hybridlink::curve::grid(20.0, 60.0, 2.0).map_err(e)?;
    let ev = Evaluators {
        exact: true,
        asymptotic: false,
        mc: Some(McSettings { samples: 1_000_000, seed: 2024, streams: 64 }),
    };
    let specs = [
        ("op", MetricSpec::Op { threshold: cfg.threshold() }),
        ("ber", MetricSpec::Ber { scheme: ModulationScheme::parse("bpsk").map_err(e)? }),
        ("capacity", MetricSpec::Capacity { c0: capacity_constant(&base) }),
        ("moment", MetricSpec::Moment { order: 1.0 }),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, spec) in specs {
        let curve = run_sweep(&spec, &base, &grid, &ev).map_err(e)?;
        let mut ok = 0;
        let mut worst = (0.0, 0.0);
        for row in &curve.rows {
            let (Some(x), Some(m), Some(se)) = (row.exact, row.mc_estimate, row.mc_stderr) else {
                continue;
            };
            // every draw landed on the same side (OP next to 1 at low SNR):
            // fall back to the binomial standard error of the exact value
            let se = if se == 0.0 && name == "op" { (x * (1.0 - x) / 1e6).sqrt() } else { se };
            let z = if se > 0.0 { (x - m).abs() / se } else if x == m { 0.0 } else { f64::INFINITY };
            if z <= 3.0 {
                ok += 1;
            }
            if z > worst.0 {
                worst = (z, row.gamma_h_db);
            }
        }
        pass &= ok == grid.len();
        parts.push(format!("{name} {ok}/{} (worst {:.1}σ at {} dB)", grid.len(), worst.0, worst.1));
    }
    pass &= t.elapsed().as_secs_f64() < 600.0;
    outcome(pass, format!("reflection user, 1e6 samples: {}", parts.join("; ")))
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_6() -> Check {
    let (cfg, _) = calibrated()?;
    let mut pass = true;
    let mut parts = Vec::new();
    for r in [1, 2] {
        let p = params(&cfg, User::R, 50.0).with_order(r);
        let d = diversity_order(&p);
        let (mut lx, mut ly) = (Vec::new(), Vec::new());
        let mut worst_ratio = (1.0f64, 0.0);
        let mut db = 20.0;
        while db <= 160.0 {
            let q = p.with_mean_h_db(db);
            let op = e2e_cdf(th(&cfg), &q).map_err(e)?;
            if op < 1e-8 {
                break;
            }
            if op <= 1e-4 {
                lx.push(q.mean_h.ln());
                ly.push(op.ln());
            }
            if op <= 1e-3 {
                let ratio = e2e_cdf_asymptotic(th(&cfg), &q).map_err(e)? / op;
                if (ratio - 1.0).abs() > (worst_ratio.0 - 1.0).abs() {
                    worst_ratio = (ratio, db);
                }
            }
            db += 2.0;
        }
        if lx.len() < 2 {
            return Err(format!("r = {r}: fewer than two points with 1e-8 <= OP <= 1e-4"));
        }
        let slope = -least_squares_slope(&lx, &ly);
        let ok = rel(slope, d) <= 0.02 && (worst_ratio.0 - 1.0).abs() <= 0.1;
        pass &= ok;
        parts.push(format!(
            "r = {r}: slope {slope:.4} vs D {d:.4} ({:.1}%), worst asymptote/exact {:.3} at {} dB",
            100.0 * rel(slope, d),
            worst_ratio.0,
            worst_ratio.1
        ));
    }
    outcome(pass, parts.join("; "))
}

fn random_params(base: &E2EParams, rng: &mut ChaCha8Rng) -> std::result::Result<(E2EParams, f64), String> {
    let s = rng.gen_range(0.3..6.0);
    let rytov = RytovTerms { uplink: 0.5 * s, downlink: 0.5 * s, total: s };
    let mut gml = base.fso.gml;
    gml.q_g = rng.gen_range(0.7..1.0);
    gml.varpi = rng.gen_range(1.5..10.0);
    let n_f = rng.gen_range(1..=4);
    let r = rng.gen_range(1..=2);
    let fso = FsoParams::from_parts(base.fso.h_p, gml, rytov, n_f, r, 5).map_err(e)?;
    let mut rf = base.rf.clone();
    rf.k = rng.gen_range(1.2..30.0);
    rf.m = rng.gen_range(1.2..30.0);
    rf.psi = (rf.k * rf.m).sqrt() * rng.gen_range(0.5..2.0);
    rf.mean_snr = 10f64.powf(rng.gen_range(-4.5..-2.5));
    let c = rng.gen_range(0.5..2.0);
    let p = E2EParams::new(fso, rf, c, 10f64.powf(rng.gen_range(3.0..6.0))).map_err(e)?;
    Ok((p, 1.585 * rng.gen_range(0.3..3.0)))
}

fn criterion_7() -> Check {
    let base = params(&table2(), User::R, 50.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut bad = 0;
    let mut skipped = 0;
    let mut done = 0;
    while done < 50 {
        let (p, g) = random_params(&base, &mut rng)?;
        let exact = e2e_cdf(g, &p).map_err(e)?;
        // relative error is not meaningful against quadrature noise below this
        if !(1e-9..=0.999).contains(&exact) {
            skipped += 1;
            continue;
        }
        let oracle = oracle::nested_cdf(g, &p).map_err(e)?;
        let err = rel(exact, oracle);
        worst = worst.max(err);
        if err > 1e-4 {
            bad += 1;
        }
        done += 1;
    }
    let opts = MbOptions::default();
    let g = |m, n, a: &[f64], b: &[f64], x| meijer_g(m, n, a, b, x, &opts).map(|v| v.value).map_err(e);
    let mut id = 0.0f64;
    for x in [1e-3, 0.2, 4.0, 25.0] {
        id = id.max(rel(g(1, 0, &[], &[0.7], x)?, x.powf(0.7) * (-x).exp()));
    }
    for (b1, b2, x) in [(2.3, 1.1, 0.05), (5.0, 0.5, 3.0), (1.5, 1.5, 1e-3), (0.0, 0.0, 1.0)] {
        let k = 2.0 * f64::powf(x, 0.5 * (b1 + b2)) * bessel_k(b1 - b2, 2.0 * f64::sqrt(x)).map_err(e)?;
        id = id.max(rel(g(2, 0, &[], &[b1, b2], x)?, k));
    }
    for (a, x) in [(0.5, 0.3), (2.5, 4.0), (7.3, 2.0), (1.0, 20.0)] {
        let ga = gamma(a).map_err(e)?;
        id = id.max(rel(g(1, 1, &[1.0], &[a, 0.0], x)?, ga * gamma_p(a, x).map_err(e)?));
        id = id.max(rel(g(2, 0, &[1.0], &[0.0, a], x)?, ga * gamma_q(a, x).map_err(e)?));
    }
    // CDFs normalized by Γ(a) or Γ(α)Γ(β) reach one
    for a in [0.5, 2.5, 7.3] {
        id = id.max(rel(g(1, 1, &[1.0], &[a, 0.0], 400.0)? / gamma(a).map_err(e)?, 1.0));
    }
    for (a, b) in [(4.2, 1.9), (12.99, 3.21)] {
        let norm = (ln_gamma_real(a).map_err(e)? + ln_gamma_real(b).map_err(e)?).exp();
        id = id.max(rel(g(2, 1, &[1.0], &[a, b, 0.0], 2e4)? / norm, 1.0));
    }
    outcome(
        bad == 0 && id <= 1e-8,
        format!(
            "fox vs nested: {}/50 within 1e-4 (worst {worst:.2e}, {skipped} draws outside 1e-9..0.999 redrawn); Meijer identities worst {id:.2e}",
            50 - bad
        ),
    )
}

fn criterion_8() -> Check {
    let cfg = table2();
    let geom = hybridlink::scenario::derive_geometry(&cfg).map_err(e)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for user in [User::T, User::R] {
        let p0 = RfParams::derive(&cfg, &geom, user, DiscriminantPolicy::ComplexModulus).map_err(e)?;
        let mut worst = (0.0f64, 0);
        for n_r in 1..=64 {
            let p = RfParams::build(
                user,
                p0.m_a,
                p0.m_l,
                p0.omega_a,
                p0.omega_l,
                n_r,
                p0.budget,
                p0.rho,
                DiscriminantPolicy::ComplexModulus,
            )
            .map_err(e)?;
            for (n, target) in [(2, p.m2), (4, p.m4), (6, p.m6)] {
                let err = rel(kg_moment(p.k, p.m, p.psi, n), target);
                if err > worst.0 {
                    worst = (err, n_r);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(80 + user as u64);
        let n = 1_000_000;
        let mut x = sample_rf_gain(&p0, n, &mut rng).map_err(e)?;
        x.sort_by(f64::total_cmp);
        let ks = x
            .iter()
            .enumerate()
            .step_by(41)
            .map(|(i, r)| {
                let c = rf_snr_cdf(p0.mean_snr * r * r, &p0).unwrap_or(f64::NAN);
                (c - i as f64 / n as f64).abs().max((c - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        pass &= worst.0 <= 1e-9 && ks < 0.01;
        parts.push(format!(
            "{user} (m {}, {}; {:?} fit): worst moment error {:.2e} at N_R = {}, KS {ks:.4}",
            p0.m_a, p0.m_l, p0.branch, worst.0, worst.1
        ));
    }
    outcome(pass, parts.join("; "))
}

fn mass_over_ln<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let (x, w) = quad::composite_gl(lo, hi, 24);
    x.iter().zip(&w).map(|(u, wi)| wi * u.exp() * f(u.exp())).sum()
}

/// Five-point stencil, only where the CDF is away from 0 and 1.
fn fd_error<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(cdf: F, pdf: G, points: &[f64]) -> f64 {
    points
        .iter()
        .filter(|&&g| (1e-4..=1.0 - 1e-4).contains(&cdf(g)))
        .map(|&g| {
            let h = 1e-3 * g;
            let d = (8.0 * (cdf(g + h) - cdf(g - h)) - (cdf(g + 2.0 * h) - cdf(g - 2.0 * h))) / (12.0 * h);
            rel(d, pdf(g))
        })
        .fold(0.0, f64::max)
}

fn monotone<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> bool {
    let mut last = f64::NEG_INFINITY;
    (0..=60).all(|i| {
        let v = f(lo * (hi / lo).powf(i as f64 / 60.0));
        let ok = v >= last - 1e-13 && (-1e-13..=1.0 + 1e-13).contains(&v);
        last = v;
        ok
    })
}

fn criterion_9() -> Check {
    let cfg = table2();
    let p = params(&cfg, User::R, 50.0);
    let t = params(&cfg, User::T, 40.0);
    let fso = &p.fso;
    let mean = p.mean_h;
    let mut parts = Vec::new();
    let mut pass = true;

    let g = fso.gml;
    let gml_mass = quad::integrate(
        |l: f64| gml_pdf(g.a0 * (-l).exp(), &g) * g.a0 * (-l).exp(),
        0.0,
        60.0 / (g.c() - g.d()),
        1e-13,
        1e-12,
    )
    .map_err(e)?
    .value;
    let hi = (1e6 * mean).ln();
    let fso_mass = mass_over_ln(|x| fso_snr_pdf(x, mean, fso).unwrap_or(f64::NAN), hi - 60.0, hi);
    let rf = &p.rf;
    let rf_mean = rf.mean_snr * rf.m2;
    let rf_hi = rf_mean.ln();
    let rf_mass = mass_over_ln(|x| rf_snr_pdf(x, rf).unwrap_or(f64::NAN), rf_hi - 40.0, rf_hi + 6.0);
    let centre = (t.mean_h * t.fso.gain_moment(t.r())).ln();
    let e2e_mass = mass_over_ln(|x| e2e_pdf(x, &t).unwrap_or(f64::NAN), centre - 14.0, centre + 8.0);
    let worst = [gml_mass, fso_mass, rf_mass, e2e_mass].iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    pass &= worst <= 1e-3;
    parts.push(format!("normalization worst {worst:.1e}"));

    let mono = monotone(|x| e2e_cdf(x, &p).unwrap_or(f64::NAN), 1e-2, 1e4)
        && monotone(|x| fso_snr_cdf(x, mean, fso).unwrap_or(f64::NAN), 1e-2, 1e6)
        && monotone(|x| rf_snr_cdf(x, rf).unwrap_or(f64::NAN), 1e-6, 1.0);
    pass &= mono;
    parts.push(format!("monotone {mono}"));

    let fd = fd_error(
        |x| e2e_cdf(x, &p).unwrap_or(f64::NAN),
        |x| e2e_pdf(x, &p).unwrap_or(f64::NAN),
        &[0.5, th(&cfg), 5.0, 30.0],
    )
    .max(fd_error(
        |x| fso_snr_cdf(x, mean, fso).unwrap_or(f64::NAN),
        |x| fso_snr_pdf(x, mean, fso).unwrap_or(f64::NAN),
        &[10.0, 1e3, 3e3, 1e4],
    ))
    .max(fd_error(
        |x| rf_snr_cdf(x, rf).unwrap_or(f64::NAN),
        |x| rf_snr_pdf(x, rf).unwrap_or(f64::NAN),
        &[0.5 * rf_mean, rf_mean, 2.0 * rf_mean],
    ));
    pass &= fd <= 1e-6;
    parts.push(format!("derivative worst {fd:.1e}"));

    let mut shift = 0.0f64;
    for q in [0.7, 0.8175, 0.95] {
        let mut gq = fso.gml;
        gq.q_g = q;
        let a = FsoParams::from_parts(fso.h_p, gq, fso.rytov, fso.n_f, fso.r, 5).map_err(e)?;
        let b = FsoParams::from_parts(fso.h_p, gq, fso.rytov, fso.n_f, fso.r, 10).map_err(e)?;
        for i in 0..10 {
            let x = 1e5 * 10f64.powf(-4.0 + 0.45 * i as f64);
            shift = shift.max((fso_snr_cdf(x, 1e5, &a).map_err(e)? - fso_snr_cdf(x, 1e5, &b).map_err(e)?).abs());
        }
    }
    pass &= shift <= 1e-6;
    parts.push(format!("K_F 5 to 10 shift {shift:.1e}"));

    let plan = SimulationPlan { samples: 50_000, seed: 9, streams: 16, metric: Metric::Op, grid_db: vec![40.0, 50.0] };
    let est = Estimator::Outage { threshold: th(&cfg) };
    let runs: Vec<_> = [1, 3, 1]
        .into_iter()
        .map(|n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(e)?;
            pool.install(|| simulate_metric(&plan, &p, &est)).map_err(e)
        })
        .collect::<std::result::Result<_, _>>()?;
    let bits = |r: &Vec<hybridlink::monte_carlo::McPoint>| {
        r.iter().flat_map(|x| [x.estimate.to_bits(), x.stderr.to_bits()]).collect::<Vec<_>>()
    };
    let det = runs.iter().all(|r| bits(r) == bits(&runs[0]));
    pass &= det;
    parts.push(format!("MC bitwise determinism {det}"));
    outcome(pass, parts.join("; "))
}

fn main() {
    let results = [
        run(1, "outage vs incidence angle, heterodyne", criterion_1),
        run(2, "outage vs incidence angle, IM/DD", criterion_2),
        run(3, "outage vs number of FSO links", criterion_3),
        run(4, "capacity anchors", criterion_4),
        run(5, "analytic vs Monte Carlo", criterion_5),
        run(6, "asymptotic outage", criterion_6),
        run(7, "oracle equivalence", criterion_7),
        run(8, "generalized-K moment matching", criterion_8),
        run(9, "property suites", criterion_9),
    ];
    let n = results.iter().filter(|p| **p).count();
    println!("acceptance: {n}/{} criteria pass", results.len());
}
