//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use lumisphere::fixture::{make_fixture, random_environment, FixtureRequest, LightingPlan};
use lumisphere::pipeline::{process_sphere, PipelineOptions};
use lumisphere_core::analysis::within_image_report;
use lumisphere_core::circle::{fit_edges_em, m_step, EdgeSet, EmParams};
use lumisphere_core::estimate::{
    estimate_all_channels, normalize_env, sample_sphere, solve_lighting, EstimateOptions, Sample, SampleSet,
};
use lumisphere_core::render::{render_sphere, RenderSpec};
use lumisphere_core::sh::{design_row, sh_basis, CONVOLUTION, NUM_COEFFS};
use lumisphere_core::{Circle, LightingEnv, UnitNormal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_time(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (
        t < limit,
        format!("{:.2}s (limit {}s)", t.as_secs_f64(), limit.as_secs()),
    )
}

fn rel_l2(a: &LightingEnv, b: &LightingEnv) -> f64 {
    let d: f64 = a.0.iter().zip(&b.0).map(|(x, y)| (x - y) * (x - y)).sum();
    d.sqrt() / b.norm()
}

fn sh_closed_forms() -> Outcome {
    let start = Instant::now();
    let pi = std::f64::consts::PI;
    let y00 = 0.5 / pi.sqrt();
    let y1 = (3.0 / (4.0 * pi)).sqrt();
    let y20 = (5.0 / (16.0 * pi)).sqrt();
    let y22 = (15.0 / (16.0 * pi)).sqrt();
    let cases = [
        ([0.0, 0.0, 1.0], [y00, 0.0, y1, 0.0, 0.0, 0.0, 2.0 * y20, 0.0, 0.0]),
        ([1.0, 0.0, 0.0], [y00, 0.0, 0.0, y1, 0.0, 0.0, -y20, 0.0, y22]),
        ([0.0, 1.0, 0.0], [y00, y1, 0.0, 0.0, 0.0, 0.0, -y20, 0.0, -y22]),
    ];
    let tabulated = [
        [0.282095, 0.0, 0.488603, 0.0, 0.0, 0.0, 0.630783, 0.0, 0.0],
        [0.282095, 0.0, 0.0, 0.488603, 0.0, 0.0, -0.315392, 0.0, 0.546274],
        [0.282095, 0.488603, 0.0, 0.0, 0.0, 0.0, -0.315392, 0.0, -0.546274],
    ];
    let mut basis_err: f64 = 0.0;
    let mut table_err: f64 = 0.0;
    let mut factors_exact = true;
    for ((n, expect), table) in cases.iter().zip(&tabulated) {
        let n = UnitNormal::new(n[0], n[1], n[2]).unwrap();
        let y = sh_basis(&n).0;
        let row = design_row(&n);
        for k in 0..NUM_COEFFS {
            basis_err = basis_err.max((y[k] - expect[k]).abs());
            table_err = table_err.max((y[k] - table[k]).abs());
            factors_exact &= row[k] == CONVOLUTION[k] * y[k];
        }
    }
    let factors = [
        pi,
        2.0 * pi / 3.0,
        2.0 * pi / 3.0,
        2.0 * pi / 3.0,
        pi / 4.0,
        pi / 4.0,
        pi / 4.0,
        pi / 4.0,
        pi / 4.0,
    ];
    factors_exact &= CONVOLUTION
        .iter()
        .zip(factors)
        .all(|(a, b)| (a - b).abs() <= 4.0 * f64::EPSILON * b);
    let pole_row = design_row(&UnitNormal::new(0.0, 0.0, 1.0).unwrap());
    let pole_table = [0.886227, 0.0, 1.023327, 0.0, 0.0, 0.0, 0.495416, 0.0, 0.0];
    let row_err = pole_row
        .iter()
        .zip(pole_table)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let (fast, time) = within_time(start, Duration::from_secs(1));
    outcome(
        basis_err < 1e-9 && table_err < 1e-6 && row_err < 1e-6 && factors_exact && fast,
        format!(
            "max |basis - closed form| {basis_err:.1e}, vs 6-digit table {table_err:.1e}, design row {row_err:.1e}, factors exact {factors_exact}, {time}"
        ),
    )
}

/// Renders `env` on a radius-100 disk centered on a pixel of a 256 frame.
fn disk_samples(env: &LightingEnv, noise: Option<(&mut ChaCha8Rng, f64)>) -> (SampleSet, usize) {
    let circle = Circle::new(128.0, 128.0, 100.0).unwrap();
    let spec = RenderSpec {
        size: 256,
        circle,
        background: 0.0,
        shared_scale: None,
    };
    let rendering = render_sphere(env, &spec).unwrap();
    let mut radiance = rendering.radiance.clone();
    if let Some((rng, std)) = noise {
        let normal = Normal::new(0.0, std).unwrap();
        for y in 0..256 {
            for x in 0..256 {
                radiance.set(x, y, radiance.get(x, y) + normal.sample(rng));
            }
        }
    }
    (sample_sphere(&radiance, &circle, 2).unwrap(), rendering.clamped_pixels)
}

fn noiseless_round_trip() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut clamped = 0;
    for seed in 0..100 {
        let env = random_environment(&mut ChaCha8Rng::seed_from_u64(seed));
        let (samples, c) = disk_samples(&env, None);
        clamped += c;
        worst = worst.max(rel_l2(&solve_lighting(&samples).unwrap(), &env));
    }
    let (fast, time) = within_time(start, Duration::from_secs(30));
    outcome(
        worst < 1e-6 && clamped == 0 && fast,
        format!("100 seeds, worst relative L2 {worst:.1e}, clamped pixels {clamped}, {time}"),
    )
}

fn noisy_round_trip() -> Outcome {
    let start = Instant::now();
    let mut errs = Vec::new();
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let env = random_environment(&mut rng);
        let (samples, _) = disk_samples(&env, Some((&mut rng, 0.01)));
        errs.push(rel_l2(&solve_lighting(&samples).unwrap(), &env));
    }
    errs.sort_by(f64::total_cmp);
    let median = 0.5 * (errs[49] + errs[50]);
    let (fast, time) = within_time(start, Duration::from_secs(60));
    outcome(
        median < 0.05 && fast,
        format!(
            "noise std 0.01, median relative L2 {:.2}% (max {:.2}%), {time}",
            100.0 * median,
            100.0 * errs[99]
        ),
    )
}

fn solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let rows = rng.random_range(20..400);
        let truth: [f64; 9] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let samples: SampleSet = (0..rows)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.0..1.0));
                let rho = b.sqrt();
                let normal = UnitNormal::normalize(rho * a.cos(), rho * a.sin(), (1.0 - b).sqrt()).unwrap();
                let clean: f64 = design_row(&normal).iter().zip(&truth).map(|(d, l)| d * l).sum();
                Sample {
                    normal,
                    intensity: clean + rng.random_range(-0.3..0.3),
                }
            })
            .collect();
        let ours = solve_lighting(&samples).unwrap();
        let a = nalgebra::DMatrix::from_fn(rows, 9, |i, j| design_row(&samples.samples()[i].normal)[j]);
        let b = nalgebra::DVector::from_fn(rows, |i, _| samples.samples()[i].intensity);
        let svd = a.svd(true, true).solve(&b, 1e-14).unwrap();
        for k in 0..9 {
            worst = worst.max((ours.0[k] - svd[k]).abs());
        }
    }
    outcome(
        worst < 1e-6,
        format!("50 noisy systems, max |Cholesky - SVD| {worst:.1e}"),
    )
}

fn circumcircle(p: [(f64, f64); 3]) -> (f64, f64, f64) {
    let [(ax, ay), (bx, by), (cx, cy)] = p;
    let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    let s = |x: f64, y: f64| x * x + y * y;
    let ux = (s(ax, ay) * (by - cy) + s(bx, by) * (cy - ay) + s(cx, cy) * (ay - by)) / d;
    let uy = (s(ax, ay) * (cx - bx) + s(bx, by) * (ax - cx) + s(cx, cy) * (bx - ax)) / d;
    (ux, uy, ((ax - ux).powi(2) + (ay - uy).powi(2)).sqrt())
}

fn m_step_exactness() -> Outcome {
    let pts: Vec<(f64, f64)> = [0.0f64, 60.0, 120.0, 200.0, 280.0]
        .iter()
        .map(|d| {
            let t = d.to_radians();
            (2.0 + 3.0 * t.cos(), 1.0 + 3.0 * t.sin())
        })
        .collect();
    let oracle = circumcircle([pts[0], pts[2], pts[3]]);
    let c = m_step(&EdgeSet::from_points(pts)).unwrap();
    let five = (c.cx - oracle.0)
        .abs()
        .max((c.cy - oracle.1).abs())
        .max((c.r - oracle.2).abs());
    let sym = m_step(&EdgeSet::from_points([
        (1.0, 0.0),
        (0.0, 1.0),
        (-1.0, 0.0),
        (0.0, -1.0),
    ]))
    .unwrap();
    let four = sym.cx.abs().max(sym.cy.abs()).max((sym.r - 1.0).abs());
    outcome(
        five < 1e-9 && four < 1e-9,
        format!("five-point error {five:.1e} vs circumcircle, four-point error {four:.1e}"),
    )
}

fn em_robustness() -> Outcome {
    let start = Instant::now();
    let params = EmParams::default();
    let mut ok = 0;
    let mut max_iter = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rng.random_range(80.0..160.0);
        let truth = Circle::new(rng.random_range(200.0..400.0), rng.random_range(200.0..400.0), r).unwrap();
        let jitter = Normal::new(0.0, 1.0).unwrap();
        let mut pts = Vec::with_capacity(400);
        for _ in 0..200 {
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let rr = r + jitter.sample(&mut rng);
            pts.push((truth.cx + rr * t.cos(), truth.cy + rr * t.sin()));
        }
        for _ in 0..200 {
            pts.push((rng.random_range(0.0..600.0), rng.random_range(0.0..600.0)));
        }
        let (off, dir): (f64, f64) = (
            rng.random_range(0.0..20.0),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let annotation = Circle::new(
            truth.cx + off * dir.cos(),
            truth.cy + off * dir.sin(),
            r * (1.0 + rng.random_range(-0.2..0.2)),
        )
        .unwrap();
        let fit = fit_edges_em(&EdgeSet::from_points(pts), &annotation, &params).unwrap();
        let c = fit.circle;
        let err = (c.cx - truth.cx)
            .abs()
            .max((c.cy - truth.cy).abs())
            .max((c.r - truth.r).abs());
        max_iter = max_iter.max(fit.iterations);
        ok += (err < 0.5 && fit.iterations < 100) as usize;
    }
    let (fast, time) = within_time(start, Duration::from_secs(60));
    outcome(
        ok >= 95 && fast,
        format!("{ok}/100 within 0.5 px, max iterations {max_iter}, {time}"),
    )
}

fn pair_combinatorics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let envs: Vec<LightingEnv> = (0..5).map(|_| random_environment(&mut rng)).collect();
    let report = within_image_report(&[envs]).unwrap();
    let mut pairs: Vec<(usize, usize)> = report.pairs.iter().map(|p| (p.first, p.second)).collect();
    pairs.sort();
    pairs.dedup();
    let distinct = pairs.iter().all(|(a, b)| a < b);
    outcome(
        report.pairs.len() == 10 && pairs.len() == 10 && distinct,
        format!(
            "5 environments give {} comparisons ({} distinct unordered)",
            report.pairs.len(),
            pairs.len()
        ),
    )
}

/// Full pipeline on every sphere, then the pooled within-image statistic.
fn within_r2(seeds: std::ops::Range<u64>, lighting: LightingPlan) -> [Option<f64>; 3] {
    let opts = PipelineOptions::default();
    let per_image: Vec<Vec<LightingEnv>> = seeds
        .map(|seed| {
            let scene = make_fixture(&FixtureRequest {
                seed,
                lighting: lighting.clone(),
                ..FixtureRequest::default()
            })
            .unwrap();
            scene
                .annotations
                .iter()
                .enumerate()
                .map(|(i, a)| process_sphere(&scene.image, a, i, &opts).unwrap().channels.gray)
                .collect()
        })
        .collect();
    within_image_report(&per_image).unwrap().r2_by_order
}

fn degenerate_directions() -> Outcome {
    let s = within_r2(1..5, LightingPlan::Shared);
    let m = within_r2(5..9, LightingPlan::Mixed { count: 2 });
    let shared_ok = s.iter().all(|r| r.is_some_and(|r| (1.0 - r).abs() <= 1e-6));
    let mixed_ok = m.iter().all(|r| r.is_some_and(|r| r < 1.0));
    let gaps = s.map(|r| r.map_or(f64::NAN, |r| 1.0 - r));
    outcome(
        shared_ok && mixed_ok,
        format!(
            "4 shared scenes, noiseless, 1-R2 by order [{:.1e}, {:.1e}, {:.1e}] (need <= 1e-6), 4 mixed scenes R2 {:?}",
            gaps[0], gaps[1], gaps[2], m
        ),
    )
}

fn scale_invariance() -> Outcome {
    let scene = make_fixture(&FixtureRequest {
        seed: 9,
        noise_std: 0.005,
        ..FixtureRequest::default()
    })
    .unwrap();
    let opts = EstimateOptions::default();
    let mut coeff_err: f64 = 0.0;
    let mut norm_err: f64 = 0.0;
    for sphere in &scene.truth.spheres {
        let base = estimate_all_channels(&scene.image, &sphere.circle, &opts).unwrap();
        let tripled = estimate_all_channels(&scene.image.map(|v| 3.0 * v), &sphere.circle, &opts).unwrap();
        for (a, b) in base.as_array().iter().zip(tripled.as_array()) {
            let scale = 3.0 * a.norm();
            for k in 0..9 {
                coeff_err = coeff_err.max((b.0[k] - 3.0 * a.0[k]).abs() / scale);
            }
        }
        let (na, nb) = (
            normalize_env(&base.gray).unwrap(),
            normalize_env(&tripled.gray).unwrap(),
        );
        for k in 0..8 {
            norm_err = norm_err.max((na.0[k] - nb.0[k]).abs());
        }
    }
    outcome(
        coeff_err <= 1e-6 && norm_err <= 1e-9,
        format!("x3 intensities: coefficient error {coeff_err:.1e} relative, normalized error {norm_err:.1e}"),
    )
}

fn cli(args: &[&str], threads: &str) {
    let status = Command::new(env!("CARGO_BIN_EXE_lumisphere"))
        .args(args)
        .env("LUMISPHERE_THREADS", threads)
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "lumisphere {args:?} failed");
}

fn full_run(ws: &Path, out: &Path, threads: &str) -> (Vec<u8>, Vec<u8>) {
    let ws_arg = ws.to_str().unwrap();
    if !ws.exists() {
        cli(
            &[
                "fixture",
                "--seed",
                "40",
                "--count",
                "2",
                "--spheres",
                "3",
                "--noise",
                "0.01",
                "--out",
                ws_arg,
            ],
            threads,
        );
    }
    cli(&["report", ws_arg, "--out", out.to_str().unwrap()], threads);
    (
        std::fs::read(out.join("report.json")).unwrap(),
        std::fs::read(out.join("records.csv")).unwrap(),
    )
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = full_run(&a, &dir.path().join("a-1"), "1");
    let again = full_run(&a, &dir.path().join("a-4"), "4");
    let fresh = full_run(&b, &dir.path().join("b-1"), "2");
    let same = first == again && first == fresh;
    outcome(
        same && !first.1.is_empty(),
        format!(
            "three runs (1, 4, 2 threads; two workspaces) identical: {same}, report {} bytes, records {} bytes",
            first.0.len(),
            first.1.len()
        ),
    )
}

type Check = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let checks: [Check; 10] = [
        ("sh-closed-forms", sh_closed_forms),
        ("noiseless-round-trip", noiseless_round_trip),
        ("noisy-round-trip", noisy_round_trip),
        ("solver-oracle", solver_oracle),
        ("m-step-exactness", m_step_exactness),
        ("em-robustness", em_robustness),
        ("pair-combinatorics", pair_combinatorics),
        ("degenerate-directions", degenerate_directions),
        ("scale-invariance", scale_invariance),
        ("cli-determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += !result.pass as usize;
        println!(
            "{} {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
