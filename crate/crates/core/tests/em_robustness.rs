//! Monte-Carlo robustness of the EM circle fit against uniform clutter.

use lumisphere_core::circle::{fit_edges_em, EdgeSet, EmParams};
use lumisphere_core::Circle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub struct Trial {
    pub truth: Circle,
    pub annotation: Circle,
    pub edges: EdgeSet,
}

/// 200 boundary points with 1 px radial jitter, 200 uniform outliers in a
/// 600x600 frame, and an annotation off by up to 20 px and 20% of the radius.
pub fn trial(seed: u64) -> Trial {
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
    Trial {
        truth,
        annotation,
        edges: EdgeSet::from_points(pts),
    }
}

#[test]
fn recovers_circle_in_clutter() {
    let params = EmParams::default();
    let mut ok = 0;
    for seed in 0..100 {
        let t = trial(seed);
        let fit = fit_edges_em(&t.edges, &t.annotation, &params).unwrap();
        let err = [
            (fit.circle.cx - t.truth.cx).abs(),
            (fit.circle.cy - t.truth.cy).abs(),
            (fit.circle.r - t.truth.r).abs(),
        ];
        let good = err.iter().all(|&e| e < 0.5) && fit.iterations < 100;
        if !good {
            eprintln!(
                "seed {seed}: err {err:?} iters {} conv {} truth {:?} ann {:?}",
                fit.iterations, fit.converged, t.truth, t.annotation
            );
        }
        ok += good as usize;
    }
    eprintln!("{ok}/100");
    assert!(ok >= 95, "{ok}/100");
}
