//! Seeded synthetic scenes: matte spheres with known lighting on a textured
//! background.

use lumisphere_core::render::{render_sphere, RenderSpec};
use lumisphere_core::sh::{radiance, UnitNormal};
use lumisphere_core::{Circle, LightingEnv, RgbImage};
use noise::{Fbm, MultiFractal, NoiseFn, Perlin};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::schema::{write_json, Annotation};
use crate::workspace::Workspace;
use crate::{io, Error, Result};

pub const FIXTURE_SIZE: usize = 1024;

/// Placement tries before giving up on a request.
pub const MAX_PACKING_ATTEMPTS: usize = 10_000;

/// Minimum distance between two sphere rims and between a rim and the frame.
const GAP: f64 = 12.0;

/// Range every rendered sphere pixel stays inside before noise.
const RADIANCE_BOUNDS: (f64, f64) = (0.05, 0.95);

/// How environments are assigned to the spheres of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "mode")]
pub enum LightingPlan {
    /// One random environment for every sphere.
    Shared,
    /// `count` random environments, assigned round-robin.
    Mixed { count: usize },
    /// A fresh environment per sphere.
    PerSphere,
    /// Given environments, assigned round-robin.
    Explicit { environments: Vec<LightingEnv> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct FixtureRequest {
    pub seed: u64,
    pub spheres: usize,
    pub lighting: LightingPlan,
    /// Standard deviation of additive Gaussian pixel noise.
    pub noise_std: f64,
    pub size: usize,
    pub radius_range: (f64, f64),
    /// Largest offset of the annotated center from the true one, in pixels.
    pub annotation_offset: f64,
    /// Largest relative error of the annotated radius.
    pub annotation_radius_error: f64,
}

impl Default for FixtureRequest {
    fn default() -> Self {
        Self {
            seed: 0,
            spheres: 5,
            lighting: LightingPlan::Shared,
            noise_std: 0.0,
            size: FIXTURE_SIZE,
            radius_range: (70.0, 130.0),
            annotation_offset: 6.0,
            annotation_radius_error: 0.06,
        }
    }
}

impl FixtureRequest {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.radius_range;
        if self.spheres == 0 {
            return Err(Error::Config("a fixture needs at least one sphere".into()));
        }
        if !(lo > 0.0 && hi >= lo && 2.0 * (hi + GAP) < self.size as f64) {
            return Err(Error::Config(format!(
                "radius range ({lo}, {hi}) does not fit a {} frame",
                self.size
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("noise std must be a non-negative number".into()));
        }
        if !(self.annotation_offset >= 0.0 && (0.0..0.5).contains(&self.annotation_radius_error)) {
            return Err(Error::Config("annotation perturbation out of range".into()));
        }
        match &self.lighting {
            LightingPlan::Mixed { count: 0 } => Err(Error::Config("mixed lighting needs a count".into())),
            LightingPlan::Explicit { environments } if environments.is_empty() => {
                Err(Error::Config("explicit lighting needs environments".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureSphere {
    pub circle: Circle,
    pub environment: LightingEnv,
}

/// Ground truth written next to a fixture image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FixtureTruth {
    pub image_id: String,
    pub seed: u64,
    pub size: usize,
    pub noise_std: f64,
    pub spheres: Vec<FixtureSphere>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureScene {
    pub truth: FixtureTruth,
    /// Rough circles as an analyst would draw them, one per sphere.
    pub annotations: Vec<Annotation>,
    pub image: RgbImage,
}

impl FixtureScene {
    pub fn image_id(&self) -> &str {
        &self.truth.image_id
    }
}

pub fn fixture_id(seed: u64) -> String {
    format!("fixture-{seed}")
}

/// Unit normals covering the visible hemisphere, rim included.
fn hemisphere_probe() -> Vec<UnitNormal> {
    let n = 24;
    let mut out = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let (x, y) = (f64::from(i) / f64::from(n), f64::from(j) / f64::from(n));
            let rho2 = x * x + y * y;
            if rho2 <= 1.0 {
                out.push(UnitNormal::normalize(x, y, (1.0 - rho2).sqrt()).expect("probe normal"));
            }
        }
    }
    out
}

/// Random environment whose radiance stays well inside `(0, 1)` over the
/// visible hemisphere, so rendering never clips.
pub fn random_environment(rng: &mut impl Rng) -> LightingEnv {
    let probe = hemisphere_probe();
    let mut spread = 1.0;
    loop {
        let l00 = rng.random_range(0.45..0.75);
        let mut c = [0.0; 9];
        c[0] = l00;
        for (k, v) in c.iter_mut().enumerate().skip(1) {
            let scale = if k < 4 { 0.35 } else { 0.15 };
            *v = rng.random_range(-scale..scale) * spread * l00;
        }
        let env = LightingEnv(c);
        let inside = probe.iter().all(|n| {
            let v = radiance(&env, n);
            v > RADIANCE_BOUNDS.0 && v < RADIANCE_BOUNDS.1
        });
        if inside {
            return env;
        }
        spread *= 0.95;
    }
}

fn environments(plan: &LightingPlan, spheres: usize, rng: &mut ChaCha8Rng) -> Vec<LightingEnv> {
    let pool = match plan {
        LightingPlan::Shared => vec![random_environment(rng)],
        LightingPlan::Mixed { count } => (0..*count).map(|_| random_environment(rng)).collect(),
        LightingPlan::PerSphere => (0..spheres).map(|_| random_environment(rng)).collect(),
        LightingPlan::Explicit { environments } => environments.clone(),
    };
    (0..spheres).map(|i| pool[i % pool.len()]).collect()
}

fn pack(request: &FixtureRequest, rng: &mut ChaCha8Rng) -> Result<Vec<Circle>> {
    let (lo, hi) = request.radius_range;
    let size = request.size as f64;
    let mut placed: Vec<Circle> = Vec::with_capacity(request.spheres);
    let mut attempts = 0;
    while placed.len() < request.spheres {
        if attempts == MAX_PACKING_ATTEMPTS {
            return Err(Error::Packing {
                requested: request.spheres,
                attempts,
            });
        }
        attempts += 1;
        let r = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let margin = r + GAP;
        let cx = rng.random_range(margin..size - 1.0 - margin);
        let cy = rng.random_range(margin..size - 1.0 - margin);
        let clear = placed
            .iter()
            .all(|p| ((p.cx - cx).powi(2) + (p.cy - cy).powi(2)).sqrt() >= p.r + r + GAP);
        if clear {
            placed.push(Circle::new(cx, cy, r)?);
        }
    }
    Ok(placed)
}

/// Low-contrast fractal texture with a slight color cast.
fn background(size: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    let fbm = Fbm::<Perlin>::new(rng.random()).set_octaves(4);
    let base = rng.random_range(0.38..0.52);
    let contrast = rng.random_range(0.06..0.12);
    let period = rng.random_range(120.0..220.0);
    let tint: [f64; 3] = [rng.random_range(0.95..1.05), 1.0, rng.random_range(0.95..1.05)];
    let mut img = RgbImage::new(size, size, [0.0; 3]);
    for y in 0..size {
        for x in 0..size {
            let v = base + contrast * fbm.get([x as f64 / period, y as f64 / period]);
            img.set(x, y, tint.map(|t| (t * v).clamp(0.0, 1.0)));
        }
    }
    img
}

fn perturb(c: &Circle, request: &FixtureRequest, rng: &mut ChaCha8Rng) -> Circle {
    let jitter = |rng: &mut ChaCha8Rng, a: f64| if a > 0.0 { rng.random_range(-a..a) } else { 0.0 };
    Circle {
        cx: c.cx + jitter(rng, request.annotation_offset),
        cy: c.cy + jitter(rng, request.annotation_offset),
        r: c.r * (1.0 + jitter(rng, request.annotation_radius_error)),
    }
}

/// Builds the scene for `request`. Identical requests give identical scenes.
pub fn make_fixture(request: &FixtureRequest) -> Result<FixtureScene> {
    request.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
    let envs = environments(&request.lighting, request.spheres, &mut rng);
    let circles = pack(request, &mut rng)?;
    let mut image = background(request.size, &mut rng);

    let mut spheres = Vec::with_capacity(circles.len());
    for (circle, environment) in circles.into_iter().zip(envs) {
        let spec = RenderSpec {
            size: request.size,
            circle,
            background: 0.0,
            shared_scale: None,
        };
        let rendering = render_sphere(&environment, &spec)?;
        for y in 0..request.size {
            for x in 0..request.size {
                if rendering.is_inside(x, y) {
                    let v = rendering.radiance.get(x, y);
                    image.set(x, y, [v; 3]);
                }
            }
        }
        spheres.push(FixtureSphere { circle, environment });
    }

    let image_id = fixture_id(request.seed);
    let annotations = spheres
        .iter()
        .map(|s| Annotation {
            image_id: image_id.clone(),
            approx: perturb(&s.circle, request, &mut rng),
            crop_box: None,
        })
        .collect();

    if request.noise_std > 0.0 {
        let normal = Normal::new(0.0, request.noise_std).expect("validated noise std");
        image = RgbImage::from_vec(
            request.size,
            request.size,
            image
                .data()
                .iter()
                .map(|p| p.map(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0)))
                .collect(),
        )?;
    }

    Ok(FixtureScene {
        truth: FixtureTruth {
            image_id,
            seed: request.seed,
            size: request.size,
            noise_std: request.noise_std,
            spheres,
        },
        annotations,
        image,
    })
}

/// Writes the image (16-bit PNG), annotations and ground truth into `ws`.
pub fn write_fixture(ws: &Workspace, scene: &FixtureScene) -> Result<()> {
    let id = scene.image_id();
    let images = ws.images_dir();
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    io::save_rgb16_png(&images.join(format!("{id}.png")), &scene.image)?;
    ws.write_annotations(id, &scene.annotations)?;
    write_json(&ws.truth_path(id), &scene.truth)
}
