//! Sphere boundary localisation.
//!
//! An RGB image is reduced to a set of candidate edge pixels
//! ([`preprocess_edges`]), then an EM loop alternates soft inlier weighting
//! ([`e_step`]) with a weighted total-least-squares circle refit
//! ([`m_step`]) and a residual-scale update ([`update_sigma`]), starting
//! from a manual annotation.
//!
//! Residuals are algebraic, `|(x-cx)² + (y-cy)² - r²|`, so `sigma` is
//! measured in pixels² rather than pixels.

use alloc::vec::Vec;

use crate::linalg::symmetric_eigen;
use crate::raster::{GrayImage, RgbImage};
use crate::sh::Circle;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EdgePoint {
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

/// Candidate boundary pixels with their current inlier weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeSet {
    points: Vec<EdgePoint>,
}

impl EdgeSet {
    /// Builds a set with every weight initialised to 1.
    pub fn from_points(points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Self {
            points: points.into_iter().map(|(x, y)| EdgePoint { x, y, w: 1.0 }).collect(),
        }
    }

    /// Builds a set with explicit weights. Weights must lie in `[0, 1]`.
    pub fn from_weighted(points: impl IntoIterator<Item = (f64, f64, f64)>) -> Result<Self> {
        let points: Vec<EdgePoint> = points.into_iter().map(|(x, y, w)| EdgePoint { x, y, w }).collect();
        if points.iter().any(|p| !(0.0..=1.0).contains(&p.w)) {
            return Err(Error::InvalidInput("edge weights must lie in [0, 1]"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[EdgePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.w).sum()
    }

    /// Algebraic residual of every point against `c`.
    pub fn residuals(&self, c: &Circle) -> Vec<f64> {
        self.points.iter().map(|p| c.algebraic_residual(p.x, p.y)).collect()
    }
}

/// Parameters of edge preprocessing and the EM loop.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase", default))]
pub struct EmParams {
    /// Uniform outlier likelihood.
    pub epsilon: f64,
    /// Initial residual scale in pixels²; `None` uses `0.1 r²` of the annotation.
    pub sigma0: Option<f64>,
    /// Lower bound on the residual scale.
    pub sigma_min: f64,
    pub max_iter: usize,
    /// Stop once center and radius each move less than this (pixels).
    pub converge_tol: f64,
    /// Half-width of the gating annulus as a fraction of the annotated radius.
    pub gate_fraction: f64,
    /// Edge threshold as a fraction of the maximum gradient magnitude.
    pub edge_threshold: f64,
}

impl Default for EmParams {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            sigma0: None,
            sigma_min: 1.0,
            max_iter: 100,
            converge_tol: 0.5,
            gate_fraction: 0.5,
            edge_threshold: 0.25,
        }
    }
}

impl EmParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.epsilon) {
            return Err(Error::InvalidInput("epsilon must be positive"));
        }
        if let Some(s) = self.sigma0 {
            if !positive(s) {
                return Err(Error::InvalidInput("sigma0 must be positive"));
            }
        }
        if !positive(self.sigma_min) {
            return Err(Error::InvalidInput("sigmaMin must be positive"));
        }
        if !positive(self.converge_tol) {
            return Err(Error::InvalidInput("convergeTol must be positive"));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidInput("maxIter must be at least 1"));
        }
        if !(self.gate_fraction > 0.0 && self.gate_fraction <= 1.0) {
            return Err(Error::InvalidInput("gateFraction must lie in (0, 1]"));
        }
        if !self.edge_threshold.is_finite() {
            return Err(Error::InvalidInput("edge threshold must be finite"));
        }
        Ok(())
    }

    fn initial_sigma(&self, annotation: &Circle) -> f64 {
        self.sigma0
            .unwrap_or(0.1 * annotation.r * annotation.r)
            .max(self.sigma_min)
    }
}

/// Outcome of an EM fit. Non-convergence is reported, not raised.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct FitResult {
    pub circle: Circle,
    pub iterations: usize,
    pub final_sigma: f64,
    pub converged: bool,
    pub inlier_mass: f64,
}

/// 256-bin histogram equalisation of an image with values in `[0, 1]`.
///
/// Values are quantised to 8 bits first. A constant image maps to all zeros.
pub fn equalize_histogram(gray: &GrayImage) -> GrayImage {
    let quantize = |v: f64| (libm::round(v.clamp(0.0, 1.0) * 255.0)) as usize;
    let mut hist = [0usize; 256];
    for &v in gray.data() {
        hist[quantize(v)] += 1;
    }
    let mut cdf = [0usize; 256];
    let mut acc = 0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc;
    }
    let total = gray.data().len();
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    let span = total - cdf_min;
    gray.map(|v| {
        if span == 0 {
            0.0
        } else {
            (cdf[quantize(v)] - cdf_min) as f64 / span as f64
        }
    })
}

/// Sobel gradient magnitude with edge replication at the border.
pub fn gradient_magnitude(gray: &GrayImage) -> GrayImage {
    GrayImage::from_fn(gray.width(), gray.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        let p = |dx: isize, dy: isize| gray.get_clamped(x + dx, y + dy);
        let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
        let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        libm::sqrt(gx * gx + gy * gy)
    })
}

/// Grayscale, equalise, detect edges, threshold and gate to the annulus
/// around the annotation. Every retained weight starts at 1.
pub fn preprocess_edges(image: &RgbImage, annotation: &Circle, params: &EmParams) -> Result<EdgeSet> {
    if image.is_empty() {
        return Err(Error::InvalidInput("empty image"));
    }
    let (w, h) = (image.width() as f64, image.height() as f64);
    if !(annotation.r > 0.0) || !(0.0..w).contains(&annotation.cx) || !(0.0..h).contains(&annotation.cy) {
        return Err(Error::InvalidInput("annotation center lies outside the image"));
    }

    let equalized = equalize_histogram(&image.luma());
    let magnitude = gradient_magnitude(&equalized);
    let max = magnitude.data().iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::NoEdges);
    }
    let threshold = params.edge_threshold * max;
    let inner = annotation.r * (1.0 - params.gate_fraction);
    let outer = annotation.r * (1.0 + params.gate_fraction);

    let mut points = Vec::new();
    for y in 0..magnitude.height() {
        for x in 0..magnitude.width() {
            if magnitude.get(x, y) < threshold {
                continue;
            }
            let (xf, yf) = (x as f64, y as f64);
            let d = libm::hypot(xf - annotation.cx, yf - annotation.cy);
            if d >= inner && d <= outer {
                points.push((xf, yf));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::NoEdges);
    }
    Ok(EdgeSet::from_points(points))
}

fn inlier_probability(delta: f64, sigma: f64, epsilon: f64) -> f64 {
    let g = libm::exp(-(delta * delta) / (2.0 * sigma * sigma));
    g / (g + epsilon)
}

fn reweight(edges: &mut EdgeSet, c: &Circle, sigma: f64, epsilon: f64) {
    for p in &mut edges.points {
        p.w = inlier_probability(c.algebraic_residual(p.x, p.y), sigma, epsilon);
    }
}

/// Replaces every weight by the posterior probability of belonging to `c`.
pub fn e_step(edges: &EdgeSet, c: &Circle, sigma: f64, epsilon: f64) -> EdgeSet {
    let mut out = edges.clone();
    reweight(&mut out, c, sigma, epsilon);
    out
}

/// Weighted total-least-squares circle: the eigenvector of `MᵀW²M` with the
/// smallest eigenvalue, rows of `M` being `[x²+y², x, y, 1]`.
///
/// Coordinates are taken relative to the weighted centroid before `M` is
/// built, which makes the fit translation equivariant and keeps the 4x4
/// system well scaled.
pub fn m_step(edges: &EdgeSet) -> Result<Circle> {
    let active = edges.points.iter().filter(|p| p.w > 0.0).count();
    if active < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: active });
    }
    let mass = edges.total_weight();
    let ox = edges.points.iter().map(|p| p.w * p.x).sum::<f64>() / mass;
    let oy = edges.points.iter().map(|p| p.w * p.y).sum::<f64>() / mass;

    let mut scatter = [[0.0; 4]; 4];
    for p in &edges.points {
        if p.w <= 0.0 {
            continue;
        }
        let (x, y) = (p.x - ox, p.y - oy);
        let row = [x * x + y * y, x, y, 1.0];
        let w2 = p.w * p.w;
        for i in 0..4 {
            for j in i..4 {
                scatter[i][j] += w2 * row[i] * row[j];
            }
        }
    }
    for i in 0..4 {
        for j in 0..i {
            scatter[i][j] = scatter[j][i];
        }
    }

    let (_, vectors) = symmetric_eigen(&scatter);
    let mut v = [vectors[0][0], vectors[1][0], vectors[2][0], vectors[3][0]];
    if v[0] < 0.0 {
        v = v.map(|c| -c);
    }
    if libm::fabs(v[0]) < 1e-12 {
        return Err(Error::DegenerateFit);
    }
    let cx = -v[1] / (2.0 * v[0]);
    let cy = -v[2] / (2.0 * v[0]);
    let r2 = (v[1] * v[1] + v[2] * v[2]) / (4.0 * v[0] * v[0]) - v[3] / v[0];
    if !(r2 > 0.0) || !r2.is_finite() {
        return Err(Error::DegenerateFit);
    }
    Ok(Circle {
        cx: cx + ox,
        cy: cy + oy,
        r: libm::sqrt(r2),
    })
}

/// Weighted RMS of the residuals, floored at `sigma_min`.
pub fn update_sigma(edges: &EdgeSet, residuals: &[f64], sigma_min: f64) -> Result<f64> {
    if residuals.len() != edges.len() {
        return Err(Error::InvalidInput("one residual per edge point is required"));
    }
    let mass = edges.total_weight();
    if !(mass > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let weighted: f64 = edges.points.iter().zip(residuals).map(|(p, d)| p.w * d * d).sum();
    Ok(libm::sqrt(weighted / mass).max(sigma_min))
}

/// EM loop on an existing edge set, bootstrapped from `annotation`.
pub fn fit_edges_em(edges: &EdgeSet, annotation: &Circle, params: &EmParams) -> Result<FitResult> {
    params.validate()?;
    if edges.is_empty() {
        return Err(Error::NoEdges);
    }
    let mut edges = edges.clone();
    let mut circle = *annotation;
    let mut sigma = params.initial_sigma(annotation);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        reweight(&mut edges, &circle, sigma, params.epsilon);
        let next = m_step(&edges)?;
        sigma = update_sigma(&edges, &edges.residuals(&next), params.sigma_min)?;
        let moved = [
            libm::fabs(next.cx - circle.cx),
            libm::fabs(next.cy - circle.cy),
            libm::fabs(next.r - circle.r),
        ];
        circle = next;
        if moved.iter().all(|&d| d < params.converge_tol) {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        circle,
        iterations,
        final_sigma: sigma,
        converged,
        inlier_mass: edges.total_weight(),
    })
}

/// Preprocesses `image` once, then runs the EM loop from `annotation`.
pub fn fit_circle_em(image: &RgbImage, annotation: &Circle, params: &EmParams) -> Result<FitResult> {
    params.validate()?;
    let edges = preprocess_edges(image, annotation, params)?;
    fit_edges_em(&edges, annotation, params)
}
