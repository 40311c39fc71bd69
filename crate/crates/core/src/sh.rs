//! Spherical-harmonic lighting model.
//!
//! Coefficients and basis values are always stored in the canonical order
//! `(0,0) (1,-1) (1,0) (1,1) (2,-2) (2,-1) (2,0) (2,1) (2,2)`.
//!
//! Image coordinates: x grows to the right, y grows downward and z points
//! out of the image toward the camera. Under this convention a negative
//! `l(1,-1)` means light from above.

use core::ops::{Add, Mul};

use crate::{Error, Result};

/// Number of coefficients in a second-order environment.
pub const NUM_COEFFS: usize = 9;

/// `1 / sqrt(4π)`
pub const Y00: f64 = 0.282_094_791_773_878_14;
/// `sqrt(3 / 4π)`
pub const Y1: f64 = 0.488_602_511_902_919_9;
/// `3 sqrt(5 / 12π)`
pub const Y2_CROSS: f64 = 1.092_548_430_592_079_2;
/// `(1/2) sqrt(5 / 4π)`
pub const Y20: f64 = 0.315_391_565_252_520_05;
/// `(3/2) sqrt(5 / 12π)`
pub const Y22: f64 = 0.546_274_215_296_039_6;

/// Lambertian convolution factor per canonical index.
pub const CONVOLUTION: [f64; NUM_COEFFS] = [
    core::f64::consts::PI,
    2.0 * core::f64::consts::FRAC_PI_3,
    2.0 * core::f64::consts::FRAC_PI_3,
    2.0 * core::f64::consts::FRAC_PI_3,
    core::f64::consts::FRAC_PI_4,
    core::f64::consts::FRAC_PI_4,
    core::f64::consts::FRAC_PI_4,
    core::f64::consts::FRAC_PI_4,
    core::f64::consts::FRAC_PI_4,
];

/// Harmonic order (0, 1 or 2) of each canonical index.
pub const ORDER: [usize; NUM_COEFFS] = [0, 1, 1, 1, 2, 2, 2, 2, 2];

/// Human-readable coefficient labels in canonical order.
pub const LABELS: [&str; NUM_COEFFS] = ["l00", "l1m1", "l10", "l11", "l2m2", "l2m1", "l20", "l21", "l22"];

const NORM_TOLERANCE: f64 = 1e-6;

/// Unit surface normal on the camera-facing hemisphere.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UnitNormal {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitNormal {
    /// Accepts a direction that is already unit length (within 1e-6) with `z >= 0`.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = libm::sqrt(x * x + y * y + z * z);
        if !norm.is_finite() || libm::fabs(norm - 1.0) > NORM_TOLERANCE || z < 0.0 {
            return Err(Error::InvalidNormal { norm });
        }
        Ok(Self { x, y, z })
    }

    /// Scales an arbitrary nonzero direction with `z >= 0` to unit length.
    pub fn normalize(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = libm::sqrt(x * x + y * y + z * z);
        if !(norm.is_finite() && norm > 0.0) || z < 0.0 {
            return Err(Error::InvalidNormal { norm });
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// The nine basis values at one normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShBasis9(pub [f64; NUM_COEFFS]);

/// Nine lighting coefficients for one channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct LightingEnv(pub [f64; NUM_COEFFS]);

impl LightingEnv {
    /// Environment with all energy in the constant (ambient) term.
    pub fn ambient(l00: f64) -> Self {
        let mut c = [0.0; NUM_COEFFS];
        c[0] = l00;
        Self(c)
    }

    pub fn coeffs(&self) -> &[f64; NUM_COEFFS] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Coefficients belonging to one harmonic order.
    pub fn order(&self, order: usize) -> &[f64] {
        match order {
            0 => &self.0[0..1],
            1 => &self.0[1..4],
            2 => &self.0[4..9],
            _ => &[],
        }
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|c| c * c).sum())
    }
}

impl Add for LightingEnv {
    type Output = LightingEnv;

    fn add(self, rhs: LightingEnv) -> LightingEnv {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o += r;
        }
        LightingEnv(out)
    }
}

impl Mul<LightingEnv> for f64 {
    type Output = LightingEnv;

    fn mul(self, rhs: LightingEnv) -> LightingEnv {
        LightingEnv(rhs.0.map(|c| self * c))
    }
}

/// First- and second-order coefficients divided by `|l(0,0)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct NormalizedLighting(pub [f64; NUM_COEFFS - 1]);

impl NormalizedLighting {
    /// Labels of the eight entries, canonical order without `l00`.
    pub const LABELS: [&'static str; NUM_COEFFS - 1] = ["l1m1", "l10", "l11", "l2m2", "l2m1", "l20", "l21", "l22"];
}

/// Image-space projection of a sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    pub fn new(cx: f64, cy: f64, r: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite() && r.is_finite() && r > 0.0) {
            return Err(Error::InvalidInput("circle radius must be positive and finite"));
        }
        Ok(Self { cx, cy, r })
    }

    /// Algebraic residual `|(x-cx)² + (y-cy)² - r²|` (units of pixels²).
    pub fn algebraic_residual(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.cx;
        let dy = y - self.cy;
        libm::fabs(dx * dx + dy * dy - self.r * self.r)
    }

    /// True when the closed disk fits in a `width` x `height` pixel grid.
    pub fn fits_within(&self, width: usize, height: usize) -> bool {
        self.cx - self.r >= 0.0
            && self.cy - self.r >= 0.0
            && self.cx + self.r <= (width as f64) - 1.0
            && self.cy + self.r <= (height as f64) - 1.0
    }
}

/// Evaluates the nine real spherical harmonics at `n`.
pub fn sh_basis(n: &UnitNormal) -> ShBasis9 {
    let UnitNormal { x, y, z } = *n;
    ShBasis9([
        Y00,
        Y1 * y,
        Y1 * z,
        Y1 * x,
        Y2_CROSS * x * y,
        Y2_CROSS * y * z,
        Y20 * (3.0 * z * z - 1.0),
        Y2_CROSS * x * z,
        Y22 * (x * x - y * y),
    ])
}

/// One row of the lighting design matrix: basis values times the
/// Lambertian convolution factors.
pub fn design_row(n: &UnitNormal) -> [f64; NUM_COEFFS] {
    let mut row = sh_basis(n).0;
    for (v, k) in row.iter_mut().zip(CONVOLUTION) {
        *v *= k;
    }
    row
}

/// Surface normal of the sphere seen at pixel `(x, y)`.
pub fn normal_from_pixel(x: f64, y: f64, c: &Circle) -> Result<UnitNormal> {
    let dx = x - c.cx;
    let dy = y - c.cy;
    let radicand = c.r * c.r - dx * dx - dy * dy;
    if !(radicand > 0.0) {
        return Err(Error::OutsideDisk { x, y });
    }
    UnitNormal::normalize(dx, dy, libm::sqrt(radicand))
}

/// Intensity predicted by `l` at normal `n`. Not clamped.
pub fn radiance(l: &LightingEnv, n: &UnitNormal) -> f64 {
    design_row(n).iter().zip(l.0.iter()).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn n(x: f64, y: f64, z: f64) -> UnitNormal {
        UnitNormal::new(x, y, z).unwrap()
    }

    #[test]
    fn constants_match_closed_forms() {
        assert_abs_diff_eq!(Y00, 1.0 / libm::sqrt(4.0 * PI), epsilon = 1e-16);
        assert_abs_diff_eq!(Y1, libm::sqrt(3.0 / (4.0 * PI)), epsilon = 1e-16);
        assert_abs_diff_eq!(Y2_CROSS, 3.0 * libm::sqrt(5.0 / (12.0 * PI)), epsilon = 1e-15);
        assert_abs_diff_eq!(Y20, 0.5 * libm::sqrt(5.0 / (4.0 * PI)), epsilon = 1e-16);
        assert_abs_diff_eq!(Y22, 1.5 * libm::sqrt(5.0 / (12.0 * PI)), epsilon = 1e-16);
    }

    #[test]
    fn basis_at_canonical_normals() {
        let pole = sh_basis(&n(0.0, 0.0, 1.0)).0;
        let expect = [0.282095, 0.0, 0.488603, 0.0, 0.0, 0.0, 0.630783, 0.0, 0.0];
        for (a, b) in pole.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-6);
        }
        let ex = sh_basis(&n(1.0, 0.0, 0.0)).0;
        let expect = [0.282095, 0.0, 0.0, 0.488603, 0.0, 0.0, -0.315392, 0.0, 0.546274];
        for (a, b) in ex.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-6);
        }
        let ey = sh_basis(&n(0.0, 1.0, 0.0)).0;
        let expect = [0.282095, 0.488603, 0.0, 0.0, 0.0, 0.0, -0.315392, 0.0, -0.546274];
        for (a, b) in ey.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn design_row_examples() {
        let row = design_row(&n(0.0, 0.0, 1.0));
        let expect = [0.886227, 0.0, 1.023327, 0.0, 0.0, 0.0, 0.495416, 0.0, 0.0];
        for (a, b) in row.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-6);
        }
        let row = design_row(&n(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(row[3], 1.023327, epsilon = 1e-6);
        assert_abs_diff_eq!(row[6], -0.247708, epsilon = 1e-6);
        assert_abs_diff_eq!(row[8], 0.429043, epsilon = 1e-6);
        for i in [1, 2, 4, 5, 7] {
            assert_eq!(row[i], 0.0);
        }
    }

    #[test]
    fn rejects_non_unit_normals() {
        assert!(matches!(
            UnitNormal::new(1.0, 1.0, 0.0),
            Err(Error::InvalidNormal { .. })
        ));
        assert!(UnitNormal::new(0.0, 0.0, 1.0 + 2e-6).is_err());
        assert!(UnitNormal::new(0.0, 0.0, 1.0 + 5e-7).is_ok());
        assert!(UnitNormal::new(0.0, 0.0, -1.0).is_err());
        assert!(UnitNormal::normalize(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn normal_from_pixel_examples() {
        let c = Circle::new(300.0, 300.0, 100.0).unwrap();
        let center = normal_from_pixel(300.0, 300.0, &c).unwrap();
        assert_eq!(center.to_array(), [0.0, 0.0, 1.0]);

        let rim = normal_from_pixel(399.999, 300.0, &c).unwrap();
        assert_abs_diff_eq!(rim.x(), 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(rim.y(), 0.0, epsilon = 1e-12);
        assert!(rim.z() > 0.0 && rim.z() < 0.01);

        let tri = normal_from_pixel(300.0, 220.0, &c).unwrap();
        assert_abs_diff_eq!(tri.x(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tri.y(), -0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(tri.z(), 0.6, epsilon = 1e-12);

        assert!(matches!(
            normal_from_pixel(400.0, 300.0, &c),
            Err(Error::OutsideDisk { .. })
        ));
        assert!(normal_from_pixel(500.0, 500.0, &c).is_err());
    }

    #[test]
    fn radiance_examples() {
        let ambient = LightingEnv::ambient(1.0);
        assert_abs_diff_eq!(radiance(&ambient, &n(0.0, 0.0, 1.0)), 0.886227, epsilon = 1e-6);
        assert_abs_diff_eq!(radiance(&ambient, &n(0.6, 0.0, 0.8)), 0.886227, epsilon = 1e-6);

        let mut c = [0.0; 9];
        c[6] = 1.0;
        assert_abs_diff_eq!(radiance(&LightingEnv(c), &n(0.0, 0.0, 1.0)), 0.495416, epsilon = 1e-6);
    }

    /// Term-by-term expansion written directly from the printed closed forms.
    fn hand_expanded(l: &[f64; 9], x: f64, y: f64, z: f64) -> f64 {
        let pi = PI;
        let a = l[0] * pi * (1.0 / (4.0 * pi).sqrt());
        let b = l[1] * (2.0 * pi / 3.0) * (3.0 / (4.0 * pi)).sqrt() * y
            + l[2] * (2.0 * pi / 3.0) * (3.0 / (4.0 * pi)).sqrt() * z
            + l[3] * (2.0 * pi / 3.0) * (3.0 / (4.0 * pi)).sqrt() * x;
        let k = (5.0 / (12.0 * pi)).sqrt();
        let c = l[4] * (pi / 4.0) * 3.0 * k * x * y
            + l[5] * (pi / 4.0) * 3.0 * k * y * z
            + l[6] * (pi / 4.0) * 0.5 * (5.0 / (4.0 * pi)).sqrt() * (3.0 * z * z - 1.0)
            + l[7] * (pi / 4.0) * 3.0 * k * x * z
            + l[8] * (pi / 4.0) * 1.5 * k * (x * x - y * y);
        a + b + c
    }

    #[test]
    fn radiance_matches_hand_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let l: [f64; 9] = core::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let got = radiance(&LightingEnv(l), &n(0.6, 0.0, 0.8));
            assert_abs_diff_eq!(got, hand_expanded(&l, 0.6, 0.0, 0.8), epsilon = 1e-12);
        }
    }

    #[test]
    fn basis_bounds_over_uniform_hemisphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            // rejection-sample the unit ball, fold onto z >= 0
            let (x, y, z) = loop {
                let v: [f64; 3] = core::array::from_fn(|_| rng.random_range(-1.0..1.0));
                let s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                if s > 1e-6 && s <= 1.0 {
                    break (v[0], v[1], libm::fabs(v[2]));
                }
            };
            let b = sh_basis(&UnitNormal::normalize(x, y, z).unwrap()).0;
            assert_eq!(b[0], Y00);
            for v in &b[1..4] {
                assert!(libm::fabs(*v) <= 0.488604);
            }
            assert!(libm::fabs(b[4]) <= 0.546275);
            assert!(libm::fabs(b[8]) <= 0.546275);
        }
    }

    proptest! {
        #[test]
        fn radiance_is_linear(
            l1 in prop::array::uniform9(-2.0f64..2.0),
            l2 in prop::array::uniform9(-2.0f64..2.0),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            theta in 0.0f64..core::f64::consts::FRAC_PI_2,
            phi in 0.0f64..(2.0 * PI),
        ) {
            let nn = UnitNormal::normalize(
                libm::sin(theta) * libm::cos(phi),
                libm::sin(theta) * libm::sin(phi),
                libm::cos(theta),
            ).unwrap();
            let (e1, e2) = (LightingEnv(l1), LightingEnv(l2));
            let lhs = radiance(&(a * e1 + b * e2), &nn);
            let rhs = a * radiance(&e1, &nn) + b * radiance(&e2, &nn);
            prop_assert!(libm::fabs(lhs - rhs) <= 1e-12);
        }

        #[test]
        fn interior_pixels_give_unit_front_facing_normals(
            cx in 50.0f64..500.0,
            cy in 50.0f64..500.0,
            r in 1.0f64..300.0,
            t in 0.0f64..0.999,
            phi in 0.0f64..(2.0 * PI),
        ) {
            let c = Circle::new(cx, cy, r).unwrap();
            let x = cx + t * r * libm::cos(phi);
            let y = cy + t * r * libm::sin(phi);
            let nn = normal_from_pixel(x, y, &c).unwrap();
            let [a, b, z] = nn.to_array();
            prop_assert!(libm::fabs(a * a + b * b + z * z - 1.0) <= 1e-12);
            prop_assert!(z > 0.0);
        }

        #[test]
        fn ambient_row_is_constant(theta in 0.0f64..core::f64::consts::FRAC_PI_2, phi in 0.0f64..core::f64::consts::TAU) {
            let nn = UnitNormal::normalize(
                libm::sin(theta) * libm::cos(phi),
                libm::sin(theta) * libm::sin(phi),
                libm::cos(theta),
            ).unwrap();
            let v = radiance(&LightingEnv::ambient(1.0), &nn);
            prop_assert!(libm::fabs(v - PI * Y00) <= 1e-12);
            prop_assert!(libm::fabs(v - 0.886227) <= 1e-6);
        }
    }
}
