use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::Result;
use crate::field_algebra::PlanarMap;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Closed-form conformal maps onto the unit disc.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConformalChart {
    Identity,
    /// `(z + i)/(z - i)` from the lower half plane; `-i -> 0`, `infinity -> 1`.
    HalfPlane,
    /// `1/z` from the exterior of the unit disc; `infinity -> 0`.
    Exterior,
}

impl ConformalChart {
    pub fn map(&self, z: Complex64) -> Complex64 {
        match self {
            ConformalChart::Identity => z,
            ConformalChart::HalfPlane if !z.is_finite() => ONE,
            ConformalChart::HalfPlane => (z + I) / (z - I),
            ConformalChart::Exterior if !z.is_finite() => Complex64::new(0.0, 0.0),
            ConformalChart::Exterior => z.inv(),
        }
    }

    /// Inverse map; the point sent to infinity comes back as infinity.
    pub fn unmap(&self, w: Complex64) -> Complex64 {
        let inf = Complex64::new(f64::INFINITY, 0.0);
        match self {
            ConformalChart::Identity => w,
            ConformalChart::HalfPlane if w == ONE => inf,
            ConformalChart::HalfPlane => I * (w + ONE) / (w - ONE),
            ConformalChart::Exterior if w.norm() == 0.0 => inf,
            ConformalChart::Exterior => w.inv(),
        }
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        match self {
            ConformalChart::Identity => ONE,
            ConformalChart::HalfPlane => -2.0 * I / ((z - I) * (z - I)),
            ConformalChart::Exterior => -(z * z).inv(),
        }
    }
}

impl PlanarMap for ConformalChart {
    fn apply(&self, z: Complex64) -> Complex64 {
        self.map(z)
    }

    fn derivatives(&self, z: Complex64) -> (Complex64, Complex64) {
        (self.derivative(z), Complex64::new(0.0, 0.0))
    }

    fn inverse(&self, y: Complex64) -> Result<Complex64> {
        Ok(self.unmap(y))
    }
}

/// Angle in `(0, 2 pi)` of the image of the real point `x` under the
/// half-plane chart. Decreasing in `x`.
pub fn halfplane_angle(x: f64) -> f64 {
    2.0 * 1.0f64.atan2(x)
}

/// Real point with [`halfplane_angle`] equal to `theta`.
pub fn halfplane_point(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    (0.5 * t).cos() / (0.5 * t).sin()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn halfplane_landmarks() {
        let m = ConformalChart::HalfPlane;
        assert!(m.map(c(0.0, -1.0)).norm() < 1e-15);
        assert!((m.map(c(0.0, 0.0)) + ONE).norm() < 1e-15);
        assert_eq!(m.map(c(f64::INFINITY, 0.0)), ONE);
        assert!((m.map(c(1e12, 0.0)) - ONE).norm() < 1e-11);
    }

    #[test]
    fn round_trips() {
        let pts = [c(0.3, -0.7), c(-2.0, -0.01), c(5.0, -3.0), c(0.0, -1.0)];
        for chart in [ConformalChart::Identity, ConformalChart::HalfPlane] {
            for z in pts {
                assert!((chart.unmap(chart.map(z)) - z).norm() < 1e-14 * (1.0 + z.norm()));
                assert!(chart.map(z).norm() < 1.0 || chart == ConformalChart::Identity);
            }
        }
        for z in [c(1.5, 0.2), c(-3.0, 4.0), c(0.0, -1.01)] {
            let e = ConformalChart::Exterior;
            assert!((e.unmap(e.map(z)) - z).norm() < 1e-14 * z.norm());
            assert!(e.map(z).norm() < 1.0);
        }
    }

    #[test]
    fn real_axis_lands_on_circle() {
        for x in [-1e3, -2.0, -0.1, 0.0, 0.4, 7.0] {
            let w = ConformalChart::HalfPlane.map(c(x, 0.0));
            assert!((w.norm() - 1.0).abs() < 1e-14);
            assert!((w.arg().rem_euclid(2.0 * PI) - halfplane_angle(x)).abs() < 1e-12);
            assert!((halfplane_point(halfplane_angle(x)) - x).abs() < 1e-12 * (1.0 + x * x));
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let e = 1e-6;
        for chart in [ConformalChart::HalfPlane, ConformalChart::Exterior] {
            let z = c(0.7, -1.3);
            let fd = (chart.map(z + e) - chart.map(z - e)) / (2.0 * e);
            assert!((fd - chart.derivative(z)).norm() < 1e-8);
        }
    }
}
