//! Beurling-Ahlfors extension of circle homeomorphisms and the conductivity
//! representative built from a recovered boundary map.
//!
//! The half-plane formula is
//! `U = 1/2 int_0^1 h(x + t y) + h(x - t y) dt`,
//! `V = int_0^1 h(x + t y) - h(x - t y) dt`,
//! normalized so affine `h` extend to affine maps. It is carried to the disc
//! by the Cayley transform `C(z) = i (1 + z)/(1 - z)` after rotating `g` so
//! that `1` is fixed.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::dtn::{BoundaryReparam, BoundaryTrace};
use crate::error::{Error, Result};
use crate::field_algebra::{jacobian_det, transport_tensor, ConductivityTensor, PlanarMap, SymTensor, TensorField};
use crate::grid::GridSpec;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Samples used when a homeomorphism is built from a closure.
pub const CIRCLE_SAMPLES: usize = 2048;

/// Quasisymmetry modulus above which the extension is considered badly
/// distorted.
pub const QUASISYMMETRY_WARN: f64 = 50.0;

const QUADRATURE: usize = 48;

/// Orientation-preserving homeomorphism of the circle, as a sampled lift of
/// the angle map.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleHomeomorphism {
    map: BoundaryReparam,
}

impl CircleHomeomorphism {
    pub fn new(map: BoundaryReparam) -> Self {
        CircleHomeomorphism { map }
    }

    pub fn from_fn(f: impl Fn(f64) -> f64) -> Result<Self> {
        Ok(Self::new(BoundaryReparam::from_fn(CIRCLE_SAMPLES, f)?))
    }

    pub fn identity() -> Self {
        Self::new(BoundaryReparam::identity(CIRCLE_SAMPLES))
    }

    pub fn rotation(alpha: f64) -> Self {
        Self::new(BoundaryReparam::rotation(alpha, CIRCLE_SAMPLES))
    }

    pub fn reparam(&self) -> &BoundaryReparam {
        &self.map
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.map.eval(theta)
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        self.map.derivative(theta)
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(Self::new(self.map.inverse()?))
    }

    /// `eta g eta` for the reflection `theta -> -theta`.
    pub fn reflected(&self) -> Result<Self> {
        Self::from_fn(|s| -self.eval(-s))
    }

    /// Largest ratio `(g(x + t) - g(x)) / (g(x) - g(x - t))` or its inverse
    /// over dyadic `t = 2 pi / 2^k`, `2 <= k <= levels`, and `x` on the
    /// finest dyadic grid.
    pub fn quasisymmetry_modulus(&self, levels: u32) -> f64 {
        let points = 1usize << levels;
        let mut worst: f64 = 1.0;
        for k in 2..=levels {
            let t = TAU / (1u64 << k) as f64;
            for j in 0..points {
                let x = TAU * j as f64 / points as f64;
                let gx = self.eval(x);
                let r = (self.eval(x + t) - gx) / (gx - self.eval(x - t));
                worst = worst.max(r).max(1.0 / r);
            }
        }
        worst
    }
}

/// Gauss-Legendre rule on `[0, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// `(dF, dbarF)` of `f o g` from the derivatives of each factor.
fn chain(f: (Complex64, Complex64), g: (Complex64, Complex64)) -> (Complex64, Complex64) {
    (f.0 * g.0 + f.1 * g.1.conj(), f.0 * g.1 + f.1 * g.0.conj())
}

/// Beurling-Ahlfors extension of `g` to the closed disc, continued to the
/// plane by reflection in the circle.
#[derive(Debug, Clone)]
pub struct BeurlingAhlfors {
    g: CircleHomeomorphism,
    alpha: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Dyadic quasisymmetry modulus of `g`; compare with
    /// [`QUASISYMMETRY_WARN`].
    pub quasisymmetry: f64,
}

pub fn beurling_ahlfors_extension(g: &CircleHomeomorphism) -> Result<BeurlingAhlfors> {
    let (nodes, weights) = gauss_legendre(QUADRATURE);
    let quasisymmetry = g.quasisymmetry_modulus(10);
    if !quasisymmetry.is_finite() {
        return Err(Error::NotMonotone("boundary map is not quasisymmetric".into()));
    }
    Ok(BeurlingAhlfors {
        g: g.clone(),
        alpha: g.eval(0.0),
        nodes,
        weights,
        quasisymmetry,
    })
}

impl BeurlingAhlfors {
    pub fn boundary_map(&self) -> &CircleHomeomorphism {
        &self.g
    }

    /// Boundary function on the line and its derivative.
    fn line(&self, x: f64) -> (f64, f64) {
        let theta = PI + 2.0 * x.atan();
        let half = 0.5 * (self.g.eval(theta) - self.alpha);
        let s = half.sin();
        let h = -half.cos() / s;
        let dh = self.g.derivative(theta) / (s * s * (1.0 + x * x));
        (h, dh)
    }

    fn half_plane(&self, w: Complex64) -> (Complex64, Complex64, Complex64) {
        let (x, y) = (w.re, w.im);
        let (mut u, mut v, mut ux, mut uy, mut vx, mut vy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (t, wt) in self.nodes.iter().zip(&self.weights) {
            let (a, da) = self.line(x + t * y);
            let (b, db) = self.line(x - t * y);
            u += wt * 0.5 * (a + b);
            v += wt * (a - b);
            ux += wt * 0.5 * (da + db);
            uy += wt * 0.5 * t * (da - db);
            vx += wt * (da - db);
            vy += wt * t * (da + db);
        }
        let fx = Complex64::new(ux, vx);
        let fy = Complex64::new(uy, vy);
        (Complex64::new(u, v), 0.5 * (fx - I * fy), 0.5 * (fx + I * fy))
    }

    /// Value and `(dF, dbarF)` for `|z| < 1`.
    fn inside(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        let w = I * (ONE + z) / (ONE - z);
        let dw = 2.0 * I / ((ONE - z) * (ONE - z));
        let (f, p, q) = self.half_plane(w);
        let rot = Complex64::from_polar(1.0, self.alpha);
        let back = (f - I) / (f + I);
        let dback = 2.0 * I / ((f + I) * (f + I));
        (rot * back, rot * dback * p * dw, rot * dback * q * dw.conj())
    }

    fn evaluate(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        let r = z.norm();
        if r < 1.0 - 1e-12 {
            return self.inside(z);
        }
        let near = if r <= 1.0 + 1e-12 {
            // Derivatives from just inside the circle.
            let (_, p, q) = self.inside(z * (1.0 - 1e-9) / r);
            return (Complex64::from_polar(1.0, self.g.eval(z.arg())), p, q);
        } else {
            z.conj().inv()
        };
        let (f, p, q) = self.inside(near);
        let refl = |a: Complex64| -> (Complex64, Complex64) { (Complex64::new(0.0, 0.0), -(a.conj() * a.conj()).inv()) };
        let inner = chain((p, q), refl(z));
        let (pp, qq) = chain(refl(f), inner);
        (f.conj().inv(), pp, qq)
    }
}

impl PlanarMap for BeurlingAhlfors {
    fn apply(&self, z: Complex64) -> Complex64 {
        self.evaluate(z).0
    }

    fn derivatives(&self, z: Complex64) -> (Complex64, Complex64) {
        let (_, p, q) = self.evaluate(z);
        (p, q)
    }

    fn inverse(&self, y: Complex64) -> Result<Complex64> {
        let mut x = y * Complex64::from_polar(1.0, -self.alpha);
        for _ in 0..80 {
            let (f, p, q) = self.evaluate(x);
            let d = f - y;
            if d.norm() <= 1e-13 * (1.0 + y.norm()) {
                return Ok(x);
            }
            let j = jacobian_det(p, q);
            if !(j > 0.0) {
                break;
            }
            x -= (p.conj() * d - q * d.conj()) / j;
        }
        Err(Error::OutOfRange {
            point: format!("{y}"),
        })
    }
}

/// Smallest Jacobian of `map` on a polar sample of the disc of radius
/// `radius`, with the point where it occurs.
pub fn min_jacobian_on_disc(map: &impl PlanarMap, radius: f64) -> (Complex64, f64) {
    let mut worst = (Complex64::new(0.0, 0.0), f64::INFINITY);
    for i in 1..=40 {
        let r = radius * (1.0 - (1.0 - i as f64 / 40.0).powi(2)) * 0.999;
        for j in 0..128 {
            let z = Complex64::from_polar(r, TAU * (j as f64 + 0.5 * i as f64) / 128.0);
            let (p, q) = map.derivatives(z);
            let jac = jacobian_det(p, q);
            if jac < worst.1 {
                worst = (z, jac);
            }
        }
    }
    worst
}

fn require_positive_jacobian(map: &impl PlanarMap, radius: f64) -> Result<()> {
    let (z, j) = min_jacobian_on_disc(map, radius);
    if !(j > 0.0) {
        return Err(Error::Degenerate {
            location: format!("{z}"),
            jacobian: j,
        });
    }
    Ok(())
}

/// `(AB(g) + eta o AB(eta g eta) o eta) / 2`, commuting with the reflection
/// `z -> conj z` when `g` does.
#[derive(Debug, Clone)]
pub struct SymmetricExtension {
    direct: BeurlingAhlfors,
    mirrored: BeurlingAhlfors,
}

pub fn beurling_ahlfors_symmetric(g: &CircleHomeomorphism) -> Result<SymmetricExtension> {
    let ext = SymmetricExtension {
        direct: beurling_ahlfors_extension(g)?,
        mirrored: beurling_ahlfors_extension(&g.reflected()?)?,
    };
    require_positive_jacobian(&ext, 1.0)?;
    Ok(ext)
}

impl PlanarMap for SymmetricExtension {
    fn apply(&self, z: Complex64) -> Complex64 {
        0.5 * (self.direct.apply(z) + self.mirrored.apply(z.conj()).conj())
    }

    fn derivatives(&self, z: Complex64) -> (Complex64, Complex64) {
        let (p, q) = self.direct.derivatives(z);
        let (pm, qm) = self.mirrored.derivatives(z.conj());
        (0.5 * (p + pm.conj()), 0.5 * (q + qm.conj()))
    }

    fn inverse(&self, y: Complex64) -> Result<Complex64> {
        let mut x = self.direct.inverse(y).unwrap_or(y);
        for _ in 0..80 {
            let d = self.apply(x) - y;
            if d.norm() <= 1e-13 * (1.0 + y.norm()) {
                return Ok(x);
            }
            let (p, q) = self.derivatives(x);
            let j = jacobian_det(p, q);
            if !(j > 0.0) {
                break;
            }
            x -= (p.conj() * d - q * d.conj()) / j;
        }
        Err(Error::OutOfRange {
            point: format!("{y}"),
        })
    }
}

/// Radius `R(t)` of a star-shaped curve as a Fourier series in the polar
/// angle.
#[derive(Debug, Clone)]
struct RadialProfile {
    series: BoundaryTrace,
}

impl RadialProfile {
    fn eval(&self, t: f64) -> (f64, f64) {
        let m = self.series.modes() as i64;
        let (mut r, mut dr) = (0.0, 0.0);
        for n in -m..=m {
            let e = self.series.get(n) * Complex64::from_polar(1.0, n as f64 * t);
            r += e.re;
            dr += (I * n as f64 * e).re;
        }
        (r, dr)
    }
}

/// `H_* sigma~` on the disc of radius `radius`, where `H^{-1} = P o AB(g) o
/// (z / radius)`, `g` the angle map of the recovered boundary curve and `P`
/// the radial stretch of the unit disc onto the domain it bounds.
#[derive(Debug, Clone)]
pub struct Representative<S> {
    sigma: S,
    extension: BeurlingAhlfors,
    profile: RadialProfile,
    radius: f64,
}

/// `curve(s)` is the recovered boundary point over `radius e^{is}`; it must
/// be star-shaped about the origin and wind once.
pub fn build_representative<S: TensorField>(
    sigma_tilde: S,
    curve: impl Fn(f64) -> Complex64,
    radius: f64,
) -> Result<Representative<S>> {
    let g = CircleHomeomorphism::from_fn(|s| curve(s).arg())?;
    let back = g.inverse()?;
    let samples = 1024;
    let radii: Vec<f64> = (0..samples)
        .map(|j| curve(back.eval(TAU * j as f64 / samples as f64)).norm())
        .collect();
    let profile = RadialProfile {
        series: BoundaryTrace::from_real_samples(&radii, samples / 4)?,
    };
    let rep = Representative {
        sigma: sigma_tilde,
        extension: beurling_ahlfors_extension(&g)?,
        profile,
        radius,
    };
    let (z, j) = min_jacobian_on_disc(&rep.inverse_map(), radius);
    if !(j > 0.0) {
        return Err(Error::Degenerate {
            location: format!("{z}"),
            jacobian: j,
        });
    }
    Ok(rep)
}

/// `H^{-1}` as a planar map on the disc of the representative.
pub struct InverseMap<'a, S> {
    rep: &'a Representative<S>,
}

impl<S: TensorField> PlanarMap for InverseMap<'_, S> {
    fn apply(&self, z: Complex64) -> Complex64 {
        self.rep.forward(z).0
    }

    fn derivatives(&self, z: Complex64) -> (Complex64, Complex64) {
        let (_, p, q) = self.rep.forward(z);
        (p, q)
    }

    fn inverse(&self, y: Complex64) -> Result<Complex64> {
        Err(Error::OutOfRange {
            point: format!("{y}"),
        })
    }
}

impl<S: TensorField> Representative<S> {
    pub fn extension(&self) -> &BeurlingAhlfors {
        &self.extension
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn inverse_map(&self) -> InverseMap<'_, S> {
        InverseMap { rep: self }
    }

    fn forward(&self, x: Complex64) -> (Complex64, Complex64, Complex64) {
        let (w, p1, q1) = self.extension.evaluate(x / self.radius);
        let w = if w.norm() < 1e-12 { Complex64::new(1e-12, 0.0) } else { w };
        let (r, dr) = self.profile.eval(w.arg());
        let pp = Complex64::new(r, -0.5 * dr);
        let qp = I * (w / w.conj()) * (0.5 * dr);
        let (p, q) = chain((pp, qp), (p1 / self.radius, q1 / self.radius));
        (w * r, p, q)
    }

    /// Samples onto `grid`, masked to the disc.
    pub fn to_grid(&self, grid: GridSpec) -> Result<ConductivityTensor> {
        let r = self.radius;
        ConductivityTensor::sample(grid, self, |z| z.norm() < r)
    }
}

impl<S: TensorField> TensorField for Representative<S> {
    fn tensor_at(&self, x: Complex64) -> SymTensor {
        if x.norm() >= self.radius {
            return SymTensor::IDENTITY;
        }
        let (y, p, q) = self.forward(x);
        let j = jacobian_det(p, q);
        let s = self.sigma.tensor_at(y);
        transport_tensor(&s, p.conj() / j, -q / j).unwrap_or(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn samples() -> Vec<Complex64> {
        let mut v = vec![c(0.0, 0.0)];
        for r in [0.2, 0.5, 0.8, 0.95, 0.999] {
            for j in 0..16 {
                v.push(Complex64::from_polar(r, 0.37 + TAU * j as f64 / 16.0));
            }
        }
        v
    }

    #[test]
    fn quadrature_integrates_polynomials() {
        let (x, w) = gauss_legendre(QUADRATURE);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((s - 1.0 / 31.0).abs() < 1e-15);
    }

    #[test]
    fn identity_extends_to_identity() {
        let ab = beurling_ahlfors_extension(&CircleHomeomorphism::identity()).unwrap();
        for z in samples() {
            assert!((ab.apply(z) - z).norm() < 1e-10, "{z}");
            let (p, q) = ab.derivatives(z);
            assert!((p - 1.0).norm() < 1e-7 && q.norm() < 1e-7, "{z} {p} {q}");
        }
    }

    #[test]
    fn rotation_extends_to_rotation() {
        let a = 0.9;
        let ab = beurling_ahlfors_extension(&CircleHomeomorphism::rotation(a)).unwrap();
        for z in samples() {
            assert!((ab.apply(z) - z * Complex64::from_polar(1.0, a)).norm() < 1e-10);
        }
        assert!((ab.inverse(c(0.3, 0.4)).unwrap() * Complex64::from_polar(1.0, a) - c(0.3, 0.4)).norm() < 1e-10);
    }

    #[test]
    fn perturbed_map_is_orientation_preserving() {
        let f = |t: f64| t + 0.1 * t.sin();
        let g = CircleHomeomorphism::from_fn(f).unwrap();
        let ab = beurling_ahlfors_extension(&g).unwrap();
        assert!(ab.quasisymmetry < QUASISYMMETRY_WARN);
        assert!(min_jacobian_on_disc(&ab, 1.0).1 > 0.0);
        let mut err: f64 = 0.0;
        for j in 0..360 {
            let t = TAU * j as f64 / 360.0;
            err = err.max((ab.apply(Complex64::from_polar(1.0 - 1e-7, t)) - Complex64::from_polar(1.0, f(t))).norm());
        }
        assert!(err < 1e-3, "{err}");
        let z = c(0.2, -0.6);
        assert!((ab.inverse(ab.apply(z)).unwrap() - z).norm() < 1e-10);
    }

    #[test]
    fn reflection_continues_the_map() {
        let g = CircleHomeomorphism::from_fn(|t| t + 0.2 * (2.0 * t).sin()).unwrap();
        let ab = beurling_ahlfors_extension(&g).unwrap();
        let z = c(1.4, 0.9);
        let e = 1e-6;
        let fd_x = (ab.apply(z + e) - ab.apply(z - e)) / (2.0 * e);
        let fd_y = (ab.apply(z + I * e) - ab.apply(z - I * e)) / (2.0 * e);
        let (p, q) = ab.derivatives(z);
        assert!((0.5 * (fd_x - I * fd_y) - p).norm() < 1e-6);
        assert!((0.5 * (fd_x + I * fd_y) - q).norm() < 1e-6);
    }

    #[test]
    fn symmetric_extension_commutes_with_reflection() {
        let g = CircleHomeomorphism::from_fn(|t| t + 0.15 * t.sin() + 0.05 * (3.0 * t).sin()).unwrap();
        let ext = beurling_ahlfors_symmetric(&g).unwrap();
        for z in samples() {
            assert!((ext.apply(z.conj()) - ext.apply(z).conj()).norm() < 1e-9);
        }
        let asym = CircleHomeomorphism::from_fn(|t| t + 0.2 * t.cos()).unwrap();
        let e = beurling_ahlfors_symmetric(&asym).unwrap();
        for t in [0.3, 1.0, 2.5, -2.0] {
            let b = e.apply(Complex64::from_polar(1.0 - 1e-7, t));
            assert!((b - Complex64::from_polar(1.0, asym.eval(t))).norm() < 1e-3, "{t}");
        }
    }

    #[test]
    fn quasisymmetry_of_steep_map() {
        assert!((CircleHomeomorphism::identity().quasisymmetry_modulus(8) - 1.0).abs() < 1e-9);
        let steep = CircleHomeomorphism::from_fn(|t| t + 0.95 * t.sin()).unwrap();
        assert!(steep.quasisymmetry_modulus(8) > 5.0);
    }

    #[test]
    fn representative_of_identity_curve() {
        let sigma = SymTensor::isotropic(3.0);
        struct Constant(SymTensor);
        impl TensorField for Constant {
            fn tensor_at(&self, _: Complex64) -> SymTensor {
                self.0
            }
        }
        let rep = build_representative(Constant(sigma), |s| Complex64::from_polar(1.5, s), 1.5).unwrap();
        for z in samples() {
            let x = z * 1.4;
            assert!(rep.tensor_at(x).max_abs_diff(&sigma) < 1e-7, "{x}");
            assert!((rep.inverse_map().apply(x) - x).norm() < 1e-9);
        }
    }
}
