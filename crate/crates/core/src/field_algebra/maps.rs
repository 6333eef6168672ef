//! Planar maps described by their complex derivatives `(dF, dbarF)`, and the
//! push-forward of conductivities under them.
//!
//! With `p = dF` and `q = dbarF` the real Jacobian has columns
//! `F_x = p + q`, `F_y = i (p - q)`, determinant `|p|^2 - |q|^2` and
//! operator norm `|p| + |q|`.

use num_complex::Complex64;

use super::tensor::{ConductivityTensor, SymTensor, TensorField};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Field, GridSpec, RealField};

pub trait PlanarMap {
    fn apply(&self, z: Complex64) -> Complex64;

    /// `(dF, dbarF)` at `z`.
    fn derivatives(&self, z: Complex64) -> (Complex64, Complex64);

    fn inverse(&self, y: Complex64) -> Result<Complex64>;
}

impl<M: PlanarMap + ?Sized> PlanarMap for &M {
    fn apply(&self, z: Complex64) -> Complex64 {
        (**self).apply(z)
    }
    fn derivatives(&self, z: Complex64) -> (Complex64, Complex64) {
        (**self).derivatives(z)
    }
    fn inverse(&self, y: Complex64) -> Result<Complex64> {
        (**self).inverse(y)
    }
}

/// Real Jacobian matrix, row-major.
pub fn real_jacobian(p: Complex64, q: Complex64) -> [[f64; 2]; 2] {
    let fx = p + q;
    let fy = Complex64::i() * (p - q);
    [[fx.re, fy.re], [fx.im, fy.im]]
}

pub fn jacobian_det(p: Complex64, q: Complex64) -> f64 {
    p.norm_sqr() - q.norm_sqr()
}

/// `DF sigma DF^t / J` for derivatives `(p, q)`.
pub fn transport_tensor(t: &SymTensor, p: Complex64, q: Complex64) -> Result<SymTensor> {
    let j = jacobian_det(p, q);
    if j <= 0.0 || !j.is_finite() {
        return Err(Error::Degenerate {
            location: "transport".into(),
            jacobian: j,
        });
    }
    Ok(t.congruence(real_jacobian(p, q)).scale(1.0 / j))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMap;

impl PlanarMap for IdentityMap {
    fn apply(&self, z: Complex64) -> Complex64 {
        z
    }
    fn derivatives(&self, _: Complex64) -> (Complex64, Complex64) {
        (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }
    fn inverse(&self, y: Complex64) -> Result<Complex64> {
        Ok(y)
    }
}

/// `F(z) = a z + c conj(z)` with `|c| < |a|`.
#[derive(Debug, Clone, Copy)]
pub struct RealLinearMap {
    pub a: Complex64,
    pub c: Complex64,
}

impl RealLinearMap {
    pub fn rotation(alpha: f64) -> Self {
        RealLinearMap {
            a: Complex64::from_polar(1.0, alpha),
            c: Complex64::new(0.0, 0.0),
        }
    }

    pub fn scaling(s: f64) -> Self {
        RealLinearMap {
            a: Complex64::new(s, 0.0),
            c: Complex64::new(0.0, 0.0),
        }
    }

    /// `z + c conj(z)`.
    pub fn beltrami(c: Complex64) -> Self {
        RealLinearMap {
            a: Complex64::new(1.0, 0.0),
            c,
        }
    }
}

impl PlanarMap for RealLinearMap {
    fn apply(&self, z: Complex64) -> Complex64 {
        self.a * z + self.c * z.conj()
    }
    fn derivatives(&self, _: Complex64) -> (Complex64, Complex64) {
        (self.a, self.c)
    }
    fn inverse(&self, y: Complex64) -> Result<Complex64> {
        let j = jacobian_det(self.a, self.c);
        if j <= 0.0 {
            return Err(Error::Degenerate {
                location: "real-linear map".into(),
                jacobian: j,
            });
        }
        Ok((self.a.conj() * y - self.c * y.conj()) / j)
    }
}

/// Boundary-fixing shear of the unit disc, `r e^{it} -> r e^{i(t + beta (1 - r))}`,
/// identity outside. Area preserving.
#[derive(Debug, Clone, Copy)]
pub struct RadialShear {
    pub beta: f64,
}

impl PlanarMap for RadialShear {
    fn apply(&self, z: Complex64) -> Complex64 {
        let r = z.norm();
        if r >= 1.0 {
            z
        } else {
            z * Complex64::from_polar(1.0, self.beta * (1.0 - r))
        }
    }
    fn derivatives(&self, z: Complex64) -> (Complex64, Complex64) {
        let r = z.norm();
        if r >= 1.0 {
            return (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        }
        let e = Complex64::from_polar(1.0, self.beta * (1.0 - r));
        let ib = Complex64::new(0.0, self.beta);
        let p = e * (1.0 - ib * (0.5 * r));
        let q = if r > 0.0 {
            -ib * e * z * z / (2.0 * r)
        } else {
            Complex64::new(0.0, 0.0)
        };
        (p, q)
    }
    fn inverse(&self, y: Complex64) -> Result<Complex64> {
        let r = y.norm();
        if r >= 1.0 {
            Ok(y)
        } else {
            Ok(y * Complex64::from_polar(1.0, -self.beta * (1.0 - r)))
        }
    }
}

/// `outer` after `inner`.
#[derive(Debug, Clone, Copy)]
pub struct Composed<A, B> {
    pub outer: A,
    pub inner: B,
}

impl<A: PlanarMap, B: PlanarMap> PlanarMap for Composed<A, B> {
    fn apply(&self, z: Complex64) -> Complex64 {
        self.outer.apply(self.inner.apply(z))
    }
    fn derivatives(&self, z: Complex64) -> (Complex64, Complex64) {
        let (p, q) = self.inner.derivatives(z);
        let (gp, gq) = self.outer.derivatives(self.inner.apply(z));
        (gp * p + gq * q.conj(), gp * q + gq * p.conj())
    }
    fn inverse(&self, y: Complex64) -> Result<Complex64> {
        self.inner.inverse(self.outer.inverse(y)?)
    }
}

/// Grid-sampled map with `F(z) = z + a1/z` assumed beyond the sampled box.
#[derive(Debug, Clone)]
pub struct DiffeoMap {
    displacement: ComplexField,
    dz: ComplexField,
    dzbar: ComplexField,
    a1: Complex64,
}

impl DiffeoMap {
    /// `displacement` is `F(z) - z` at cell centres.
    pub fn new(
        displacement: ComplexField,
        dz: ComplexField,
        dzbar: ComplexField,
        a1: Complex64,
    ) -> Result<Self> {
        let g = *displacement.grid();
        if *dz.grid() != g || *dzbar.grid() != g {
            return Err(Error::ShapeMismatch {
                expected: g.len(),
                got: dz.values().len(),
            });
        }
        Ok(DiffeoMap {
            displacement,
            dz,
            dzbar,
            a1,
        })
    }

    /// Samples a closed-form map; `a1` is fitted on the outermost ring of cells.
    pub fn sample(grid: GridSpec, map: &impl PlanarMap) -> Self {
        let displacement = Field::sample(grid, |z| map.apply(z) - z);
        let dz = Field::sample(grid, |z| map.derivatives(z).0);
        let dzbar = Field::sample(grid, |z| map.derivatives(z).1);
        let a1 = boundary_moment(&displacement);
        DiffeoMap {
            displacement,
            dz,
            dzbar,
            a1,
        }
    }

    pub fn identity(grid: GridSpec) -> Self {
        DiffeoMap::sample(grid, &IdentityMap)
    }

    pub fn grid(&self) -> &GridSpec {
        self.displacement.grid()
    }

    pub fn displacement(&self) -> &ComplexField {
        &self.displacement
    }

    pub fn dz(&self) -> &ComplexField {
        &self.dz
    }

    pub fn dzbar(&self) -> &ComplexField {
        &self.dzbar
    }

    pub fn far_coefficient(&self) -> Complex64 {
        self.a1
    }

    pub fn forward(&self) -> ComplexField {
        let g = *self.grid();
        Field::sample(g, |z| z).zip_map(&self.displacement, |z, d| z + d)
    }

    pub fn jacobian(&self) -> RealField {
        self.dz.zip_map(&self.dzbar, jacobian_det)
    }

    /// Index and value of the smallest Jacobian.
    pub fn min_jacobian(&self) -> (usize, f64) {
        self.jacobian().values().iter().copied().enumerate().fold(
            (0, f64::INFINITY),
            |m, (k, j)| if j < m.1 { (k, j) } else { m },
        )
    }

    pub fn check_orientation(&self) -> Result<()> {
        let (k, j) = self.min_jacobian();
        if j <= 0.0 {
            return Err(Error::Degenerate {
                location: format!("cell {k} ({})", self.grid().point_at(k)),
                jacobian: j,
            });
        }
        Ok(())
    }

    fn seed(&self, y: Complex64) -> Complex64 {
        let g = self.grid();
        if g.contains(y) {
            y - self.displacement.interpolate(y)
        } else {
            y - self.a1 / y
        }
    }

    fn newton(&self, y: Complex64, mut x: Complex64) -> Option<Complex64> {
        let scale = 1.0 + y.norm();
        for _ in 0..60 {
            let d = self.apply(x) - y;
            if d.norm() <= 1e-13 * scale {
                return Some(x);
            }
            let (p, q) = self.derivatives(x);
            let j = jacobian_det(p, q);
            if j <= 0.0 || !j.is_finite() {
                return None;
            }
            x -= (p.conj() * d - q * d.conj()) / j;
            if !x.is_finite() {
                return None;
            }
        }
        let d = self.apply(x) - y;
        (d.norm() <= 1e-9 * scale).then_some(x)
    }
}

/// `a1` of `F(z) - z ~ a1/z`, averaged over the outermost ring of cells.
pub(crate) fn boundary_moment(displacement: &ComplexField) -> Complex64 {
    let g = displacement.grid();
    let n = g.n();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut count = 0.0;
    for k in 0..n {
        for (r, c) in [(0, k), (n - 1, k), (k, 0), (k, n - 1)] {
            let idx = g.index(r, c);
            acc += displacement[idx] * g.point_at(idx);
            count += 1.0;
        }
    }
    acc / count
}

impl PlanarMap for DiffeoMap {
    fn apply(&self, z: Complex64) -> Complex64 {
        if self.grid().contains(z) {
            z + self.displacement.interpolate(z)
        } else {
            z + self.a1 / z
        }
    }

    fn derivatives(&self, z: Complex64) -> (Complex64, Complex64) {
        if self.grid().contains(z) {
            (self.dz.interpolate(z), self.dzbar.interpolate(z))
        } else {
            (
                Complex64::new(1.0, 0.0) - self.a1 / (z * z),
                Complex64::new(0.0, 0.0),
            )
        }
    }

    /// Newton iteration on the interpolant; falls back to a search for the
    /// nearest sampled image when the first seed fails.
    fn inverse(&self, y: Complex64) -> Result<Complex64> {
        let l = self.grid().half_width();
        if !y.is_finite() || y.re.abs() > l || y.im.abs() > l {
            return Err(Error::OutOfRange {
                point: format!("{y}"),
            });
        }
        if let Some(x) = self.newton(y, self.seed(y)) {
            return Ok(x);
        }
        let g = self.grid();
        let best = (0..g.len())
            .map(|k| (k, (g.point_at(k) + self.displacement[k] - y).norm()))
            .fold((0, f64::INFINITY), |m, e| if e.1 < m.1 { e } else { m });
        self.newton(y, g.point_at(best.0))
            .ok_or_else(|| Error::OutOfRange {
                point: format!("{y}"),
            })
    }
}

/// Lazy push-forward `(F_* sigma)(y) = [DF sigma DF^t / J](F^{-1}(y))`.
#[derive(Debug, Clone)]
pub struct PushForward<S, M> {
    pub sigma: S,
    pub map: M,
}

impl<S: TensorField, M: PlanarMap> PushForward<S, M> {
    pub fn new(sigma: S, map: M) -> Self {
        PushForward { sigma, map }
    }

    pub fn try_tensor_at(&self, y: Complex64) -> Result<SymTensor> {
        let x = self.map.inverse(y)?;
        let (p, q) = self.map.derivatives(x);
        transport_tensor(&self.sigma.tensor_at(x), p, q)
    }
}

impl<S: TensorField, M: PlanarMap> TensorField for PushForward<S, M> {
    /// Points without a preimage are treated as lying where both the
    /// conductivity and the map are trivial.
    fn tensor_at(&self, y: Complex64) -> SymTensor {
        self.try_tensor_at(y).unwrap_or(SymTensor::IDENTITY)
    }
}

/// `sqrt(det sigma) o F^{-1}`, the isotropic form of `F_* sigma` when `F`
/// removes the anisotropy of `sigma`.
#[derive(Debug, Clone)]
pub struct IsotropicImage<S, M> {
    pub sigma: S,
    pub map: M,
}

impl<S: TensorField, M: PlanarMap> TensorField for IsotropicImage<S, M> {
    fn tensor_at(&self, y: Complex64) -> SymTensor {
        match self.map.inverse(y) {
            Ok(x) => SymTensor::isotropic(self.sigma.tensor_at(x).det().sqrt()),
            Err(_) => SymTensor::IDENTITY,
        }
    }
}

/// Samples `F_* sigma` on `target`. Cells whose tensor differs from the
/// identity form the mask.
pub fn pushforward(
    sigma: &impl TensorField,
    map: &impl PlanarMap,
    target: GridSpec,
) -> Result<ConductivityTensor> {
    let pf = PushForward::new(sigma, map);
    let n = target.len();
    let (mut a, mut b, mut c, mut m) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for y in target.points() {
        let t = pf.try_tensor_at(y)?;
        a.push(t.s11);
        b.push(t.s12);
        c.push(t.s22);
        m.push(t.max_abs_diff(&SymTensor::IDENTITY) > 1e-12);
    }
    ConductivityTensor::new(target, a, b, c, m)
}

/// `K = ||DF||^2 / J = (|p| + |q|) / (|p| - |q|)` per cell.
pub fn distortion(map: &DiffeoMap) -> Result<RealField> {
    map.check_orientation()?;
    Ok(map.dz.zip_map(&map.dzbar, |p, q| {
        let (a, b) = (p.norm(), q.norm());
        (a + b) / (a - b)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fd_derivatives(m: &impl PlanarMap, z: Complex64) -> (Complex64, Complex64) {
        let e = 1e-6;
        let fx = (m.apply(z + e) - m.apply(z - e)) / (2.0 * e);
        let fy = (m.apply(z + c(0.0, e)) - m.apply(z - c(0.0, e))) / (2.0 * e);
        (
            0.5 * (fx - Complex64::i() * fy),
            0.5 * (fx + Complex64::i() * fy),
        )
    }

    #[test]
    fn radial_shear_derivatives_match_differences() {
        let m = RadialShear { beta: 1.3 };
        for z in [c(0.3, 0.2), c(-0.5, 0.6), c(0.01, -0.9)] {
            let (p, q) = m.derivatives(z);
            let (fp, fq) = fd_derivatives(&m, z);
            assert!((p - fp).norm() < 1e-7 && (q - fq).norm() < 1e-7);
            assert!((jacobian_det(p, q) - 1.0).abs() < 1e-12);
            assert!((m.inverse(m.apply(z)).unwrap() - z).norm() < 1e-14);
        }
    }

    #[test]
    fn composition_chain_rule() {
        let m = Composed {
            outer: RealLinearMap::beltrami(c(0.2, -0.1)),
            inner: RadialShear { beta: 0.8 },
        };
        let z = c(0.4, -0.35);
        let (p, q) = m.derivatives(z);
        let (fp, fq) = fd_derivatives(&m, z);
        assert!((p - fp).norm() < 1e-7 && (q - fq).norm() < 1e-7);
        assert!((m.inverse(m.apply(z)).unwrap() - z).norm() < 1e-14);
    }

    #[test]
    fn scaling_pushes_identity_to_identity() {
        let t = transport_tensor(&SymTensor::IDENTITY, c(2.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!(t.max_abs_diff(&SymTensor::IDENTITY) < 1e-15);
    }

    #[test]
    fn beltrami_map_isotropizes_diag_4_1() {
        let t = transport_tensor(
            &SymTensor::new(4.0, 0.0, 1.0),
            c(1.0, 0.0),
            c(-1.0 / 3.0, 0.0),
        )
        .unwrap();
        assert!(t.max_abs_diff(&SymTensor::isotropic(2.0)) < 1e-14);
    }

    #[test]
    fn linear_distortion() {
        let g = GridSpec::new(1.0, 16).unwrap();
        let cc = c(0.3, 0.4);
        let k = distortion(&DiffeoMap::sample(g, &RealLinearMap::beltrami(cc))).unwrap();
        let expect = 1.5 / 0.5;
        assert!(k.values().iter().all(|v| (v - expect).abs() < 1e-13));
        let k = distortion(&DiffeoMap::sample(g, &RealLinearMap::rotation(0.4))).unwrap();
        assert!(k.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn diffeo_inverse_of_linear_map() {
        let g = GridSpec::new(2.0, 64).unwrap();
        let m = DiffeoMap::sample(g, &RealLinearMap::beltrami(c(0.5, 0.0)));
        let x = m.inverse(c(0.3, 0.0)).unwrap();
        assert!((x - c(0.2, 0.0)).norm() < 1e-12);
        assert!(m.inverse(c(5.0, 0.0)).is_err());
    }
}
