//! P1 finite elements for `div(sigma grad u) = 0` and the boundary operators
//! built from them: Dirichlet-to-Neumann and Neumann-to-Dirichlet maps,
//! conjugate solutions and the conductivity Hilbert transform.

mod boundary;
mod fem;
mod mesh;
mod reparam;
mod sparse;

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use boundary::{BoundaryTrace, CauchyDataSet, DtnMatrix};
pub use fem::{assemble_stiffness, gradients, FemSolution, FemSystem, FEM_TOL};
pub use mesh::{MeshLocator, TriangularMesh};
pub use reparam::BoundaryReparam;
pub use sparse::{pcg, CgReport, CsrMatrix, IncompleteCholesky};

use crate::error::{Error, Result};
use crate::field_algebra::{HatSigma, TensorField};

pub const DEFAULT_MODES: usize = 16;
pub const DEFAULT_MESH_SIZE: f64 = 0.02;

fn require_closed(mesh: &TriangularMesh) -> Result<()> {
    if mesh.is_closed() {
        Ok(())
    } else {
        Err(Error::Mesh("operation needs a closed boundary ring".into()))
    }
}

fn check_modes(mesh: &TriangularMesh, modes: usize) -> Result<()> {
    let ring = mesh.boundary().len();
    if 4 * modes > ring {
        return Err(Error::TooManyModes {
            modes,
            available: ring,
        });
    }
    Ok(())
}

/// Values of a real trace at the boundary vertices.
pub fn trace_values(mesh: &TriangularMesh, phi: &BoundaryTrace) -> Vec<f64> {
    mesh.boundary_angles()
        .iter()
        .map(|t| phi.evaluate(*t).re)
        .collect()
}

/// Fourier coefficients of a P1 function along the boundary ring.
pub fn boundary_trace(mesh: &TriangularMesh, u: &[f64], modes: usize) -> Result<BoundaryTrace> {
    require_closed(mesh)?;
    let v: Vec<f64> = mesh.boundary().iter().map(|b| u[*b]).collect();
    BoundaryTrace::from_real_samples(&v, modes)
}

fn dirichlet_with(sys: &FemSystem<'_>, phi: &BoundaryTrace) -> Result<FemSolution> {
    let mesh = sys.mesh();
    let values = trace_values(mesh, phi);
    let mut at = vec![0.0; mesh.vertices().len()];
    for (b, v) in mesh.boundary().iter().zip(values) {
        at[*b] = v;
    }
    sys.solve(|v| at[v], None)
}

/// `div(sigma grad u) = 0` with `u = phi` at the boundary vertices.
pub fn solve_dirichlet(
    sigma: &impl TensorField,
    phi: &BoundaryTrace,
    mesh: &TriangularMesh,
) -> Result<FemSolution> {
    require_closed(mesh)?;
    if !phi.is_real(1e-12) {
        return Err(Error::Singular(format!(
            "Dirichlet data must be real (defect {:.3e}); solve real and imaginary parts separately",
            phi.reality_defect()
        )));
    }
    let sys = FemSystem::new(mesh, sigma, mesh.boundary())?;
    dirichlet_with(&sys, phi)
}

/// Basis solutions for `cos n theta`, `sin n theta`, `1 <= n <= N`.
pub struct DtnBasis {
    pub modes: usize,
    pub cos: Vec<FemSolution>,
    pub sin: Vec<FemSolution>,
}

pub fn dtn_basis(sys: &FemSystem<'_>, modes: usize) -> Result<DtnBasis> {
    let mut cos = Vec::with_capacity(modes);
    let mut sin = Vec::with_capacity(modes);
    for n in 1..=modes {
        cos.push(dirichlet_with(sys, &BoundaryTrace::cos(modes, n))?);
        sin.push(dirichlet_with(sys, &BoundaryTrace::sin(modes, n))?);
    }
    Ok(DtnBasis { modes, cos, sin })
}

/// Energy-form assembly: entry `(m, n)` is `a(u_n, u_{-m}) / 2 pi` where
/// `u_n` extends `e^{i n theta}`.
pub fn dtn_from_basis(sys: &FemSystem<'_>, basis: &DtnBasis) -> Result<DtnMatrix> {
    let modes = basis.modes;
    let k = sys.stiffness();
    let nv = sys.mesh().vertices().len();
    let mut ku = Vec::with_capacity(2 * modes);
    for s in basis.cos.iter().chain(&basis.sin) {
        let mut out = vec![0.0; nv];
        k.mul_vec(&s.values, &mut out);
        ku.push(out);
    }
    let real: Vec<&[f64]> = basis
        .cos
        .iter()
        .chain(&basis.sin)
        .map(|s| s.values.as_slice())
        .collect();
    // Real Gram matrix of the cos/sin solutions.
    let dim = 2 * modes;
    let mut gram = vec![0.0; dim * dim];
    for a in 0..dim {
        for b in 0..dim {
            gram[a * dim + b] = real[a].iter().zip(&ku[b]).map(|(x, y)| x * y).sum();
        }
    }
    let g = |a: usize, b: usize| gram[a * dim + b];
    let i = Complex64::new(0.0, 1.0);
    // u_n = c_|n| + i sign(n) s_|n|.
    let parts = |n: i64| -> (usize, usize, Complex64) {
        let a = n.unsigned_abs() as usize - 1;
        (a, modes + a, if n > 0 { i } else { -i })
    };
    let mut d = DtnMatrix::zeros(modes);
    let m_ = modes as i64;
    for m in -m_..=m_ {
        for n in -m_..=m_ {
            if m == 0 || n == 0 {
                continue;
            }
            let (cn, sn, en) = parts(n);
            let (cm, sm, em) = parts(-m);
            let v = g(cn, cm) + en * g(sn, cm) + em * g(cn, sm) + en * em * g(sn, sm);
            d.set(m, n, v / TAU);
        }
    }
    Ok(d)
}

/// Dirichlet-to-Neumann matrix on `|n| <= modes`; the constant mode row and
/// column are exactly zero.
pub fn dtn_matrix(
    sigma: &impl TensorField,
    mesh: &TriangularMesh,
    modes: usize,
) -> Result<DtnMatrix> {
    require_closed(mesh)?;
    check_modes(mesh, modes)?;
    let sys = FemSystem::new(mesh, sigma, mesh.boundary())?;
    let basis = dtn_basis(&sys, modes)?;
    dtn_from_basis(&sys, &basis)
}

/// `Q(phi) = integral of phi * Lambda phi` over the boundary.
pub fn quadratic_form(lambda: &DtnMatrix, phi: &BoundaryTrace) -> f64 {
    let m = lambda.modes() as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for a in -m..=m {
        for b in -m..=m {
            acc += phi.get(a).conj() * lambda.get(a, b) * phi.get(b);
        }
    }
    TAU * acc.re
}

/// Solution `u_hat` of the `sigma / det sigma` problem with
/// `grad u_hat = J sigma grad u`, normalized to zero boundary mean.
pub fn conjugate_solution(
    sigma: &impl TensorField,
    mesh: &TriangularMesh,
    u: &FemSolution,
) -> Result<FemSolution> {
    if mesh.euler_characteristic() != 1 {
        return Err(Error::Mesh(format!(
            "conjugates need a simply connected domain (Euler characteristic {})",
            mesh.euler_characteristic()
        )));
    }
    let hat = HatSigma(sigma);
    let load = fem::rotated_gradient_load(mesh, &u.values);
    let pin = mesh.boundary()[0];
    let sys = FemSystem::new(mesh, &hat, &[pin])?;
    let mut sol = sys.solve(|_| 0.0, Some(&load))?;
    let ring = mesh.boundary();
    let mean = ring.iter().map(|b| sol.values[*b]).sum::<f64>() / ring.len() as f64;
    sol.values.iter_mut().for_each(|v| *v -= mean);
    Ok(sol)
}

/// Correspondence `theta~ -> theta` between the polar angle on a closed
/// star-shaped curve `t -> curve(t)`, `t` the angle on the unit circle, and
/// the circle angle.
pub fn boundary_correspondence(curve: impl Fn(f64) -> Complex64) -> Result<BoundaryReparam> {
    BoundaryReparam::from_fn(2048, |t| curve(t).arg())?.inverse()
}

/// Mesh of the domain bounded by `curve`, which must be star-shaped about
/// the origin, with boundary parameter the polar angle; and the boundary
/// correspondence from [`boundary_correspondence`].
pub fn image_domain(
    curve: impl Fn(f64) -> Complex64,
    h: f64,
) -> Result<(TriangularMesh, BoundaryReparam)> {
    let back = boundary_correspondence(&curve)?;
    let mesh = TriangularMesh::star_shaped(h, |t| curve(back.eval(t)).norm())?;
    Ok((mesh, back))
}

/// `H_mn = Lambda_mn / (i m)`: tangential integration of the current.
pub fn hilbert_matrix(lambda: &DtnMatrix) -> DtnMatrix {
    let modes = lambda.modes() as i64;
    let mut h = DtnMatrix::zeros(lambda.modes());
    for m in -modes..=modes {
        if m == 0 {
            continue;
        }
        for n in -modes..=modes {
            h.set(m, n, lambda.get(m, n) / Complex64::new(0.0, m as f64));
        }
    }
    h
}

/// Boundary values of the conjugate, with zero mean.
pub fn hilbert_transform(lambda: &DtnMatrix, phi: &BoundaryTrace) -> BoundaryTrace {
    hilbert_matrix(lambda).apply(&phi.with_modes(lambda.modes()))
}

pub fn cauchy_data(
    sigma: &impl TensorField,
    mesh: &TriangularMesh,
    modes: usize,
) -> Result<CauchyDataSet> {
    Ok(CauchyDataSet::from_dtn(&dtn_matrix(sigma, mesh, modes)?))
}

/// Quadrature points used for the change-of-parameter matrix.
const REPARAM_QUADRATURE: usize = 4096;

/// Operator for traces `phi o h`, where `h` maps the new parameter to the
/// old one: `T^H Lambda T` with `T_nk` the coefficients of `e^{i k h^{-1}}`.
pub fn transform_dtn(
    lambda: &DtnMatrix,
    h: &BoundaryReparam,
    modes_out: usize,
) -> Result<DtnMatrix> {
    let inv = h.inverse()?;
    let nin = lambda.modes() as i64;
    let nout = modes_out as i64;
    let q = REPARAM_QUADRATURE;
    let psi: Vec<f64> = (0..q)
        .map(|j| inv.eval(TAU * j as f64 / q as f64))
        .collect();
    let mut t = DMatrix::from_element(
        (2 * nin + 1) as usize,
        (2 * nout + 1) as usize,
        Complex64::new(0.0, 0.0),
    );
    for (j, p) in psi.iter().enumerate() {
        let th = TAU * j as f64 / q as f64;
        for k in -nout..=nout {
            let e = Complex64::from_polar(1.0, k as f64 * p);
            for n in -nin..=nin {
                t[((n + nin) as usize, (k + nout) as usize)] +=
                    e * Complex64::from_polar(1.0, -(n as f64) * th);
            }
        }
    }
    t /= Complex64::new(q as f64, 0.0);
    let out = t.adjoint() * lambda.matrix() * &t;
    let mut d = DtnMatrix::new(modes_out, out)?;
    // Constants stay constants under a change of parameter.
    for n in -nout..=nout {
        d.set(0, n, Complex64::new(0.0, 0.0));
        d.set(n, 0, Complex64::new(0.0, 0.0));
    }
    Ok(d)
}

/// Pseudo-inverse of `Lambda` on zero-mean traces.
pub fn ntd_matrix(lambda: &DtnMatrix) -> Result<DtnMatrix> {
    let modes = lambda.modes();
    let size = 2 * modes;
    let idx: Vec<i64> = (-(modes as i64)..=modes as i64)
        .filter(|n| *n != 0)
        .collect();
    let mut block = DMatrix::from_element(size, size, Complex64::new(0.0, 0.0));
    for (a, m) in idx.iter().enumerate() {
        for (b, n) in idx.iter().enumerate() {
            block[(a, b)] = lambda.get(*m, *n);
        }
    }
    let svd = block.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::Singular(format!(
            "DtN block is rank deficient beyond constants (singular values {smin:.3e} .. {smax:.3e})"
        )));
    }
    let inv = svd
        .pseudo_inverse(0.0)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let mut d = DtnMatrix::zeros(modes);
    for (a, m) in idx.iter().enumerate() {
        for (b, n) in idx.iter().enumerate() {
            d.set(*m, *n, inv[(a, b)]);
        }
    }
    Ok(d)
}

/// Operator on the circle of radius `radius > 1` for a conductivity equal to
/// one on the annulus `1 < |z| < radius`, from the operator on the unit
/// circle. Both use the angle as parameter.
pub fn extend_dtn(lambda: &DtnMatrix, radius: f64) -> Result<DtnMatrix> {
    if !(radius > 1.0) || !radius.is_finite() {
        return Err(Error::BoundViolated {
            what: "extension radius > 1",
            value: radius,
            bound: 1.0,
        });
    }
    let modes = lambda.modes();
    let idx: Vec<i64> = (-(modes as i64)..=modes as i64)
        .filter(|n| *n != 0)
        .collect();
    let size = idx.len();
    let zero = Complex64::new(0.0, 0.0);
    let power = |n: i64| radius.powi(n.abs() as i32);
    // Harmonic modes A r^|n| + B r^-|n| in the annulus; the unknown inner
    // trace c solves (Lambda + D2) c = D1 f from flux continuity.
    let mut lhs = DMatrix::from_element(size, size, zero);
    let mut d1 = DMatrix::from_element(size, size, zero);
    for (a, m) in idx.iter().enumerate() {
        for (b, n) in idx.iter().enumerate() {
            lhs[(a, b)] = lambda.get(*m, *n);
        }
        let (p, q, k) = (power(*m), 1.0 / power(*m), m.abs() as f64);
        lhs[(a, a)] += Complex64::new(k * (p + q) / (p - q), 0.0);
        d1[(a, a)] = Complex64::new(2.0 * k / (p - q), 0.0);
    }
    let inner = lhs
        .lu()
        .solve(&d1)
        .ok_or_else(|| Error::Singular("annulus extension".into()))?;
    let mut out = DtnMatrix::zeros(modes);
    for (a, m) in idx.iter().enumerate() {
        let (p, q, k) = (power(*m), 1.0 / power(*m), m.abs() as f64);
        for (b, n) in idx.iter().enumerate() {
            let f = if a == b { 1.0 } else { 0.0 };
            let c = inner[(a, b)];
            let big = (f - c * q) / (p - q);
            let small = c - big;
            out.set(*m, *n, (big * p - small * q) * k);
        }
    }
    Ok(out)
}

/// Exact disc operator `diag(c |n|)` for a constant isotropic conductivity.
pub fn disc_dtn_isotropic(c: f64, modes: usize) -> DtnMatrix {
    DtnMatrix::diagonal(modes, |n| c * n.abs() as f64)
}

/// Mean over the boundary ring of a P1 function.
pub fn boundary_mean(mesh: &TriangularMesh, u: &[f64]) -> f64 {
    let ring = mesh.boundary();
    ring.iter().map(|b| u[*b]).sum::<f64>() / ring.len() as f64
}

/// Boundary length of the inscribed polygon.
pub fn boundary_length(mesh: &TriangularMesh) -> f64 {
    let v = mesh.vertices();
    let ring = mesh.boundary();
    let n = ring.len();
    let last = if mesh.is_closed() { n } else { n - 1 };
    (0..last)
        .map(|j| (v[ring[(j + 1) % n]] - v[ring[j]]).norm())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_algebra::{ConductivityModel, SymTensor};
    use std::f64::consts::PI;

    fn iso(c: f64) -> ConductivityModel {
        ConductivityModel::Constant {
            tensor: SymTensor::isotropic(c),
            radius: 10.0,
        }
    }

    #[test]
    fn constant_data_gives_constant_solution() {
        let m = TriangularMesh::disc(0.1).unwrap();
        let u = solve_dirichlet(&iso(2.0), &BoundaryTrace::constant(4, 3.0), &m).unwrap();
        assert!(u.values.iter().all(|v| (v - 3.0).abs() < 1e-10));
    }

    #[test]
    fn harmonic_polynomial_error_is_second_order() {
        let err = |h: f64| {
            let m = TriangularMesh::disc(h).unwrap();
            let u = solve_dirichlet(&ConductivityModel::Identity, &BoundaryTrace::cos(4, 3), &m)
                .unwrap();
            let mut acc = 0.0;
            for (t, tri) in m.triangles().iter().enumerate() {
                let z = m.centroid(t);
                let approx = tri.iter().map(|v| u.values[*v]).sum::<f64>() / 3.0;
                acc += m.area(t) * (approx - (z * z * z).re).powi(2);
            }
            acc.sqrt()
        };
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e2 < e1 / 3.0, "{e1} {e2}");
    }

    #[test]
    fn identity_dtn_spectrum() {
        let m = TriangularMesh::disc(0.05).unwrap();
        let d = dtn_matrix(&ConductivityModel::Identity, &m, 4).unwrap();
        for n in -4i64..=4 {
            let v = d.get(n, n).re;
            assert!(
                (v - n.abs() as f64).abs() <= 0.02 * n.abs() as f64 + 1e-12,
                "{n} {v}"
            );
        }
        assert!(d.hermitian_defect() < 1e-10);
        assert_eq!(d.constant_mode_leak(), 0.0);
        assert!(dtn_matrix(&ConductivityModel::Identity, &m, m.boundary().len() / 4 + 1).is_err());
    }

    #[test]
    fn annulus_extension_of_layered_disc() {
        let (c, r) = (3.0, 1.7);
        let ext = extend_dtn(&disc_dtn_isotropic(c, 6), r).unwrap();
        for n in -6i64..=6 {
            let k = n.abs() as f64;
            let (a, b) = ((1.0 + c) * r.powf(k), (1.0 - c) * r.powf(-k));
            let want = if n == 0 { 0.0 } else { k * (a - b) / (a + b) };
            assert!((ext.get(n, n).re - want).abs() < 1e-12, "{n}");
            assert!(ext.get(n, -n).norm() < 1e-12 || n == 0);
        }
        let id = extend_dtn(&disc_dtn_isotropic(1.0, 4), 2.0).unwrap();
        assert!(id.relative_defect(&disc_dtn_isotropic(1.0, 4)) < 1e-14);
        assert!(extend_dtn(&id, 1.0).is_err());
    }

    #[test]
    fn quadratic_form_examples() {
        let exact = disc_dtn_isotropic(1.0, 4);
        assert!((quadratic_form(&exact, &BoundaryTrace::cos(4, 1)) - PI).abs() < 1e-14);
        assert!((quadratic_form(&exact, &BoundaryTrace::cos(4, 2)) - 2.0 * PI).abs() < 1e-14);
        assert_eq!(
            quadratic_form(&exact, &BoundaryTrace::constant(4, 1.0)),
            0.0
        );
    }

    #[test]
    fn quadratic_form_matches_interior_energy() {
        let m = TriangularMesh::disc(0.08).unwrap();
        let s = ConductivityModel::Constant {
            tensor: SymTensor::new(3.0, 0.5, 1.0),
            radius: 0.6,
        };
        let d = dtn_matrix(&s, &m, 4).unwrap();
        let phi =
            BoundaryTrace::cos(4, 1).add(&BoundaryTrace::sin(4, 3).scale(Complex64::new(0.5, 0.0)));
        let sys = FemSystem::new(&m, &s, m.boundary()).unwrap();
        let u = dirichlet_with(&sys, &phi).unwrap();
        let e = sys.energy(&u.values, &u.values);
        assert!((quadratic_form(&d, &phi) - e).abs() < 1e-10 * e);
    }

    #[test]
    fn conjugate_of_harmonic_polynomials() {
        let m = TriangularMesh::disc(0.05).unwrap();
        let u =
            solve_dirichlet(&ConductivityModel::Identity, &BoundaryTrace::cos(4, 1), &m).unwrap();
        let c = conjugate_solution(&ConductivityModel::Identity, &m, &u).unwrap();
        for (z, v) in m.vertices().iter().zip(&c.values) {
            assert!((v - z.im).abs() < 1e-8);
        }
        let u =
            solve_dirichlet(&ConductivityModel::Identity, &BoundaryTrace::cos(4, 2), &m).unwrap();
        let c = conjugate_solution(&ConductivityModel::Identity, &m, &u).unwrap();
        let err = m
            .vertices()
            .iter()
            .zip(&c.values)
            .map(|(z, v)| (v - (z * z).im).abs())
            .fold(0.0, f64::max);
        assert!(err < 5e-3, "{err}");
    }

    #[test]
    fn hilbert_transform_of_identity() {
        let d = disc_dtn_isotropic(1.0, 6);
        for n in 1..=6 {
            let h = hilbert_transform(&d, &BoundaryTrace::cos(6, n));
            assert!(h.distance(&BoundaryTrace::sin(6, n)) < 1e-15);
            let h = hilbert_transform(&d, &BoundaryTrace::sin(6, n));
            assert!(h.distance(&BoundaryTrace::cos(6, n).scale(Complex64::new(-1.0, 0.0))) < 1e-15);
        }
        assert_eq!(
            hilbert_transform(&d, &BoundaryTrace::constant(6, 2.0)).l2_norm(),
            0.0
        );
    }

    #[test]
    fn rotation_conjugates_by_phases() {
        let m = TriangularMesh::disc(0.1).unwrap();
        let s = ConductivityModel::Constant {
            tensor: SymTensor::new(2.0, 0.7, 1.0),
            radius: 0.7,
        };
        let d = dtn_matrix(&s, &m, 6).unwrap();
        let same = transform_dtn(&d, &BoundaryReparam::identity(256), 6).unwrap();
        assert!(same.relative_defect(&d) < 1e-12);
        let alpha = 0.4;
        let r = transform_dtn(&d, &BoundaryReparam::rotation(alpha, 256), 6).unwrap();
        for a in -6i64..=6 {
            for b in -6i64..=6 {
                let expect = d.get(a, b) * Complex64::from_polar(1.0, (a - b) as f64 * alpha);
                assert!((r.get(a, b) - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ntd_inverts_on_zero_mean() {
        let d = disc_dtn_isotropic(2.5, 5);
        let s = ntd_matrix(&d).unwrap();
        for n in -5i64..=5 {
            let expect = if n == 0 {
                0.0
            } else {
                1.0 / (2.5 * n.abs() as f64)
            };
            assert!((s.get(n, n).re - expect).abs() < 1e-14);
        }
        assert!(ntd_matrix(&DtnMatrix::zeros(3)).is_err());
    }
}
