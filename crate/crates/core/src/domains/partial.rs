use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dtn::{BoundaryTrace, CauchyDataSet, DtnMatrix, FemSystem, TriangularMesh};
use crate::error::{Error, Result};
use crate::field_algebra::{SymTensor, TensorField};

/// `eta(x1, x2) = (x1, -x2)`.
pub fn reflection(z: Complex64) -> Complex64 {
    z.conj()
}

/// `sigma` on the upper half disc and `eta_* sigma` on the lower one. Distinct
/// from `HatSigma`, which is `sigma / det sigma`.
#[derive(Debug, Clone)]
pub struct ReflectedConductivity<S> {
    pub sigma: S,
}

impl<S: TensorField> TensorField for ReflectedConductivity<S> {
    fn tensor_at(&self, z: Complex64) -> SymTensor {
        if z.im >= 0.0 {
            self.sigma.tensor_at(z)
        } else {
            let t = self.sigma.tensor_at(reflection(z));
            SymTensor::new(t.s11, -t.s12, t.s22)
        }
    }
}

pub fn reflect_conductivity<S: TensorField>(sigma: S) -> ReflectedConductivity<S> {
    ReflectedConductivity { sigma }
}

/// Data on the arc `Gamma = {e^{i theta} : 0 < theta < pi}` of the upper
/// half disc, in the sine and cosine bases of the arc.
///
/// `dirichlet[(m-1, n-1)]` is the `sin m theta` coefficient of the flux for
/// Dirichlet data `sin n theta` on `Gamma` and zero on the flat side.
/// `neumann[(m-1, n-1)]` is the `cos m theta` coefficient of the trace for
/// flux `cos n theta` on `Gamma` and zero flux on the flat side; traces are
/// taken modulo constants.
#[derive(Debug, Clone)]
pub struct PartialData {
    pub modes: usize,
    pub dirichlet: DMatrix<f64>,
    pub neumann: DMatrix<f64>,
}

/// Nodal loads of the flux `psi(theta)` per unit angle along the arc.
fn arc_load(mesh: &TriangularMesh, psi: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.vertices().len()];
    let (ring, angles) = (mesh.boundary(), mesh.boundary_angles());
    for j in 0..ring.len() - 1 {
        let (ta, tb) = (angles[j], angles[j + 1]);
        let mid = psi(0.5 * (ta + tb));
        let w = (tb - ta) / 6.0;
        load[ring[j]] += w * (psi(ta) + 2.0 * mid);
        load[ring[j + 1]] += w * (2.0 * mid + psi(tb));
    }
    load
}

/// Forward measurement of `(Lambda_Gamma, Sigma_Gamma)` on a half-disc mesh.
pub fn partial_data(sigma: &impl TensorField, mesh: &TriangularMesh, modes: usize) -> Result<PartialData> {
    if mesh.is_closed() || mesh.flat().is_empty() {
        return Err(Error::Mesh("partial data needs a half-disc mesh".into()));
    }
    let arc = mesh.boundary();
    if arc.len() < 4 * modes + 1 {
        return Err(Error::TooManyModes {
            modes,
            available: arc.len(),
        });
    }
    let nv = mesh.vertices().len();
    let energy = |sys: &FemSystem<'_>, u: &[Vec<f64>]| {
        let ku: Vec<Vec<f64>> = u
            .iter()
            .map(|x| {
                let mut out = vec![0.0; nv];
                sys.stiffness().mul_vec(x, &mut out);
                out
            })
            .collect();
        DMatrix::from_fn(modes, modes, |m, n| {
            2.0 / PI * u[m].iter().zip(&ku[n]).map(|(a, b)| a * b).sum::<f64>()
        })
    };

    let mut fixed: Vec<usize> = arc.to_vec();
    fixed.extend_from_slice(mesh.flat());
    let sys = FemSystem::new(mesh, sigma, &fixed)?;
    let mut at = vec![0.0; nv];
    let mut odd = Vec::with_capacity(modes);
    for n in 1..=modes {
        for (v, t) in arc.iter().zip(mesh.boundary_angles()) {
            at[*v] = (n as f64 * t).sin();
        }
        odd.push(sys.solve(|v| at[v], None)?.values);
    }
    let dirichlet = energy(&sys, &odd);

    // Pure Neumann problem, pinned at the centre of the flat side.
    let pin = *mesh
        .flat()
        .iter()
        .min_by(|a, b| mesh.vertices()[**a].norm().total_cmp(&mesh.vertices()[**b].norm()))
        .expect("flat side is not empty");
    let sys = FemSystem::new(mesh, sigma, &[pin])?;
    let weights = arc_load(mesh, |_| 1.0);
    let total: f64 = weights.iter().sum();
    let mut even = Vec::with_capacity(modes);
    for n in 1..=modes {
        let mut load = arc_load(mesh, |t| (n as f64 * t).cos());
        let excess: f64 = load.iter().sum::<f64>() / total;
        load.iter_mut().zip(&weights).for_each(|(l, w)| *l -= excess * w);
        even.push(sys.solve(|_| 0.0, Some(&load))?.values);
    }
    let neumann = energy(&sys, &even);
    Ok(PartialData {
        modes,
        dirichlet,
        neumann,
    })
}

/// Cauchy data of the reflected conductivity on the whole disc: odd pairs
/// `(sin n theta, flux)` from `Lambda_Gamma`, even pairs `(trace, cos n theta)`
/// from `Sigma_Gamma`, and the constant pair `(1, 0)`.
pub fn cauchy_data_from_partial(data: &PartialData) -> Result<CauchyDataSet> {
    let n = data.modes;
    if data.dirichlet.shape() != (n, n) || data.neumann.shape() != (n, n) {
        return Err(Error::ShapeMismatch {
            expected: n * n,
            got: data.dirichlet.len().min(data.neumann.len()),
        });
    }
    let series = |f: &dyn Fn(usize) -> f64, odd: bool| -> BoundaryTrace {
        let mut t = BoundaryTrace::zeros(n);
        for m in 1..=n {
            let c = f(m);
            let (p, q) = if odd {
                (Complex64::new(0.0, -0.5 * c), Complex64::new(0.0, 0.5 * c))
            } else {
                (Complex64::new(0.5 * c, 0.0), Complex64::new(0.5 * c, 0.0))
            };
            t.set(m as i64, p);
            t.set(-(m as i64), q);
        }
        t
    };
    let mut pairs = vec![(BoundaryTrace::constant(n, 1.0), BoundaryTrace::zeros(n))];
    for k in 1..=n {
        let unit = |m: usize| if m == k { 1.0 } else { 0.0 };
        pairs.push((
            series(&unit, true),
            series(&|m| data.dirichlet[(m - 1, k - 1)], true),
        ));
        pairs.push((
            series(&|m| data.neumann[(m - 1, k - 1)], false),
            series(&unit, false),
        ));
    }
    Ok(CauchyDataSet { pairs })
}

/// Full-disc DtN map of the reflected conductivity from partial data.
pub fn dtn_from_partial(data: &PartialData) -> Result<DtnMatrix> {
    cauchy_data_from_partial(data)?.fit_dtn(data.modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtn::{disc_dtn_isotropic, dtn_matrix, solve_dirichlet};
    use crate::field_algebra::ConductivityModel;

    #[test]
    fn reflection_flips_off_diagonal() {
        let s = ConductivityModel::constant_on_unit_disc(SymTensor::new(2.0, 0.5, 1.0));
        let r = reflect_conductivity(&s);
        let up = Complex64::new(0.2, 0.3);
        assert_eq!(r.tensor_at(up), SymTensor::new(2.0, 0.5, 1.0));
        assert_eq!(r.tensor_at(up.conj()), SymTensor::new(2.0, -0.5, 1.0));
        let d = reflect_conductivity(ConductivityModel::constant_on_unit_disc(SymTensor::new(3.0, 0.0, 1.0)));
        assert_eq!(d.tensor_at(up.conj()), SymTensor::new(3.0, 0.0, 1.0));
        assert_eq!(reflect_conductivity(ConductivityModel::Identity).tensor_at(up.conj()), SymTensor::IDENTITY);
    }

    #[test]
    fn even_and_odd_parts_span_each_mode() {
        // e^{i n theta} = cos n theta + i sin n theta, one even and one odd
        // function under theta -> -theta.
        for n in 1..5usize {
            let (c, s) = (BoundaryTrace::cos(6, n), BoundaryTrace::sin(6, n));
            let e = c.add(&s.scale(Complex64::new(0.0, 1.0)));
            assert!(e.distance(&BoundaryTrace::exponential(6, n as i64)) < 1e-15);
            for m in -6i64..=6 {
                assert_eq!(c.get(m), c.get(-m));
                assert_eq!(s.get(m), -s.get(-m));
            }
        }
    }

    #[test]
    fn symmetric_data_give_symmetric_solutions() {
        let mesh = TriangularMesh::disc(0.05).unwrap();
        let sigma = reflect_conductivity(ConductivityModel::Constant {
            tensor: SymTensor::new(2.0, 0.6, 1.0),
            radius: 0.7,
        });
        let v = mesh.vertices();
        let mirror: Vec<usize> = v
            .iter()
            .map(|z| {
                (0..v.len())
                    .min_by(|a, b| (v[*a] - z.conj()).norm().total_cmp(&(v[*b] - z.conj()).norm()))
                    .unwrap()
            })
            .collect();
        let even = solve_dirichlet(&sigma, &BoundaryTrace::cos(4, 2), &mesh).unwrap().values;
        let odd = solve_dirichlet(&sigma, &BoundaryTrace::sin(4, 3), &mesh).unwrap().values;
        for (k, j) in mirror.iter().enumerate() {
            assert!((even[k] - even[*j]).abs() < 1e-8);
            assert!((odd[k] + odd[*j]).abs() < 1e-8);
        }
    }

    #[test]
    fn identity_partial_data_give_disc_spectrum() {
        let mesh = TriangularMesh::upper_half(0.02).unwrap();
        let data = partial_data(&ConductivityModel::Identity, &mesh, 8).unwrap();
        let set = cauchy_data_from_partial(&data).unwrap();
        assert_eq!(set.pairs[0].1.l2_norm(), 0.0);
        let d = set.fit_dtn(8).unwrap().truncate(6).unwrap();
        let defect = d.relative_defect(&disc_dtn_isotropic(1.0, 6));
        assert!(defect < 0.02, "defect {defect}");
    }

    #[test]
    fn anisotropic_partial_data_match_full_disc() {
        let sigma = reflect_conductivity(ConductivityModel::Constant {
            tensor: SymTensor::new(2.0, 0.5, 1.0),
            radius: 0.7,
        });
        let half = TriangularMesh::upper_half(0.02).unwrap();
        let from_partial = dtn_from_partial(&partial_data(&sigma, &half, 16).unwrap())
            .unwrap()
            .truncate(6)
            .unwrap();
        let direct = dtn_matrix(&sigma, &TriangularMesh::disc(0.02).unwrap(), 6).unwrap();
        let defect = from_partial.relative_defect(&direct);
        assert!(defect < 0.05, "defect {defect}");
        assert!(partial_data(&sigma, &TriangularMesh::upper_half(0.2).unwrap(), 16).is_err());
    }
}
