use num_complex::Complex64;

use super::chart::ConformalChart;
use crate::dtn::{dtn_matrix, solve_dirichlet, BoundaryTrace, DtnMatrix, FemSolution, TriangularMesh};
use crate::error::{Error, Result};
use crate::field_algebra::{PushForward, SymTensor, TensorField};

/// Conductivity on the exterior of the unit disc carried to the disc by
/// `w = 1/z`. The puncture at `w = 0` gets `sigma(infinity) = I`.
#[derive(Debug, Clone)]
pub struct InvertedConductivity<S> {
    pub sigma: S,
}

impl<S: TensorField> TensorField for InvertedConductivity<S> {
    fn tensor_at(&self, w: Complex64) -> SymTensor {
        if w.norm() == 0.0 {
            return SymTensor::IDENTITY;
        }
        PushForward::new(&self.sigma, ConformalChart::Exterior).tensor_at(w)
    }
}

/// Bounded solution on the exterior, stored as the disc solution in the
/// inverted variable.
#[derive(Debug, Clone)]
pub struct ExteriorSolution {
    pub mesh: TriangularMesh,
    pub disc: FemSolution,
}

impl ExteriorSolution {
    /// `u(z)` for `|z| >= 1`.
    pub fn value_at(&self, z: Complex64) -> Result<f64> {
        let w = ConformalChart::Exterior.map(z);
        self.mesh
            .locator()
            .interpolate(&self.disc.values, w)
            .ok_or_else(|| Error::OutOfRange {
                point: format!("{z}"),
            })
    }
}

/// Deviation of `sigma` from the identity on rings far enough out to land
/// in the innermost cells of `mesh` after inversion.
fn check_identity_near_infinity(sigma: &impl TensorField, mesh: &TriangularMesh) -> Result<()> {
    let mut worst: f64 = 0.0;
    for k in 0..4 {
        let r = (1 << k) as f64 / mesh.h();
        for j in 0..64 {
            let z = Complex64::from_polar(r, std::f64::consts::TAU * j as f64 / 64.0);
            worst = worst.max(sigma.tensor_at(z).max_abs_diff(&SymTensor::IDENTITY));
        }
    }
    if worst > 1e-12 {
        return Err(Error::BoundViolated {
            what: "conductivity equal to the identity near infinity",
            value: worst,
            bound: 1e-12,
        });
    }
    Ok(())
}

/// Trace on the unit circle as seen from the inverted variable:
/// `z = e^{i theta}` corresponds to `w = e^{-i theta}`.
fn flipped(phi: &BoundaryTrace) -> BoundaryTrace {
    let m = phi.modes() as i64;
    let mut out = BoundaryTrace::zeros(phi.modes());
    for n in -m..=m {
        out.set(n, phi.get(-n));
    }
    out
}

/// Solves on the full disc mesh in `w = 1/z`; the puncture is an ordinary
/// vertex since a point carries no capacity.
pub fn exterior_to_disc_solve(
    sigma: &impl TensorField,
    phi: &BoundaryTrace,
    mesh: &TriangularMesh,
) -> Result<ExteriorSolution> {
    check_identity_near_infinity(sigma, mesh)?;
    let disc = solve_dirichlet(&InvertedConductivity { sigma }, &flipped(phi), mesh)?;
    Ok(ExteriorSolution {
        mesh: mesh.clone(),
        disc,
    })
}

/// Exterior DtN map with flux along the normal pointing into the unit disc,
/// in the angle of `z`.
pub fn exterior_dtn(sigma: &impl TensorField, mesh: &TriangularMesh, modes: usize) -> Result<DtnMatrix> {
    check_identity_near_infinity(sigma, mesh)?;
    let inner = dtn_matrix(&InvertedConductivity { sigma }, mesh, modes)?;
    let m = modes as i64;
    let mut out = DtnMatrix::zeros(modes);
    for a in -m..=m {
        for b in -m..=m {
            out.set(a, b, inner.get(-a, -b));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtn::disc_dtn_isotropic;
    use crate::field_algebra::ConductivityModel;

    #[test]
    fn cosine_decays_like_inverse_radius() {
        let mesh = TriangularMesh::disc(0.02).unwrap();
        let sol = exterior_to_disc_solve(&ConductivityModel::Identity, &BoundaryTrace::cos(4, 1), &mesh).unwrap();
        for z in [Complex64::new(2.0, 0.0), Complex64::from_polar(3.0, 1.0), Complex64::from_polar(1.3, -2.0)] {
            let want = z.arg().cos() / z.norm();
            assert!((sol.value_at(z).unwrap() - want).abs() < 2e-3);
        }
    }

    #[test]
    fn constants_stay_constant() {
        let mesh = TriangularMesh::disc(0.05).unwrap();
        let sol = exterior_to_disc_solve(&ConductivityModel::Identity, &BoundaryTrace::constant(4, 2.0), &mesh).unwrap();
        assert!(sol.disc.values.iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn identity_exterior_spectrum() {
        let mesh = TriangularMesh::disc(0.02).unwrap();
        let d = exterior_dtn(&ConductivityModel::Identity, &mesh, 8).unwrap();
        assert!(d.relative_defect(&disc_dtn_isotropic(1.0, 8)) < 0.01);
    }

    #[test]
    fn rejects_conductivity_without_identity_at_infinity() {
        let mesh = TriangularMesh::disc(0.1).unwrap();
        let sigma = ConductivityModel::Constant {
            tensor: SymTensor::isotropic(2.0),
            radius: 1e6,
        };
        assert!(exterior_to_disc_solve(&sigma, &BoundaryTrace::cos(2, 1), &mesh).is_err());
    }
}
