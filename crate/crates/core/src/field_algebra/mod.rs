//! Conductivity tensors, their Beltrami coefficients, and transport under
//! planar diffeomorphisms.

mod coefficients;
mod maps;
mod tensor;

pub use coefficients::{
    mu1_from_sigma, mu1_of, mu2_from_sigma, mu2_of, mu_from_nu, mu_from_nu_of, nu_from_mu,
    nu_from_mu_of, nu_to_sigma, nu_to_sigma_of, sigma_to_nu, sigma_to_nu_of, BeltramiData,
    INVERSION_TOL,
};
pub use maps::{
    distortion, jacobian_det, pushforward, real_jacobian, transport_tensor, Composed, DiffeoMap,
    IdentityMap, IsotropicImage, PlanarMap, PushForward, RadialShear, RealLinearMap,
};
pub use tensor::{
    ConductivityModel, ConductivityTensor, SymTensor, TensorField, EIGEN_CEIL, EIGEN_FLOOR,
};

use crate::error::{Error, Result};

/// `max(lambda_max, 1/lambda_min)` over all cells.
pub fn ellipticity_constant(sigma: &ConductivityTensor) -> Result<f64> {
    let mut c0: f64 = 1.0;
    for (k, t) in sigma.tensors().enumerate() {
        let (lo, hi) = t.eigenvalues();
        if lo <= 0.0 {
            return Err(Error::NotPositiveDefinite { cell: k, lo, hi });
        }
        c0 = c0.max(hi).max(1.0 / lo);
    }
    Ok(c0)
}

pub fn hat_tensor(t: &SymTensor) -> Result<SymTensor> {
    let d = t.det();
    if d <= 0.0 {
        let (lo, hi) = t.eigenvalues();
        return Err(Error::NotPositiveDefinite { cell: 0, lo, hi });
    }
    Ok(t.scale(1.0 / d))
}

/// `sigma / det sigma`.
pub fn hat_sigma(sigma: &ConductivityTensor) -> Result<ConductivityTensor> {
    for (k, t) in sigma.tensors().enumerate() {
        if t.det() <= 0.0 {
            let (lo, hi) = t.eigenvalues();
            return Err(Error::NotPositiveDefinite { cell: k, lo, hi });
        }
    }
    sigma.map(|t| t.scale(1.0 / t.det()))
}

/// Lazy `sigma / det sigma` for point evaluation.
#[derive(Debug, Clone)]
pub struct HatSigma<S>(pub S);

impl<S: TensorField> TensorField for HatSigma<S> {
    fn tensor_at(&self, z: num_complex::Complex64) -> SymTensor {
        let t = self.0.tensor_at(z);
        t.scale(1.0 / t.det())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn on_disc(t: SymTensor) -> ConductivityTensor {
        let g = GridSpec::new(2.0, 32).unwrap();
        ConductivityModel::constant_on_unit_disc(t)
            .to_grid(g)
            .unwrap()
    }

    #[test]
    fn ellipticity_examples() {
        let g = GridSpec::new(2.0, 32).unwrap();
        assert_eq!(
            ellipticity_constant(&ConductivityTensor::identity(g)).unwrap(),
            1.0
        );
        assert_eq!(
            ellipticity_constant(&on_disc(SymTensor::new(4.0, 0.0, 1.0))).unwrap(),
            4.0
        );
        assert_eq!(
            ellipticity_constant(&on_disc(SymTensor::isotropic(2.0))).unwrap(),
            2.0
        );
    }

    #[test]
    fn hat_sigma_examples() {
        let s = hat_sigma(&on_disc(SymTensor::new(4.0, 0.0, 1.0))).unwrap();
        let g = *s.grid();
        let centre = g.index(g.n() / 2, g.n() / 2);
        assert!(s.at(centre).max_abs_diff(&SymTensor::new(1.0, 0.0, 0.25)) < 1e-15);
        let s = hat_sigma(&on_disc(SymTensor::isotropic(3.0))).unwrap();
        assert!((s.at(centre).s11 - 1.0 / 3.0).abs() < 1e-15);
        let twice =
            hat_sigma(&hat_sigma(&on_disc(SymTensor::new(2.0, 1.0, 2.0))).unwrap()).unwrap();
        assert!(
            twice
                .at(centre)
                .max_abs_diff(&SymTensor::new(2.0, 1.0, 2.0))
                < 1e-14
        );
    }
}
