//! Pointwise algebra between a conductivity and its Beltrami coefficients.
//!
//! For symmetric positive definite `sigma`:
//!
//! ```text
//! mu1 = (s22 - s11 - 2i s12) / (s11 + s22 + 2 sqrt(det))
//! mu2 = (1 - sqrt(det)) / (1 + sqrt(det))
//! nu1 = mu1 (1 - mu2^2) / (1 - |mu1|^2 mu2^2)
//! nu2 = mu2 (1 - |mu1|^2) / (1 - |mu1|^2 mu2^2)
//! ```
//!
//! and directly `nu1 = (s22 - s11 - 2i s12) / (1 + tr + det)`,
//! `nu2 = (1 - det) / (1 + tr + det)`.

use num_complex::Complex64;

use super::tensor::{ConductivityTensor, SymTensor};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Field, GridSpec, RealField};

/// Acceptance threshold for the `mu_from_nu` round trip.
pub const INVERSION_TOL: f64 = 1e-10;

fn positive_det(t: &SymTensor, cell: usize) -> Result<f64> {
    let d = t.det();
    if d <= 0.0 || !d.is_finite() {
        let (lo, hi) = t.eigenvalues();
        return Err(Error::NotPositiveDefinite { cell, lo, hi });
    }
    Ok(d)
}

pub fn mu1_of(t: &SymTensor) -> Result<Complex64> {
    let sd = positive_det(t, 0)?.sqrt();
    Ok(Complex64::new(t.s22 - t.s11, -2.0 * t.s12) / (t.trace() + 2.0 * sd))
}

pub fn mu2_of(t: &SymTensor) -> Result<f64> {
    let sd = positive_det(t, 0)?.sqrt();
    Ok((1.0 - sd) / (1.0 + sd))
}

pub fn sigma_to_nu_of(t: &SymTensor) -> Result<(Complex64, f64)> {
    let d = positive_det(t, 0)?;
    let den = 1.0 + t.trace() + d;
    Ok((
        Complex64::new(t.s22 - t.s11, -2.0 * t.s12) / den,
        (1.0 - d) / den,
    ))
}

pub fn nu_from_mu_of(mu1: Complex64, mu2: f64) -> Result<(Complex64, f64)> {
    let a2 = mu1.norm_sqr();
    if a2 >= 1.0 {
        return Err(Error::BoundViolated {
            what: "|mu1| < 1",
            value: a2.sqrt(),
            bound: 1.0,
        });
    }
    if mu2.abs() >= 1.0 {
        return Err(Error::BoundViolated {
            what: "|mu2| < 1",
            value: mu2.abs(),
            bound: 1.0,
        });
    }
    let den = 1.0 - a2 * mu2 * mu2;
    Ok((mu1 * ((1.0 - mu2 * mu2) / den), mu2 * (1.0 - a2) / den))
}

/// Inverts [`nu_from_mu_of`] by damped Newton on `(|mu1|, mu2)` from the
/// guess `(|nu1|, nu2)`, then gives `mu1` the phase of `nu1`.
pub fn mu_from_nu_of(nu1: Complex64, nu2: f64) -> Result<(Complex64, f64)> {
    let target_a = nu1.norm();
    let target_b = nu2;
    let s = target_a + target_b.abs();
    if s >= 1.0 {
        return Err(Error::BoundViolated {
            what: "|nu1| + |nu2| < 1",
            value: s,
            bound: 1.0,
        });
    }
    let forward = |a: f64, b: f64| {
        let d = 1.0 - a * a * b * b;
        (
            a * (1.0 - b * b) / d - target_a,
            b * (1.0 - a * a) / d - target_b,
        )
    };
    let (mut a, mut b) = (target_a, target_b);
    let (mut f1, mut f2) = forward(a, b);
    let mut res = f1.hypot(f2);
    let mut it = 0;
    while res > 1e-15 && it < 100 {
        it += 1;
        let d = 1.0 - a * a * b * b;
        let d2 = d * d;
        let j11 = (1.0 - b * b) * (1.0 + a * a * b * b) / d2;
        let j12 = -2.0 * a * b * (1.0 - a * a) / d2;
        let j21 = -2.0 * a * b * (1.0 - b * b) / d2;
        let j22 = (1.0 - a * a) * (1.0 + a * a * b * b) / d2;
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-300 {
            break;
        }
        let da = (j22 * f1 - j12 * f2) / det;
        let db = (j11 * f2 - j21 * f1) / det;
        let mut step = 1.0;
        loop {
            let (na, nb) = (a - step * da, b - step * db);
            if (0.0..1.0).contains(&na) && nb.abs() < 1.0 {
                let (g1, g2) = forward(na, nb);
                let r = g1.hypot(g2);
                if r < res || step < 1e-6 {
                    a = na;
                    b = nb;
                    f1 = g1;
                    f2 = g2;
                    res = r;
                    break;
                }
            } else if step < 1e-6 {
                a = na.clamp(0.0, 1.0 - 1e-15);
                b = nb.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                let (g1, g2) = forward(a, b);
                f1 = g1;
                f2 = g2;
                res = g1.hypot(g2);
                break;
            }
            step *= 0.5;
        }
        if step < 1e-6 && res > 1e-12 {
            break;
        }
    }
    let scale = if target_a > 0.0 { a / target_a } else { 0.0 };
    let mu1 = nu1 * scale;
    let (n1, n2) = nu_from_mu_of(mu1, b)?;
    let defect = (n1 - nu1).norm().max((n2 - nu2).abs());
    if defect > INVERSION_TOL {
        return Err(Error::NonConvergence {
            what: "mu_from_nu inversion",
            iterations: it,
            residual: defect,
            contraction: f64::NAN,
        });
    }
    Ok((mu1, b))
}

/// Rebuilds `sigma` from `(nu1, nu2)` through `mu` and the determinant/trace
/// relations; the diagonal and off-diagonal split comes from the `nu1` numerator.
pub fn nu_to_sigma_of(nu1: Complex64, nu2: f64) -> Result<SymTensor> {
    let (mu1, mu2) = mu_from_nu_of(nu1, nu2)?;
    let sd = (1.0 - mu2) / (1.0 + mu2);
    let det = sd * sd;
    let a2 = mu1.norm_sqr();
    let tr = 2.0 * sd * (1.0 + a2) / (1.0 - a2);
    let num = nu1 * (1.0 + tr + det);
    Ok(SymTensor::new(
        0.5 * (tr - num.re),
        -0.5 * num.im,
        0.5 * (tr + num.re),
    ))
}

/// Coefficient fields of one conductivity together with the bound `kappa`.
#[derive(Debug, Clone)]
pub struct BeltramiData {
    pub mu1: ComplexField,
    pub mu2: RealField,
    pub nu1: ComplexField,
    pub nu2: RealField,
    pub kappa: f64,
}

impl BeltramiData {
    pub fn from_sigma(sigma: &ConductivityTensor) -> Result<Self> {
        let mu1 = mu1_from_sigma(sigma)?;
        let mu2 = mu2_from_sigma(sigma)?;
        let (nu1, nu2) = nu_from_mu(&mu1, &mu2)?;
        let kappa = mu1.sup_norm();
        Ok(BeltramiData {
            mu1,
            mu2,
            nu1,
            nu2,
            kappa,
        })
    }

    /// `sup(|nu1| + |nu2|)`.
    pub fn kappa_prime(&self) -> f64 {
        self.nu1
            .values()
            .iter()
            .zip(self.nu2.values())
            .fold(0.0, |m, (a, b)| m.max(a.norm() + b.abs()))
    }
}

fn map_tensor<T: Copy>(
    sigma: &ConductivityTensor,
    f: impl Fn(&SymTensor) -> Result<T>,
) -> Result<Field<T>> {
    let mut out = Vec::with_capacity(sigma.grid().len());
    for (k, t) in sigma.tensors().enumerate() {
        positive_det(&t, k)?;
        out.push(f(&t)?);
    }
    Field::from_vec(*sigma.grid(), out)
}

pub fn mu1_from_sigma(sigma: &ConductivityTensor) -> Result<ComplexField> {
    map_tensor(sigma, mu1_of)
}

pub fn mu2_from_sigma(sigma: &ConductivityTensor) -> Result<RealField> {
    map_tensor(sigma, mu2_of)
}

pub fn sigma_to_nu(sigma: &ConductivityTensor) -> Result<(ComplexField, RealField)> {
    let pairs = map_tensor(sigma, sigma_to_nu_of)?;
    Ok((pairs.map(|p| p.0), pairs.map(|p| p.1)))
}

pub fn nu_from_mu(mu1: &ComplexField, mu2: &RealField) -> Result<(ComplexField, RealField)> {
    check_same_grid(mu1.grid(), mu2.grid())?;
    let mut a = Vec::with_capacity(mu1.values().len());
    let mut b = Vec::with_capacity(mu1.values().len());
    for (&m1, &m2) in mu1.values().iter().zip(mu2.values()) {
        let (n1, n2) = nu_from_mu_of(m1, m2)?;
        a.push(n1);
        b.push(n2);
    }
    Ok((
        Field::from_vec(*mu1.grid(), a)?,
        Field::from_vec(*mu1.grid(), b)?,
    ))
}

pub fn mu_from_nu(nu1: &ComplexField, nu2: &RealField) -> Result<(ComplexField, RealField)> {
    check_same_grid(nu1.grid(), nu2.grid())?;
    let mut a = Vec::with_capacity(nu1.values().len());
    let mut b = Vec::with_capacity(nu1.values().len());
    for (&n1, &n2) in nu1.values().iter().zip(nu2.values()) {
        let (m1, m2) = mu_from_nu_of(n1, n2)?;
        a.push(m1);
        b.push(m2);
    }
    Ok((
        Field::from_vec(*nu1.grid(), a)?,
        Field::from_vec(*nu1.grid(), b)?,
    ))
}

/// Cells where both coefficients vanish are taken to lie outside the mask.
pub fn nu_to_sigma(nu1: &ComplexField, nu2: &RealField) -> Result<ConductivityTensor> {
    check_same_grid(nu1.grid(), nu2.grid())?;
    let grid = *nu1.grid();
    let n = grid.len();
    let (mut a, mut b, mut c, mut m) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for (&n1, &n2) in nu1.values().iter().zip(nu2.values()) {
        let t = nu_to_sigma_of(n1, n2)?;
        a.push(t.s11);
        b.push(t.s12);
        c.push(t.s22);
        m.push(n1 != Complex64::new(0.0, 0.0) || n2 != 0.0);
    }
    ConductivityTensor::new(grid, a, b, c, m)
}

fn check_same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diag_4_1_coefficients() {
        let t = SymTensor::new(4.0, 0.0, 1.0);
        assert!((mu1_of(&t).unwrap() - c(-1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((mu2_of(&t).unwrap() + 1.0 / 3.0).abs() < 1e-15);
        let (n1, n2) = sigma_to_nu_of(&t).unwrap();
        assert!((n1 - c(-0.3, 0.0)).norm() < 1e-15 && (n2 + 0.3).abs() < 1e-15);
    }

    #[test]
    fn off_diagonal_benchmark() {
        let t = SymTensor::new(2.0, 1.0, 2.0);
        let r = 2.0 - 3f64.sqrt();
        assert!((mu1_of(&t).unwrap() - c(0.0, -r)).norm() < 1e-15);
        let (n1, n2) = sigma_to_nu_of(&t).unwrap();
        assert!((n1 - c(0.0, -0.25)).norm() < 1e-15 && (n2 + 0.25).abs() < 1e-15);
        let (m1, m2) = mu_from_nu_of(c(0.0, -0.25), -0.25).unwrap();
        assert!((m1 - c(0.0, -r)).norm() < 1e-12 && (m2 + r).abs() < 1e-12);
    }

    #[test]
    fn mu2_values() {
        assert!((mu2_of(&SymTensor::new(2.0, 0.0, 2.0)).unwrap() + 1.0 / 3.0).abs() < 1e-15);
        assert!((mu2_of(&SymTensor::new(0.5, 0.0, 0.5)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn nu_sum_identity_at_one_third() {
        let (n1, n2) = nu_from_mu_of(c(1.0 / 3.0, 0.0), 1.0 / 3.0).unwrap();
        assert!((n1.norm() + n2.abs() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn zero_is_fixed() {
        assert_eq!(mu_from_nu_of(c(0.0, 0.0), 0.0).unwrap(), (c(0.0, 0.0), 0.0));
        let t = nu_to_sigma_of(c(0.0, 0.0), 0.0).unwrap();
        assert!(t.max_abs_diff(&SymTensor::IDENTITY) < 1e-15);
    }

    #[test]
    fn nu_to_sigma_benchmarks() {
        let t = nu_to_sigma_of(c(-0.3, 0.0), -0.3).unwrap();
        assert!(t.max_abs_diff(&SymTensor::new(4.0, 0.0, 1.0)) < 1e-10);
        let t = nu_to_sigma_of(c(0.0, -0.25), -0.25).unwrap();
        assert!(t.max_abs_diff(&SymTensor::new(2.0, 1.0, 2.0)) < 1e-10);
    }

    #[test]
    fn rejects_out_of_bound_inputs() {
        assert!(nu_from_mu_of(c(1.0, 0.0), 0.0).is_err());
        assert!(mu_from_nu_of(c(0.6, 0.0), 0.5).is_err());
        assert!(mu1_of(&SymTensor::new(1.0, 2.0, 1.0)).is_err());
    }
}
