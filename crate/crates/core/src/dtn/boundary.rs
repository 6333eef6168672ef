use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Fourier coefficients `c_n`, `|n| <= N`, of a boundary function in its
/// parameter `theta` (the polar angle for star-shaped domains).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    modes: usize,
    coeffs: Vec<Complex64>,
}

impl BoundaryTrace {
    pub fn zeros(modes: usize) -> Self {
        BoundaryTrace {
            modes,
            coeffs: vec![ZERO; 2 * modes + 1],
        }
    }

    /// Coefficients ordered `c_{-N}, ..., c_N`.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::ShapeMismatch {
                expected: coeffs.len() + 1,
                got: coeffs.len(),
            });
        }
        Ok(BoundaryTrace {
            modes: coeffs.len() / 2,
            coeffs,
        })
    }

    pub fn constant(modes: usize, c: f64) -> Self {
        let mut t = Self::zeros(modes);
        t.set(0, Complex64::new(c, 0.0));
        t
    }

    /// `e^{i n theta}`.
    pub fn exponential(modes: usize, n: i64) -> Self {
        let mut t = Self::zeros(modes);
        t.set(n, Complex64::new(1.0, 0.0));
        t
    }

    /// `cos(n theta)`.
    pub fn cos(modes: usize, n: usize) -> Self {
        let mut t = Self::zeros(modes);
        if n == 0 {
            t.set(0, Complex64::new(1.0, 0.0));
        } else {
            t.set(n as i64, Complex64::new(0.5, 0.0));
            t.set(-(n as i64), Complex64::new(0.5, 0.0));
        }
        t
    }

    /// `sin(n theta)`.
    pub fn sin(modes: usize, n: usize) -> Self {
        let mut t = Self::zeros(modes);
        if n > 0 {
            t.set(n as i64, Complex64::new(0.0, -0.5));
            t.set(-(n as i64), Complex64::new(0.0, 0.5));
        }
        t
    }

    /// Discrete Fourier analysis of samples at `theta_j = 2 pi j / M`.
    pub fn from_samples(values: &[Complex64], modes: usize) -> Result<Self> {
        let m = values.len();
        if 2 * modes + 1 > m {
            return Err(Error::TooManyModes {
                modes,
                available: m,
            });
        }
        let mut t = Self::zeros(modes);
        for n in -(modes as i64)..=modes as i64 {
            let mut acc = ZERO;
            for (j, v) in values.iter().enumerate() {
                let th = 2.0 * PI * j as f64 / m as f64;
                acc += v * Complex64::from_polar(1.0, -(n as f64) * th);
            }
            t.set(n, acc / m as f64);
        }
        Ok(t)
    }

    pub fn from_real_samples(values: &[f64], modes: usize) -> Result<Self> {
        let v: Vec<Complex64> = values.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        Self::from_samples(&v, modes)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `c_n`, zero beyond the cutoff.
    pub fn get(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.modes {
            ZERO
        } else {
            self.coeffs[(n + self.modes as i64) as usize]
        }
    }

    pub fn set(&mut self, n: i64, v: Complex64) {
        let k = (n + self.modes as i64) as usize;
        self.coeffs[k] = v;
    }

    pub fn evaluate(&self, theta: f64) -> Complex64 {
        (-(self.modes as i64)..=self.modes as i64)
            .map(|n| self.get(n) * Complex64::from_polar(1.0, n as f64 * theta))
            .sum()
    }

    /// `max |c_{-n} - conj(c_n)|`; zero for real-valued traces.
    pub fn reality_defect(&self) -> f64 {
        (0..=self.modes as i64)
            .map(|n| (self.get(-n) - self.get(n).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.reality_defect() <= tol
    }

    /// `sum (1 + |n|) |c_n|^2`.
    pub fn h_half_norm_sqr(&self) -> f64 {
        (-(self.modes as i64)..=self.modes as i64)
            .map(|n| (1.0 + n.abs() as f64) * self.get(n).norm_sqr())
            .sum()
    }

    /// Re-indexed to a different cutoff, padding with zeros.
    pub fn with_modes(&self, modes: usize) -> Self {
        let mut t = Self::zeros(modes);
        for n in -(modes as i64)..=modes as i64 {
            t.set(n, self.get(n));
        }
        t
    }

    pub fn scale(&self, a: Complex64) -> Self {
        BoundaryTrace {
            modes: self.modes,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    pub fn add(&self, other: &BoundaryTrace) -> Self {
        let modes = self.modes.max(other.modes);
        let mut t = Self::zeros(modes);
        for n in -(modes as i64)..=modes as i64 {
            t.set(n, self.get(n) + other.get(n));
        }
        t
    }

    /// `sqrt(sum |c_n - d_n|^2)`.
    pub fn distance(&self, other: &BoundaryTrace) -> f64 {
        let modes = self.modes.max(other.modes) as i64;
        (-modes..=modes)
            .map(|n| (self.get(n) - other.get(n)).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Boundary operator in the Fourier basis: entry `(m, n)` is
/// `(1/2pi) * integral of e^{-i m theta} L(e^{i n theta})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DtnMatrix {
    modes: usize,
    data: DMatrix<Complex64>,
}

impl DtnMatrix {
    pub fn new(modes: usize, data: DMatrix<Complex64>) -> Result<Self> {
        let size = 2 * modes + 1;
        if data.nrows() != size || data.ncols() != size {
            return Err(Error::ShapeMismatch {
                expected: size * size,
                got: data.nrows() * data.ncols(),
            });
        }
        Ok(DtnMatrix { modes, data })
    }

    pub fn zeros(modes: usize) -> Self {
        let size = 2 * modes + 1;
        DtnMatrix {
            modes,
            data: DMatrix::from_element(size, size, ZERO),
        }
    }

    /// `diag(f(n))`.
    pub fn diagonal(modes: usize, f: impl Fn(i64) -> f64) -> Self {
        let mut d = Self::zeros(modes);
        for n in -(modes as i64)..=modes as i64 {
            d.set(n, n, Complex64::new(f(n), 0.0));
        }
        d
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    fn slot(&self, n: i64) -> usize {
        (n + self.modes as i64) as usize
    }

    pub fn get(&self, m: i64, n: i64) -> Complex64 {
        self.data[(self.slot(m), self.slot(n))]
    }

    pub fn set(&mut self, m: i64, n: i64, v: Complex64) {
        let (a, b) = (self.slot(m), self.slot(n));
        self.data[(a, b)] = v;
    }

    /// Restriction to `|m|, |n| <= modes`.
    pub fn truncate(&self, modes: usize) -> Result<Self> {
        if modes > self.modes {
            return Err(Error::TooManyModes {
                modes,
                available: self.modes,
            });
        }
        let off = self.modes - modes;
        let size = 2 * modes + 1;
        Ok(DtnMatrix {
            modes,
            data: self.data.view((off, off), (size, size)).into_owned(),
        })
    }

    pub fn apply(&self, phi: &BoundaryTrace) -> BoundaryTrace {
        let mut out = BoundaryTrace::zeros(self.modes);
        let m = self.modes as i64;
        for a in -m..=m {
            let s: Complex64 = (-m..=m).map(|b| self.get(a, b) * phi.get(b)).sum();
            out.set(a, s);
        }
        out
    }

    /// `||L - L^H|| / ||L||` (Frobenius).
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.data.norm();
        if n == 0.0 {
            return 0.0;
        }
        (&self.data - self.data.adjoint()).norm() / n
    }

    /// Defect of `L_{mn} = L_{-n,-m}`, the symmetry of the real bilinear
    /// pairing of traces.
    pub fn pairing_defect(&self) -> f64 {
        let n = self.data.norm();
        if n == 0.0 {
            return 0.0;
        }
        let m = self.modes as i64;
        let mut acc = 0.0;
        for a in -m..=m {
            for b in -m..=m {
                acc += (self.get(a, b) - self.get(-b, -a)).norm_sqr();
            }
        }
        acc.sqrt() / n
    }

    /// `||self - reference|| / ||reference||` on the common modes (Frobenius).
    pub fn relative_defect(&self, reference: &DtnMatrix) -> f64 {
        let modes = self.modes.min(reference.modes);
        let a = self.truncate(modes).expect("common cutoff");
        let b = reference.truncate(modes).expect("common cutoff");
        let d = b.data.norm();
        if d == 0.0 {
            return a.data.norm();
        }
        (a.data - b.data).norm() / d
    }

    /// Largest entry in the zero-mode row and column.
    pub fn constant_mode_leak(&self) -> f64 {
        let m = self.modes as i64;
        (-m..=m)
            .map(|n| self.get(0, n).norm().max(self.get(n, 0).norm()))
            .fold(0.0, f64::max)
    }
}

/// Dirichlet/Neumann trace pairs of solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyDataSet {
    pub pairs: Vec<(BoundaryTrace, BoundaryTrace)>,
}

impl CauchyDataSet {
    /// Pairs `(e^{i n theta}, L e^{i n theta})` for `|n| <= N`.
    pub fn from_dtn(lambda: &DtnMatrix) -> Self {
        let m = lambda.modes() as i64;
        let pairs = (-m..=m)
            .map(|n| {
                let phi = BoundaryTrace::exponential(lambda.modes(), n);
                let psi = lambda.apply(&phi);
                (phi, psi)
            })
            .collect();
        CauchyDataSet { pairs }
    }

    /// `(1/2pi) * integral of psi_b phi_a - psi_a phi_b` for each pair of
    /// pairs; vanishes for Cauchy data of a symmetric operator.
    pub fn symmetry_defect(&self) -> f64 {
        let pair = |x: &BoundaryTrace, y: &BoundaryTrace| -> Complex64 {
            let m = x.modes().max(y.modes()) as i64;
            (-m..=m).map(|n| x.get(n) * y.get(-n)).sum()
        };
        let mut worst: f64 = 0.0;
        for (pa, qa) in &self.pairs {
            for (pb, qb) in &self.pairs {
                worst = worst.max((pair(qb, pa) - pair(qa, pb)).norm());
            }
        }
        worst
    }

    /// Least-squares operator `L` on `|n| <= modes` with `L phi = psi` over
    /// all pairs. Needs pairs whose Dirichlet traces span the modes.
    pub fn fit_dtn(&self, modes: usize) -> Result<DtnMatrix> {
        let size = 2 * modes + 1;
        let count = self.pairs.len();
        let m = modes as i64;
        let column = |t: &BoundaryTrace, j: usize, out: &mut DMatrix<Complex64>| {
            for n in -m..=m {
                out[((n + m) as usize, j)] = t.get(n);
            }
        };
        let mut phi = DMatrix::from_element(size, count, Complex64::new(0.0, 0.0));
        let mut psi = phi.clone();
        for (j, (p, q)) in self.pairs.iter().enumerate() {
            column(p, j, &mut phi);
            column(q, j, &mut psi);
        }
        let svd = phi.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if count < size || !(smin > 1e-10 * smax) {
            return Err(Error::Singular(format!(
                "Dirichlet traces do not span {size} modes (singular values {smin:.3e} .. {smax:.3e})"
            )));
        }
        let inv = svd
            .pseudo_inverse(0.0)
            .map_err(|e| Error::Singular(e.to_string()))?;
        DtnMatrix::new(modes, psi * inv)
    }

    /// Reassembles the operator when the Dirichlet traces are the exponential
    /// basis `e^{i n theta}`, `|n| <= N`.
    pub fn to_dtn(&self) -> Result<DtnMatrix> {
        let modes = self.pairs.len() / 2;
        if self.pairs.len() != 2 * modes + 1 {
            return Err(Error::ShapeMismatch {
                expected: 2 * modes + 1,
                got: self.pairs.len(),
            });
        }
        let mut d = DtnMatrix::zeros(modes);
        for (phi, psi) in &self.pairs {
            let n = (-(modes as i64)..=modes as i64)
                .find(|n| (phi.get(*n) - Complex64::new(1.0, 0.0)).norm() < 1e-14)
                .filter(|_| phi.l2_norm() <= 1.0 + 1e-14)
                .ok_or_else(|| {
                    Error::Singular("Dirichlet traces are not the exponential basis".into())
                })?;
            for m in -(modes as i64)..=modes as i64 {
                d.set(m, n, psi.get(m));
            }
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_traces_evaluate() {
        let c = BoundaryTrace::cos(4, 3);
        let s = BoundaryTrace::sin(4, 3);
        for t in [0.0, 0.4, 2.2] {
            assert!((c.evaluate(t).re - (3.0 * t).cos()).abs() < 1e-14);
            assert!((s.evaluate(t).re - (3.0 * t).sin()).abs() < 1e-14);
            assert!(s.evaluate(t).im.abs() < 1e-14);
        }
        assert!(c.is_real(0.0) && s.is_real(0.0));
        assert!(!BoundaryTrace::exponential(4, 1).is_real(1e-3));
    }

    #[test]
    fn samples_round_trip() {
        let t =
            BoundaryTrace::cos(5, 2).add(&BoundaryTrace::sin(5, 5).scale(Complex64::new(0.3, 0.0)));
        let m = 32;
        let v: Vec<Complex64> = (0..m)
            .map(|j| t.evaluate(2.0 * PI * j as f64 / m as f64))
            .collect();
        let back = BoundaryTrace::from_samples(&v, 5).unwrap();
        assert!(back.distance(&t) < 1e-14);
        assert!(BoundaryTrace::from_samples(&v, 16).is_err());
    }

    #[test]
    fn truncation_and_defects() {
        let d = DtnMatrix::diagonal(6, |n| n.abs() as f64);
        assert_eq!(d.hermitian_defect(), 0.0);
        assert_eq!(d.pairing_defect(), 0.0);
        let t = d.truncate(2).unwrap();
        assert_eq!(t.get(-2, -2), Complex64::new(2.0, 0.0));
        assert!(d.truncate(7).is_err());
        assert_eq!(d.relative_defect(&d), 0.0);
    }

    #[test]
    fn cauchy_set_round_trip() {
        let d = DtnMatrix::diagonal(3, |n| 2.0 * n.abs() as f64);
        let c = CauchyDataSet::from_dtn(&d);
        assert_eq!(c.pairs.len(), 7);
        assert!(c.symmetry_defect() < 1e-15);
        assert_eq!(c.to_dtn().unwrap(), d);
    }
}
