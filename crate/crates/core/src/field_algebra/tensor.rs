use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec, RealField};

/// Eigenvalue window accepted at load time.
pub const EIGEN_FLOOR: f64 = 1e-8;
pub const EIGEN_CEIL: f64 = 1e8;

/// Symmetric 2x2 tensor `[[s11, s12], [s12, s22]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTensor {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl SymTensor {
    pub const IDENTITY: SymTensor = SymTensor {
        s11: 1.0,
        s12: 0.0,
        s22: 1.0,
    };

    pub const fn new(s11: f64, s12: f64, s22: f64) -> Self {
        SymTensor { s11, s12, s22 }
    }

    pub fn isotropic(c: f64) -> Self {
        SymTensor::new(c, 0.0, c)
    }

    pub fn det(&self) -> f64 {
        self.s11 * self.s22 - self.s12 * self.s12
    }

    pub fn trace(&self) -> f64 {
        self.s11 + self.s22
    }

    /// Eigenvalues `(lo, hi)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * self.trace();
        let r = (0.5 * (self.s11 - self.s22)).hypot(self.s12);
        (m - r, m + r)
    }

    pub fn scale(&self, c: f64) -> Self {
        SymTensor::new(c * self.s11, c * self.s12, c * self.s22)
    }

    /// `A T A^t` for a general 2x2 matrix `A` given row-major.
    pub fn congruence(&self, a: [[f64; 2]; 2]) -> Self {
        let t = [[self.s11, self.s12], [self.s12, self.s22]];
        let mut at = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                at[i][j] = a[i][0] * t[0][j] + a[i][1] * t[1][j];
            }
        }
        let e = |i: usize, j: usize| at[i][0] * a[j][0] + at[i][1] * a[j][1];
        SymTensor::new(e(0, 0), 0.5 * (e(0, 1) + e(1, 0)), e(1, 1))
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.s11 * v[0] + self.s12 * v[1],
            self.s12 * v[0] + self.s22 * v[1],
        ]
    }

    /// Ratio `lambda_max / lambda_min`; 1 exactly for isotropic tensors.
    pub fn anisotropy(&self) -> f64 {
        let (lo, hi) = self.eigenvalues();
        hi / lo
    }

    pub fn max_abs_diff(&self, other: &SymTensor) -> f64 {
        (self.s11 - other.s11)
            .abs()
            .max((self.s12 - other.s12).abs())
            .max((self.s22 - other.s22).abs())
    }

    pub fn check_admissible(&self, cell: usize) -> Result<()> {
        let (lo, hi) = self.eigenvalues();
        if !(lo >= EIGEN_FLOOR && hi <= EIGEN_CEIL) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NotPositiveDefinite { cell, lo, hi });
        }
        Ok(())
    }
}

/// Anything that can report a conductivity tensor at an arbitrary point.
pub trait TensorField {
    fn tensor_at(&self, z: Complex64) -> SymTensor;
}

impl<T: TensorField + ?Sized> TensorField for &T {
    fn tensor_at(&self, z: Complex64) -> SymTensor {
        (**self).tensor_at(z)
    }
}

/// Grid-sampled conductivity, equal to the identity outside its mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityTensor {
    grid: GridSpec,
    s11: RealField,
    s12: RealField,
    s22: RealField,
    mask: Vec<bool>,
}

impl ConductivityTensor {
    /// Builds a tensor field, forcing the identity outside `mask` and
    /// rejecting cells whose eigenvalues leave `[1e-8, 1e8]`.
    pub fn new(
        grid: GridSpec,
        s11: Vec<f64>,
        s12: Vec<f64>,
        s22: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        let mut s11 = Field::from_vec(grid, s11)?;
        let mut s12 = Field::from_vec(grid, s12)?;
        let mut s22 = Field::from_vec(grid, s22)?;
        if mask.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: mask.len(),
            });
        }
        for (k, &inside) in mask.iter().enumerate() {
            if !inside {
                s11[k] = 1.0;
                s12[k] = 0.0;
                s22[k] = 1.0;
            }
            SymTensor::new(s11[k], s12[k], s22[k]).check_admissible(k)?;
        }
        Ok(ConductivityTensor {
            grid,
            s11,
            s12,
            s22,
            mask,
        })
    }

    pub fn identity(grid: GridSpec) -> Self {
        ConductivityTensor {
            grid,
            s11: Field::constant(grid, 1.0),
            s12: Field::constant(grid, 0.0),
            s22: Field::constant(grid, 1.0),
            mask: vec![false; grid.len()],
        }
    }

    /// Samples `field` at cell centres; `inside` defines the mask.
    pub fn sample(
        grid: GridSpec,
        field: &impl TensorField,
        inside: impl Fn(Complex64) -> bool,
    ) -> Result<Self> {
        let n = grid.len();
        let (mut a, mut b, mut c, mut m) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for z in grid.points() {
            let t = field.tensor_at(z);
            a.push(t.s11);
            b.push(t.s12);
            c.push(t.s22);
            m.push(inside(z));
        }
        ConductivityTensor::new(grid, a, b, c, m)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn components(&self) -> [&RealField; 3] {
        [&self.s11, &self.s12, &self.s22]
    }

    pub fn at(&self, k: usize) -> SymTensor {
        SymTensor::new(self.s11[k], self.s12[k], self.s22[k])
    }

    pub fn tensors(&self) -> impl Iterator<Item = SymTensor> + '_ {
        (0..self.grid.len()).map(move |k| self.at(k))
    }

    pub fn map(&self, f: impl Fn(SymTensor) -> SymTensor) -> Result<Self> {
        let mapped: Vec<SymTensor> = self.tensors().map(f).collect();
        ConductivityTensor::new(
            self.grid,
            mapped.iter().map(|t| t.s11).collect(),
            mapped.iter().map(|t| t.s12).collect(),
            mapped.iter().map(|t| t.s22).collect(),
            self.mask.clone(),
        )
    }
}

impl TensorField for ConductivityTensor {
    fn tensor_at(&self, z: Complex64) -> SymTensor {
        if !self.grid.contains(z) {
            let l = self.grid.half_width();
            if z.re.abs() > l || z.im.abs() > l {
                return SymTensor::IDENTITY;
            }
        }
        let (idx, w) = self.grid.stencil(z);
        let mut t = SymTensor::new(0.0, 0.0, 0.0);
        for (&i, w) in idx.iter().zip(w) {
            t.s11 += w * self.s11[i];
            t.s12 += w * self.s12[i];
            t.s22 += w * self.s22[i];
        }
        t
    }
}

/// Closed-form conductivities. All equal the identity outside their support.
#[derive(Debug, Clone, PartialEq)]
pub enum ConductivityModel {
    Identity,
    /// Constant tensor on the disc `|z| < radius`.
    Constant {
        tensor: SymTensor,
        radius: f64,
    },
    /// Isotropic `1 + a (1 - r^2/rho^2)^2` on `|z| < rho`.
    RadialBump {
        amplitude: f64,
        radius: f64,
    },
    /// `radial * e_r e_r^t + angular * e_theta e_theta^t` on `|z| < radius`.
    RadialAnisotropic {
        radial: f64,
        angular: f64,
        radius: f64,
    },
    Sampled(ConductivityTensor),
}

impl ConductivityModel {
    pub fn constant_on_unit_disc(tensor: SymTensor) -> Self {
        ConductivityModel::Constant {
            tensor,
            radius: 1.0,
        }
    }

    /// Radius of a disc about the origin containing `supp(sigma - I)`.
    pub fn support_radius(&self) -> f64 {
        match self {
            ConductivityModel::Identity => 0.0,
            ConductivityModel::Constant { radius, .. }
            | ConductivityModel::RadialBump { radius, .. }
            | ConductivityModel::RadialAnisotropic { radius, .. } => *radius,
            ConductivityModel::Sampled(s) => {
                let mut r: f64 = 0.0;
                for (k, &m) in s.mask().iter().enumerate() {
                    if m {
                        r = r.max(s.grid().point_at(k).norm() + s.grid().cell());
                    }
                }
                r
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        let probe = |t: SymTensor| t.check_admissible(0);
        match self {
            ConductivityModel::Identity | ConductivityModel::Sampled(_) => Ok(()),
            ConductivityModel::Constant { tensor, .. } => probe(*tensor),
            ConductivityModel::RadialBump { amplitude, .. } => {
                probe(SymTensor::isotropic(1.0 + amplitude.min(0.0)))?;
                probe(SymTensor::isotropic(1.0 + amplitude.max(0.0)))
            }
            ConductivityModel::RadialAnisotropic {
                radial, angular, ..
            } => probe(SymTensor::new(*radial, 0.0, *angular)),
        }
    }

    /// Samples onto a grid with the support as mask.
    pub fn to_grid(&self, grid: GridSpec) -> Result<ConductivityTensor> {
        if let ConductivityModel::Sampled(s) = self {
            if *s.grid() == grid {
                return Ok(s.clone());
            }
        }
        let r = self.support_radius();
        ConductivityTensor::sample(grid, self, |z| z.norm() < r)
    }
}

impl ConductivityModel {
    /// The formula used inside the support, evaluated everywhere.
    pub fn interior_tensor_at(&self, z: Complex64) -> SymTensor {
        let unbounded = match self {
            ConductivityModel::Constant { tensor, .. } => ConductivityModel::Constant {
                tensor: *tensor,
                radius: f64::INFINITY,
            },
            ConductivityModel::RadialBump { amplitude, radius } if z.norm() >= *radius => {
                let s = z.norm_sqr() / (radius * radius);
                return SymTensor::isotropic(1.0 + amplitude * (1.0 - s) * (1.0 - s));
            }
            ConductivityModel::RadialAnisotropic {
                radial, angular, ..
            } => ConductivityModel::RadialAnisotropic {
                radial: *radial,
                angular: *angular,
                radius: f64::INFINITY,
            },
            other => return other.tensor_at(z),
        };
        unbounded.tensor_at(z)
    }
}

impl TensorField for ConductivityModel {
    fn tensor_at(&self, z: Complex64) -> SymTensor {
        match self {
            ConductivityModel::Identity => SymTensor::IDENTITY,
            ConductivityModel::Constant { tensor, radius } => {
                if z.norm() < *radius {
                    *tensor
                } else {
                    SymTensor::IDENTITY
                }
            }
            ConductivityModel::RadialBump { amplitude, radius } => {
                let s = z.norm_sqr() / (radius * radius);
                if s < 1.0 {
                    SymTensor::isotropic(1.0 + amplitude * (1.0 - s) * (1.0 - s))
                } else {
                    SymTensor::IDENTITY
                }
            }
            ConductivityModel::RadialAnisotropic {
                radial,
                angular,
                radius,
            } => {
                let r = z.norm();
                if r >= *radius {
                    return SymTensor::IDENTITY;
                }
                if r == 0.0 {
                    return SymTensor::isotropic(0.5 * (radial + angular));
                }
                let (c, s) = (z.re / r, z.im / r);
                SymTensor::new(
                    radial * c * c + angular * s * s,
                    (radial - angular) * c * s,
                    radial * s * s + angular * c * c,
                )
            }
            ConductivityModel::Sampled(s) => s.tensor_at(z),
        }
    }
}
