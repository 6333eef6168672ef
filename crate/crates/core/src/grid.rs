//! Uniform cell-centred grids over `[-L, L]^2` and the scalar fields sampled on them.
//!
//! Samples are stored row-major: row index runs along `x2` (imaginary axis),
//! column index along `x1`. Cell `(row, col)` has centre
//! `(-L + (col + 1/2) h, -L + (row + 1/2) h)` with `h = 2L / n`.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    half_width: f64,
    n: usize,
}

impl GridSpec {
    pub const MIN_RESOLUTION: usize = 16;

    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if n < Self::MIN_RESOLUTION || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "resolution must be a power of two >= {}, got {n}",
                Self::MIN_RESOLUTION
            )));
        }
        Ok(GridSpec { half_width, n })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell size `h`.
    pub fn cell(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.cell()
    }

    pub fn point(&self, row: usize, col: usize) -> Complex64 {
        Complex64::new(self.coord(col), self.coord(row))
    }

    pub fn point_at(&self, index: usize) -> Complex64 {
        self.point(index / self.n, index % self.n)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n + col
    }

    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.len()).map(move |k| self.point_at(k))
    }

    /// True when a disc of the given radius about the origin keeps a margin of
    /// at least `L/4` to the grid boundary.
    pub fn covers_with_margin(&self, radius: f64) -> bool {
        radius + 0.25 * self.half_width <= self.half_width + 1e-12
    }

    /// Fractional cell coordinates of `z` (cell centres at integers).
    fn fractional(&self, z: Complex64) -> (f64, f64) {
        let h = self.cell();
        (
            (z.re + self.half_width) / h - 0.5,
            (z.im + self.half_width) / h - 0.5,
        )
    }

    /// True when `z` lies inside the hull of cell centres, where bilinear
    /// interpolation needs no extrapolation.
    pub fn contains(&self, z: Complex64) -> bool {
        let (fx, fy) = self.fractional(z);
        let top = (self.n - 1) as f64;
        (0.0..=top).contains(&fx) && (0.0..=top).contains(&fy)
    }

    /// Bilinear stencil `(indices, weights)` for `z`; points outside the hull
    /// of cell centres are clamped onto it.
    pub fn stencil(&self, z: Complex64) -> ([usize; 4], [f64; 4]) {
        let (fx, fy) = self.fractional(z);
        let top = (self.n - 1) as f64;
        let fx = fx.clamp(0.0, top);
        let fy = fy.clamp(0.0, top);
        let c0 = (fx.floor() as usize).min(self.n - 2);
        let r0 = (fy.floor() as usize).min(self.n - 2);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        (
            [
                self.index(r0, c0),
                self.index(r0, c0 + 1),
                self.index(r0 + 1, c0),
                self.index(r0 + 1, c0 + 1),
            ],
            [
                (1.0 - tx) * (1.0 - ty),
                tx * (1.0 - ty),
                (1.0 - tx) * ty,
                tx * ty,
            ],
        )
    }
}

/// A scalar field sampled at the cell centres of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: GridSpec,
    data: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Copy> Field<T> {
    pub fn from_vec(grid: GridSpec, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: data.len(),
            });
        }
        Ok(Field { grid, data })
    }

    pub fn constant(grid: GridSpec, value: T) -> Self {
        Field {
            grid,
            data: vec![value; grid.len()],
        }
    }

    pub fn sample(grid: GridSpec, f: impl Fn(Complex64) -> T) -> Self {
        Field {
            grid,
            data: grid.points().map(f).collect(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<U: Copy, V: Copy>(&self, other: &Field<U>, f: impl Fn(T, U) -> V) -> Field<V> {
        debug_assert_eq!(self.grid, other.grid);
        Field {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl<T> std::ops::Index<usize> for Field<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> std::ops::IndexMut<usize> for Field<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

impl RealField {
    pub fn interpolate(&self, z: Complex64) -> f64 {
        let (idx, w) = self.grid.stencil(z);
        idx.iter().zip(w).map(|(&i, w)| self.data[i] * w).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl ComplexField {
    pub fn interpolate(&self, z: Complex64) -> Complex64 {
        let (idx, w) = self.grid.stencil(z);
        idx.iter().zip(w).map(|(&i, w)| self.data[i] * w).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Discrete L2 norm, `sqrt(sum |v|^2 h^2)`.
    pub fn l2_norm(&self) -> f64 {
        let h = self.grid.cell();
        (self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * h * h).sqrt()
    }

    pub fn re(&self) -> RealField {
        self.map(|v| v.re)
    }

    pub fn im(&self) -> RealField {
        self.map(|v| v.im)
    }
}

/// Area fraction of each cell covered by the disc `|z - centre| < radius`,
/// estimated with an `s x s` sub-sampling of cells cut by the circle.
pub fn disc_fraction(grid: &GridSpec, centre: Complex64, radius: f64, s: usize) -> RealField {
    let h = grid.cell();
    let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
    Field::sample(*grid, |z| {
        let d = (z - centre).norm();
        if d + half_diag <= radius {
            1.0
        } else if d - half_diag >= radius {
            0.0
        } else {
            let mut inside = 0usize;
            for a in 0..s {
                for b in 0..s {
                    let p = z + Complex64::new(
                        ((a as f64 + 0.5) / s as f64 - 0.5) * h,
                        ((b as f64 + 0.5) / s as f64 - 0.5) * h,
                    );
                    if (p - centre).norm() < radius {
                        inside += 1;
                    }
                }
            }
            inside as f64 / (s * s) as f64
        }
    })
}
