//! Boundary value problem `dbar g = nu1 dg + nu2 conj(dg)` on the unit disc.
//!
//! `g = Phi + C w` with `Phi` a polynomial and `w = dbar g` supported on the
//! disc. On the unit circle `C w` only has negative modes, with the
//! coefficient of `e^{-i(k+1) theta}` equal to `(1/pi) int w z^k`. The
//! equation is real-linear in `Phi`, so the coefficients of `Phi` are fitted
//! to the prescribed trace by real least squares over per-monomial solves.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::principal::SolverOptions;
use super::sharp::{CutIteration, SharpGeometry, Site};
use super::transform::SpectralTransform;
use crate::dtn::BoundaryTrace;
use crate::error::{Error, Result};
use crate::field_algebra::PlanarMap;
use crate::grid::{ComplexField, Field, GridSpec, RealField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone)]
pub struct LinearBeltramiSolution {
    /// `g` at cell centres; meaningful on the closed disc.
    pub g: ComplexField,
    pub dz: ComplexField,
    pub dzbar: ComplexField,
    /// `dbar g` on the inside part of each cell.
    pub density: ComplexField,
    /// Coefficients `a_0, ..., a_N` of the analytic part `Phi`.
    pub analytic: Vec<Complex64>,
    /// Relative l2 misfit between the prescribed trace and the trace of `g`.
    pub trace_defect: f64,
    pub residual: f64,
    pub iterations: usize,
    /// `sup (|nu1| + |nu2|)` over the disc.
    pub kappa: f64,
    negative: Vec<Complex64>,
}

impl LinearBeltramiSolution {
    /// Fourier coefficients of `g` on the unit circle, with as many modes as
    /// the prescribed trace.
    pub fn trace(&self) -> BoundaryTrace {
        let modes = self.negative.len();
        let mut t = BoundaryTrace::zeros(modes);
        for (n, a) in self.analytic.iter().enumerate() {
            t.set(n as i64, *a);
        }
        for (k, m) in self.negative.iter().enumerate() {
            t.set(-(k as i64 + 1), *m);
        }
        t
    }
}

/// Solves on the unit disc. `nu1` and `nu2` hold the coefficients of the
/// disc, continued smoothly past the unit circle; only their restriction to
/// the disc is used.
pub fn solve_linear_beltrami(
    nu1: &ComplexField,
    nu2: &RealField,
    boundary: &BoundaryTrace,
    opts: SolverOptions,
) -> Result<LinearBeltramiSolution> {
    let grid = *nu1.grid();
    if *nu2.grid() != grid {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            got: nu2.values().len(),
        });
    }
    if !grid.covers_with_margin(1.0) {
        return Err(Error::InvalidGrid(format!(
            "half width {} leaves no margin around the unit disc",
            grid.half_width()
        )));
    }
    let geometry = SharpGeometry::new(grid, |z| z.norm() < 1.0)?;
    let transform = SpectralTransform::free_space(grid);
    LinearSolver {
        grid,
        nu1,
        nu2,
        geometry: &geometry,
        transform: &transform,
        opts,
    }
    .solve(boundary)
}

struct LinearSolver<'a> {
    grid: GridSpec,
    nu1: &'a ComplexField,
    nu2: &'a RealField,
    geometry: &'a SharpGeometry,
    transform: &'a SpectralTransform,
    opts: SolverOptions,
}

impl LinearSolver<'_> {
    fn coefficients(&self, site: Site) -> (Complex64, f64, Complex64) {
        match site {
            Site::Cell(k) => (self.nu1[k], self.nu2[k], self.grid.point_at(k)),
            Site::Cut(z) => (self.nu1.interpolate(z), self.nu2.interpolate(z), z),
        }
    }

    fn kappa(&self) -> f64 {
        let mut kappa: f64 = 0.0;
        for (k, f) in self.geometry.fraction().iter().enumerate() {
            if *f > 0.0 {
                kappa = kappa.max(self.nu1[k].norm() + self.nu2[k].abs());
            }
        }
        kappa
    }

    /// Fixed point for `w` with analytic part `sum a_n z^n`.
    fn density(&self, a: &[Complex64]) -> Result<CutIteration> {
        let dphi = |z: Complex64| -> Complex64 {
            // Horner on the derivative.
            a.iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(ZERO, |acc, (n, c)| acc * z + c * n as f64)
        };
        self.geometry.iterate(
            self.transform,
            |site, _, s| {
                let (n1, n2, z) = self.coefficients(site);
                let d = dphi(z) + s;
                n1 * d + n2 * d.conj()
            },
            self.opts,
            "linear Beltrami equation",
        )
    }

    fn solve(&self, boundary: &BoundaryTrace) -> Result<LinearBeltramiSolution> {
        let kappa = self.kappa();
        if kappa >= 1.0 {
            return Err(Error::BoundViolated {
                what: "sup |nu1| + |nu2| < 1",
                value: kappa,
                bound: 1.0,
            });
        }
        let modes = boundary.modes();
        let rows = 2 * (2 * modes + 1);
        let cols = 2 * (modes + 1);
        let mut a = DMatrix::<f64>::zeros(rows, cols);
        let row = |n: i64| 2 * (n + modes as i64) as usize;
        for n in 0..=modes {
            for (d, dir) in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]
                .into_iter()
                .enumerate()
            {
                let col = 2 * n + d;
                let mut trace = vec![ZERO; 2 * modes + 1];
                trace[modes + n] = dir;
                if n > 0 {
                    let mut coeff = vec![ZERO; n + 1];
                    coeff[n] = dir;
                    let it = self.density(&coeff)?;
                    for (k, m) in self
                        .geometry
                        .moments(&it.density, modes)
                        .into_iter()
                        .enumerate()
                    {
                        trace[modes - k - 1] += m / PI;
                    }
                }
                for (j, v) in trace.iter().enumerate() {
                    let r = row(j as i64 - modes as i64);
                    a[(r, col)] = v.re;
                    a[(r + 1, col)] = v.im;
                }
            }
        }
        let mut b = DVector::<f64>::zeros(rows);
        for n in -(modes as i64)..=modes as i64 {
            let v = boundary.get(n);
            b[row(n)] = v.re;
            b[row(n) + 1] = v.im;
        }
        let x = a
            .clone()
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| Error::Singular(format!("trace fit: {e}")))?;
        let misfit = (&a * &x - &b).norm();
        let trace_defect = if b.norm() > 0.0 {
            misfit / b.norm()
        } else {
            misfit
        };
        let analytic: Vec<Complex64> = (0..=modes)
            .map(|n| Complex64::new(x[2 * n], x[2 * n + 1]))
            .collect();

        let it = self.density(&analytic)?;
        let phi = |z: Complex64| analytic.iter().rev().fold(ZERO, |acc, c| acc * z + c);
        let dphi = |z: Complex64| {
            analytic
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(ZERO, |acc, (n, c)| acc * z + c * n as f64)
        };
        let grid = self.grid;
        let g = Field::sample(grid, phi).zip_map(&it.cauchy, |p, c| p + c);
        let dz = Field::sample(grid, dphi).zip_map(&it.beurling, |p, s| p + s);
        let mut dzbar = it.density.clone();
        for (k, f) in self.geometry.fraction().iter().enumerate() {
            if *f > 0.0 && *f < 1.0 {
                let z = grid.point_at(k);
                dzbar[k] = if z.norm() < 1.0 {
                    self.nu1[k] * dz[k] + self.nu2[k] * dz[k].conj()
                } else {
                    ZERO
                };
            }
        }
        let negative = self
            .geometry
            .moments(&it.density, modes)
            .into_iter()
            .map(|m| m / PI)
            .collect();
        Ok(LinearBeltramiSolution {
            g,
            dz,
            dzbar,
            density: it.density,
            analytic,
            trace_defect,
            residual: it.residual,
            iterations: it.iterations,
            kappa,
            negative,
        })
    }
}

/// `sup |dbar g - nu1 dg - nu2 conj(dg)| / |dg|` over `points` for
/// `g = outer o inner`, with the derivatives of `g` from the chain rule and
/// `nu` evaluated in the source variable.
pub fn composition_residual(
    outer: &impl PlanarMap,
    inner: &impl PlanarMap,
    nu: impl Fn(Complex64) -> (Complex64, f64),
    points: &[Complex64],
) -> f64 {
    points
        .iter()
        .map(|z| {
            let (p, q) = inner.derivatives(*z);
            let (fp, fq) = outer.derivatives(inner.apply(*z));
            let dg = fp * p + fq * q.conj();
            let dbar = fp * q + fq * p.conj();
            let (n1, n2) = nu(*z);
            (dbar - n1 * dg - n2 * dg.conj()).norm() / dg.norm().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}
