//! Principal solutions for coefficients with a jump across a curve,
//! `mu = g * chi_E` with `g` smooth on the closure of `E`.
//!
//! Cells cut by the boundary of `E` carry the density only on their inside
//! part. Near such cells the uniform-cell kernels are replaced by exact
//! integrals over `7 x 7` sub-cells weighted by their covered fraction, and
//! `dF` on the inside part is taken by a linear least-squares extrapolation
//! from nearby cells lying wholly in `E`, where `dF` is smooth.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::principal::{geometric_rate, rel_norm, PrincipalSolution, SolverOptions};
use super::transform::{cell_integrals, SpectralTransform};
use crate::error::{Error, Result};
use crate::field_algebra::DiffeoMap;
use crate::grid::{ComplexField, Field, GridSpec};

const SUB: usize = 7;
const SUB_SAMPLES: usize = 5;
/// Chebyshev radius, in cells, of the exact near field.
const NEAR: i64 = 3;

struct CutCell {
    index: usize,
    weights: Vec<f64>,
    centroid: Complex64,
    /// Extrapolation weights onto wholly-inside cells.
    stencil: Vec<(usize, f64)>,
}

struct Correction {
    target: usize,
    source: usize,
    dc: Complex64,
    ds: Complex64,
}

/// Cut-cell description of a region on a grid.
pub struct SharpGeometry {
    grid: GridSpec,
    fraction: Vec<f64>,
    cut: Vec<CutCell>,
    corrections: Vec<Correction>,
}

impl SharpGeometry {
    pub fn new(grid: GridSpec, region: impl Fn(Complex64) -> bool) -> Result<Self> {
        let n = grid.n();
        let h = grid.cell();
        let hs = h / SUB as f64;
        let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
        let mut fraction = vec![0.0; grid.len()];
        let mut raw_cut = Vec::new();
        for k in 0..grid.len() {
            let z = grid.point_at(k);
            // Cells whose probes all agree are taken as uncut.
            let probes = [
                z,
                z + Complex64::new(half_diag, 0.0),
                z - Complex64::new(half_diag, 0.0),
                z + Complex64::new(0.0, half_diag),
                z - Complex64::new(0.0, half_diag),
                z + Complex64::new(0.5 * h, 0.5 * h),
                z + Complex64::new(-0.5 * h, 0.5 * h),
                z + Complex64::new(0.5 * h, -0.5 * h),
                z + Complex64::new(-0.5 * h, -0.5 * h),
            ];
            let inside: usize = probes.iter().filter(|p| region(**p)).count();
            if inside == 0 || inside == probes.len() {
                fraction[k] = if inside == 0 { 0.0 } else { 1.0 };
                continue;
            }
            let mut w = vec![0.0; SUB * SUB];
            let f = sub_weights(z, h, &region, &mut w);
            fraction[k] = f;
            if f > 0.0 && f < 1.0 {
                raw_cut.push((k, w));
            }
        }

        // Translation-invariant sub-cell kernel table for the near field.
        let span = (2 * NEAR + 1) as usize;
        let mut table =
            vec![(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); span * span * SUB * SUB];
        let half_sub = (SUB / 2) as i64;
        for dr in -NEAR..=NEAR {
            for dc in -NEAR..=NEAR {
                for a in 0..SUB {
                    for b in 0..SUB {
                        let ic = SUB as i64 * dc - (b as i64 - half_sub);
                        let ir = SUB as i64 * dr - (a as i64 - half_sub);
                        let (c, s) = cell_integrals(ic, ir);
                        let slot = (((dr + NEAR) as usize * span + (dc + NEAR) as usize) * SUB + a)
                            * SUB
                            + b;
                        table[slot] = (c * (hs / PI), s * (-1.0 / PI));
                    }
                }
            }
        }

        let mut cut = Vec::with_capacity(raw_cut.len());
        let mut corrections = Vec::new();
        for (k, w) in raw_cut {
            let (row, col) = (k / n, k % n);
            let f = fraction[k];
            let z = grid.point_at(k);
            let mut centroid = Complex64::new(0.0, 0.0);
            for a in 0..SUB {
                for b in 0..SUB {
                    let off = Complex64::new(
                        (b as f64 - half_sub as f64) * hs,
                        (a as f64 - half_sub as f64) * hs,
                    );
                    centroid += (z + off) * w[a * SUB + b];
                }
            }
            centroid /= f * (SUB * SUB) as f64;
            for dr in -NEAR..=NEAR {
                for dc in -NEAR..=NEAR {
                    let (tr, tc) = (row as i64 + dr, col as i64 + dc);
                    if tr < 0 || tc < 0 || tr >= n as i64 || tc >= n as i64 {
                        continue;
                    }
                    let target = grid.index(tr as usize, tc as usize);
                    let base = ((dr + NEAR) as usize * span + (dc + NEAR) as usize) * SUB * SUB;
                    let mut ec = Complex64::new(0.0, 0.0);
                    let mut es = Complex64::new(0.0, 0.0);
                    for (j, wj) in w.iter().enumerate() {
                        if *wj > 0.0 {
                            ec += table[base + j].0 * *wj;
                            es += table[base + j].1 * *wj;
                        }
                    }
                    let (uc, us) = cell_integrals(dc, dr);
                    ec -= uc * (h / PI) * f;
                    es -= us * (-1.0 / PI) * f;
                    corrections.push(Correction {
                        target,
                        source: k,
                        dc: ec,
                        ds: es,
                    });
                }
            }
            cut.push(CutCell {
                index: k,
                weights: w,
                centroid,
                stencil: Vec::new(),
            });
        }
        for c in &mut cut {
            c.stencil = extrapolation_stencil(&grid, &fraction, c.index, c.centroid)?;
        }
        corrections.sort_by_key(|c| c.target);
        Ok(SharpGeometry {
            grid,
            fraction,
            cut,
            corrections,
        })
    }

    /// Whole cells only: the support is the union of the cells in `mask`.
    pub fn cells(grid: GridSpec, mask: &[bool]) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: mask.len(),
            });
        }
        Ok(SharpGeometry {
            grid,
            fraction: mask.iter().map(|m| if *m { 1.0 } else { 0.0 }).collect(),
            cut: Vec::new(),
            corrections: Vec::new(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Covered fraction of each cell.
    pub fn fraction(&self) -> &[f64] {
        &self.fraction
    }

    pub fn cut_cells(&self) -> usize {
        self.cut.len()
    }

    /// Inside part of cut cell `k`, as `7 x 7` sub-cell weights.
    pub fn sub_weights(&self, k: usize) -> Option<&[f64]> {
        self.cut
            .iter()
            .find(|c| c.index == k)
            .map(|c| c.weights.as_slice())
    }

    /// `(C h, S h)` at cell centres for a density `h` living on the inside
    /// part of each cell.
    pub fn transforms(
        &self,
        transform: &SpectralTransform,
        h: &ComplexField,
    ) -> Result<(ComplexField, ComplexField)> {
        let spread = Field::from_vec(
            self.grid,
            h.values()
                .iter()
                .zip(&self.fraction)
                .map(|(v, f)| v * f)
                .collect(),
        )?;
        let (mut c, mut s) = transform.cauchy_beurling(&spread)?;
        for corr in &self.corrections {
            let v = h[corr.source];
            c[corr.target] += corr.dc * v;
            s[corr.target] += corr.ds * v;
        }
        Ok((c, s))
    }
}

fn sub_weights(z: Complex64, h: f64, region: &impl Fn(Complex64) -> bool, w: &mut [f64]) -> f64 {
    let hs = h / SUB as f64;
    let half_sub = (SUB / 2) as f64;
    let mut total = 0.0;
    for a in 0..SUB {
        for b in 0..SUB {
            let centre = z + Complex64::new((b as f64 - half_sub) * hs, (a as f64 - half_sub) * hs);
            let mut hits = 0;
            for p in 0..SUB_SAMPLES {
                for q in 0..SUB_SAMPLES {
                    let off = Complex64::new(
                        ((q as f64 + 0.5) / SUB_SAMPLES as f64 - 0.5) * hs,
                        ((p as f64 + 0.5) / SUB_SAMPLES as f64 - 0.5) * hs,
                    );
                    if region(centre + off) {
                        hits += 1;
                    }
                }
            }
            let v = hits as f64 / (SUB_SAMPLES * SUB_SAMPLES) as f64;
            w[a * SUB + b] = v;
            total += v;
        }
    }
    total / (SUB * SUB) as f64
}

/// Weights `w_j` with `sum w_j u(z_j) ~ u(target)` for affine `u`, fitted on
/// wholly-inside cells near `k`.
fn extrapolation_stencil(
    grid: &GridSpec,
    fraction: &[f64],
    k: usize,
    target: Complex64,
) -> Result<Vec<(usize, f64)>> {
    let n = grid.n() as i64;
    let (row, col) = ((k as i64) / n, (k as i64) % n);
    let h = grid.cell();
    for radius in 2..=4i64 {
        let mut pts = Vec::new();
        for dr in -radius..=radius {
            for dc in -radius..=radius {
                let (r, c) = (row + dr, col + dc);
                if r < 0 || c < 0 || r >= n || c >= n {
                    continue;
                }
                let j = grid.index(r as usize, c as usize);
                if fraction[j] >= 1.0 {
                    pts.push(j);
                }
            }
        }
        if pts.len() < 4 {
            continue;
        }
        // Normal equations in coordinates scaled by h about the target.
        let mut m = [[0.0f64; 3]; 3];
        let rows: Vec<[f64; 3]> = pts
            .iter()
            .map(|&j| {
                let d = (grid.point_at(j) - target) / h;
                [1.0, d.re, d.im]
            })
            .collect();
        for r in &rows {
            for a in 0..3 {
                for b in 0..3 {
                    m[a][b] += r[a] * r[b];
                }
            }
        }
        let Some(inv) = invert3(m) else { continue };
        // Value at the target is the constant coefficient: e0^T M^{-1} A^T.
        let stencil = pts
            .iter()
            .zip(&rows)
            .map(|(&j, r)| (j, inv[0][0] * r[0] + inv[0][1] * r[1] + inv[0][2] * r[2]))
            .collect();
        return Ok(stencil);
    }
    Err(Error::Singular(format!(
        "no interior cells near cut cell {k} for extrapolation"
    )))
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-10 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, d) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) / det;
        }
    }
    Some(inv)
}

/// Principal solution of `dbar F = g chi_E dF`; `inside` holds `g` at cell
/// centres and must be smooth across the boundary of `E`.
pub fn solve_principal_sharp(
    inside: &ComplexField,
    region: impl Fn(Complex64) -> bool,
    opts: SolverOptions,
) -> Result<PrincipalSolution> {
    let grid = *inside.grid();
    let geometry = SharpGeometry::new(grid, &region)?;
    let transform = SpectralTransform::free_space(grid);
    solve_with_geometry(&transform, &geometry, inside, &region, opts)
}

pub fn solve_with_geometry(
    transform: &SpectralTransform,
    geometry: &SharpGeometry,
    inside: &ComplexField,
    region: impl Fn(Complex64) -> bool,
    opts: SolverOptions,
) -> Result<PrincipalSolution> {
    let grid = *inside.grid();
    let frac = geometry.fraction();
    let mut kappa: f64 = 0.0;
    for (k, f) in frac.iter().enumerate() {
        if *f > 0.0 {
            kappa = kappa.max(inside[k].norm());
        }
    }
    if kappa >= 1.0 {
        return Err(Error::BoundViolated {
            what: "sup |mu| < 1",
            value: kappa,
            bound: 1.0,
        });
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let g = |site: Site| match site {
        Site::Cell(k) => inside[k],
        Site::Cut(z) => inside.interpolate(z),
    };
    let it = geometry.iterate(
        transform,
        |site, _, s| g(site) * (one + s),
        opts,
        "principal solution (cut cells)",
    )?;
    let area = grid.cell() * grid.cell();
    let a1 = it
        .density
        .values()
        .iter()
        .zip(frac)
        .map(|(v, f)| v * f)
        .sum::<Complex64>()
        * (area / PI);
    let dz = it.beurling.map(|s| one + s);
    let mut dzbar = it.density.clone();
    for c in &geometry.cut {
        let k = c.index;
        dzbar[k] = if region(grid.point_at(k)) {
            inside[k] * dz[k]
        } else {
            zero
        };
    }
    let map = DiffeoMap::new(it.cauchy, dz, dzbar, a1)?;
    Ok(PrincipalSolution {
        map,
        density: it.density,
        residual: it.residual,
        iterations: it.iterations,
        history: it.history,
        kappa,
    })
}

/// Where a density value lives: a wholly-inside cell, or the inside part of
/// a cut cell represented by its centroid.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Site {
    Cell(usize),
    Cut(Complex64),
}

pub(crate) struct CutIteration {
    pub density: ComplexField,
    pub cauchy: ComplexField,
    pub beurling: ComplexField,
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl SharpGeometry {
    /// `rule(site, C h, S h)` on every site of the region, zero elsewhere;
    /// on cut cells both transforms are extrapolated from the inside.
    pub(crate) fn sweep(
        &self,
        transforms: Option<(&ComplexField, &ComplexField)>,
        rule: &impl Fn(Site, Complex64, Complex64) -> Complex64,
    ) -> Vec<Complex64> {
        let zero = Complex64::new(0.0, 0.0);
        let mut out: Vec<Complex64> = (0..self.grid.len())
            .map(|k| {
                if self.fraction[k] >= 1.0 {
                    let (c, s) = transforms.map_or((zero, zero), |(c, s)| (c[k], s[k]));
                    rule(Site::Cell(k), c, s)
                } else {
                    zero
                }
            })
            .collect();
        for cell in &self.cut {
            let (c, s) = transforms.map_or((zero, zero), |(c, s)| {
                cell.stencil.iter().fold((zero, zero), |(a, b), (j, w)| {
                    (a + c[*j] * *w, b + s[*j] * *w)
                })
            });
            out[cell.index] = rule(Site::Cut(cell.centroid), c, s);
        }
        out
    }

    /// Fixed point `h = rule(site, C h, S h)` on the region, zero elsewhere,
    /// from `h0 = rule(site, 0, 0)`.
    pub(crate) fn iterate(
        &self,
        transform: &SpectralTransform,
        rule: impl Fn(Site, Complex64, Complex64) -> Complex64,
        opts: SolverOptions,
        what: &'static str,
    ) -> Result<CutIteration> {
        let grid = self.grid;
        let zero = Complex64::new(0.0, 0.0);
        let scale = self.sweep(None, &rule);
        let mut h = Field::from_vec(grid, scale.clone())?;
        let mut history = Vec::new();
        let mut iterations = 0;
        loop {
            let (ch, sh) = self.transforms(transform, &h)?;
            let update = self.sweep(Some((&ch, &sh)), &rule);
            let diff: Vec<Complex64> = h.values().iter().zip(&update).map(|(a, b)| a - b).collect();
            let residual = rel_norm(&diff, &scale);
            history.push(residual);
            if residual <= opts.tol || scale.iter().all(|v| *v == zero) {
                return Ok(CutIteration {
                    density: h,
                    cauchy: ch,
                    beurling: sh,
                    residual,
                    iterations,
                    history,
                });
            }
            let n = history.len();
            let stalled = n > 8 && history[n - 1] > 0.999 * history[n - 5];
            if iterations >= opts.max_iter || stalled || !residual.is_finite() {
                return Err(Error::NonConvergence {
                    what,
                    iterations,
                    residual,
                    contraction: geometric_rate(&history),
                });
            }
            h = Field::from_vec(grid, update)?;
            iterations += 1;
        }
    }

    /// Cut-cell quadrature of `integral over E of h w^k`, `0 <= k < count`.
    pub(crate) fn moments(&self, h: &ComplexField, count: usize) -> Vec<Complex64> {
        let area = self.grid.cell() * self.grid.cell();
        let mut out = vec![Complex64::new(0.0, 0.0); count];
        let mut centroid = vec![None; self.grid.len()];
        for c in &self.cut {
            centroid[c.index] = Some(c.centroid);
        }
        for (k, f) in self.fraction.iter().enumerate() {
            if *f <= 0.0 {
                continue;
            }
            let w = centroid[k].unwrap_or_else(|| self.grid.point_at(k));
            let mut p = h[k] * (*f * area);
            for m in out.iter_mut() {
                *m += p;
                p *= w;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_fractions_sum_to_area() {
        let g = GridSpec::new(2.0, 64).unwrap();
        let geo = SharpGeometry::new(g, |z| z.norm() < 1.0).unwrap();
        let area: f64 = geo.fraction().iter().sum::<f64>() * g.cell() * g.cell();
        assert!((area - PI).abs() < 2e-4);
        assert!(geo.cut_cells() > 0);
    }

    fn disc_transform_errors(n: usize) -> (f64, f64) {
        let g = GridSpec::new(2.0, n).unwrap();
        let geo = SharpGeometry::new(g, |z| z.norm() < 1.0).unwrap();
        let t = SpectralTransform::free_space(g);
        let h = Field::sample(g, |_| Complex64::new(1.0, 0.0));
        let (c, s) = geo.transforms(&t, &h).unwrap();
        let mut ec: f64 = 0.0;
        let mut es: f64 = 0.0;
        for (k, z) in g.points().enumerate() {
            let (cz, sz) = if z.norm() < 1.0 {
                (z.conj(), Complex64::new(0.0, 0.0))
            } else {
                (z.inv(), -(z * z).inv())
            };
            ec = ec.max((c[k] - cz).norm());
            if (z.norm() - 1.0).abs() > 0.5 * g.cell() {
                es = es.max((s[k] - sz).norm());
            }
        }
        (ec, es)
    }

    #[test]
    fn exact_density_reproduces_disc_transform() {
        let (c64, s64) = disc_transform_errors(64);
        let (c128, s128) = disc_transform_errors(128);
        assert!(c128 < 2.5e-3, "C error {c128}");
        assert!(s128 < 1e-2, "S error {s128}");
        assert!(s64 < 1e-2, "S error {s64}");
        assert!(c128 < c64, "{c64} {c128}");
    }
}
