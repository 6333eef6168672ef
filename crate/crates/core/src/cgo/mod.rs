//! Exponentially growing solutions: `W` of `dbar W = mu conj(dW)` in the
//! plane, `G` analytic outside the unit disc with its boundary values coupled
//! by the conductivity Hilbert transform, and recovery of the isotropizing
//! map outside the disc from `log G / (ik)`.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::beltrami::{
    gmres, solve_linear_beltrami, LinearBeltramiSolution, SharpGeometry, Site, SolverOptions,
    SpectralTransform,
};
use crate::dtn::{
    boundary_correspondence, extend_dtn, hilbert_matrix, transform_dtn, BoundaryReparam,
    BoundaryTrace, DtnMatrix,
};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Field, RealField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Laurent terms kept for plane solutions.
const PLANE_TERMS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgoDomain {
    /// `W`, defined in the whole plane.
    Plane,
    /// `G`, defined for `|z| >= 1`.
    Exterior,
}

/// `W` or `G` stored through the normalized part `M = W e^{-ikz}`.
#[derive(Debug, Clone)]
pub struct CgoSolution {
    k: Complex64,
    domain: CgoDomain,
    normalized: Option<ComplexField>,
    /// `a_j` in `M = 1 + sum_{j >= 1} a_j z^{-j}`, valid for `|z| >= radius`.
    laurent: Vec<Complex64>,
    radius: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Singular value ratio of the boundary fit, for exterior solutions.
    pub condition: Option<f64>,
}

impl CgoSolution {
    pub fn k(&self) -> Complex64 {
        self.k
    }

    pub fn domain(&self) -> CgoDomain {
        self.domain
    }

    /// `M` at cell centres, for plane solutions.
    pub fn normalized_field(&self) -> Option<&ComplexField> {
        self.normalized.as_ref()
    }

    pub fn laurent(&self) -> &[Complex64] {
        &self.laurent
    }

    fn laurent_at(&self, z: Complex64) -> Complex64 {
        let w = z.inv();
        self.laurent.iter().rev().fold(ZERO, |acc, a| (acc + a) * w) + ONE
    }

    /// `M(z)`: grid interpolation inside the sampled box, the Laurent series
    /// beyond it.
    pub fn normalized_at(&self, z: Complex64) -> Result<Complex64> {
        if let Some(m) = &self.normalized {
            if m.grid().contains(z) {
                return Ok(m.interpolate(z));
            }
        }
        if z.norm() >= self.radius {
            Ok(self.laurent_at(z))
        } else {
            Err(Error::OutOfRange {
                point: format!("{z}"),
            })
        }
    }

    pub fn value_at(&self, z: Complex64) -> Result<Complex64> {
        Ok((I * self.k * z).exp() * self.normalized_at(z)?)
    }

    /// `sup |M - 1|` over the outermost ring of cells.
    pub fn normalization_defect(&self) -> Option<f64> {
        self.ring_sup(|_| ONE)
    }

    /// `sup |M - 1 - sum a_j z^{-j}|` over the outermost ring of cells.
    pub fn laurent_defect(&self) -> Option<f64> {
        self.ring_sup(|z| self.laurent_at(z))
    }

    fn ring_sup(&self, reference: impl Fn(Complex64) -> Complex64) -> Option<f64> {
        let m = self.normalized.as_ref()?;
        let g = m.grid();
        let n = g.n();
        let mut sup: f64 = 0.0;
        for k in 0..n {
            for (r, c) in [(0, k), (n - 1, k), (k, 0), (k, n - 1)] {
                let idx = g.index(r, c);
                sup = sup.max((m[idx] - reference(g.point_at(idx))).norm());
            }
        }
        Some(sup)
    }

    /// Fourier coefficients of `G` on the unit circle, `|n| <= modes`.
    pub fn boundary_trace(&self, modes: usize) -> Result<BoundaryTrace> {
        if self.domain != CgoDomain::Exterior {
            return Err(Error::OutOfRange {
                point: "unit circle (plane solutions carry no exact trace)".into(),
            });
        }
        let mut t = BoundaryTrace::zeros(modes);
        let series = exp_series(self.k, modes + self.laurent.len() + 1);
        for n in -(modes as i64)..=modes as i64 {
            let mut v = ZERO;
            for (j, a) in std::iter::once(&ONE).chain(&self.laurent).enumerate() {
                let m = n + j as i64;
                if m >= 0 {
                    v += a * series[m as usize];
                }
            }
            t.set(n, v);
        }
        Ok(t)
    }
}

/// `(ik)^m / m!` for `m < count`: the Fourier coefficients of `e^{ikz}` on
/// the unit circle.
fn exp_series(k: Complex64, count: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(count);
    let mut c = ONE;
    for m in 0..count {
        out.push(c);
        c *= I * k / (m + 1) as f64;
    }
    out
}

/// `W` for a coefficient given cell by cell; its support is the set of cells
/// where `mu2` is nonzero.
pub fn solve_cgo(mu2: &RealField, k: Complex64, opts: SolverOptions) -> Result<CgoSolution> {
    let grid = *mu2.grid();
    let mask: Vec<bool> = mu2.values().iter().map(|v| *v != 0.0).collect();
    let geometry = SharpGeometry::cells(grid, &mask)?;
    solve_in(
        &geometry,
        |site| match site {
            Site::Cell(j) => mu2[j],
            Site::Cut(z) => mu2.interpolate(z),
        },
        k,
        opts,
    )
}

/// `W` for `mu2 = inside * chi_E`, `inside` smooth across the boundary of `E`.
pub fn solve_cgo_sharp(
    inside: &RealField,
    region: impl Fn(Complex64) -> bool,
    k: Complex64,
    opts: SolverOptions,
) -> Result<CgoSolution> {
    let geometry = SharpGeometry::new(*inside.grid(), region)?;
    solve_in(
        &geometry,
        |site| match site {
            Site::Cell(j) => inside[j],
            Site::Cut(z) => inside.interpolate(z),
        },
        k,
        opts,
    )
}

fn solve_in(
    geometry: &SharpGeometry,
    mu: impl Fn(Site) -> f64,
    k: Complex64,
    opts: SolverOptions,
) -> Result<CgoSolution> {
    let grid = *geometry.grid();
    let transform = SpectralTransform::free_space(grid);
    let mut kappa: f64 = 0.0;
    let mut radius: f64 = 0.0;
    for (j, f) in geometry.fraction().iter().enumerate() {
        if *f > 0.0 {
            kappa = kappa.max(mu(Site::Cell(j)).abs());
            radius = radius.max(grid.point_at(j).norm() + grid.cell());
        }
    }
    if kappa >= 1.0 {
        return Err(Error::BoundViolated {
            what: "sup |mu2| < 1",
            value: kappa,
            bound: 1.0,
        });
    }
    let ik = I * k;
    let point = |site: Site| match site {
        Site::Cell(j) => grid.point_at(j),
        Site::Cut(z) => z,
    };
    // dbar M = mu e_k conj(ik M + dM), e_k = exp(-2i Re(kz)), M = 1 + C w.
    let coefficient = |site: Site| {
        let z = point(site);
        mu(site) * Complex64::from_polar(1.0, -2.0 * (k * z).re)
    };
    let full =
        |site: Site, c: Complex64, s: Complex64| coefficient(site) * (ik * (ONE + c) + s).conj();
    let linear = |site: Site, c: Complex64, s: Complex64| coefficient(site) * (ik * c + s).conj();

    let fixed = geometry.iterate(&transform, full, opts, "CGO fixed point");
    let (density, iterations) = match fixed {
        Ok(it) => (it.density, it.iterations),
        Err(Error::NonConvergence { .. }) => {
            let rhs = geometry.sweep(None, &full);
            let b: Vec<f64> = rhs.iter().flat_map(|v| [v.re, v.im]).collect();
            let mut x = vec![0.0; b.len()];
            let apply = |x: &[f64]| -> Result<Vec<f64>> {
                let h = Field::from_vec(
                    grid,
                    x.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect(),
                )?;
                let (c, s) = geometry.transforms(&transform, &h)?;
                let l = geometry.sweep(Some((&c, &s)), &linear);
                Ok(h.values()
                    .iter()
                    .zip(&l)
                    .flat_map(|(a, b)| {
                        let d = a - b;
                        [d.re, d.im]
                    })
                    .collect())
            };
            let rep = gmres(apply, &b, &mut x, opts.tol, 60, 40 * opts.max_iter)?;
            let h = Field::from_vec(
                grid,
                x.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect(),
            )?;
            (h, rep.iterations)
        }
        Err(e) => return Err(e),
    };
    let (c, s) = geometry.transforms(&transform, &density)?;
    let update = geometry.sweep(Some((&c, &s)), &full);
    let scale = geometry.sweep(None, &full);
    let num: f64 = density
        .values()
        .iter()
        .zip(&update)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    let den: f64 = scale.iter().map(|v| v.norm_sqr()).sum();
    let residual = if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    };
    let laurent = geometry
        .moments(&density, PLANE_TERMS)
        .into_iter()
        .map(|m| m / PI)
        .collect();
    Ok(CgoSolution {
        k,
        domain: CgoDomain::Plane,
        normalized: Some(c.map(|v| ONE + v)),
        laurent,
        radius,
        residual,
        iterations,
        condition: None,
    })
}

/// Coefficients of `Im g - H(Re g)` for a trace `g` on `|n| <= N`.
fn coupling_defect(hilbert: &DtnMatrix, g: &[Complex64]) -> Vec<Complex64> {
    let modes = hilbert.modes();
    let idx = |n: i64| (n + modes as i64) as usize;
    let mut re = BoundaryTrace::zeros(modes);
    let mut out = vec![ZERO; 2 * modes + 1];
    for n in -(modes as i64)..=modes as i64 {
        let (a, b) = (g[idx(n)], g[idx(-n)].conj());
        re.set(n, (a + b) / 2.0);
        out[idx(n)] = (a - b) / (2.0 * I);
    }
    let h = hilbert.apply(&re);
    for (o, v) in out.iter_mut().zip(h.coeffs()) {
        *o -= v;
    }
    out
}

/// `G = e^{ikz}(1 + sum_{j <= terms} a_j z^{-j})` with
/// `Im G = H(Re G)` on the unit circle up to a constant, fitted on the
/// modes of `hilbert` by real least squares.
pub fn solve_g_from_boundary_data(
    hilbert: &DtnMatrix,
    k: Complex64,
    terms: usize,
) -> Result<CgoSolution> {
    let modes = hilbert.modes();
    if terms > modes {
        return Err(Error::TooManyModes {
            modes: terms,
            available: modes,
        });
    }
    let series = exp_series(k, 2 * modes + terms + 1);
    // Trace of e^{ikz} z^{-j} on |n| <= N.
    let basis = |j: usize| -> Vec<Complex64> {
        (-(modes as i64)..=modes as i64)
            .map(|n| {
                let m = n + j as i64;
                if m >= 0 {
                    series[m as usize]
                } else {
                    ZERO
                }
            })
            .collect()
    };
    let rows = 2 * (2 * modes + 1);
    let cols = 2 * terms + 1;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut put = |col: usize, v: &[Complex64]| {
        for (r, c) in v.iter().enumerate() {
            a[(2 * r, col)] = c.re;
            a[(2 * r + 1, col)] = c.im;
        }
    };
    for j in 1..=terms {
        let t = basis(j);
        put(2 * j - 2, &coupling_defect(hilbert, &t));
        let ti: Vec<Complex64> = t.iter().map(|v| v * I).collect();
        put(2 * j - 1, &coupling_defect(hilbert, &ti));
    }
    let mut constant = vec![ZERO; 2 * modes + 1];
    constant[modes] = -ONE;
    put(2 * terms, &constant);
    let t0 = basis(0);
    let d0 = coupling_defect(hilbert, &t0);
    let b = DVector::from_iterator(rows, d0.iter().flat_map(|v| [-v.re, -v.im]));
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition < 1e14) {
        return Err(Error::Singular(format!(
            "boundary coupling system has condition estimate {condition:.3e}"
        )));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Singular(format!("boundary coupling: {e}")))?;
    let misfit = (&a * &x - &b).norm();
    let scale = t0.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let laurent = (0..terms)
        .map(|j| Complex64::new(x[2 * j], x[2 * j + 1]))
        .collect();
    Ok(CgoSolution {
        k,
        domain: CgoDomain::Exterior,
        normalized: None,
        laurent,
        radius: 1.0,
        residual: misfit / scale,
        iterations: 0,
        condition: Some(condition),
    })
}

/// `G` outside the unit disc joined to the solution of the linear Beltrami
/// equation inside with the trace of `G`.
#[derive(Debug, Clone)]
pub struct GluedExtension {
    pub field: ComplexField,
    pub interior: LinearBeltramiSolution,
    /// Relative l2 mismatch of the traces from both sides.
    pub trace_jump: f64,
}

pub fn glue_interior_extension(
    g: &CgoSolution,
    nu1: &ComplexField,
    nu2: &RealField,
    modes: usize,
    opts: SolverOptions,
    trace_tol: f64,
) -> Result<GluedExtension> {
    let outer = g.boundary_trace(modes)?;
    let interior = solve_linear_beltrami(nu1, nu2, &outer, opts)?;
    let inner = interior.trace();
    let trace_jump = inner.distance(&outer) / outer.l2_norm().max(f64::MIN_POSITIVE);
    if !(trace_jump <= trace_tol) {
        return Err(Error::TraceMismatch {
            defect: trace_jump,
            tol: trace_tol,
        });
    }
    let grid = *nu1.grid();
    let mut values = Vec::with_capacity(grid.len());
    for (j, z) in grid.points().enumerate() {
        values.push(if z.norm() < 1.0 {
            interior.g[j]
        } else {
            g.value_at(z)?
        });
    }
    Ok(GluedExtension {
        field: Field::from_vec(grid, values)?,
        interior,
        trace_jump,
    })
}

/// `phi` with `W = exp(ik phi)`.
#[derive(Debug, Clone)]
pub struct PhaseFunction {
    pub k: Complex64,
    pub phi: ComplexField,
}

impl PhaseFunction {
    /// `sup |phi(z) - z|` over the grid.
    pub fn max_deviation(&self) -> f64 {
        let g = self.phi.grid();
        self.phi
            .values()
            .iter()
            .zip(g.points())
            .map(|(p, z)| (p - z).norm())
            .fold(0.0, f64::max)
    }
}

/// `phi = z + log(M) / (ik)`, the branch of `log M` continued inward from
/// the outermost ring of cells, where `M` is close to one.
pub fn extract_phase(w: &CgoSolution) -> Result<PhaseFunction> {
    let m = w
        .normalized
        .as_ref()
        .ok_or_else(|| Error::Branch("phase needs a plane solution".into()))?;
    let grid = *m.grid();
    let n = grid.n();
    let mut log = vec![None::<Complex64>; grid.len()];
    let mut queue = VecDeque::new();
    let tiny = 1e-300;
    let check = |j: usize| -> Result<()> {
        if m[j].norm() <= tiny || !m[j].is_finite() {
            return Err(Error::Branch(format!(
                "W vanishes at cell {j} ({})",
                grid.point_at(j)
            )));
        }
        Ok(())
    };
    for k in 0..n {
        for (r, c) in [(0, k), (n - 1, k), (k, 0), (k, n - 1)] {
            let j = grid.index(r, c);
            if log[j].is_none() {
                check(j)?;
                log[j] = Some(m[j].ln());
                queue.push_back(j);
            }
        }
    }
    while let Some(j) = queue.pop_front() {
        let (r, c) = (j / n, j % n);
        let here = log[j].expect("queued cells are set");
        let mut visit = |rr: usize, cc: usize| -> Result<()> {
            let t = grid.index(rr, cc);
            if log[t].is_some() {
                return Ok(());
            }
            check(t)?;
            let mut v = m[t].ln();
            let turns = ((here.im - v.im) / TAU).round();
            v.im += turns * TAU;
            log[t] = Some(v);
            queue.push_back(t);
            Ok(())
        };
        if r > 0 {
            visit(r - 1, c)?;
        }
        if r + 1 < n {
            visit(r + 1, c)?;
        }
        if c > 0 {
            visit(r, c - 1)?;
        }
        if c + 1 < n {
            visit(r, c + 1)?;
        }
    }
    let phi = if w.k == ZERO {
        Field::sample(grid, |z| z)
    } else {
        let ik = I * w.k;
        Field::from_vec(
            grid,
            grid.points()
                .zip(&log)
                .map(|(z, l)| z + l.expect("all cells reached") / ik)
                .collect(),
        )?
    };
    Ok(PhaseFunction { k: w.k, phi })
}

/// `log(G) / (ik)` with the branch of `log(G e^{-ikz})` continued from
/// infinity along the ray through `z`; `|z| >= 1`.
pub fn exterior_log_estimate(g: &CgoSolution, z: Complex64) -> Result<Complex64> {
    if g.k == ZERO {
        return Err(Error::Branch("k = 0 carries no phase".into()));
    }
    let r0 = z.norm();
    if r0 < g.radius * (1.0 - 1e-12) {
        return Err(Error::OutOfRange {
            point: format!("{z}"),
        });
    }
    let dir = z / r0;
    let far = (50.0 * r0).max(100.0);
    let steps = 400;
    let mut prev = g.laurent_at(dir * far).ln();
    for s in 1..=steps {
        let r = far * (r0 / far).powf(s as f64 / steps as f64);
        let b = g.laurent_at(dir * r);
        if b.norm() < 1e-12 {
            return Err(Error::Branch(format!(
                "G e^(-ikz) vanishes near {}",
                dir * r
            )));
        }
        let mut l = b.ln();
        l.im += ((prev.im - l.im) / TAU).round() * TAU;
        prev = l;
    }
    Ok(z + prev / (I * g.k))
}

/// Estimates of `F(z)` at each `k` of an increasing schedule.
#[derive(Debug, Clone)]
pub struct FRecovery {
    pub points: Vec<Complex64>,
    pub ks: Vec<Complex64>,
    /// `estimates[i][j]` at `ks[i]`, `points[j]`.
    pub estimates: Vec<Vec<Complex64>>,
    /// Boundary-fit residual per `k`.
    pub residuals: Vec<f64>,
    /// `(i, j)` where the estimate moved by more than `pi / |k|` from the
    /// previous `k`, a sign of a branch change.
    pub jumps: Vec<(usize, usize)>,
}

impl FRecovery {
    pub fn last(&self) -> &[Complex64] {
        self.estimates.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// `sup_j |estimate - truth(z_j)|` per `k`.
    pub fn errors(&self, truth: impl Fn(Complex64) -> Complex64) -> Vec<f64> {
        self.estimates
            .iter()
            .map(|e| {
                e.iter()
                    .zip(&self.points)
                    .map(|(v, z)| (v - truth(*z)).norm())
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

pub fn recover_f_exterior(
    hilbert: &DtnMatrix,
    points: &[Complex64],
    ks: &[Complex64],
    terms: usize,
) -> Result<FRecovery> {
    if ks.windows(2).any(|w| w[1].norm() <= w[0].norm()) {
        return Err(Error::NotMonotone(
            "k schedule must increase in modulus".into(),
        ));
    }
    let mut estimates: Vec<Vec<Complex64>> = Vec::with_capacity(ks.len());
    let mut residuals = Vec::with_capacity(ks.len());
    let mut jumps = Vec::new();
    for (i, k) in ks.iter().enumerate() {
        let g = solve_g_from_boundary_data(hilbert, *k, terms)?;
        residuals.push(g.residual);
        let row = points
            .iter()
            .map(|z| exterior_log_estimate(&g, *z))
            .collect::<Result<Vec<_>>>()?;
        if let Some(prev) = estimates.last() {
            for (j, (a, b)) in row.iter().zip(prev).enumerate() {
                if (a - b).norm() > PI / k.norm() {
                    jumps.push((i, j));
                }
            }
        }
        estimates.push(row);
    }
    Ok(FRecovery {
        points: points.to_vec(),
        ks: ks.to_vec(),
        estimates,
        residuals,
        jumps,
    })
}

/// DtN map of the isotropic problem on the image of the disc under the
/// recovered map, `curve(t)` its boundary value at angle `t`.
pub fn recover_dtn_isotropic(
    lambda: &DtnMatrix,
    curve: impl Fn(f64) -> Complex64,
    modes_out: usize,
) -> Result<(DtnMatrix, BoundaryReparam)> {
    let back = boundary_correspondence(curve)?;
    Ok((transform_dtn(lambda, &back, modes_out)?, back))
}

/// Boundary curve `t -> F(radius e^{it})` of the recovered map at one `k`,
/// as a Fourier series on `modes` modes.
pub fn recovered_boundary(
    hilbert: &DtnMatrix,
    k: Complex64,
    terms: usize,
    radius: f64,
    modes: usize,
) -> Result<BoundaryTrace> {
    let g = solve_g_from_boundary_data(hilbert, k, terms)?;
    let samples = 4 * modes + 4;
    let values = (0..samples)
        .map(|j| {
            exterior_log_estimate(
                &g,
                Complex64::from_polar(radius, TAU * j as f64 / samples as f64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    BoundaryTrace::from_samples(&values, modes)
}

#[derive(Debug, Clone)]
pub struct IsotropicRecovery {
    /// DtN map of the isotropic conductivity on `F(radius D)`.
    pub lambda: DtnMatrix,
    /// New boundary parameter to angle on the circle of radius `radius`.
    pub reparam: BoundaryReparam,
    pub radius: f64,
    pub g: CgoSolution,
}

/// Full recovery from unit-disc data: `G` at one `k`, the map `F` read on
/// the circle of radius `radius >= 1` and the data carried to that circle
/// through the annulus where the conductivity is one. On the unit circle
/// itself the bracket `G e^{-ikz}` loses accuracy like `e^{2|k|}`, so a
/// radius above one is the usual choice.
pub fn recover_isotropic_problem(
    lambda: &DtnMatrix,
    k: Complex64,
    terms: usize,
    radius: f64,
    modes_out: usize,
) -> Result<IsotropicRecovery> {
    let g = solve_g_from_boundary_data(&hilbert_matrix(lambda), k, terms)?;
    let outer = if radius == 1.0 {
        lambda.clone()
    } else {
        extend_dtn(lambda, radius)?
    };
    let failure = RefCell::new(None);
    let curve = |t: f64| match exterior_log_estimate(&g, Complex64::from_polar(radius, t)) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            Complex64::new(f64::NAN, f64::NAN)
        }
    };
    let recovered = recover_dtn_isotropic(&outer, curve, modes_out);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let (out, back) = recovered?;
    Ok(IsotropicRecovery {
        lambda: out,
        reparam: back,
        radius,
        g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtn::disc_dtn_isotropic;
    use crate::grid::{disc_fraction, GridSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn disc_mu(grid: GridSpec, a: f64) -> RealField {
        Field::sample(grid, |z| if z.norm() < 1.0 { a } else { 0.0 })
    }

    fn standard_hilbert(modes: usize) -> DtnMatrix {
        hilbert_matrix(&disc_dtn_isotropic(1.0, modes))
    }

    #[test]
    fn zero_coefficient_gives_exponential() {
        let grid = GridSpec::new(2.0, 64).unwrap();
        let k = c(1.5, 0.5);
        let w = solve_cgo(&Field::constant(grid, 0.0), k, SolverOptions::default()).unwrap();
        let m = w.normalized_field().unwrap();
        assert!(m.values().iter().all(|v| (v - ONE).norm() < 1e-12));
        let z = c(0.3, -0.7);
        assert!((w.value_at(z).unwrap() - (I * k * z).exp()).norm() < 1e-12);
        let phase = extract_phase(&w).unwrap();
        assert!(phase.max_deviation() < 1e-12);
    }

    #[test]
    fn zero_frequency_gives_one() {
        let grid = GridSpec::new(2.0, 64).unwrap();
        let w = solve_cgo(&disc_mu(grid, 0.3), ZERO, SolverOptions::default()).unwrap();
        assert!(w.normalized_field().unwrap().values().iter().all(|v| (v - ONE).norm() < 1e-12));
        let g = solve_g_from_boundary_data(&standard_hilbert(8), ZERO, 8).unwrap();
        assert!(g.laurent().iter().all(|a| a.norm() < 1e-12));
    }

    #[test]
    fn disc_coefficient_residual_and_decay() {
        let grid = GridSpec::new(2.0, 128).unwrap();
        let w = solve_cgo(&disc_mu(grid, 0.2), c(1.0, 0.0), SolverOptions::default()).unwrap();
        assert!(w.residual <= 1e-8, "{}", w.residual);
        // M - 1 decays like a_1 / z on the grid boundary.
        let tail = w.laurent()[0].norm() / grid.half_width();
        let defect = w.normalization_defect().unwrap();
        assert!(defect < 1e-3 + 2.0 * tail, "{defect} {tail}");
        assert!(w.laurent_defect().unwrap() < 1e-3);
        let phase = extract_phase(&w).unwrap();
        let ik = I * w.k();
        for (j, z) in grid.points().enumerate().step_by(97) {
            let rebuilt = (ik * phase.phi[j]).exp();
            let direct = (ik * z).exp() * w.normalized_field().unwrap()[j];
            assert!((rebuilt - direct).norm() < 1e-12 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn rejects_coefficient_of_unit_size() {
        let grid = GridSpec::new(2.0, 32).unwrap();
        assert!(solve_cgo(&disc_mu(grid, 1.0), ONE, SolverOptions::default()).is_err());
    }

    #[test]
    fn identity_boundary_data_give_exponential() {
        for k in [c(1.0, 0.0), c(3.0, 1.0)] {
            let g = solve_g_from_boundary_data(&standard_hilbert(16), k, 12).unwrap();
            assert!(g.residual < 1e-12);
            assert!(g.laurent().iter().all(|a| a.norm() < 1e-10), "{:?}", g.laurent());
            let t = g.boundary_trace(16).unwrap();
            let series = exp_series(k, 17);
            for n in 0..=16i64 {
                assert!((t.get(n) - series[n as usize]).norm() < 1e-12);
            }
        }
        assert!(solve_g_from_boundary_data(&standard_hilbert(4), ONE, 6).is_err());
    }

    #[test]
    fn identity_recovers_identity_map() {
        let h = standard_hilbert(16);
        let points = [c(1.5, 0.0), c(0.0, -2.0), Complex64::from_polar(1.2, 2.2)];
        let rec = recover_f_exterior(&h, &points, &[c(1.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)], 12).unwrap();
        assert!(rec.jumps.is_empty());
        for e in rec.errors(|z| z) {
            assert!(e < 1e-9, "{e}");
        }
        assert!(recover_f_exterior(&h, &points, &[c(2.0, 0.0), ONE], 12).is_err());
        let lambda = disc_dtn_isotropic(1.0, 24);
        let out = recover_isotropic_problem(&lambda, c(2.0, 0.0), 16, 1.5, 6).unwrap();
        assert!(out.lambda.relative_defect(&disc_dtn_isotropic(1.0, 6)) < 1e-6);
    }

    #[test]
    fn estimate_approaches_identity_like_inverse_radius() {
        // sigma = 3 I: F is the identity and log(G e^{-ikz}) / (ik) = O(1/z).
        let h = hilbert_matrix(&disc_dtn_isotropic(3.0, 16));
        let g = solve_g_from_boundary_data(&h, c(2.0, 0.0), 16).unwrap();
        let dir = Complex64::from_polar(1.0, 0.8);
        let dev: Vec<f64> = [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|r| (exterior_log_estimate(&g, dir * r).unwrap() - dir * r).norm())
            .collect();
        assert!(dev[0] > 1e-3);
        for w in dev.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.6..2.5).contains(&ratio), "{dev:?}");
        }
    }

    #[test]
    fn identity_glue_is_exponential() {
        let grid = GridSpec::new(1.5, 128).unwrap();
        let k = c(1.5, 0.0);
        let g = solve_g_from_boundary_data(&standard_hilbert(16), k, 12).unwrap();
        let nu1 = Field::constant(grid, ZERO);
        let nu2 = Field::constant(grid, 0.0);
        let glued = glue_interior_extension(&g, &nu1, &nu2, 16, SolverOptions::default(), 1e-8).unwrap();
        let inside = disc_fraction(&grid, ZERO, 0.9, 1);
        for (j, z) in grid.points().enumerate() {
            if inside[j] > 0.0 {
                assert!((glued.field[j] - (I * k * z).exp()).norm() < 1e-6, "{z}");
            }
        }
    }
}
