use std::f64::consts::PI;

use num_complex::Complex64;

use super::transform::SpectralTransform;
use crate::error::{Error, Result};
use crate::field_algebra::{
    mu1_from_sigma, mu1_of, transport_tensor, ConductivityModel, ConductivityTensor, DiffeoMap,
    PlanarMap, PushForward, TensorField,
};
use crate::grid::{ComplexField, Field, GridSpec, RealField};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }
}

/// Normalized solution `F = z + C h` of `dbar F = mu dF`.
#[derive(Debug, Clone)]
pub struct PrincipalSolution {
    pub map: DiffeoMap,
    /// `h = dbar F`.
    pub density: ComplexField,
    /// `||dbar F - mu dF||_2 / ||mu||_2`.
    pub residual: f64,
    pub iterations: usize,
    /// Relative residual after each sweep.
    pub history: Vec<f64>,
    pub kappa: f64,
}

impl PrincipalSolution {
    /// Geometric mean of the residual ratios over the recorded history.
    pub fn contraction_rate(&self) -> f64 {
        geometric_rate(&self.history)
    }

    /// Solver record as `key = value` lines.
    pub fn report(&self) -> String {
        format!(
            "iterations = {}\nresidual = {:.6e}\nkappa = {:.6}\ncontraction = {:.6}\n",
            self.iterations,
            self.residual,
            self.kappa,
            self.contraction_rate()
        )
    }
}

pub(crate) fn geometric_rate(history: &[f64]) -> f64 {
    let usable: Vec<f64> = history.iter().copied().filter(|r| *r > 1e-15).collect();
    if usable.len() < 2 {
        return 0.0;
    }
    let first = usable[0];
    let last = usable[usable.len() - 1];
    (last / first).powf(1.0 / (usable.len() - 1) as f64)
}

pub(crate) fn rel_norm(num: &[Complex64], den: &[Complex64]) -> f64 {
    let a: f64 = num.iter().map(|v| v.norm_sqr()).sum();
    let b: f64 = den.iter().map(|v| v.norm_sqr()).sum();
    if b == 0.0 {
        a.sqrt()
    } else {
        (a / b).sqrt()
    }
}

/// Principal solution with the free-space transforms.
pub fn solve_principal(mu: &ComplexField, tol: f64) -> Result<PrincipalSolution> {
    let t = SpectralTransform::free_space(*mu.grid());
    solve_principal_with(&t, mu, SolverOptions::with_tol(tol))
}

/// Fixed point `h = mu (1 + S h)` from `h0 = mu`.
pub fn solve_principal_with(
    transform: &SpectralTransform,
    mu: &ComplexField,
    opts: SolverOptions,
) -> Result<PrincipalSolution> {
    let grid = *mu.grid();
    let kappa = mu.sup_norm();
    if kappa >= 1.0 {
        return Err(Error::BoundViolated {
            what: "sup |mu| < 1",
            value: kappa,
            bound: 1.0,
        });
    }
    let one = Complex64::new(1.0, 0.0);
    let mut h = mu.clone();
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let (ch, sh) = transform.cauchy_beurling(&h)?;
        let update: Vec<Complex64> = mu
            .values()
            .iter()
            .zip(sh.values())
            .map(|(m, s)| m * (one + s))
            .collect();
        let diff: Vec<Complex64> = h.values().iter().zip(&update).map(|(a, b)| a - b).collect();
        let residual = rel_norm(&diff, mu.values());
        history.push(residual);
        if residual <= opts.tol || kappa == 0.0 {
            let a1 = h.values().iter().sum::<Complex64>() * (grid.cell() * grid.cell() / PI);
            let dz = sh.map(|s| one + s);
            let map = DiffeoMap::new(ch, dz, h.clone(), a1)?;
            return Ok(PrincipalSolution {
                map,
                density: h,
                residual,
                iterations,
                history,
                kappa,
            });
        }
        let n = history.len();
        let stalled = n > 8 && history[n - 1] > 0.999 * history[n - 5];
        if iterations >= opts.max_iter || stalled || !residual.is_finite() {
            return Err(Error::NonConvergence {
                what: "principal solution",
                iterations,
                residual,
                contraction: geometric_rate(&history),
            });
        }
        h = Field::from_vec(grid, update)?;
        iterations += 1;
    }
}

/// Preimage of `y` under `F`.
pub fn invert_map(map: &DiffeoMap, y: Complex64) -> Result<Complex64> {
    map.inverse(y)
}

/// Quasiconformal change of variables making `sigma` isotropic.
#[derive(Debug, Clone)]
pub struct Isotropization {
    pub solution: PrincipalSolution,
    /// `sqrt(det sigma) o F^{-1}` sampled on the grid.
    pub sigma_tilde: RealField,
    /// `max(lambda_max / lambda_min) - 1` of `F_* sigma` over all cells.
    pub isotropy_defect: f64,
    /// `max |det(F_* sigma)(F(x)) - det sigma(x)|`.
    pub det_defect: f64,
}

impl Isotropization {
    pub fn map(&self) -> &DiffeoMap {
        &self.solution.map
    }

    /// `F_* sigma` as a point-evaluable field.
    pub fn pushed<S: TensorField>(&self, sigma: S) -> PushForward<S, &DiffeoMap> {
        PushForward::new(sigma, &self.solution.map)
    }
}

pub fn isotropize(sigma: &ConductivityTensor, tol: f64) -> Result<Isotropization> {
    let mu = mu1_from_sigma(sigma)?;
    let solution = solve_principal(&mu, tol)?;
    finish_isotropization(sigma, solution)
}

/// [`isotropize`] for a closed-form model. Conductivities with a jump across
/// their support circle go through the cut-cell solver.
pub fn isotropize_model(
    model: &ConductivityModel,
    grid: GridSpec,
    tol: f64,
) -> Result<Isotropization> {
    model.check()?;
    let sigma = model.to_grid(grid)?;
    match model {
        ConductivityModel::Constant { radius, .. }
        | ConductivityModel::RadialAnisotropic { radius, .. } => {
            let mut inside = Vec::with_capacity(grid.len());
            for z in grid.points() {
                inside.push(mu1_of(&model.interior_tensor_at(z))?);
            }
            let inside = Field::from_vec(grid, inside)?;
            let r = *radius;
            let solution = super::sharp::solve_principal_sharp(
                &inside,
                |z| z.norm() < r,
                SolverOptions::with_tol(tol),
            )?;
            finish_isotropization(&sigma, solution)
        }
        _ => isotropize(&sigma, tol),
    }
}

pub(crate) fn finish_isotropization(
    sigma: &ConductivityTensor,
    solution: PrincipalSolution,
) -> Result<Isotropization> {
    let map = &solution.map;
    map.check_orientation()?;
    let grid = *sigma.grid();
    let mut isotropy_defect: f64 = 0.0;
    let mut det_defect: f64 = 0.0;
    for k in 0..grid.len() {
        let t = sigma.at(k);
        let pushed = transport_tensor(&t, map.dz()[k], map.dzbar()[k])?;
        isotropy_defect = isotropy_defect.max(pushed.anisotropy() - 1.0);
        det_defect = det_defect.max((pushed.det() - t.det()).abs());
    }
    let mut tilde = Vec::with_capacity(grid.len());
    for y in grid.points() {
        let v = match map.inverse(y) {
            Ok(x) => sigma.tensor_at(x).det().sqrt(),
            Err(_) => 1.0,
        };
        tilde.push(v);
    }
    Ok(Isotropization {
        sigma_tilde: Field::from_vec(grid, tilde)?,
        isotropy_defect,
        det_defect,
        solution,
    })
}

/// Mean of `|F(z) - z|` on the outermost ring of cells.
pub fn boundary_decay(map: &DiffeoMap) -> f64 {
    let g = map.grid();
    let n = g.n();
    let d = map.displacement();
    let mut acc = 0.0;
    for k in 0..n {
        for (r, c) in [(0, k), (n - 1, k), (k, 0), (k, n - 1)] {
            acc += d[g.index(r, c)].norm();
        }
    }
    acc / (4 * n) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_algebra::{distortion, ConductivityModel, SymTensor};
    use crate::grid::{disc_fraction, GridSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_coefficient_gives_identity() {
        let g = GridSpec::new(2.0, 32).unwrap();
        let s = solve_principal(&Field::constant(g, c(0.0, 0.0)), 1e-10).unwrap();
        assert_eq!(s.map.displacement().sup_norm(), 0.0);
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn rejects_kappa_one() {
        let g = GridSpec::new(2.0, 32).unwrap();
        let mu = Field::sample(g, |z| {
            if z.norm() < 1.0 {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        assert!(matches!(
            solve_principal(&mu, 1e-10),
            Err(Error::BoundViolated { .. })
        ));
    }

    #[test]
    fn constant_disc_coefficient_matches_closed_form() {
        let g = GridSpec::new(2.0, 128).unwrap();
        let cc = c(0.3, -0.2);
        let mu = disc_fraction(&g, c(0.0, 0.0), 1.0, 16).map(|f| cc * f);
        let s = solve_principal(&mu, 1e-10).unwrap();
        assert!(s.residual <= 1e-10);
        let f = s.map.forward();
        let mut err: f64 = 0.0;
        for (k, z) in g.points().enumerate() {
            let exact = if z.norm() < 1.0 {
                z + cc * z.conj()
            } else {
                z + cc / z
            };
            err = err.max((f[k] - exact).norm());
        }
        // Cell-based sampling of a jump is first order; see the cut-cell solver.
        assert!(err < 1e-2, "{err}");
        assert!((s.map.far_coefficient() - cc).norm() < 1e-3);
        assert!(s.contraction_rate() <= cc.norm() + 0.05);
    }

    #[test]
    fn smooth_coefficient_gives_homeomorphism() {
        let g = GridSpec::new(2.0, 64).unwrap();
        let mu = Field::sample(g, |z| {
            let r2 = z.norm_sqr();
            if r2 < 1.0 {
                c(0.5, 0.0) * (1.0 - r2).powi(3) * Complex64::from_polar(1.0, 3.0 * z.re)
            } else {
                c(0.0, 0.0)
            }
        });
        let s = solve_principal(&mu, 1e-10).unwrap();
        assert!(s.residual <= 1e-10);
        assert!(s.map.min_jacobian().1 > 0.0);
        let k = distortion(&s.map).unwrap();
        assert!(k.sup_norm() <= 3.0 + 1e-6);
        for y in [c(0.1, 0.2), c(-0.7, 0.4), c(1.2, -1.1)] {
            let x = invert_map(&s.map, y).unwrap();
            assert!((s.map.apply(x) - y).norm() <= 2.0 * g.cell());
        }
    }

    #[test]
    fn isotropize_identity_and_isotropic() {
        let g = GridSpec::new(2.0, 32).unwrap();
        let iso = isotropize(&ConductivityTensor::identity(g), 1e-10).unwrap();
        assert_eq!(iso.map().displacement().sup_norm(), 0.0);
        assert!(iso.sigma_tilde.values().iter().all(|v| *v == 1.0));
        let s = ConductivityModel::constant_on_unit_disc(SymTensor::isotropic(3.0))
            .to_grid(g)
            .unwrap();
        let iso = isotropize(&s, 1e-10).unwrap();
        assert_eq!(iso.map().displacement().sup_norm(), 0.0);
        let centre = g.index(16, 16);
        assert!((iso.sigma_tilde[centre] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn constant_anisotropic_model_is_isotropized_at_every_cell() {
        let g = GridSpec::new(2.0, 128).unwrap();
        let model = ConductivityModel::constant_on_unit_disc(SymTensor::new(4.0, 0.0, 1.0));
        let iso = isotropize_model(&model, g, 1e-10).unwrap();
        assert!(iso.isotropy_defect < 1e-6, "{}", iso.isotropy_defect);
        assert!(iso.det_defect < 1e-8, "{}", iso.det_defect);
        let centre = iso.map().apply(c(0.0, 0.0));
        assert!((iso.sigma_tilde.interpolate(centre) - 2.0).abs() < 1e-6);
    }
}
