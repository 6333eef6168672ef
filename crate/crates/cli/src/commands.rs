use std::cell::RefCell;
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use calderon_core::beltrami::isotropize_model;
use calderon_core::beltrami::SolverOptions;
use calderon_core::cgo::{exterior_log_estimate, recover_f_exterior, solve_cgo, solve_g_from_boundary_data};
use calderon_core::domains::{
    beurling_ahlfors_extension, build_representative, cauchy_data_from_partial, exterior_dtn,
    exterior_to_disc_solve, halfplane_dtn_fem, halfplane_mesh, halfplane_to_disc_dtn, partial_data,
    reflect_conductivity, CircleHomeomorphism, ConformalChart,
};
use calderon_core::dtn::{
    disc_dtn_isotropic, dtn_matrix, hilbert_matrix, image_domain, transform_dtn, BoundaryTrace,
    DtnMatrix, TriangularMesh,
};
use calderon_core::field_algebra::{
    mu1_of, mu_from_nu_of, nu_from_mu_of, nu_to_sigma_of, sigma_to_nu_of, HatSigma, IsotropicImage,
    PushForward, RadialShear,
};
use calderon_core::io::{
    parse_conductivity, read_cauchy_csv, read_dtn_csv, read_recovery_csv, write_cauchy_csv,
    write_dtn_csv, write_recovery_csv, DtnHeader, FieldFile, RecoveryRow,
};
use calderon_core::{ConductivityModel, Field, PlanarMap, SymTensor, TensorField};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Geometry, RunConfig};
use crate::report::{RunReport, Stage};

/// Fixed bounds that do not depend on the mesh.
const SYMMETRY_TOL: f64 = 1e-8;
const ISOTROPY_TOL: f64 = 1e-3;
const DET_TOL: f64 = 1e-8;
const ALGEBRA_TOL: f64 = 1e-10;
const EXACT_TOL: f64 = 1e-9;
const RECOVERY_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    ForwardDtn,
    Isotropize,
    CgoRecover,
    PartialData,
    HalfPlane,
    Exterior,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ForwardDtn => "forward-dtn",
            Command::Isotropize => "isotropize",
            Command::CgoRecover => "cgo-recover",
            Command::PartialData => "partial-data",
            Command::HalfPlane => "halfplane",
            Command::Exterior => "exterior",
            Command::Verify => "verify",
        }
    }
}

/// `sigma(z - center)`.
#[derive(Debug, Clone)]
pub struct Shifted<S> {
    pub sigma: S,
    pub center: Complex64,
}

impl<S: TensorField> TensorField for Shifted<S> {
    fn tensor_at(&self, z: Complex64) -> SymTensor {
        self.sigma.tensor_at(z - self.center)
    }
}

/// Closed-form unit-disc operator for isotropic layered conductivities.
pub fn disc_oracle(model: &ConductivityModel, modes: usize) -> Option<DtnMatrix> {
    match model {
        ConductivityModel::Identity => Some(disc_dtn_isotropic(1.0, modes)),
        ConductivityModel::Constant { tensor, radius } if tensor.s12 == 0.0 && tensor.s11 == tensor.s22 => {
            let a = tensor.s11;
            if *radius >= 1.0 {
                return Some(disc_dtn_isotropic(a, modes));
            }
            let m = (a - 1.0) / (a + 1.0);
            Some(DtnMatrix::diagonal(modes, |n| {
                let t = m * radius.powi(2 * n.unsigned_abs() as i32);
                n.abs() as f64 * (1.0 + t) / (1.0 - t)
            }))
        }
        _ => None,
    }
}

/// `c` with `F(z) = z + c/z` outside the unit disc, for constant tensors.
pub fn exterior_coefficient(model: &ConductivityModel) -> Option<Complex64> {
    match model {
        ConductivityModel::Identity => Some(Complex64::new(0.0, 0.0)),
        ConductivityModel::Constant { tensor, radius } => {
            let r = radius.min(1.0);
            mu1_of(tensor).ok().map(|m| m * r * r)
        }
        _ => None,
    }
}

fn load_sigma(cfg: &RunConfig) -> anyhow::Result<ConductivityModel> {
    parse_conductivity(&cfg.sigma, &cfg.base).with_context(|| format!("loading conductivity `{}`", cfg.sigma))
}

fn disc_mesh(h: f64) -> anyhow::Result<TriangularMesh> {
    TriangularMesh::disc(h).with_context(|| format!("meshing the unit disc at h = {h}"))
}

fn symmetry_checks(s: &mut Stage, d: &DtnMatrix) {
    s.at_most("dtn-hermitian", d.hermitian_defect(), SYMMETRY_TOL);
    s.at_most("dtn-pairing", d.pairing_defect(), SYMMETRY_TOL);
    s.at_most("dtn-constant-leak", d.constant_mode_leak(), 0.0);
}

fn write_dtn(s: &mut Stage, path: &Path, d: &DtnMatrix, cfg: &RunConfig, h: f64) -> anyhow::Result<()> {
    let header = DtnHeader {
        sigma: cfg.sigma.clone(),
        modes: d.modes(),
        h,
    };
    write_dtn_csv(path, d, &header)?;
    let (back, head) = read_dtn_csv(path)?;
    let same = back.matrix() == d.matrix() && head == header;
    s.at_most("dtn-csv-round-trip", if same { 0.0 } else { 1.0 }, 0.0);
    s.note("file", path.file_name().map(|f| f.to_string_lossy()).unwrap_or_default());
    Ok(())
}

/// Runs `command` and writes its files under `dir`. The geometry-specific
/// commands expect `cfg.geometry` to match, as [`execute`] arranges.
pub fn run(command: Command, cfg: &RunConfig, dir: &Path) -> anyhow::Result<RunReport> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut report = RunReport::new(command.name(), &cfg.scenario);
    match command {
        Command::ForwardDtn => match cfg.geometry {
            Geometry::Disc => forward_disc(cfg, dir, &mut report),
            Geometry::HalfPlane => forward_halfplane(cfg, dir, &mut report),
            Geometry::Exterior => forward_exterior(cfg, dir, &mut report),
            Geometry::Partial => forward_partial(cfg, dir, &mut report),
        },
        Command::PartialData => forward_partial(cfg, dir, &mut report),
        Command::HalfPlane => forward_halfplane(cfg, dir, &mut report),
        Command::Exterior => forward_exterior(cfg, dir, &mut report),
        Command::Isotropize => isotropize(cfg, dir, &mut report),
        Command::CgoRecover => cgo_recover(cfg, dir, &mut report),
        Command::Verify => verify(cfg, dir, &mut report),
    }
    Ok(report)
}

fn forward_disc(cfg: &RunConfig, dir: &Path, report: &mut RunReport) {
    let Some(sigma) = report.stage("load", |s| {
        let m = load_sigma(cfg)?;
        s.note("sigma", &cfg.sigma);
        Ok(m)
    }) else {
        return report.skipped("assemble", "dtn-assembled", "conductivity unavailable");
    };
    let Some(d) = report.stage("assemble", |s| {
        let mesh = disc_mesh(cfg.mesh_h)?;
        s.note("vertices", mesh.vertices().len());
        let d = dtn_matrix(&sigma, &mesh, cfg.modes)?;
        symmetry_checks(s, &d);
        Ok(d)
    }) else {
        return;
    };
    if let Some(oracle) = disc_oracle(&sigma, cfg.modes) {
        report.stage("oracle", |s| {
            s.at_most("dtn-oracle", d.relative_defect(&oracle), cfg.check_tol);
            Ok(())
        });
    }
    report.stage("write", |s| write_dtn(s, &dir.join("dtn.csv"), &d, cfg, cfg.mesh_h));
}

fn forward_halfplane(cfg: &RunConfig, dir: &Path, report: &mut RunReport) {
    let Some(sigma) = report.stage("load", |s| {
        let m = load_sigma(cfg)?;
        s.note("sigma", &cfg.sigma);
        s.note("center", cfg.center());
        Ok(Shifted {
            sigma: m,
            center: cfg.center(),
        })
    }) else {
        return report.skipped("assemble", "dtn-assembled", "conductivity unavailable");
    };
    let Some(d) = report.stage("assemble", |s| {
        let mesh = halfplane_mesh(cfg.mesh_h, cfg.cut)?;
        s.note("vertices", mesh.vertices().len());
        let data = halfplane_dtn_fem(&sigma, &mesh)?;
        let d = halfplane_to_disc_dtn(&data, cfg.modes_out)?;
        symmetry_checks(s, &d);
        Ok(d)
    }) else {
        return;
    };
    report.stage("oracle", |s| {
        let mesh = disc_mesh(cfg.mesh_h)?;
        let pulled = PushForward::new(&sigma, ConformalChart::HalfPlane);
        let direct = dtn_matrix(&pulled, &mesh, cfg.modes_out)?;
        s.at_most("halfplane-vs-disc", d.relative_defect(&direct), cfg.check_tol);
        if matches!(sigma.sigma, ConductivityModel::Identity) {
            s.at_most("dtn-oracle", d.relative_defect(&disc_dtn_isotropic(1.0, cfg.modes_out)), cfg.check_tol);
        }
        Ok(())
    });
    report.stage("write", |s| write_dtn(s, &dir.join("dtn.csv"), &d, cfg, cfg.mesh_h));
}

fn forward_exterior(cfg: &RunConfig, dir: &Path, report: &mut RunReport) {
    let Some(sigma) = report.stage("load", |s| {
        let m = load_sigma(cfg)?;
        s.note("sigma", &cfg.sigma);
        s.note("center", cfg.center());
        Ok(Shifted {
            sigma: m,
            center: cfg.center(),
        })
    }) else {
        return report.skipped("assemble", "dtn-assembled", "conductivity unavailable");
    };
    let Some((d, mesh)) = report.stage("assemble", |s| {
        let mesh = disc_mesh(cfg.mesh_h)?;
        let d = exterior_dtn(&sigma, &mesh, cfg.modes)?;
        symmetry_checks(s, &d);
        Ok((d, mesh))
    }) else {
        return;
    };
    if matches!(sigma.sigma, ConductivityModel::Identity) {
        report.stage("oracle", |s| {
            s.at_most("dtn-oracle", d.relative_defect(&disc_dtn_isotropic(1.0, cfg.modes)), cfg.check_tol);
            let n = cfg.modes_out;
            let sol = exterior_to_disc_solve(&sigma, &BoundaryTrace::cos(n, n), &mesh)?;
            let mut worst: f64 = 0.0;
            for z in [Complex64::new(1.3, 0.4), Complex64::from_polar(2.0, 2.0), Complex64::from_polar(3.5, -1.0)] {
                let want = (n as f64 * z.arg()).cos() * z.norm().powi(-(n as i32));
                worst = worst.max((sol.value_at(z)? - want).abs());
            }
            s.at_most("exterior-decay", worst, cfg.check_tol);
            Ok(())
        });
    }
    report.stage("write", |s| write_dtn(s, &dir.join("dtn.csv"), &d, cfg, cfg.mesh_h));
}

fn forward_partial(cfg: &RunConfig, dir: &Path, report: &mut RunReport) {
    let Some(sigma) = report.stage("load", |s| {
        let m = load_sigma(cfg)?;
        s.note("sigma", &cfg.sigma);
        Ok(m)
    }) else {
        return report.skipped("measure", "partial-measured", "conductivity unavailable");
    };
    let Some(set) = report.stage("measure", |s| {
        let mesh = TriangularMesh::upper_half(cfg.mesh_h)?;
        s.note("vertices", mesh.vertices().len());
        let data = partial_data(&sigma, &mesh, cfg.modes)?;
        let set = cauchy_data_from_partial(&data)?;
        s.residual("cauchy-symmetry", set.symmetry_defect());
        let path = dir.join("cauchy.csv");
        write_cauchy_csv(&path, &set)?;
        let back = read_cauchy_csv(&path)?;
        s.at_most("cauchy-csv-round-trip", if back == set { 0.0 } else { 1.0 }, 0.0);
        Ok(set)
    }) else {
        return;
    };
    let Some(d) = report.stage("fit", |s| {
        let d = set.fit_dtn(cfg.modes)?.truncate(cfg.modes_out)?;
        s.at_most("dtn-hermitian", d.hermitian_defect(), cfg.check_tol);
        Ok(d)
    }) else {
        return;
    };
    report.stage("oracle", |s| {
        let full = dtn_matrix(&reflect_conductivity(&sigma), &disc_mesh(cfg.mesh_h)?, cfg.modes_out)?;
        s.at_most("partial-vs-full-disc", d.relative_defect(&full), cfg.check_tol);
        Ok(())
    });
    report.stage("write", |s| write_dtn(s, &dir.join("dtn.csv"), &d, cfg, cfg.mesh_h));
}

fn isotropize(cfg: &RunConfig, dir: &Path, report: &mut RunReport) {
    let Some(sigma) = report.stage("load", |s| {
        let m = load_sigma(cfg)?;
        s.note("sigma", &cfg.sigma);
        Ok(m)
    }) else {
        return report.skipped("solve", "isotropy", "conductivity unavailable");
    };
    let Some(iso) = report.stage("solve", |s| {
        let iso = isotropize_model(&sigma, cfg.grid()?, cfg.tol)?;
        s.residual("beltrami", iso.solution.residual);
        s.residual("kappa", iso.solution.kappa);
        s.note("iterations", iso.solution.iterations);
        s.note("far-coefficient", iso.map().far_coefficient());
        s.at_most("isotropy", iso.isotropy_defect, ISOTROPY_TOL);
        s.at_most("det-invariance", iso.det_defect, DET_TOL);
        Ok(iso)
    }) else {
        return;
    };
    report.stage("write", |s| {
        let map = FieldFile::from_complex(&iso.map().forward()).with_meta("kind", "principal map");
        let tilde = FieldFile::new(*iso.sigma_tilde.grid())
            .with_component("sigma", iso.sigma_tilde.values().to_vec())?
            .with_meta("kind", "isotropic conductivity");
        let mut same = true;
        for (name, file) in [("map.bin", &map), ("sigma_tilde.bin", &tilde)] {
            let path = dir.join(name);
            file.write(&path)?;
            same &= FieldFile::read(&path)? == *file;
        }
        s.at_most("field-round-trip", if same { 0.0 } else { 1.0 }, 0.0);
        Ok(())
    });
    report.stage("invariance", |s| {
        let lambda = dtn_matrix(&sigma, &disc_mesh(cfg.mesh_h)?, cfg.modes)?;
        let (image, back) = image_domain(|t| iso.map().apply(Complex64::from_polar(1.0, t)), cfg.mesh_h)?;
        let direct = dtn_matrix(&iso.pushed(&sigma), &image, cfg.modes_out)?;
        let moved = transform_dtn(&lambda, &back, cfg.modes_out)?;
        s.at_most("dtn-invariance", moved.relative_defect(&direct), cfg.check_tol);
        Ok(())
    });
}

fn cgo_recover(cfg: &RunConfig, dir: &Path, report: &mut RunReport) {
    let Some((sigma, lambda)) = report.stage("measure", |s| {
        let m = load_sigma(cfg)?;
        s.note("sigma", &cfg.sigma);
        let lambda = match disc_oracle(&m, cfg.modes) {
            Some(d) => {
                s.note("lambda", "closed form");
                d
            }
            None => {
                s.note("lambda", format!("finite elements, h = {}", cfg.mesh_h));
                dtn_matrix(&m, &disc_mesh(cfg.mesh_h)?, cfg.modes)?
            }
        };
        Ok((m, lambda))
    }) else {
        return report.skipped("recover", "recovered", "conductivity unavailable");
    };
    let hilbert = hilbert_matrix(&lambda);
    let ks = cfg.ks();
    let truth = exterior_coefficient(&sigma);
    report.stage("recover", |s| {
        let points: Vec<Complex64> = (0..RECOVERY_POINTS)
            .map(|j| Complex64::from_polar(cfg.radius, TAU * j as f64 / RECOVERY_POINTS as f64))
            .collect();
        let rec = recover_f_exterior(&hilbert, &points, &ks, cfg.terms)?;
        for (k, r) in ks.iter().zip(&rec.residuals) {
            s.residual(&format!("boundary-fit k={}", k.norm()), *r);
        }
        s.at_most("branch-continuity", rec.jumps.len() as f64, 0.0);
        let f = |z: Complex64| truth.map(|c| z + c / z);
        let mut rows = Vec::new();
        for (i, k) in ks.iter().enumerate() {
            for (j, z) in points.iter().enumerate() {
                let estimate = rec.estimates[i][j];
                rows.push(RecoveryRow {
                    z: *z,
                    k: *k,
                    estimate,
                    error: f(*z).map(|t| (estimate - t).norm()),
                });
            }
        }
        if let Some(c) = truth {
            let errs = rec.errors(|z| z + c / z);
            for (k, e) in ks.iter().zip(&errs) {
                s.residual(&format!("error k={}", k.norm()), *e);
            }
            let (first, last) = (errs[0], errs[errs.len() - 1]);
            s.at_most("error-decreasing-in-k", last, first);
            if matches!(sigma, ConductivityModel::Identity) {
                s.at_most("identity-exact", errs.iter().copied().fold(0.0, f64::max), EXACT_TOL);
            }
        }
        let path = dir.join("recovery.csv");
        write_recovery_csv(&path, &rows)?;
        let back = read_recovery_csv(&path)?;
        s.at_most("recovery-csv-round-trip", if back == rows { 0.0 } else { 1.0 }, 0.0);
        Ok(())
    });
    report.stage("loop", |s| {
        let k = *ks.last().expect("validated k schedule");
        let iso = isotropize_model(&sigma, cfg.grid()?, cfg.tol)?;
        let tilde = IsotropicImage {
            sigma: &sigma,
            map: iso.map(),
        };
        let g = solve_g_from_boundary_data(&hilbert, k, cfg.terms)?;
        let failure = RefCell::new(None);
        let curve = |t: f64| match exterior_log_estimate(&g, Complex64::from_polar(cfg.radius, t)) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                Complex64::new(f64::NAN, f64::NAN)
            }
        };
        let rep = build_representative(&tilde, curve, cfg.radius);
        if let Some(e) = failure.into_inner() {
            return Err(e).context("reading the recovered boundary curve");
        }
        let rep = rep?;
        let big = TriangularMesh::disc(cfg.mesh_h / cfg.radius)?.mapped(|z| z * cfg.radius)?;
        let from_rep = dtn_matrix(&rep, &big, cfg.modes_out)?;
        let direct = dtn_matrix(&sigma, &big, cfg.modes_out)?;
        s.note("k", k);
        s.at_most("full-loop", from_rep.relative_defect(&direct), cfg.loop_tol);
        Ok(())
    });
}

/// `A B + I` on `0 < |n| <= modes`, relative.
fn involution_defect(a: &DtnMatrix, b: &DtnMatrix, modes: usize) -> f64 {
    let m = a.modes() as i64;
    let idx: Vec<i64> = (-(modes as i64)..=modes as i64).filter(|n| *n != 0).collect();
    let mut num = 0.0;
    for r in &idx {
        for c in &idx {
            let v: Complex64 = (-m..=m).map(|j| a.get(*r, j) * b.get(j, *c)).sum();
            let want = if r == c { -1.0 } else { 0.0 };
            num += (v - want).norm_sqr();
        }
    }
    (num / idx.len() as f64).sqrt()
}

fn verify(cfg: &RunConfig, dir: &Path, report: &mut RunReport) {
    let sigma = report.stage("sigma-admissible", |s| {
        let m = match load_sigma(cfg) {
            Ok(m) => m,
            Err(e) => {
                s.fail("sigma-admissible");
                return Err(e);
            }
        };
        let grid = cfg.grid()?;
        let mut worst = f64::INFINITY;
        let mut finite = true;
        for z in grid.points() {
            let t = m.tensor_at(z);
            finite &= [t.s11, t.s12, t.s22].iter().all(|v| v.is_finite());
            worst = worst.min(t.eigenvalues().0);
        }
        s.residual("min-eigenvalue", worst);
        s.at_most("sigma-finite", if finite { 0.0 } else { 1.0 }, 0.0);
        s.at_most("sigma-positive", if worst > 0.0 { 0.0 } else { 1.0 }, 0.0);
        Ok(m)
    });

    report.stage("coefficient-algebra", |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (mut chain, mut trip): (f64, f64) = (0.0, 0.0);
        for _ in 0..1000 {
            let (l1, l2, a): (f64, f64, f64) = (
                rng.random_range(0.1..=10.0),
                rng.random_range(0.1..=10.0),
                rng.random_range(0.0..TAU),
            );
            let (c, si) = (a.cos(), a.sin());
            let t = SymTensor::new(l1 * c * c + l2 * si * si, (l1 - l2) * c * si, l1 * si * si + l2 * c * c);
            let (n1, n2) = sigma_to_nu_of(&t)?;
            let m1 = mu1_of(&t)?;
            let m2 = calderon_core::field_algebra::mu2_of(&t)?;
            let (k1, k2) = nu_from_mu_of(m1, m2)?;
            chain = chain.max((k1 - n1).norm()).max((k2 - n2).abs());
            let (b1, b2) = mu_from_nu_of(n1, n2)?;
            trip = trip
                .max(nu_to_sigma_of(n1, n2)?.max_abs_diff(&t) / t.trace())
                .max((b1 - m1).norm())
                .max((b2 - m2).abs());
        }
        s.at_most("nu-chain", chain, 1e-12);
        s.at_most("round-trips", trip, ALGEBRA_TOL);
        Ok(())
    });

    report.stage("extension-identity", |s| {
        let ab = beurling_ahlfors_extension(&CircleHomeomorphism::identity())?;
        let worst = (0..200)
            .map(|j| {
                let z = Complex64::from_polar(0.99 * (j % 10) as f64 / 10.0, TAU * (j / 10) as f64 / 20.0);
                (ab.apply(z) - z).norm()
            })
            .fold(0.0, f64::max);
        s.at_most("extension-identity", worst, ALGEBRA_TOL);
        Ok(())
    });

    report.stage("cgo-exponential", |s| {
        let grid = cfg.grid()?;
        let mut worst: f64 = 0.0;
        for k in cfg.ks().into_iter().take(3) {
            let w = solve_cgo(&Field::constant(grid, 0.0), k, SolverOptions::default())?;
            for z in [Complex64::new(0.3, -0.4), Complex64::new(-1.0, 0.5)] {
                let want = (Complex64::i() * k * z).exp();
                worst = worst.max((w.value_at(z)? - want).norm() / want.norm());
            }
        }
        s.at_most("cgo-exponential", worst, 1e-12);
        Ok(())
    });

    let Some(sigma) = sigma else {
        for (name, id) in [
            ("dtn", "dtn-hermitian"),
            ("diffeomorphism-invariance", "diffeomorphism-invariance"),
            ("isotropization", "isotropy"),
            ("hilbert-involution", "hilbert-involution"),
        ] {
            report.skipped(name, id, "conductivity unavailable");
        }
        return;
    };
    let mesh = report.stage("dtn", |s| {
        let mesh = disc_mesh(cfg.mesh_h)?;
        let d = dtn_matrix(&sigma, &mesh, cfg.modes_out)?;
        symmetry_checks(s, &d);
        let identity = dtn_matrix(&ConductivityModel::Identity, &mesh, cfg.modes_out)?;
        s.at_most("dtn-identity-spectrum", identity.relative_defect(&disc_dtn_isotropic(1.0, cfg.modes_out)), cfg.check_tol);
        write_dtn(s, &dir.join("dtn.csv"), &d, cfg, cfg.mesh_h)?;
        Ok((mesh, d))
    });
    let Some((mesh, lambda)) = mesh else {
        for (name, id) in [
            ("diffeomorphism-invariance", "diffeomorphism-invariance"),
            ("isotropization", "isotropy"),
            ("hilbert-involution", "hilbert-involution"),
        ] {
            report.skipped(name, id, "no forward operator");
        }
        return;
    };
    report.stage("diffeomorphism-invariance", |s| {
        let pushed = PushForward::new(&sigma, RadialShear { beta: 1.0 });
        let d = dtn_matrix(&pushed, &mesh, cfg.modes_out)?;
        s.at_most("diffeomorphism-invariance", d.relative_defect(&lambda), cfg.check_tol);
        Ok(())
    });
    report.stage("isotropization", |s| {
        let iso = isotropize_model(&sigma, cfg.grid()?, cfg.tol)?;
        s.residual("beltrami", iso.solution.residual);
        s.at_most("isotropy", iso.isotropy_defect, ISOTROPY_TOL);
        s.at_most("det-invariance", iso.det_defect, DET_TOL);
        Ok(())
    });
    report.stage("hilbert-involution", |s| {
        let h = hilbert_matrix(&dtn_matrix(&sigma, &mesh, cfg.modes)?);
        let hh = hilbert_matrix(&dtn_matrix(&HatSigma(&sigma), &mesh, cfg.modes)?);
        s.at_most("hilbert-involution", involution_defect(&hh, &h, cfg.modes_out), cfg.check_tol);
        Ok(())
    });
}

/// Output directory of one command: `<root>/<scenario>/<command>`.
pub fn output_dir(cfg: &RunConfig, command: Command) -> PathBuf {
    cfg.out_root().join(&cfg.scenario).join(command.name())
}

/// Validates, runs and writes `report.txt`.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<RunReport, Failure> {
    let mut cfg = cfg.clone();
    match command {
        Command::PartialData => cfg.geometry = Geometry::Partial,
        Command::HalfPlane => cfg.geometry = Geometry::HalfPlane,
        Command::Exterior => cfg.geometry = Geometry::Exterior,
        _ => {}
    }
    let cfg = &cfg;
    let mut problems = cfg.validate();
    if command == Command::CgoRecover && cfg.geometry != Geometry::Disc {
        problems.push(format!("cgo-recover works on the unit disc, got geometry {}", cfg.geometry.name()));
    }
    if !problems.is_empty() {
        return Err(Failure::Config(problems));
    }
    let dir = output_dir(cfg, command);
    let report = run(command, cfg, &dir).map_err(Failure::Runtime)?;
    let path = dir.join("report.txt");
    fs::write(&path, report.to_text())
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Runtime)?;
    Ok(report)
}

#[derive(Debug)]
pub enum Failure {
    Config(Vec<String>),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(list) => {
                writeln!(f, "invalid configuration:")?;
                for p in list {
                    writeln!(f, "  {p}")?;
                }
                Ok(())
            }
            Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layered_oracle_limits() {
        let whole = ConductivityModel::Constant {
            tensor: SymTensor::isotropic(2.0),
            radius: 1.0,
        };
        assert_eq!(disc_oracle(&whole, 3).unwrap().matrix(), disc_dtn_isotropic(2.0, 3).matrix());
        let tiny = ConductivityModel::Constant {
            tensor: SymTensor::isotropic(2.0),
            radius: 1e-6,
        };
        assert!(disc_oracle(&tiny, 3).unwrap().relative_defect(&disc_dtn_isotropic(1.0, 3)) < 1e-10);
        let aniso = ConductivityModel::constant_on_unit_disc(SymTensor::new(4.0, 0.0, 1.0));
        assert!(disc_oracle(&aniso, 3).is_none());
    }

    #[test]
    fn exterior_coefficient_of_diag_four_one() {
        let m = ConductivityModel::constant_on_unit_disc(SymTensor::new(4.0, 0.0, 1.0));
        let c = exterior_coefficient(&m).unwrap();
        assert!((c - Complex64::new(-1.0 / 3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn shifted_moves_support() {
        let s = Shifted {
            sigma: ConductivityModel::constant_on_unit_disc(SymTensor::isotropic(3.0)),
            center: Complex64::new(2.5, 0.0),
        };
        assert_eq!(s.tensor_at(Complex64::new(2.5, 0.5)), SymTensor::isotropic(3.0));
        assert_eq!(s.tensor_at(Complex64::new(0.0, 0.0)), SymTensor::IDENTITY);
    }
}
