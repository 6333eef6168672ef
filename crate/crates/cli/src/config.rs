//! Line-oriented `key = value` run configuration.
//!
//! `#` starts a comment. `include = PATH` splices another file in place,
//! relative to the including file; later keys override earlier ones.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use calderon_core::dtn::TriangularMesh;
use calderon_core::io::parse_conductivity;
use calderon_core::GridSpec;
use num_complex::Complex64;

pub const OUT_ENV: &str = "CALDERON_OUT";
pub const DEFAULT_OUT: &str = "calderon-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Disc,
    HalfPlane,
    Exterior,
    Partial,
}

impl Geometry {
    pub fn name(self) -> &'static str {
        match self {
            Geometry::Disc => "disc",
            Geometry::HalfPlane => "halfplane",
            Geometry::Exterior => "exterior",
            Geometry::Partial => "partial",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "disc" => Geometry::Disc,
            "halfplane" => Geometry::HalfPlane,
            "exterior" => Geometry::Exterior,
            "partial" => Geometry::Partial,
            _ => return None,
        })
    }

    /// Where a disc-supported conductivity is placed by default.
    pub fn default_center(self) -> Complex64 {
        match self {
            Geometry::HalfPlane => Complex64::new(0.0, -1.5),
            Geometry::Exterior => Complex64::new(2.5, 0.0),
            Geometry::Disc | Geometry::Partial => Complex64::new(0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub geometry: Geometry,
    pub sigma: String,
    pub center: Option<Complex64>,
    pub grid_half_width: f64,
    pub grid_n: usize,
    pub mesh_h: f64,
    /// Radius of the hole around the image of infinity in the half-plane mesh.
    pub cut: f64,
    pub modes: usize,
    /// Modes of the compared operators in loops and partial-data fits.
    pub modes_out: usize,
    pub kschedule: Vec<f64>,
    /// Angle of the ray the k schedule runs along.
    pub kray: f64,
    pub terms: usize,
    pub radius: f64,
    pub tol: f64,
    pub check_tol: f64,
    pub loop_tol: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Directory relative paths in `sigma` are resolved against. Not serialized.
    pub base: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: "run".into(),
            geometry: Geometry::Disc,
            sigma: "identity".into(),
            center: None,
            grid_half_width: 2.0,
            grid_n: 256,
            mesh_h: 0.02,
            cut: 0.02,
            modes: 16,
            modes_out: 6,
            kschedule: vec![1.0, 2.0, 4.0, 8.0],
            kray: 0.0,
            terms: 32,
            radius: 1.5,
            tol: 1e-10,
            check_tol: 0.03,
            loop_tol: 0.05,
            seed: 0,
            out: None,
            base: PathBuf::from("."),
        }
    }
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn parse_kschedule(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|w| w.trim().parse::<f64>().map_err(|e| format!("k schedule entry `{}`: {e}", w.trim())))
        .collect()
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let w: Vec<&str> = s.split_whitespace().collect();
    match w.as_slice() {
        [re, im] => Ok(Complex64::new(
            re.parse().map_err(|e| format!("`{re}`: {e}"))?,
            im.parse().map_err(|e| format!("`{im}`: {e}"))?,
        )),
        _ => Err(format!("expected `re im`, got `{s}`")),
    }
}

impl RunConfig {
    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("`{v}`: {e}"))
        }
        match key {
            "scenario" => self.scenario = value.to_string(),
            "geometry" => {
                self.geometry =
                    Geometry::parse(value).ok_or_else(|| format!("unknown geometry `{value}`"))?
            }
            "sigma" => self.sigma = value.to_string(),
            "center" => self.center = Some(parse_complex(value)?),
            "grid_half_width" => self.grid_half_width = num(value)?,
            "grid_n" => self.grid_n = num(value)?,
            "mesh_h" => self.mesh_h = num(value)?,
            "cut" => self.cut = num(value)?,
            "modes" => self.modes = num(value)?,
            "modes_out" => self.modes_out = num(value)?,
            "kschedule" => self.kschedule = parse_kschedule(value)?,
            "kray" => self.kray = num(value)?,
            "terms" => self.terms = num(value)?,
            "radius" => self.radius = num(value)?,
            "tol" => self.tol = num(value)?,
            "check_tol" => self.check_tol = num(value)?,
            "loop_tol" => self.loop_tol = num(value)?,
            "seed" => self.seed = num(value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Reads a config file with its includes. All line errors are collected.
    pub fn load(path: &Path) -> Result<Self, Vec<String>> {
        let mut cfg = RunConfig {
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            ..RunConfig::default()
        };
        let mut errors = Vec::new();
        cfg.apply_file(path, &mut Vec::new(), &mut errors);
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(errors)
        }
    }

    fn apply_file(&mut self, path: &Path, stack: &mut Vec<PathBuf>, errors: &mut Vec<String>) {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return errors.push(format!("{}: {e}", path.display())),
        };
        let canonical = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        if stack.contains(&canonical) {
            return errors.push(format!("{}: include cycle", path.display()));
        }
        stack.push(canonical);
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |m: String| format!("{}:{}: {m}", path.display(), i + 1);
            let Some((key, value)) = line.split_once('=') else {
                errors.push(at(format!("expected `key = value`, got `{line}`")));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "include" => self.apply_file(&dir.join(value), stack, errors),
                "sigma" => {
                    self.sigma = value.to_string();
                    self.base = dir.clone();
                }
                _ => {
                    if let Err(m) = self.set(key, value) {
                        errors.push(at(m));
                    }
                }
            }
        }
        stack.pop();
    }

    /// Parses config text whose relative paths resolve against `base`.
    pub fn parse_str(text: &str, base: &Path) -> Result<Self, Vec<String>> {
        let mut cfg = RunConfig {
            base: base.to_path_buf(),
            ..RunConfig::default()
        };
        let mut errors = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some(("include", _)) => errors.push(format!("line {}: include needs a file context", i + 1)),
                Some((k, v)) => {
                    if let Err(m) = cfg.set(k.trim(), v.trim()) {
                        errors.push(format!("line {}: {m}", i + 1));
                    }
                }
                None => errors.push(format!("line {}: expected `key = value`", i + 1)),
            }
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(errors)
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("scenario", self.scenario.clone());
        kv("geometry", self.geometry.name().into());
        kv("sigma", self.sigma.clone());
        if let Some(c) = self.center {
            kv("center", format!("{} {}", c.re, c.im));
        }
        kv("grid_half_width", self.grid_half_width.to_string());
        kv("grid_n", self.grid_n.to_string());
        kv("mesh_h", self.mesh_h.to_string());
        kv("cut", self.cut.to_string());
        kv("modes", self.modes.to_string());
        kv("modes_out", self.modes_out.to_string());
        kv("kschedule", list(&self.kschedule));
        kv("kray", self.kray.to_string());
        kv("terms", self.terms.to_string());
        kv("radius", self.radius.to_string());
        kv("tol", self.tol.to_string());
        kv("check_tol", self.check_tol.to_string());
        kv("loop_tol", self.loop_tol.to_string());
        kv("seed", self.seed.to_string());
        if let Some(o) = &self.out {
            kv("out", o.display().to_string());
        }
        s
    }

    pub fn center(&self) -> Complex64 {
        self.center.unwrap_or_else(|| self.geometry.default_center())
    }

    pub fn ks(&self) -> Vec<Complex64> {
        self.kschedule
            .iter()
            .map(|k| Complex64::from_polar(*k, self.kray))
            .collect()
    }

    pub fn grid(&self) -> calderon_core::Result<GridSpec> {
        GridSpec::new(self.grid_half_width, self.grid_n)
    }

    /// Output root: the config value, then the environment, then a default.
    pub fn out_root(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// Every violated precondition. Conductivity files are only checked for
    /// existence here; their contents are checked when a command loads them.
    pub fn validate(&self) -> Vec<String> {
        let mut e = Vec::new();
        if self.scenario.is_empty() || self.scenario.contains(['/', '\\']) || self.scenario.starts_with('.') {
            e.push(format!("scenario `{}` is not a plain directory name", self.scenario));
        }
        let words: Vec<&str> = self.sigma.split_whitespace().collect();
        if let ["file", p] = words.as_slice() {
            let path = self.base.join(p);
            if !path.exists() {
                e.push(format!("conductivity file not found: {}", path.display()));
            }
        } else if let Err(err) = parse_conductivity(&self.sigma, &self.base) {
            e.push(format!("sigma: {err}"));
        }
        if let Err(err) = self.grid() {
            e.push(format!("grid: {err}"));
        }
        let positive = |name: &str, v: f64, e: &mut Vec<String>| {
            if !(v > 0.0 && v.is_finite()) {
                e.push(format!("{name} must be positive and finite, got {v}"));
            }
        };
        positive("tol", self.tol, &mut e);
        positive("check_tol", self.check_tol, &mut e);
        positive("loop_tol", self.loop_tol, &mut e);
        positive("cut", self.cut, &mut e);
        if !(0.002..=0.25).contains(&self.mesh_h) {
            e.push(format!("mesh_h must lie in [0.002, 0.25], got {}", self.mesh_h));
        } else if let Ok(mesh) = TriangularMesh::disc(self.mesh_h) {
            let ring = mesh.boundary().len();
            if 4 * self.modes + 1 > ring {
                e.push(format!(
                    "modes = {} needs at least {} boundary vertices, mesh_h = {} gives {ring}",
                    self.modes,
                    4 * self.modes + 1,
                    self.mesh_h
                ));
            }
        }
        if self.modes == 0 {
            e.push("modes must be at least 1".into());
        }
        if self.modes_out == 0 || self.modes_out > self.modes {
            e.push(format!("modes_out must lie in 1..={}, got {}", self.modes, self.modes_out));
        }
        if self.terms == 0 {
            e.push("terms must be at least 1".into());
        }
        if self.kschedule.is_empty() {
            e.push("kschedule is empty".into());
        } else if self.kschedule.iter().any(|k| !(*k > 0.0 && k.is_finite()))
            || self.kschedule.windows(2).any(|w| w[1] <= w[0])
        {
            e.push(format!("kschedule must be positive and increasing, got {}", list(&self.kschedule)));
        }
        if !self.kray.is_finite() {
            e.push(format!("kray must be finite, got {}", self.kray));
        }
        if !(self.radius > 1.0 && self.radius.is_finite()) {
            e.push(format!("radius must exceed 1, got {}", self.radius));
        }
        if let Some(c) = self.center {
            if !(c.re.is_finite() && c.im.is_finite()) {
                e.push(format!("center must be finite, got {c}"));
            }
        }
        match self.geometry {
            Geometry::HalfPlane if self.center().im >= 0.0 => {
                e.push("halfplane: center must lie in the lower half plane".into())
            }
            Geometry::Exterior if self.center().norm() <= 1.0 => {
                e.push("exterior: center must lie outside the unit disc".into())
            }
            _ => {}
        }
        e
    }
}
