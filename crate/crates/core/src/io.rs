//! File formats: sampled fields as raw little-endian `f64` with a `.meta`
//! sidecar, boundary operators and recovery reports as CSV, and the one-line
//! conductivity spec.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::dtn::{BoundaryTrace, CauchyDataSet, DtnMatrix};
use crate::error::{Error, Result};
use crate::field_algebra::{ConductivityModel, ConductivityTensor, SymTensor};
use crate::grid::{ComplexField, Field, GridSpec};

/// Several real components on one grid, stored component after component,
/// each in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub grid: GridSpec,
    pub components: Vec<String>,
    pub data: Vec<Vec<f64>>,
    /// Extra sidecar entries, e.g. `k`.
    pub meta: BTreeMap<String, String>,
}

/// `<path>.meta`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn parse_error(source: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

impl FieldFile {
    pub fn new(grid: GridSpec) -> Self {
        FieldFile {
            grid,
            components: Vec::new(),
            data: Vec::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_component(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.grid.len() {
            return Err(Error::ShapeMismatch {
                expected: self.grid.len(),
                got: values.len(),
            });
        }
        self.components.push(name.to_string());
        self.data.push(values);
        Ok(self)
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn component(&self, name: &str) -> Option<&[f64]> {
        self.components
            .iter()
            .position(|c| c == name)
            .map(|i| self.data[i].as_slice())
    }

    fn require(&self, name: &str) -> Result<&[f64]> {
        self.component(name).ok_or_else(|| Error::Parse {
            source_name: "field file".into(),
            line: 0,
            message: format!("missing component `{name}`"),
        })
    }

    pub fn from_complex(field: &ComplexField) -> Self {
        let v = field.values();
        FieldFile::new(*field.grid())
            .with_component("re", v.iter().map(|z| z.re).collect())
            .and_then(|f| f.with_component("im", v.iter().map(|z| z.im).collect()))
            .expect("components sized from the grid")
    }

    pub fn to_complex(&self) -> Result<ComplexField> {
        let (re, im) = (self.require("re")?, self.require("im")?);
        Field::from_vec(
            self.grid,
            re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect(),
        )
    }

    /// Components `s11, s12, s22` and `mask` (1 inside, 0 outside).
    pub fn from_conductivity(sigma: &ConductivityTensor) -> Self {
        let [a, b, c] = sigma.components();
        FieldFile::new(*sigma.grid())
            .with_component("s11", a.values().to_vec())
            .and_then(|f| f.with_component("s12", b.values().to_vec()))
            .and_then(|f| f.with_component("s22", c.values().to_vec()))
            .and_then(|f| {
                f.with_component(
                    "mask",
                    sigma.mask().iter().map(|m| if *m { 1.0 } else { 0.0 }).collect(),
                )
            })
            .expect("components sized from the grid")
    }

    pub fn to_conductivity(&self) -> Result<ConductivityTensor> {
        let mask = match self.component("mask") {
            Some(m) => m.iter().map(|v| *v != 0.0).collect(),
            None => vec![true; self.grid.len()],
        };
        ConductivityTensor::new(
            self.grid,
            self.require("s11")?.to_vec(),
            self.require("s12")?.to_vec(),
            self.require("s22")?.to_vec(),
            mask,
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(8 * self.grid.len() * self.data.len());
        for c in &self.data {
            for v in c {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        write_bytes(path, &bytes)?;
        let mut meta = format!(
            "half_width={}\nn={}\ncomponents={}\n",
            self.grid.half_width(),
            self.grid.n(),
            self.components.join(",")
        );
        for (k, v) in &self.meta {
            meta.push_str(&format!("{k}={v}\n"));
        }
        write_bytes(&meta_path(path), meta.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mpath = meta_path(path);
        let text = read_text(&mpath)?;
        let mut meta = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_error(&mpath, i + 1, "expected key=value"))?;
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |key: &str| {
            meta.remove(key)
                .ok_or_else(|| parse_error(&mpath, 0, format!("missing `{key}`")))
        };
        let half_width: f64 = take("half_width")?
            .parse()
            .map_err(|e| parse_error(&mpath, 0, format!("half_width: {e}")))?;
        let n: usize = take("n")?
            .parse()
            .map_err(|e| parse_error(&mpath, 0, format!("n: {e}")))?;
        let components: Vec<String> = take("components")?
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let grid = GridSpec::new(half_width, n)?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let expected = 8 * grid.len() * components.len();
        if bytes.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: bytes.len(),
            });
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunks of eight")))
            .collect();
        let data = values.chunks(grid.len()).map(<[f64]>::to_vec).collect();
        Ok(FieldFile {
            grid,
            components,
            data,
            meta,
        })
    }
}

/// `# key=value` lines at the top of a CSV file, then the table.
fn split_csv(path: &Path, text: &str) -> Result<(BTreeMap<String, String>, Vec<csv::StringRecord>)> {
    let mut header = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        let (k, v) = rest
            .split_once('=')
            .ok_or_else(|| parse_error(path, i + 1, "expected `# key=value`"))?;
        header.insert(k.trim().to_string(), v.trim().to_string());
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for r in reader.records() {
        rows.push(r.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_error(path, line, e.to_string())
        })?);
    }
    Ok((header, rows))
}

fn field<T: std::str::FromStr>(path: &Path, row: &csv::StringRecord, i: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
    row.get(i)
        .ok_or_else(|| parse_error(path, line, format!("missing column {i}")))?
        .trim()
        .parse()
        .map_err(|e| parse_error(path, line, format!("column {i}: {e}")))
}

fn csv_bytes(comments: &[(&str, String)], head: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (k, v) in comments {
        out.extend_from_slice(format!("# {k}={v}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Parse {
        source_name: "csv writer".into(),
        line: 0,
        message: e.to_string(),
    };
    w.write_record(head).map_err(wrap)?;
    for r in rows {
        w.write_record(&r).map_err(wrap)?;
    }
    w.into_inner().map_err(|e| Error::Parse {
        source_name: "csv writer".into(),
        line: 0,
        message: e.to_string(),
    })
}

/// Provenance recorded in the header of a DtN file.
#[derive(Debug, Clone, PartialEq)]
pub struct DtnHeader {
    /// Conductivity spec the matrix was computed from.
    pub sigma: String,
    pub modes: usize,
    /// Mesh size; zero for closed-form matrices.
    pub h: f64,
}

/// Rows `m,n,re,im` over `|m|, |n| <= N`.
pub fn write_dtn_csv(path: &Path, lambda: &DtnMatrix, header: &DtnHeader) -> Result<()> {
    let m = lambda.modes() as i64;
    let rows = (-m..=m).flat_map(|a| {
        (-m..=m).map(move |b| {
            let v = lambda.get(a, b);
            vec![a.to_string(), b.to_string(), v.re.to_string(), v.im.to_string()]
        })
    });
    let bytes = csv_bytes(
        &[
            ("sigma", header.sigma.clone()),
            ("modes", header.modes.to_string()),
            ("h", header.h.to_string()),
        ],
        &["m", "n", "re", "im"],
        rows,
    )?;
    write_bytes(path, &bytes)
}

pub fn read_dtn_csv(path: &Path) -> Result<(DtnMatrix, DtnHeader)> {
    let (meta, rows) = split_csv(path, &read_text(path)?)?;
    let get = |k: &str| {
        meta.get(k)
            .ok_or_else(|| parse_error(path, 0, format!("missing header `{k}`")))
    };
    let modes: usize = get("modes")?
        .parse()
        .map_err(|e| parse_error(path, 0, format!("modes: {e}")))?;
    let h: f64 = get("h")?
        .parse()
        .map_err(|e| parse_error(path, 0, format!("h: {e}")))?;
    let header = DtnHeader {
        sigma: get("sigma")?.clone(),
        modes,
        h,
    };
    let side = 2 * modes + 1;
    if rows.len() != side * side {
        return Err(Error::ShapeMismatch {
            expected: side * side,
            got: rows.len(),
        });
    }
    let mut out = DtnMatrix::zeros(modes);
    for r in &rows {
        let (a, b): (i64, i64) = (field(path, r, 0)?, field(path, r, 1)?);
        if a.unsigned_abs() as usize > modes || b.unsigned_abs() as usize > modes {
            return Err(parse_error(path, 0, format!("index ({a}, {b}) beyond {modes} modes")));
        }
        out.set(a, b, Complex64::new(field(path, r, 2)?, field(path, r, 3)?));
    }
    Ok((out, header))
}

/// Rows `pair,n,phi_re,phi_im,flux_re,flux_im`.
pub fn write_cauchy_csv(path: &Path, set: &CauchyDataSet) -> Result<()> {
    let modes = set.pairs.first().map(|p| p.0.modes()).unwrap_or(0);
    let m = modes as i64;
    let rows = set.pairs.iter().enumerate().flat_map(|(j, (phi, flux))| {
        (-m..=m).map(move |n| {
            let (a, b) = (phi.get(n), flux.get(n));
            vec![
                j.to_string(),
                n.to_string(),
                a.re.to_string(),
                a.im.to_string(),
                b.re.to_string(),
                b.im.to_string(),
            ]
        })
    });
    let bytes = csv_bytes(
        &[("modes", modes.to_string()), ("pairs", set.pairs.len().to_string())],
        &["pair", "n", "phi_re", "phi_im", "flux_re", "flux_im"],
        rows,
    )?;
    write_bytes(path, &bytes)
}

pub fn read_cauchy_csv(path: &Path) -> Result<CauchyDataSet> {
    let (meta, rows) = split_csv(path, &read_text(path)?)?;
    let num = |k: &str| -> Result<usize> {
        meta.get(k)
            .ok_or_else(|| parse_error(path, 0, format!("missing header `{k}`")))?
            .parse()
            .map_err(|e| parse_error(path, 0, format!("{k}: {e}")))
    };
    let (modes, count) = (num("modes")?, num("pairs")?);
    let side = 2 * modes + 1;
    if rows.len() != side * count {
        return Err(Error::ShapeMismatch {
            expected: side * count,
            got: rows.len(),
        });
    }
    let mut pairs = vec![(BoundaryTrace::zeros(modes), BoundaryTrace::zeros(modes)); count];
    for r in &rows {
        let j: usize = field(path, r, 0)?;
        let n: i64 = field(path, r, 1)?;
        if j >= count || n.unsigned_abs() as usize > modes {
            return Err(parse_error(path, 0, format!("row ({j}, {n}) out of range")));
        }
        pairs[j].0.set(n, Complex64::new(field(path, r, 2)?, field(path, r, 3)?));
        pairs[j].1.set(n, Complex64::new(field(path, r, 4)?, field(path, r, 5)?));
    }
    Ok(CauchyDataSet { pairs })
}

/// One estimate of the recovered map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryRow {
    pub z: Complex64,
    pub k: Complex64,
    pub estimate: Complex64,
    /// Distance to the forward map, when it is known.
    pub error: Option<f64>,
}

pub fn write_recovery_csv(path: &Path, rows: &[RecoveryRow]) -> Result<()> {
    let body = rows.iter().map(|r| {
        vec![
            r.z.re.to_string(),
            r.z.im.to_string(),
            r.k.re.to_string(),
            r.k.im.to_string(),
            r.estimate.re.to_string(),
            r.estimate.im.to_string(),
            r.error.map(|e| e.to_string()).unwrap_or_default(),
        ]
    });
    let bytes = csv_bytes(
        &[],
        &["z_re", "z_im", "k_re", "k_im", "f_re", "f_im", "error"],
        body,
    )?;
    write_bytes(path, &bytes)
}

pub fn read_recovery_csv(path: &Path) -> Result<Vec<RecoveryRow>> {
    let (_, rows) = split_csv(path, &read_text(path)?)?;
    rows.iter()
        .map(|r| {
            let c = |i: usize| -> Result<Complex64> {
                Ok(Complex64::new(field(path, r, i)?, field(path, r, i + 1)?))
            };
            let error = match r.get(6).map(str::trim) {
                None | Some("") => None,
                Some(_) => Some(field(path, r, 6)?),
            };
            Ok(RecoveryRow {
                z: c(0)?,
                k: c(2)?,
                estimate: c(4)?,
                error,
            })
        })
        .collect()
}

/// Parses a conductivity spec:
///
/// ```text
/// identity
/// constant <s11> <s12> <s22> [radius]
/// bump <amplitude> <radius>
/// radial <radial> <angular> <radius>
/// file <path>
/// ```
///
/// Relative paths are resolved against `base`.
pub fn parse_conductivity(spec: &str, base: &Path) -> Result<ConductivityModel> {
    let bad = |m: String| Error::Parse {
        source_name: "conductivity spec".into(),
        line: 1,
        message: m,
    };
    let words: Vec<&str> = spec.split_whitespace().collect();
    let nums = |from: usize| -> Result<Vec<f64>> {
        words[from..]
            .iter()
            .map(|w| w.parse::<f64>().map_err(|e| bad(format!("`{w}`: {e}"))))
            .collect()
    };
    let arity = |v: &[f64], ok: &[usize]| -> Result<()> {
        if ok.contains(&v.len()) {
            Ok(())
        } else {
            Err(bad(format!("`{spec}`: expected {ok:?} numbers, got {}", v.len())))
        }
    };
    let model = match words.first().copied() {
        Some("identity") if words.len() == 1 => ConductivityModel::Identity,
        Some("constant") => {
            let v = nums(1)?;
            arity(&v, &[3, 4])?;
            ConductivityModel::Constant {
                tensor: SymTensor::new(v[0], v[1], v[2]),
                radius: v.get(3).copied().unwrap_or(1.0),
            }
        }
        Some("bump") => {
            let v = nums(1)?;
            arity(&v, &[2])?;
            ConductivityModel::RadialBump {
                amplitude: v[0],
                radius: v[1],
            }
        }
        Some("radial") => {
            let v = nums(1)?;
            arity(&v, &[3])?;
            ConductivityModel::RadialAnisotropic {
                radial: v[0],
                angular: v[1],
                radius: v[2],
            }
        }
        Some("file") if words.len() == 2 => {
            let p = base.join(words[1]);
            if !p.exists() {
                return Err(Error::io(
                    &p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "conductivity file not found"),
                ));
            }
            ConductivityModel::Sampled(FieldFile::read(&p)?.to_conductivity()?)
        }
        _ => return Err(bad(format!("unrecognized spec `{spec}`"))),
    };
    if let ConductivityModel::Constant { radius, .. }
    | ConductivityModel::RadialBump { radius, .. }
    | ConductivityModel::RadialAnisotropic { radius, .. } = &model
    {
        if !(*radius > 0.0 && radius.is_finite()) {
            return Err(bad(format!("radius must be positive, got {radius}")));
        }
    }
    model.check()?;
    Ok(model)
}

/// Inverse of [`parse_conductivity`] for closed-form models.
pub fn format_conductivity(model: &ConductivityModel) -> Option<String> {
    Some(match model {
        ConductivityModel::Identity => "identity".into(),
        ConductivityModel::Constant { tensor, radius } => {
            format!("constant {} {} {} {}", tensor.s11, tensor.s12, tensor.s22, radius)
        }
        ConductivityModel::RadialBump { amplitude, radius } => format!("bump {amplitude} {radius}"),
        ConductivityModel::RadialAnisotropic {
            radial,
            angular,
            radius,
        } => format!("radial {radial} {angular} {radius}"),
        ConductivityModel::Sampled(_) => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtn::disc_dtn_isotropic;
    use crate::field_algebra::TensorField;
    use tempfile::tempdir;

    #[test]
    fn field_file_round_trip() {
        let dir = tempdir().unwrap();
        let grid = GridSpec::new(1.5, 16).unwrap();
        let model = ConductivityModel::Constant {
            tensor: SymTensor::new(2.0, 0.3, 1.0),
            radius: 0.8,
        };
        let sigma = model.to_grid(grid).unwrap();
        let p = dir.path().join("sigma.bin");
        FieldFile::from_conductivity(&sigma).with_meta("source", "test").write(&p).unwrap();
        let back = FieldFile::read(&p).unwrap();
        assert_eq!(back.meta.get("source").map(String::as_str), Some("test"));
        let s2 = back.to_conductivity().unwrap();
        assert_eq!(s2.mask(), sigma.mask());
        for k in 0..grid.len() {
            assert_eq!(s2.at(k), sigma.at(k));
        }
        let w = Field::sample(grid, |z| z * z);
        let q = dir.path().join("w.bin");
        FieldFile::from_complex(&w).with_meta("k", Complex64::new(2.0, 0.0)).write(&q).unwrap();
        assert_eq!(FieldFile::read(&q).unwrap().to_complex().unwrap().values(), w.values());
    }

    #[test]
    fn truncated_field_file_is_rejected() {
        let dir = tempdir().unwrap();
        let grid = GridSpec::new(1.0, 16).unwrap();
        let p = dir.path().join("f.bin");
        FieldFile::new(grid).with_component("a", vec![1.0; grid.len()]).unwrap().write(&p).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(FieldFile::read(&p), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(FieldFile::read(&dir.path().join("none.bin")), Err(Error::Io { .. })));
    }

    #[test]
    fn dtn_csv_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let mut d = disc_dtn_isotropic(2.5, 3);
        d.set(1, -2, Complex64::new(0.1, -1.0 / 3.0));
        let header = DtnHeader {
            sigma: "constant 2.5 0 2.5".into(),
            modes: 3,
            h: 0.02,
        };
        let p = dir.path().join("d.csv");
        write_dtn_csv(&p, &d, &header).unwrap();
        let (back, h) = read_dtn_csv(&p).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, d);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# sigma=constant 2.5 0 2.5\n# modes=3\n# h=0.02\nm,n,re,im\n"));
        fs::write(&p, text.replace("# modes=3", "# modes=4")).unwrap();
        assert!(read_dtn_csv(&p).is_err());
    }

    #[test]
    fn cauchy_and_recovery_round_trip() {
        let dir = tempdir().unwrap();
        let set = CauchyDataSet::from_dtn(&disc_dtn_isotropic(1.0, 2));
        let p = dir.path().join("c.csv");
        write_cauchy_csv(&p, &set).unwrap();
        let back = read_cauchy_csv(&p).unwrap();
        assert_eq!(back.pairs, set.pairs);

        let rows = vec![
            RecoveryRow {
                z: Complex64::new(1.5, 0.0),
                k: Complex64::new(1.0, 0.0),
                estimate: Complex64::new(1.4, 0.01),
                error: Some(0.1),
            },
            RecoveryRow {
                z: Complex64::new(0.0, -2.0),
                k: Complex64::new(8.0, 0.0),
                estimate: Complex64::new(0.0, -2.0),
                error: None,
            },
        ];
        let q = dir.path().join("r.csv");
        write_recovery_csv(&q, &rows).unwrap();
        assert_eq!(read_recovery_csv(&q).unwrap(), rows);
    }

    #[test]
    fn conductivity_specs() {
        let base = Path::new(".");
        assert_eq!(parse_conductivity("identity", base).unwrap(), ConductivityModel::Identity);
        let m = parse_conductivity("constant 4 0 1", base).unwrap();
        assert_eq!(m, ConductivityModel::constant_on_unit_disc(SymTensor::new(4.0, 0.0, 1.0)));
        for spec in ["constant 2 1 2 0.5", "bump 0.5 0.7", "radial 2 1 0.9"] {
            let m = parse_conductivity(spec, base).unwrap();
            assert_eq!(parse_conductivity(&format_conductivity(&m).unwrap(), base).unwrap(), m);
        }
        for bad in ["", "constant 1 2", "constant 1 2 1", "bump x 1", "radial 1 1 -1", "wobbly"] {
            assert!(parse_conductivity(bad, base).is_err(), "{bad}");
        }
        let err = parse_conductivity("file missing.bin", Path::new("/nonexistent")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/missing.bin"));
    }

    #[test]
    fn sampled_spec_reads_field_file() {
        let dir = tempdir().unwrap();
        let grid = GridSpec::new(1.2, 16).unwrap();
        let model = ConductivityModel::constant_on_unit_disc(SymTensor::new(3.0, 0.0, 1.0));
        FieldFile::from_conductivity(&model.to_grid(grid).unwrap())
            .write(&dir.path().join("s.bin"))
            .unwrap();
        let m = parse_conductivity("file s.bin", dir.path()).unwrap();
        assert!(m.tensor_at(Complex64::new(0.1, 0.0)).max_abs_diff(&SymTensor::new(3.0, 0.0, 1.0)) < 1e-12);
        assert!(format_conductivity(&m).is_none());
    }
}
