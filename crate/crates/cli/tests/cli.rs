use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use calderon_cli::RunConfig;
use calderon_core::dtn::disc_dtn_isotropic;
use calderon_core::io::{read_dtn_csv, FieldFile};
use calderon_core::GridSpec;

const COARSE: &str = "mesh_h = 0.05\nmodes = 6\nmodes_out = 4\ngrid_n = 64\n";

fn calderon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calderon"))
        .args(args)
        .current_dir(dir)
        .env_remove("CALDERON_OUT")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

#[test]
fn identity_gives_absolute_value_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "id.cfg", &format!("scenario = id\n{COARSE}"));
    let out = calderon(dir.path(), &["forward-dtn", "--config", &cfg, "--out", "res"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let (lambda, header) = read_dtn_csv(&dir.path().join("res/id/forward-dtn/dtn.csv")).unwrap();
    assert_eq!(header.sigma, "identity");
    assert_eq!(header.modes, 6);
    assert!(lambda.relative_defect(&disc_dtn_isotropic(1.0, 6)) < 0.01);
    assert!(text(&out.stdout).contains("verdict PASS"));
}

#[test]
fn missing_conductivity_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "sigma = file data/absent.bin\n");
    let out = calderon(dir.path(), &["forward-dtn", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("data/absent.bin"), "{}", text(&out.stderr));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.cfg",
        &format!("scenario = again\nsigma = constant 2 0.5 1 0.7\n{COARSE}"),
    );
    for root in ["a", "b"] {
        let out = calderon(dir.path(), &["forward-dtn", "--config", &cfg, "--out", root]);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    }
    for file in ["dtn.csv", "report.txt"] {
        let a = fs::read(dir.path().join("a/again/forward-dtn").join(file)).unwrap();
        let b = fs::read(dir.path().join("b/again/forward-dtn").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn config_with_includes_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("presets")).unwrap();
    write_config(dir.path(), "presets/mesh.cfg", COARSE);
    let cfg = write_config(
        dir.path(),
        "run.cfg",
        "include = presets/mesh.cfg\nscenario = inc\ncenter = 0.5 -2\nkschedule = 1, 3, 9\n",
    );
    let loaded = RunConfig::load(&dir.path().join(cfg)).unwrap();
    assert_eq!(loaded.modes, 6);
    assert_eq!(loaded.kschedule, [1.0, 3.0, 9.0]);
    let again = RunConfig::parse_str(&loaded.to_text(), &loaded.base).unwrap();
    assert_eq!(again, loaded);
}

#[test]
fn exit_status_follows_the_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", COARSE);
    let failing = calderon(dir.path(), &["forward-dtn", "--config", &cfg, "--set", "check_tol=1e-12"]);
    assert_eq!(failing.status.code(), Some(1));
    assert!(text(&failing.stderr).contains("dtn-oracle"));

    let invalid = calderon(
        dir.path(),
        &["forward-dtn", "--config", &cfg, "--set", "grid_n=100", "--kschedule", "4,2"],
    );
    assert_eq!(invalid.status.code(), Some(2));
    let err = text(&invalid.stderr);
    assert!(err.contains("grid") && err.contains("kschedule"), "{err}");

    let elliptic = calderon(dir.path(), &["isotropize", "--config", &cfg, "--set", "sigma=constant 1 2 1"]);
    assert_eq!(elliptic.status.code(), Some(2));
}

#[test]
fn verify_names_the_broken_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let grid = GridSpec::new(2.0, 64).unwrap();
    let n = grid.len();
    let mut s11 = vec![2.0; n];
    s11[n / 2 + 32] = -1.0;
    let file = FieldFile::new(grid)
        .with_component("s11", s11)
        .and_then(|f| f.with_component("s12", vec![0.0; n]))
        .and_then(|f| f.with_component("s22", vec![1.0; n]))
        .and_then(|f| f.with_component("mask", vec![1.0; n]))
        .unwrap();
    file.write(&dir.path().join("sigma.bin")).unwrap();
    let cfg = write_config(dir.path(), "run.cfg", &format!("sigma = file sigma.bin\n{COARSE}"));
    let out = calderon(dir.path(), &["verify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("check sigma-admissible"), "{stdout}");
    assert!(stdout.contains("verdict FAIL"));
}

#[test]
fn verify_lists_each_member_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", &format!("sigma = constant 2 0.5 1 0.7\n{COARSE}"));
    let out = calderon(dir.path(), &["verify", "--config", &cfg]);
    let stdout = text(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    let stages: Vec<&str> = stdout.lines().filter_map(|l| l.strip_prefix("stage ")).collect();
    assert_eq!(
        stages,
        [
            "sigma-admissible",
            "coefficient-algebra",
            "extension-identity",
            "cgo-exponential",
            "dtn",
            "diffeomorphism-invariance",
            "isotropization",
            "hilbert-involution",
        ]
    );
}

#[test]
fn geometry_commands_write_operators() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.cfg",
        "scenario = geo\nmesh_h = 0.05\nmodes = 6\nmodes_out = 3\ncut = 0.05\ncheck_tol = 0.05\n",
    );
    for (cmd, files) in [
        ("exterior", &["dtn.csv"][..]),
        ("partial-data", &["dtn.csv", "cauchy.csv"][..]),
        ("halfplane", &["dtn.csv"][..]),
    ] {
        let out = calderon(dir.path(), &[cmd, "--config", &cfg, "--out", "res"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", text(&out.stdout));
        for f in files {
            assert!(dir.path().join("res/geo").join(cmd).join(f).exists(), "{cmd}: {f}");
        }
    }
}

#[test]
fn identity_recovery_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", &format!("scenario = cgo\n{COARSE}modes = 12\nterms = 12\n"));
    let out = calderon(dir.path(), &["cgo-recover", "--config", &cfg, "--out", "res"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    let rows = calderon_core::io::read_recovery_csv(&dir.path().join("res/cgo/cgo-recover/recovery.csv")).unwrap();
    assert_eq!(rows.len(), 16 * 4);
    assert!(rows.iter().all(|r| (r.estimate - r.z).norm() < 1e-9 && r.error == Some((r.estimate - r.z).norm())));
}
