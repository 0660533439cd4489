use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wirecm"))
}

fn reference_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/dipole.toml")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parses a CSV with a header into rows of strings, checking every row is complete.
fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    for r in &rows {
        assert_eq!(r.len(), header.len(), "{}", path.display());
    }
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let base = fs::read_to_string(reference_config()).unwrap();
    let p = dir.join("cfg.toml");
    fs::write(&p, format!("{base}\n{extra}")).unwrap();
    p
}

#[test]
fn modes_writes_bundle_and_eigenvalues_deterministically() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    let cfg = reference_config();
    for out in [&a, &b] {
        let o = run(&["modes", "--config", s(&cfg), "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (h, rows) = table(&a.join("eigenvalues.csv"));
    assert_eq!(h[0], "mode");
    assert!(rows.len() >= 6, "only {} modes", rows.len());
    for f in ["modes.bundle", "eigenvalues.csv", "verification.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn corrupt_config_exits_one_without_output() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("out");
    for text in [
        "wavelength = ",
        "wavelength = 1.0\n[reference]\nlength = -2.0\nradius = 1e-3\nsegments = 40\n",
    ] {
        let cfg = t.path().join("bad.toml");
        fs::write(&cfg, text).unwrap();
        for cmd in ["modes", "sweep"] {
            let o = run(&[cmd, "--config", s(&cfg), "--out", s(&out)]);
            assert_eq!(o.status.code(), Some(1));
            assert!(!o.stderr.is_empty());
            assert!(!out.exists());
        }
    }
}

#[test]
fn zero_threads_is_a_validation_error() {
    let t = tempfile::tempdir().unwrap();
    let o = run(&[
        "modes",
        "--config",
        s(&reference_config()),
        "--out",
        s(t.path()),
        "--threads",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_reproduces_diagonality_contrast_and_convergence() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("o");
    let o = run(&[
        "sweep",
        "--config",
        s(&reference_config()),
        "--out",
        s(&out),
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    for tag in ["0.300", "1.000", "2.000"] {
        for f in ["P", "Q", "field"] {
            assert!(out.join(format!("{f}_{tag}.csv")).exists(), "{f}_{tag}");
        }
    }
    let (h, rows) = table(&out.join("verification.csv"));
    let status = col(&h, "status");
    assert!(rows.iter().all(|r| r[status] == "pass"));

    let (h, rows) = table(&out.join("summary.csv"));
    let (len, off) = (col(&h, "length[lambda0]"), col(&h, "offdiag_ratio[1]"));
    let at = |l: f64| {
        rows.iter()
            .find(|r| (r[len].parse::<f64>().unwrap() - l).abs() < 1e-9)
            .unwrap()
    };
    assert!(at(2.0)[off].parse::<f64>().unwrap() < 1e-8);
    assert!(at(1.0)[off].parse::<f64>().unwrap() > 0.1);

    let (h, rows) = table(&out.join("convergence.csv"));
    let (len, n, err) = (col(&h, "length[lambda0]"), col(&h, "modes[1]"), col(&h, "rel_error[1]"));
    let e6 = rows
        .iter()
        .find(|r| (r[len].parse::<f64>().unwrap() - 0.8).abs() < 1e-9 && r[n] == "6")
        .unwrap();
    assert!(e6[err].parse::<f64>().unwrap() < 0.05);

    let (h, rows) = table(&out.join("P_1.000.csv"));
    assert_eq!(h, ["row", "col", "re[1]", "im[1]"]);
    assert_eq!(rows.len(), 11 * 11);
}

#[test]
fn sweep_output_does_not_depend_on_thread_count() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "");
    let mut dirs = Vec::new();
    for k in ["1", "4"] {
        let out = t.path().join(k);
        let o = run(&["sweep", "--config", s(&cfg), "--out", s(&out), "--threads", k]);
        assert!(o.status.success());
        dirs.push(out);
    }
    let mut names: Vec<_> = fs::read_dir(&dirs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() > 50);
    for n in names {
        assert_eq!(
            fs::read(dirs[0].join(&n)).unwrap(),
            fs::read(dirs[1].join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn failed_oracle_check_exits_two_and_names_it() {
    let t = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(reference_config()).unwrap();
    // Three radii from the axis: well outside the wire but deep in the reactive near field.
    let text = base.replace("points = [[0.5, 0.0, 0.5]]", "points = [[0.003, 0.0, 0.05]]");
    let cfg = t.path().join("near.toml");
    fs::write(&cfg, text).unwrap();
    let o = run(&["sweep", "--config", s(&cfg), "--out", s(&t.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("full-rank reconstruction"));
}

fn reconstruct(dir: &Path, length: &str, bundle: Option<&Path>) -> (Vec<String>, Vec<Vec<String>>) {
    let out = dir.join("r");
    let cfg = reference_config();
    let mut args = vec!["reconstruct", "--config", s(&cfg), "--out", s(&out), "--length", length];
    if let Some(b) = bundle {
        args.extend(["--bundle", s(b)]);
    }
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    table(&out.join(format!("reconstruct_{length}00.csv")))
}

fn errors(h: &[String], rows: &[Vec<String>]) -> (f64, f64) {
    let (src, err) = (col(h, "source"), col(h, "rel_error[1]"));
    let get = |name: &str| {
        rows.iter().find(|r| r[src] == name).unwrap()[err]
            .parse::<f64>()
            .unwrap()
    };
    (get("reconstruction"), get("p_prime"))
}

#[test]
fn reconstruct_compares_three_fields() {
    let t = tempfile::tempdir().unwrap();
    let b = t.path().join("m");
    assert!(run(&["modes", "--config", s(&reference_config()), "--out", s(&b)])
        .status
        .success());
    let bundle = b.join("modes.bundle");

    let (h, rows) = reconstruct(t.path(), "2.0", Some(&bundle));
    let (rec, naive) = errors(&h, &rows);
    assert!(rec < 1e-6 && naive < 1e-6, "{rec} {naive}");
    assert_eq!((col(&h, "x[m]"), rows[0][col(&h, "x[m]")].as_str()), (1, "5e-1"));

    let (h, rows) = reconstruct(t.path(), "1.0", Some(&bundle));
    let (rec, naive) = errors(&h, &rows);
    assert!(naive > 2.0 * rec, "{rec} {naive}");

    let (h2, rows2) = reconstruct(t.path(), "1.0", None);
    assert_eq!((h, rows), (h2, rows2));
}

#[test]
fn bundle_from_another_reference_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    let other = write_config(t.path(), "").to_str().unwrap().to_owned();
    fs::write(
        &other,
        fs::read_to_string(&other)
            .unwrap()
            .replace("segments = 40", "segments = 30"),
    )
    .unwrap();
    let b = t.path().join("m");
    assert!(run(&["modes", "--config", &other, "--out", s(&b)]).status.success());
    let out = t.path().join("r");
    let o = run(&[
        "reconstruct",
        "--config",
        s(&reference_config()),
        "--out",
        s(&out),
        "--length",
        "1.0",
        "--bundle",
        s(&b.join("modes.bundle")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn xform_writes_intermediate_matrices() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("x");
    let o = run(&[
        "xform",
        "--config",
        s(&reference_config()),
        "--out",
        s(&out),
        "--length",
        "1.0",
        "--modes",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = table(&out.join("cross_radiation_1.000.csv"));
    assert_eq!(h[2], "re[ohm]");
    assert_eq!(rows.len(), 39 * 19);
    let (_, rows) = table(&out.join("transform_1.000.csv"));
    assert_eq!(rows.len(), 16);
    for f in ["projection", "perturbation", "scattering", "eigenvalues_b"] {
        assert!(out.join(format!("{f}_1.000.csv")).exists(), "{f}");
    }
}
