use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use resonance_cli::report::SpectrumEntry;
use resonance_cli::RunReport;
use resonance_core::spectral::{BandPrediction, ResonanceSet};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resonances")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn run_dir(out: &Path, prefix: &str) -> PathBuf {
    std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with(&format!("{prefix}-")))
        .unwrap_or_else(|| panic!("no {prefix} run dir in {}", out.display()))
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn load(dir: &Path) -> RunReport {
    RunReport::from_json(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn identical_configs_give_identical_bytes_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["resonances", "--engine", "both", "--N", "5,7", "--eps1", "0.01"];
    let ra = run(a.path(), &[&args[..], &["--threads", "1"]].concat());
    let rb = run(b.path(), &[&args[..], &["--threads", "4"]].concat());
    assert_eq!(ra.status.code(), rb.status.code());
    let fa = files(&run_dir(a.path(), "resonances"));
    let fb = files(&run_dir(b.path(), "resonances"));
    assert!(fa.contains_key("spectrum_N5.svg") && fa.contains_key("resonances_determinant_N7.csv"));
    assert_eq!(fa, fb);
}

#[test]
fn orbit_cache_only_affects_runtime() {
    let out = tempfile::tempdir().unwrap();
    let args = ["gutzwiller", "--N", "5", "--eps1", "0.02", "--eps2", "0.01", "--nmax", "8"];
    run(out.path(), &args);
    let dir = run_dir(out.path(), "gutzwiller");
    let first = files(&dir);
    let cache = out.path().join("orbit-cache");
    assert!(std::fs::read_dir(&cache).unwrap().count() > 0, "cache populated");
    std::fs::remove_dir_all(&cache).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    run(out.path(), &args);
    assert_eq!(files(&dir), first);
    // and a warm-cache rerun
    run(out.path(), &args);
    assert_eq!(files(&dir), first);
}

#[test]
fn landau_table_holds_d_plus_2k() {
    let out = tempfile::tempdir().unwrap();
    let r = run(out.path(), &["landau"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stdout));
    let csv = std::fs::read_to_string(run_dir(out.path(), "landau").join("landau.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "d,k,level");
    let rows: Vec<Vec<usize>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 18);
    for r in &rows {
        assert_eq!(r[2], r[0] + 2 * r[1]);
    }
    assert!(rows.contains(&vec![2, 0, 2]) && rows.contains(&vec![2, 1, 4]) && rows.contains(&vec![3, 0, 3]));
}

#[test]
fn config_errors_exit_1() {
    let out = tempfile::tempdir().unwrap();
    for args in [
        &["resonances", "--N", ""][..],
        &["resonances", "--N", "1"],
        &["resonances", "--map", "1,1,0,1"],
        &["resonances", "--K", "1"],
        &["resonances", "--nmax", "20"],
        &["resonances", "--potential", "bogus"],
    ] {
        let r = run(out.path(), args);
        assert_eq!(r.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&r.stderr).contains("error"), "{args:?}");
    }
}

#[test]
fn both_engines_give_n_band_zero_resonances() {
    let out = tempfile::tempdir().unwrap();
    let r = run(out.path(), &["resonances", "--engine", "both", "--N", "5"]);
    // exit 0 or 2 depending on the equivalence verdict, never an error
    assert_ne!(r.status.code(), Some(1), "{}", String::from_utf8_lossy(&r.stderr));
    let rep = load(&run_dir(out.path(), "resonances"));
    let engines: Vec<&str> = rep.spectra.iter().map(|e| e.engine.as_str()).collect();
    assert_eq!(engines, ["matrix", "determinant"]);
    for e in &rep.spectra {
        let band0 = e.resonances.items.iter().filter(|r| r.band == Some(0)).count();
        assert_eq!(band0, 5, "{} engine", e.engine);
    }
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("PASS weyl_matrix_N5") && stdout.contains("PASS weyl_determinant_N5"));
    assert_eq!(r.status.code() == Some(0), rep.passed());
}

#[test]
fn v0_linear_band_zero_on_unit_circle() {
    let out = tempfile::tempdir().unwrap();
    let r = run(out.path(), &["resonances", "--potential", "v0", "--N", "6"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stdout));
    let rep = load(&run_dir(out.path(), "resonances"));
    let band0: Vec<_> = rep.spectra[0].resonances.items.iter().filter(|r| r.band == Some(0)).collect();
    assert_eq!(band0.len(), 6);
    for r in band0 {
        assert!((r.z.norm() - 1.0).abs() < 1e-8, "|z| = {}", r.z.norm());
    }
}

#[test]
fn rerendering_the_report_reproduces_artifacts() {
    let out = tempfile::tempdir().unwrap();
    run(out.path(), &["resonances", "--engine", "both", "--N", "5", "--potential", "v0"]);
    let dir = run_dir(out.path(), "resonances");
    let rep = load(&dir);
    let on_disk = files(&dir);
    let rendered = rep.render();
    assert_eq!(rendered.len() + 1, on_disk.len());
    for (name, body) in rendered {
        assert_eq!(on_disk[&name], body.into_bytes(), "{name}");
    }
    let mut names: Vec<_> = on_disk.keys().cloned().collect();
    names.sort();
    let mut listed = rep.artifacts.clone();
    listed.sort();
    assert_eq!(names, listed);
}

#[test]
fn empty_spectrum_svg_shows_rings_only() {
    let out = tempfile::tempdir().unwrap();
    run(out.path(), &["landau"]);
    let mut rep = load(&run_dir(out.path(), "landau"));
    let predictions = vec![
        BandPrediction { k: 0, r_minus: 1.0, r_plus: 1.0, n: 5 },
        BandPrediction { k: 1, r_minus: 0.3, r_plus: 0.45, n: 5 },
    ];
    rep.spectra.push(SpectrumEntry { n: 5, engine: "matrix".into(), predictions, resonances: ResonanceSet::new(5, "matrix", "zero", vec![]) });
    let (_, svg) = rep.render().into_iter().find(|(n, _)| n == "spectrum_N5.svg").unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<svg").count(), 1);
    assert!(!svg.contains("<path"), "no determinant crosses");
    assert!(!svg.contains(r#"r="2.8""#), "no matrix dots");
    // unit circle, band 0 once (degenerate), band 1 twice plus its shading
    assert_eq!(svg.matches("stroke-dasharray").count(), 3);
    assert_eq!(svg.matches("stroke-opacity").count(), 1);
}
