use std::fs;
use std::path::Path;

use clap::Parser;
use trap_forge_cli::map::ElectrodeMap;
use trap_forge_cli::{error_document, run, worker_count, Cli};

const SMALL: &str = r#"{
  "lattice": { "kind": "square", "spacing": 1.0 },
  "grid": { "kind": "oblique", "n1": 12, "n2": 12 },
  "traps": [ { "label": "centre", "position": [0.5, 0.5, 0.3], "gamma": "cylindrical" } ],
  "analysis": { "grid": { "nx": 24, "ny": 24, "nz": 32 } },
  "sweep": { "z_over_d": [] }
}"#;

fn cli(dir: &Path, args: &[&str]) -> Cli {
    let config = dir.join("run.json");
    let mut all = vec!["trap-forge", "--log-level", "off", "--config", config.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    Cli::parse_from(all)
}

fn with_config(text: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), text).unwrap();
    dir
}

#[test]
fn optimize_then_analyze_and_render() {
    let dir = with_config(SMALL);
    let summary = run(&cli(dir.path(), &["optimize"])).unwrap();
    let map_path = dir.path().join("electrodes.map");
    let map = ElectrodeMap::parse(&fs::read_to_string(&map_path).unwrap()).unwrap();
    assert_eq!(map.values.len(), 144);
    assert!((summary["scale"].as_f64().unwrap() - map.scale).abs() < 1e-12);
    assert!(dir.path().join("report.json").exists());

    let analysis = run(&cli(dir.path(), &["analyze", map_path.to_str().unwrap()])).unwrap();
    let kappa = analysis["kappa"][0].as_f64().unwrap();
    assert!((kappa - summary["kappa"][0].as_f64().unwrap()).abs() < 1e-6 * kappa);
    assert!(analysis["warnings"].as_array().unwrap().iter().all(|w| !w.as_str().unwrap().contains("recomputed C")));

    run(&cli(dir.path(), &["render", map_path.to_str().unwrap(), "--svg", "again.svg"])).unwrap();
    let first = fs::read_to_string(dir.path().join("electrodes.svg")).unwrap();
    let second = fs::read_to_string(dir.path().join("again.svg")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn tampered_scale_is_flagged_on_analysis() {
    let dir = with_config(SMALL);
    run(&cli(dir.path(), &["optimize"])).unwrap();
    let map_path = dir.path().join("electrodes.map");
    let mut map = ElectrodeMap::parse(&fs::read_to_string(&map_path).unwrap()).unwrap();
    map.scale *= 1.01;
    fs::write(&map_path, map.to_text()).unwrap();
    let analysis = run(&cli(dir.path(), &["analyze", map_path.to_str().unwrap()])).unwrap();
    assert!(analysis["warnings"].to_string().contains("recomputed C"));
}

#[test]
fn resolution_override_rebuilds_the_grid() {
    let dir = with_config(SMALL);
    run(&cli(dir.path(), &["--resolution-override", "8", "optimize"])).unwrap();
    let map = ElectrodeMap::parse(&fs::read_to_string(dir.path().join("electrodes.map")).unwrap()).unwrap();
    assert_eq!(map.values.len(), 64);
    assert_eq!(map.n_cut, 16);
}

#[test]
fn malformed_gamma_names_the_trap() {
    let dir = with_config(&SMALL.replace(r#""cylindrical""#, r#"{ "tensor": [[1,0,0],[0,1,0],[0,0,1]] }"#));
    let err = run(&cli(dir.path(), &["optimize"])).unwrap_err();
    let doc = error_document(&err);
    assert_eq!(doc["kind"], "non_traceless");
    assert!(doc["message"].as_str().unwrap().contains("'centre'"));
}

#[test]
fn unknown_field_reports_its_path() {
    let dir = with_config(&SMALL.replace(r#""spacing": 1.0"#, r#""spacing": 1.0, "pitch": 2"#));
    let doc = error_document(&run(&cli(dir.path(), &["optimize"])).unwrap_err());
    assert_eq!(doc["kind"], "config");
    assert!(doc["message"].as_str().unwrap().contains("lattice"), "{doc}");
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = with_config(SMALL);
    run(&cli(dir.path(), &["sweep"])).unwrap();
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv, "z_over_d,kappa,tau,interior,runtime_s,status\n");
}

#[test]
fn sweep_points_run_in_parallel() {
    let dir = with_config(&SMALL.replace(r#""z_over_d": []"#, r#""z_over_d": [0.4, 0.5]"#));
    let summary = run(&cli(dir.path(), &["--workers", "2", "sweep"])).unwrap();
    let points = summary["points"].as_array().unwrap();
    assert_eq!(points.len(), 2);
    assert!(points.iter().all(|p| p["status"] == "ok"));
    let k: Vec<f64> = points.iter().map(|p| p["kappa"].as_f64().unwrap()).collect();
    assert!(k[0] > k[1]);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn missing_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let doc = error_document(&run(&cli(dir.path(), &["optimize"])).unwrap_err());
    assert_eq!(doc["kind"], "config");
}

#[test]
fn thread_cap_from_environment() {
    assert_eq!(worker_count(Some(8), Some("3")).unwrap(), 3);
    assert_eq!(worker_count(Some(2), Some("16")).unwrap(), 2);
    assert!(worker_count(None, None).unwrap() >= 1);
    assert!(worker_count(None, Some("zero")).is_err());
    assert!(worker_count(None, Some("0")).is_err());
}
