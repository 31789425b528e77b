use dre_core::experiment::{compare, run, ExperimentConfig, Kind, MANIFEST_FILE};
use std::fs;
use std::path::Path;

fn levy_config() -> ExperimentConfig {
    ExperimentConfig::from_json(r#"{"kind":"levy","kappa":0.5,"replicas":10000,"pool_size":1000,"dt_b":1e-3,"base_seed":11}"#).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn levy_run_has_one_row_per_path() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&levy_config(), dir.path()).unwrap();
    assert_eq!(m.outputs.len(), 1);
    assert_eq!(m.outputs[0].rows, 10_000);
    let text = fs::read_to_string(dir.path().join("passage.csv")).unwrap();
    assert_eq!(text.lines().count(), 10_001);
}

#[test]
fn repeat_and_manifest_runs_are_byte_identical() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = levy_config();
    cfg.replicas = 500;
    run(&cfg, a.path()).unwrap();
    run(&cfg, b.path()).unwrap();
    assert_eq!(files(a.path()), files(b.path()));
    let replay = ExperimentConfig::load(&a.path().join(MANIFEST_FILE)).unwrap();
    run(&replay, c.path()).unwrap();
    assert_eq!(files(a.path()), files(c.path()));
}

#[test]
fn seed_changes_the_output() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = ExperimentConfig::new(Kind::Env);
    cfg.replicas = 4;
    run(&cfg, a.path()).unwrap();
    cfg.base_seed += 1;
    run(&cfg, b.path()).unwrap();
    let read = |d: &Path| fs::read(d.join("environments.csv")).unwrap();
    assert_ne!(read(a.path()), read(b.path()));
}

#[test]
fn diffusion_output_compares_against_levy_output() {
    let (d, l) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let diff = ExperimentConfig::from_json(r#"{"kind":"diffuse","t":1e3,"replicas":20}"#).unwrap();
    let m = run(&diff, d.path()).unwrap();
    assert_eq!(m.outputs[0].rows, 20);
    let mut lev = levy_config();
    lev.replicas = 300;
    run(&lev, l.path()).unwrap();
    let r = compare(&d.path().join("replicas.csv"), "lstar_over_t", &l.path().join("passage.csv"), "i").unwrap();
    assert_eq!((r.n_a, r.n_b), (20, 300));
    assert!(r.statistic > 0.0 && r.statistic <= 1.0);
    assert_eq!(r.ecdf_a.last().unwrap().1, 1.0);
}

#[test]
fn extrema_and_renewal_runs_write_their_tables() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ext = ExperimentConfig::from_json(r#"{"kind":"extrema","h_t":3,"replicas":5}"#).unwrap();
    let m = run(&ext, a.path()).unwrap();
    assert!(m.outputs[0].rows > 0);
    let ren = ExperimentConfig::from_json(r#"{"kind":"renewal","h_t":4,"replicas":200,"dt_b":1e-2}"#).unwrap();
    let m = run(&ren, b.path()).unwrap();
    assert_eq!((m.outputs[0].rows, m.outputs[1].rows), (200, 5));
    assert!(m.truncation_bias["rkappa_truncation"].as_f64().unwrap() > 0.0);
}
