//! Config-driven runs: one JSON document in, CSV tables plus a manifest out.
//!
//! Every output depends only on the config, so a run repeated from its
//! manifest reproduces the same bytes. Replica `i` of a run draws from
//! `RngStream::new(base_seed, i)`; the renewal and Lévy kinds use the fixed
//! streams listed in [`Manifest::seeds`].

use crate::diffusion::{run_replica, write_replica_csv, DiffusionConfig, Engine, ReplicaSpec};
use crate::environment::{a_infinity, sample_potential, ExtentPolicy};
use crate::error::{config, Error, Result};
use crate::extrema::{build_all_valleys, default_delta, write_valleys_csv, VALLEY_CSV_HEADER};
use crate::levy::{c_kappa, limit_law_samples, write_passage_csv, LevyParams, MarkPool};
use crate::renewal::{rkappa_truncation_bias, sample_r_kappa_batch, sample_renewal_batch, tail_constant_check, write_renewal_csv, BesselSimConfig};
use crate::stats::{ks_two_sample, Ecdf, RngStream};
use crate::verify::{phi_for_h, run_criteria, Run, Scale, DEFAULT_SEED, SCHEMA_VERSION, TAIL_WINDOW};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Potential paths and 2/A_∞ per replica.
    Env,
    /// All h_t-valleys of each replica's environment.
    Extrema,
    /// Diffusion replicas and their local-time functionals.
    Diffuse,
    /// Renewal tuples (S, R, e) and the scaled tail table.
    Renewal,
    /// Passage reports of the two-dimensional stable process.
    Levy,
    /// The acceptance checks.
    Verify,
}

fn d_kappa() -> f64 {
    0.5
}
fn d_beta() -> f64 {
    0.5
}
fn d_dt() -> f64 {
    1e-3
}
fn d_dt_b() -> f64 {
    1e-4
}
fn d_dx() -> f64 {
    0.1
}
fn d_l_cut() -> f64 {
    30.0
}
fn d_replicas() -> usize {
    100
}
fn d_seed() -> u64 {
    DEFAULT_SEED
}
fn d_engine() -> Engine {
    Engine::GridWalk
}
fn d_pool() -> usize {
    10_000
}
fn d_true() -> bool {
    true
}
fn d_margin() -> f64 {
    4.0
}
fn d_scale() -> Scale {
    Scale::Smoke
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default = "d_kappa")]
    pub kappa: f64,
    /// Time horizon; h_t = log t − (log t)^β is derived from it.
    #[serde(default)]
    pub t: Option<f64>,
    /// Valley depth, for kinds that do not need a time horizon.
    #[serde(default)]
    pub h_t: Option<f64>,
    /// Valley slack δ; defaults to [`default_delta`].
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "d_beta")]
    pub beta: f64,
    /// Euler step of the diffusion.
    #[serde(default = "d_dt")]
    pub dt: f64,
    /// Base step of the W↑ simulation.
    #[serde(default = "d_dt_b")]
    pub dt_b: f64,
    /// Grid step of the environment.
    #[serde(default = "d_dx")]
    pub dx: f64,
    /// Local-time bin width; defaults to `dx`.
    #[serde(default)]
    pub bin_width: Option<f64>,
    /// Grid-walk lattice spacing, a multiple of `dx`; defaults to `dx`.
    #[serde(default)]
    pub walk_step: Option<f64>,
    /// Lévy small-jump cutoff; chosen from the mark pool when absent.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default = "d_l_cut")]
    pub l_cut: f64,
    #[serde(default = "d_replicas")]
    pub replicas: usize,
    #[serde(default = "d_seed")]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "d_engine")]
    pub engine: Engine,
    /// Brownian-bridge crossing test in the W↑ simulation.
    #[serde(default)]
    pub bridge: bool,
    /// Number of R_κ marks generated for the Lévy kind.
    #[serde(default = "d_pool")]
    pub pool_size: usize,
    #[serde(default = "d_true")]
    pub compensate: bool,
    #[serde(default = "d_margin")]
    pub extent_margin: f64,
    /// Verify kind only.
    #[serde(default = "d_scale")]
    pub scale: Scale,
    /// Verify kind only; all ten when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<Vec<u32>>,
}

impl ExperimentConfig {
    pub fn new(kind: Kind) -> Self {
        serde_json::from_value(json!({ "kind": kind })).expect("defaults deserialize")
    }

    /// Parses a config, or the config recorded in a manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let cfg = match v.get("config") {
            Some(inner) if v.get("schema_version").is_some() => inner.clone(),
            _ => v,
        };
        let cfg: ExperimentConfig = serde_json::from_value(cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(config("kappa", format!("must lie in (0,1), got {}", self.kappa)));
        }
        let positive = [
            ("dt", self.dt),
            ("dt_b", self.dt_b),
            ("dx", self.dx),
            ("bin_width", self.bin_width()),
            ("l_cut", self.l_cut),
            ("beta", self.beta),
            ("extent_margin", self.extent_margin),
        ];
        for (field, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(config(field, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.beta < 1.0) {
            return Err(config("beta", "must be below 1"));
        }
        if let Some(e) = self.eps {
            if !(e > 0.0) {
                return Err(config("eps", format!("must be positive, got {e}")));
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(config("delta", format!("must be positive, got {d}")));
            }
        }
        if self.replicas == 0 {
            return Err(config("replicas", "must be positive"));
        }
        if self.t.is_some() && self.h_t.is_some() {
            return Err(config("h_t", "give t or h_t, not both"));
        }
        if let Some(t) = self.t {
            let h = t.ln() - t.ln().powf(self.beta);
            if !(t > 1.0) || !(h > 1.0) {
                return Err(config("t", format!("derived h_t = log t - (log t)^beta must exceed 1, got {h}")));
            }
        }
        if let Some(h) = self.h_t {
            if !(h > 1.0) {
                return Err(config("h_t", format!("must exceed 1, got {h}")));
            }
        }
        match self.kind {
            Kind::Diffuse if self.t.is_none() => return Err(config("t", "required for kind diffuse")),
            Kind::Extrema | Kind::Renewal if self.t.is_none() && self.h_t.is_none() => {
                return Err(config("h_t", "kind needs t or h_t"));
            }
            Kind::Levy if self.pool_size < 10 => return Err(config("pool_size", "must be at least 10")),
            Kind::Verify => {
                if let Some(ids) = &self.criteria {
                    if let Some(bad) = ids.iter().find(|&&i| !(1..=10).contains(&i)) {
                        return Err(config("criteria", format!("no criterion {bad}")));
                    }
                }
            }
            _ => {}
        }
        if self.kind == Kind::Diffuse {
            self.replica_spec()?.diffusion.validate(self.dx).map_err(|e| match e {
                Error::Config { .. } => e,
                other => config("dt", other.to_string()),
            })?;
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width.unwrap_or(self.dx)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or_else(|| default_delta(self.kappa))
    }

    /// (h_t, φ, t): from t directly, or from h_t with t = e^{h_t + φ}.
    pub fn horizon(&self) -> Option<(f64, f64, f64)> {
        match (self.t, self.h_t) {
            (Some(t), _) => {
                let phi = t.ln().powf(self.beta);
                Some((t.ln() - phi, phi, t))
            }
            (None, Some(h)) => {
                let phi = phi_for_h(h, self.beta);
                Some((h, phi, (h + phi).exp()))
            }
            _ => None,
        }
    }

    fn bessel(&self, h: f64) -> BesselSimConfig {
        BesselSimConfig {
            dt_b: self.dt_b,
            l_cut: self.l_cut,
            h,
            bridge: self.bridge,
            ..BesselSimConfig::default()
        }
    }

    fn replica_spec(&self) -> Result<ReplicaSpec> {
        let t = self.t.ok_or_else(|| config("t", "required for kind diffuse"))?;
        Ok(ReplicaSpec {
            kappa: self.kappa,
            grid_step: self.dx,
            delta: self.delta(),
            diffusion: DiffusionConfig {
                t_max: t,
                dt: self.dt,
                phi_exponent: self.beta,
                bin_width: self.bin_width(),
                engine: self.engine,
                walk_step: self.walk_step,
                record_every: 1 << 20,
            },
            extent_margin: self.extent_margin,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    /// Data rows, excluding the header.
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub seeds: Value,
    /// Quantities resolved from the config (h_t, φ, ε, …).
    pub derived: Value,
    pub truncation_bias: Value,
    pub summary: Value,
    pub outputs: Vec<OutputFile>,
    /// Verify kind only: ids of the criteria that failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_criteria: Option<Vec<u32>>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<OutputFile>,
}

impl Outputs<'_> {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        f(&mut w)?;
        w.flush()?;
        let text = fs::read_to_string(self.dir.join(name))?;
        let rows = if name.ends_with(".csv") { text.lines().count().saturating_sub(1) } else { 1 };
        self.files.push(OutputFile { file: name.to_string(), rows });
        Ok(())
    }
}

/// Runs the experiment, writing its tables and `manifest.json` into `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut out = Outputs { dir: out_dir, files: Vec::new() };
    let seed = cfg.base_seed;
    let mut derived = json!({});
    let mut bias = json!({});
    let mut summary = json!({});
    let mut failed = None;
    let mut seeds = json!({"base_seed": seed, "replica_stream": "RngStream::new(base_seed, replica)"});
    if let Some((h, phi, t)) = cfg.horizon() {
        derived = json!({"h_t": h, "phi": phi, "t": t});
    }
    match cfg.kind {
        Kind::Env => {
            let rows: Vec<_> = (0..cfg.replicas as u64)
                .into_par_iter()
                .map(|i| -> Result<_> {
                    let p = sample_potential(cfg.kappa, cfg.dx, &ExtentPolicy::default(), RngStream::new(seed, i))?;
                    let lo = p.values.iter().copied().fold(f64::INFINITY, f64::min);
                    Ok((p.len(), p.left_extent(), p.right_extent(), lo, a_infinity(&p).ok().map(|a| 2.0 / a), p))
                })
                .collect::<Result<_>>()?;
            out.write("environments.csv", |w| {
                writeln!(w, "replica,nodes,left_extent,right_extent,min_value,two_over_a_infinity")?;
                for (i, r) in rows.iter().enumerate() {
                    let a = r.4.map(|v| v.to_string()).unwrap_or_default();
                    writeln!(w, "{i},{},{},{},{},{a}", r.0, r.1, r.2, r.3)?;
                }
                Ok(())
            })?;
            out.write("potential_0.csv", |w| rows[0].5.write_csv(w))?;
        }
        Kind::Extrema => {
            let (h, _, _) = cfg.horizon().expect("validated");
            let h_plus = (1.0 + cfg.kappa + 2.0 * cfg.delta()) * h;
            let policy = ExtentPolicy {
                stop_depth: 100f64.max(4.0 * h_plus),
                left_barrier: 30f64.max(2.0 * h_plus),
                ..ExtentPolicy::default()
            };
            let tables: Vec<String> = (0..cfg.replicas as u64)
                .into_par_iter()
                .map(|i| -> Result<String> {
                    let p = sample_potential(cfg.kappa, cfg.dx, &policy, RngStream::new(seed, i))?;
                    let mut buf = Vec::new();
                    write_valleys_csv(&build_all_valleys(&p, h, cfg.delta())?, &mut buf)?;
                    let text = String::from_utf8(buf).expect("ascii");
                    Ok(text.lines().skip(1).map(|l| format!("{i},{l}\n")).collect())
                })
                .collect::<Result<_>>()?;
            derived["delta"] = json!(cfg.delta());
            derived["h_plus"] = json!(h_plus);
            out.write("valleys.csv", |w| {
                writeln!(w, "replica,{VALLEY_CSV_HEADER}")?;
                tables.iter().try_for_each(|t| w.write_all(t.as_bytes()))?;
                Ok(())
            })?;
        }
        Kind::Diffuse => {
            let spec = cfg.replica_spec()?;
            let rows: Vec<_> = (0..cfg.replicas as u64)
                .into_par_iter()
                .map(|i| run_replica(&spec, RngStream::new(seed, i)))
                .collect::<Result<_>>()?;
            derived["delta"] = json!(spec.delta);
            derived["extent_policy"] = serde_json::to_value(spec.extent_policy())?;
            bias["euler_dt"] = json!(if cfg.engine == Engine::Euler { Some(cfg.dt) } else { None });
            summary["extensions"] = json!(rows.iter().map(|r| r.extensions as u64).sum::<u64>());
            out.write("replicas.csv", |w| write_replica_csv(&rows, w))?;
        }
        Kind::Renewal => {
            let (h, phi, t) = cfg.horizon().expect("validated");
            let draws = sample_renewal_batch(cfg.kappa, h, &cfg.bessel(h), cfg.replicas, RngStream::new(seed, 0))?;
            let xs: Vec<f64> = (0..5)
                .map(|j| TAIL_WINDOW.0 * (TAIL_WINDOW.1 / TAIL_WINDOW.0).powf(j as f64 / 4.0) * (-phi).exp())
                .collect();
            let tail = tail_constant_check(&draws, cfg.kappa, t, phi, &xs)?;
            seeds["renewal_stream"] = json!("RngStream::new(base_seed, 0)");
            bias["rkappa_truncation"] = json!(rkappa_truncation_bias(cfg.kappa, cfg.l_cut));
            out.write("renewal.csv", |w| write_renewal_csv(&draws, w))?;
            out.write("tail.csv", |w| {
                writeln!(w, "x,ell_stat,ell_se,h_stat,h_se,ell_exceed,h_exceed")?;
                for r in &tail {
                    writeln!(w, "{},{},{},{},{},{},{}", r.x, r.ell_stat, r.ell_se, r.h_stat, r.h_se, r.ell_exceed, r.h_exceed)?;
                }
                Ok(())
            })?;
        }
        Kind::Levy => {
            let marks = sample_r_kappa_batch(cfg.kappa, &cfg.bessel(BesselSimConfig::default().h), cfg.pool_size, RngStream::new(seed, 1))?;
            let pool = MarkPool::new(cfg.kappa, marks)?;
            let mut params = LevyParams::for_pool(&pool)?;
            if let Some(e) = cfg.eps {
                params.eps = e;
            }
            params.compensate = cfg.compensate;
            let table = limit_law_samples(cfg.replicas, &params, &pool, RngStream::new(seed, 2))?;
            seeds["mark_pool_stream"] = json!("RngStream::new(base_seed, 1)");
            seeds["passage_stream"] = json!("RngStream::new(base_seed, 2), path i on child(i)");
            derived["eps"] = json!(params.eps);
            derived["c2"] = json!(params.c2);
            derived["c_kappa"] = json!(c_kappa(cfg.kappa, params.c2, pool.mean_pow_kappa())?);
            derived["mark_mean_pow_kappa"] = json!(pool.mean_pow_kappa());
            bias["rkappa_truncation"] = json!(rkappa_truncation_bias(cfg.kappa, cfg.l_cut));
            bias["small_jump_mass_rate"] = json!(params.missed_mass_rate() * pool.mean());
            bias["small_jump_variance_rate"] = json!(params.small_jump_variance_rate() * pool.mean_sq());
            bias["compensated"] = json!(params.compensate);
            summary["p_i1_lt_i2"] = json!(table.p_i1_lt_i2);
            summary["no_prior_jump"] = json!(table.no_prior_jump);
            summary["crept"] = json!(table.crept);
            out.write("passage.csv", |w| write_passage_csv(&table.reports, w))?;
        }
        Kind::Verify => {
            let ids = cfg.criteria.clone().unwrap_or_else(|| (1..=10).collect());
            let report = run_criteria(&Run::new(cfg.scale, seed), &ids)?;
            for c in &report.criteria {
                log::info!("{}", c.line());
            }
            failed = Some(report.criteria.iter().filter(|c| !c.passed()).map(|c| c.id).collect());
            summary["all_passed"] = json!(report.all_passed());
            out.write("verify.json", |w| {
                serde_json::to_writer_pretty(&mut *w, &report)?;
                writeln!(w)?;
                Ok(())
            })?;
        }
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: ExperimentConfig { out_dir: None, ..cfg.clone() },
        seeds,
        derived,
        truncation_bias: bias,
        summary,
        outputs: out.files,
        failed_criteria: failed,
    };
    let mut w = BufWriter::new(File::create(out_dir.join(MANIFEST_FILE))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(manifest)
}

/// Numeric values of `column`; empty cells are skipped.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Schema(format!("{} has no column `{column}`", path.display())))?;
    let mut vals = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Schema(e.to_string()))?;
        let cell = rec.get(idx).unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| Error::Schema(format!("{} row {}: `{cell}` in `{column}` is not a number", path.display(), line + 1)))?;
        vals.push(v);
    }
    Ok(vals)
}

/// ECDF points kept per sample in a [`CompareReport`].
pub const MAX_ECDF_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub file_a: String,
    pub column_a: String,
    pub file_b: String,
    pub column_b: String,
    pub n_a: usize,
    pub n_b: usize,
    /// Two-sample Kolmogorov–Smirnov D.
    pub statistic: f64,
    pub p_value: f64,
    /// (x, F(x)) after each jump, thinned to at most [`MAX_ECDF_POINTS`].
    pub ecdf_a: Vec<(f64, f64)>,
    pub ecdf_b: Vec<(f64, f64)>,
}

fn thin(steps: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if steps.len() <= MAX_ECDF_POINTS {
        return steps;
    }
    let n = steps.len();
    (0..MAX_ECDF_POINTS).map(|k| steps[(k + 1) * n / MAX_ECDF_POINTS - 1]).collect()
}

/// Two-sample KS between `column_a` of `file_a` and `column_b` of `file_b`.
pub fn compare(file_a: &Path, column_a: &str, file_b: &Path, column_b: &str) -> Result<CompareReport> {
    let a = read_column(file_a, column_a)?;
    let b = read_column(file_b, column_b)?;
    let ks = ks_two_sample(&a, &b)?;
    Ok(CompareReport {
        file_a: file_a.display().to_string(),
        column_a: column_a.to_string(),
        file_b: file_b.display().to_string(),
        column_b: column_b.to_string(),
        n_a: a.len(),
        n_b: b.len(),
        statistic: ks.statistic,
        p_value: ks.p_value,
        ecdf_a: thin(Ecdf::new(&a)?.steps()),
        ecdf_b: thin(Ecdf::new(&b)?.steps()),
    })
}
