//! The acceptance checks, runnable at full or smoke scale.
//!
//! Each criterion returns a [`CriterionReport`] with its verdict, a one-line
//! summary and a JSON table of the numbers behind it. Expensive inputs (R_κ
//! pools, Lévy tables) are memoized per process so criteria sharing them pay
//! once; memoized values depend only on their key, so reports stay
//! reproducible.

use crate::diffusion::{run_replica, DiffusionConfig, Engine, ReplicaRecord, ReplicaSpec};
use crate::environment::{sample_a_infinity, sample_potential, ExtentPolicy, PotentialPath};
use crate::error::{Error, Result};
use crate::extrema::{brute_force_h_extrema, build_all_valleys, default_delta, find_h_extrema, valley_violations, ExtremumKind};
use crate::levy::{empirical_jump_tail, limit_law_samples, renewal_count_transform, LevyParams, LimitLawTable, MarkPool};
use crate::renewal::{rkappa_truncation_bias, sample_r_kappa_batch, sample_renewal_batch, tail_constant, tail_constant_check, BesselSimConfig};
use crate::specialfn::{arcsine_cdf, nu_tail, rkappa_laplace};
use crate::stats::{grid_independence, ks_one_sample, ks_two_sample, mean, std_err, RngStream};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{ContinuousCDF, Gamma};
use std::any::Any;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 271828;
pub const KAPPAS: [f64; 3] = [0.3, 0.5, 0.7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Smoke,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    fn from(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: String,
    pub status: Status,
    pub summary: String,
    pub details: serde_json::Value,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// `PASS [3] title: summary`
    pub fn line(&self) -> String {
        let s = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
        };
        format!("{s} [{}] {}: {}", self.id, self.title, self.summary)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub scale: Scale,
    pub base_seed: u64,
    pub criteria: Vec<CriterionReport>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(CriterionReport::passed)
    }
}

/// Sample sizes and steps for one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sizes {
    pub rkappa_n: usize,
    pub rkappa_dt_b: f64,
    pub levy_n: usize,
    pub tail_n: usize,
    pub tail_dt_b: f64,
    pub dufresne_n: usize,
    pub extrema_paths: usize,
    pub extrema_envs: usize,
    pub jumps_n: usize,
    pub diffusion_replicas: usize,
    pub diffusion_times: Vec<f64>,
    /// Factor applied to KS thresholds, √(full n / n) for smoke runs.
    pub ks_inflation: f64,
}

impl Sizes {
    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Full => Sizes {
                rkappa_n: 100_000,
                rkappa_dt_b: 1e-4,
                levy_n: 10_000,
                tail_n: 1_000_000,
                tail_dt_b: 1e-2,
                dufresne_n: 10_000,
                extrema_paths: 200,
                extrema_envs: 1000,
                jumps_n: 100_000,
                diffusion_replicas: 500,
                diffusion_times: vec![1e4, 1e5, 1e6],
                ks_inflation: 1.0,
            },
            Scale::Smoke => Sizes {
                rkappa_n: 2000,
                rkappa_dt_b: 1e-3,
                levy_n: 2000,
                tail_n: 20_000,
                tail_dt_b: 1e-2,
                dufresne_n: 1000,
                extrema_paths: 20,
                extrema_envs: 50,
                jumps_n: 10_000,
                diffusion_replicas: 40,
                diffusion_times: vec![1e3, 1e4],
                ks_inflation: 5f64.sqrt(),
            },
        }
    }
}

type Slot = Arc<OnceLock<std::result::Result<Arc<dyn Any + Send + Sync>, String>>>;

fn cache() -> &'static Mutex<HashMap<String, Slot>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Slot>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Computes `f` once per key and process; concurrent callers wait.
fn cached<T: Send + Sync + 'static>(key: String, f: impl FnOnce() -> Result<T>) -> Result<Arc<T>> {
    let slot = cache().lock().expect("cache lock").entry(key.clone()).or_default().clone();
    let v = slot.get_or_init(|| f().map(|t| Arc::new(t) as Arc<dyn Any + Send + Sync>).map_err(|e| e.to_string()));
    match v {
        Ok(a) => Ok(a.clone().downcast::<T>().expect("one type per cache key")),
        Err(e) => Err(Error::Undefined(format!("{key}: {e}"))),
    }
}

/// Context shared by the criteria of one run.
#[derive(Debug, Clone)]
pub struct Run {
    pub scale: Scale,
    pub base_seed: u64,
    pub sizes: Sizes,
    /// Prefix for memoized inputs; distinct namespaces recompute everything.
    pub namespace: String,
}

impl Run {
    pub fn new(scale: Scale, base_seed: u64) -> Self {
        Run {
            scale,
            base_seed,
            sizes: Sizes::for_scale(scale),
            namespace: String::new(),
        }
    }

    fn stream(&self, id: u64) -> RngStream {
        RngStream::new(self.base_seed, id)
    }

    pub fn rkappa_config(&self) -> BesselSimConfig {
        BesselSimConfig {
            dt_b: self.sizes.rkappa_dt_b,
            ..BesselSimConfig::default()
        }
    }

    /// The R_κ sample of criterion 1, reused as the mark pool elsewhere.
    pub fn pool(&self, kappa: f64) -> Result<Arc<MarkPool>> {
        let n = self.sizes.rkappa_n;
        let cfg = self.rkappa_config();
        let stream = self.stream(100 + kappa_tag(kappa));
        cached(format!("{}pool/{kappa}/{n}/{}/{}", self.namespace, cfg.dt_b, self.base_seed), || {
            MarkPool::new(kappa, sample_r_kappa_batch(kappa, &cfg, n, stream)?)
        })
    }

    pub fn levy_table(&self, kappa: f64) -> Result<Arc<LimitLawTable>> {
        let pool = self.pool(kappa)?;
        let n = self.sizes.levy_n;
        let stream = self.stream(200 + kappa_tag(kappa));
        cached(format!("{}levy/{kappa}/{n}/{}/{}", self.namespace, self.sizes.rkappa_n, self.base_seed), || {
            limit_law_samples(n, &LevyParams::for_pool(&pool)?, &pool, stream)
        })
    }
}

fn kappa_tag(kappa: f64) -> u64 {
    (kappa * 100.0).round() as u64
}

pub const TITLES: [&str; 10] = [
    "R_kappa Laplace transform",
    "Undershoot arcsine law",
    "Favorite fraction uniform and independent",
    "Renewal tail constant",
    "Mittag-Leffler first-passage law",
    "Dufresne identity",
    "Extrema and valley correctness",
    "Levy measure equivalence",
    "Diffusion vs Levy trend",
    "Determinism",
];

/// Runs the requested criteria (1–10) in order.
pub fn run_criteria(run: &Run, ids: &[u32]) -> Result<VerifyReport> {
    let mut criteria = Vec::with_capacity(ids.len());
    for &id in ids {
        log::info!("criterion {id}: {}", TITLES[(id - 1) as usize]);
        criteria.push(run_one(run, id)?);
    }
    Ok(VerifyReport {
        schema_version: SCHEMA_VERSION,
        scale: run.scale,
        base_seed: run.base_seed,
        criteria,
    })
}

pub fn run_one(run: &Run, id: u32) -> Result<CriterionReport> {
    let (ok, summary, details) = match id {
        1 => c1_rkappa_laplace(run)?,
        2 => c2_arcsine(run)?,
        3 => c3_favorite_fraction(run)?,
        4 => c4_tail_constant(run)?,
        5 => c5_mittag_leffler(run)?,
        6 => c6_dufresne(run)?,
        7 => c7_extrema(run)?,
        8 => c8_levy_measure(run)?,
        9 => c9_trend(run)?,
        10 => c10_determinism(run)?,
        _ => return Err(Error::Domain(format!("no criterion {id}"))),
    };
    Ok(CriterionReport {
        id,
        title: TITLES[(id - 1) as usize].into(),
        status: Status::from(ok),
        summary,
        details,
    })
}

type Outcome = Result<(bool, String, serde_json::Value)>;

fn c1_rkappa_laplace(run: &Run) -> Outcome {
    let mut rows = Vec::new();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for k in KAPPAS {
        let pool = run.pool(k)?;
        for g in [0.5, 1.0, 2.0] {
            let v: Vec<f64> = pool.samples().iter().map(|r| (-g * r).exp()).collect();
            let (m, se) = (mean(&v), std_err(&v));
            let want = rkappa_laplace(k, g)?;
            let z = (m - want) / se;
            ok &= z.abs() <= 3.0;
            worst = worst.max(z.abs());
            rows.push(json!({"kappa": k, "gamma": g, "empirical": m, "std_err": se, "analytic": want, "z": z}));
        }
    }
    let trunc: Vec<_> = KAPPAS.iter().map(|&k| json!({"kappa": k, "mean_truncation_bias": rkappa_truncation_bias(k, run.rkappa_config().l_cut)})).collect();
    Ok((
        ok,
        format!("max |z| = {worst:.2} over 9 (kappa, gamma) pairs (limit 3), n = {}", run.sizes.rkappa_n),
        json!({"rows": rows, "truncation": trunc, "dt_b": run.sizes.rkappa_dt_b}),
    ))
}

fn c2_arcsine(run: &Run) -> Outcome {
    let limit = 0.02 * run.sizes.ks_inflation;
    let mut rows = Vec::new();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for k in KAPPAS {
        let t = run.levy_table(k)?;
        let u = t.column(|r| Some(r.undershoot));
        let ks = ks_one_sample(&u, |x| arcsine_cdf(k, x.clamp(0.0, 1.0)).expect("kappa in range"))?;
        ok &= ks.statistic < limit;
        worst = worst.max(ks.statistic);
        rows.push(json!({"kappa": k, "ks": ks.statistic, "p_value": ks.p_value, "crept": t.crept}));
    }
    Ok((ok, format!("max KS D = {worst:.4} (limit {limit:.4})"), json!({"rows": rows, "limit": limit})))
}

fn c3_favorite_fraction(run: &Run) -> Outcome {
    let limit = 0.02 * run.sizes.ks_inflation;
    let mut rows = Vec::new();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut min_p: f64 = 1.0;
    for k in KAPPAS {
        let t = run.levy_table(k)?;
        let f = t.column(|r| r.fstar_fraction);
        let ks = ks_one_sample(&f, |x| x.clamp(0.0, 1.0))?;
        let with = |g: fn(&crate::levy::PassageReport) -> f64| -> Vec<(f64, f64)> {
            t.reports.iter().filter_map(|r| r.fstar_fraction.map(|x| (x, g(r)))).collect()
        };
        let c1 = grid_independence(&with(|r| r.i1), 4)?;
        let c2 = grid_independence(&with(|r| r.i2), 4)?;
        ok &= ks.statistic < limit && c1.p_value > 0.01 && c2.p_value > 0.01;
        worst = worst.max(ks.statistic);
        min_p = min_p.min(c1.p_value).min(c2.p_value);
        rows.push(json!({
            "kappa": k, "ks": ks.statistic, "n": f.len(), "no_prior_jump": t.no_prior_jump,
            "chi2_i1": c1.statistic, "p_i1": c1.p_value, "chi2_i2": c2.statistic, "p_i2": c2.p_value,
            "p_i1_lt_i2": t.p_i1_lt_i2
        }));
    }
    Ok((
        ok,
        format!("max KS D = {worst:.4} (limit {limit:.4}); min chi-square p = {min_p:.3} (alpha 0.01)"),
        json!({"rows": rows, "limit": limit}),
    ))
}

/// φ solving φ = (h + φ)^β, so that h = log t − φ(t) for t = e^{h+φ}.
pub fn phi_for_h(h: f64, beta: f64) -> f64 {
    let mut p = h.powf(beta);
    for _ in 0..200 {
        p = (h + p).powf(beta);
    }
    p
}

/// Window of y = ℓe^{−h} over which the tail constant is read.
pub const TAIL_WINDOW: (f64, f64) = (100.0, 1000.0);

fn c4_tail_constant(run: &Run) -> Outcome {
    let (k, h) = (0.5, 15.0);
    let phi = phi_for_h(h, 0.5);
    let t = (h + phi).exp();
    let cfg = BesselSimConfig {
        dt_b: run.sizes.tail_dt_b,
        bridge: true,
        ..BesselSimConfig::default()
    };
    let draws = sample_renewal_batch(k, h, &cfg, run.sizes.tail_n, run.stream(400))?;
    let xs: Vec<f64> = (0..5)
        .map(|j| TAIL_WINDOW.0 * (TAIL_WINDOW.1 / TAIL_WINDOW.0).powf(j as f64 / 4.0) * (-phi).exp())
        .collect();
    let rows = tail_constant_check(&draws, k, t, phi, &xs)?;
    let c2 = tail_constant(k);
    let erk = run.pool(k)?.mean_pow_kappa();
    let mut ok = true;
    let (mut we, mut wh): (f64, f64) = (0.0, 0.0);
    let table: Vec<_> = rows
        .iter()
        .map(|r| {
            let (de, dh) = (r.ell_stat / c2 - 1.0, r.h_stat / (c2 * erk) - 1.0);
            ok &= de.abs() <= 0.10 && dh.abs() <= 0.15;
            we = we.max(de.abs());
            wh = wh.max(dh.abs());
            json!({"x": r.x, "y": r.x * phi.exp(), "ell_stat": r.ell_stat, "ell_se": r.ell_se, "ell_rel_dev": de,
                   "h_stat": r.h_stat, "h_se": r.h_se, "h_rel_dev": dh, "ell_exceed": r.ell_exceed, "h_exceed": r.h_exceed})
        })
        .collect();
    Ok((
        ok,
        format!("max rel dev: ell {we:.3} (limit 0.10), H {wh:.3} (limit 0.15); n = {}", run.sizes.tail_n),
        json!({"kappa": k, "h_t": h, "phi": phi, "t": t, "c2": c2, "mean_rk_kappa": erk, "dt_b": cfg.dt_b, "rows": table}),
    ))
}

fn c5_mittag_leffler(run: &Run) -> Outcome {
    let k = 0.5;
    let pool = run.pool(k)?;
    let params = LevyParams::for_pool(&pool)?;
    let (ck, rows) = renewal_count_transform(&params, &pool, &[0.5, 1.0, 2.0], run.sizes.levy_n, run.stream(500))?;
    let ok = rows.iter().all(|r| (r.empirical - r.series).abs() <= 3.0 * r.std_err + r.bias_band);
    let worst = rows.iter().map(|r| (r.empirical - r.series).abs() / (3.0 * r.std_err + r.bias_band)).fold(0.0, f64::max);
    Ok((
        ok,
        format!("max |emp - series| / (3 s.e. + band) = {worst:.2} (limit 1); C_kappa = {ck:.4}"),
        json!({"kappa": k, "c_kappa": ck, "eps": params.eps, "rows": rows}),
    ))
}

fn c6_dufresne(run: &Run) -> Outcome {
    let limit = 0.03 * run.sizes.ks_inflation;
    let mut rows = Vec::new();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for k in KAPPAS {
        let s = run.stream(600 + kappa_tag(k));
        let v = (0..run.sizes.dufresne_n as u64)
            .into_par_iter()
            .map(|i| sample_a_infinity(k, 0.01, 30.0, s.child(i)).map(|a| 2.0 / a))
            .collect::<Result<Vec<_>>>()?;
        let g = Gamma::new(k, 1.0).expect("valid gamma");
        let ks = ks_one_sample(&v, |x| g.cdf(x.max(0.0)))?;
        ok &= ks.statistic < limit;
        worst = worst.max(ks.statistic);
        rows.push(json!({"kappa": k, "ks": ks.statistic, "p_value": ks.p_value}));
    }
    Ok((ok, format!("max KS D = {worst:.4} (limit {limit:.4})"), json!({"rows": rows, "grid_step": 0.01, "depth": 30.0})))
}

fn random_walk_path(n: usize, step: f64, stream: RngStream) -> Result<PotentialPath> {
    let mut rng = stream.rng();
    let mut w = 0.0;
    let mut v = vec![0.0];
    for _ in 1..n {
        let z: f64 = rng.sample(StandardNormal);
        w += -0.25 * step + step.sqrt() * z;
        v.push(w);
    }
    PotentialPath::from_values(0.5, step, 0, v)
}

fn c7_extrema(run: &Run) -> Outcome {
    let s = run.stream(700);
    let mismatches: usize = (0..run.sizes.extrema_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<usize> {
            let p = random_walk_path(2000, 0.01, s.child(i))?;
            let w = (0.0, p.right_extent());
            let mut bad = 0;
            for h in [0.2, 0.5, 1.0] {
                if find_h_extrema(&p, h, w)? != brute_force_h_extrema(&p, h, w)? {
                    bad += 1;
                }
            }
            Ok(bad)
        })
        .sum::<Result<usize>>()?;
    let h_t = 4.0;
    let s = run.stream(701);
    let per_env = (0..run.sizes.extrema_envs as u64)
        .into_par_iter()
        .map(|i| -> Result<(usize, usize, usize)> {
            let p = sample_potential(0.5, 0.01, &ExtentPolicy::default(), s.child(i))?;
            let vs = build_all_valleys(&p, h_t, default_delta(0.5))?;
            let ex = find_h_extrema(&p, h_t, (0.0, p.right_extent()))?;
            let mut prev = 0.0;
            let (mut viol, mut not_min) = (0, 0);
            for r in &vs {
                viol += valley_violations(&p, r, prev, 1e-9).len();
                prev = r.l_plus;
                if r.m != r.l_sharp {
                    let j = p.coord(r.m).round() as usize;
                    if !ex.iter().any(|e| e.kind == ExtremumKind::Minimum && e.index == j) {
                        not_min += 1;
                    }
                }
            }
            Ok((vs.len(), viol, not_min))
        })
        .collect::<Result<Vec<_>>>()?;
    let valleys: usize = per_env.iter().map(|r| r.0).sum();
    let violations: usize = per_env.iter().map(|r| r.1).sum();
    let not_min: usize = per_env.iter().map(|r| r.2).sum();
    let ok = mismatches == 0 && violations == 0 && valleys > 0;
    Ok((
        ok,
        format!(
            "{mismatches} brute-force mismatches over {} paths x 3 h; {violations} invariant violations over {valleys} valleys in {} environments",
            run.sizes.extrema_paths, run.sizes.extrema_envs
        ),
        json!({"mismatches": mismatches, "violations": violations, "valleys": valleys, "bottoms_not_h_minima": not_min, "h_t": h_t}),
    ))
}

fn c8_levy_measure(run: &Run) -> Outcome {
    let k = 0.5;
    let pool = run.pool(k)?;
    let params = LevyParams::new(k, 1e-4);
    let grid: Vec<(f64, f64)> = [1e-3, 1e-2, 1e-1].iter().flat_map(|&x| [1e-3, 1e-2, 1e-1].map(|y| (x, y))).collect();
    let rows = empirical_jump_tail(&params, &pool, run.sizes.jumps_n, &grid, &mut run.stream(800).rng())?;
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut table = Vec::new();
    for (&(x, y), &(v, se)) in grid.iter().zip(&rows) {
        let want = nu_tail(k, params.c2, x, y, pool.samples())?;
        let z = (v - want) / se;
        ok &= z.abs() <= 3.0;
        worst = worst.max(z.abs());
        table.push(json!({"x": x, "y": y, "empirical": v, "std_err": se, "nu_tail": want, "z": z}));
    }
    Ok((ok, format!("max |z| = {worst:.2} over the 3x3 grid (limit 3), n = {}", run.sizes.jumps_n), json!({"rows": table})))
}

/// The replica settings used by the trend check at horizon t.
pub fn trend_spec(t: f64) -> ReplicaSpec {
    ReplicaSpec {
        kappa: 0.5,
        grid_step: 0.01,
        delta: default_delta(0.5),
        diffusion: DiffusionConfig {
            t_max: t,
            engine: Engine::GridWalk,
            bin_width: 0.01,
            walk_step: Some(0.1),
            record_every: 1 << 20,
            ..DiffusionConfig::default()
        },
        extent_margin: 4.0,
    }
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn c9_trend(run: &Run) -> Outcome {
    let table = run.levy_table(0.5)?;
    let i_all = table.column(|r| Some(r.i));
    let i1 = table.column(|r| Some(r.i1));
    let mix = table.favorite_mixture();
    let s = run.stream(900);
    let (mut d_i, mut d_i1, mut d_f) = (Vec::new(), Vec::new(), Vec::new());
    let mut per_t = Vec::new();
    for &t in &run.sizes.diffusion_times {
        let spec = trend_spec(t);
        let reps: Vec<ReplicaRecord> = (0..run.sizes.diffusion_replicas as u64)
            .into_par_iter()
            .map(|i| run_replica(&spec, s.child(i)))
            .collect::<Result<_>>()?;
        let l: Vec<f64> = reps.iter().map(|r| r.lstar_over_t).collect();
        // N_t = 0 means no h_t-minimum was reached yet: ℒ*(H(m₀)) = ℒ*(0) = 0.
        let l1: Vec<f64> = reps.iter().map(|r| r.lstar_at_last_over_t.unwrap_or(0.0)).collect();
        let f: Vec<f64> = reps.iter().filter_map(|r| r.favorite_over_x).collect();
        let (a, b, c) = (ks_two_sample(&l, &i_all)?.statistic, ks_two_sample(&l1, &i1)?.statistic, ks_two_sample(&f, &mix)?.statistic);
        d_i.push(a);
        d_i1.push(b);
        d_f.push(c);
        let phi = spec.diffusion.phi();
        let gaps: Vec<f64> = reps.iter().filter_map(|r| r.gap.map(|g| g / phi)).collect();
        per_t.push(json!({
            "t": t, "ks_lstar_vs_i": a, "ks_lstar_at_last_vs_i1": b, "ks_favorite_vs_mixture": c,
            "mean_n_t": mean(&reps.iter().map(|r| r.n_t as f64).collect::<Vec<_>>()),
            "frac_n_t_zero": reps.iter().filter(|r| r.n_t == 0).count() as f64 / reps.len() as f64,
            "median_gap_over_phi": if gaps.is_empty() { None } else { Some(crate::stats::Ecdf::new(&gaps)?.quantile(0.5)) },
            "max_negative_side_over_t": reps.iter().map(|r| r.negative_side_over_t).fold(0.0, f64::max),
            "extensions": reps.iter().map(|r| r.extensions as u64).sum::<u64>(),
        }));
    }
    let ok = nonincreasing(&d_i) && nonincreasing(&d_i1) && nonincreasing(&d_f);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" > ");
    Ok((
        ok,
        format!("KS by t: L*/t vs I [{}]; L*(H)/t vs I1 [{}]; F*/X vs mixture [{}]", fmt(&d_i), fmt(&d_i1), fmt(&d_f)),
        json!({"kappa": 0.5, "replicas": run.sizes.diffusion_replicas, "levy_n": table.reports.len(), "p_i1_lt_i2": table.p_i1_lt_i2, "per_t": per_t}),
    ))
}

/// Two smoke runs of criteria 1–8 in fresh namespaces, compared as JSON text.
fn c10_determinism(run: &Run) -> Outcome {
    let once = |tag: &str| -> Result<String> {
        let r = Run {
            namespace: format!("{}determinism-{tag}/", run.namespace),
            ..Run::new(Scale::Smoke, run.base_seed)
        };
        Ok(serde_json::to_string(&run_criteria(&r, &[1, 2, 3, 4, 5, 6, 7, 8])?)?)
    };
    let (a, b) = (once("a")?, once("b")?);
    let same = a == b;
    Ok((
        same,
        format!("smoke criteria 1-8 run twice: {} bytes, {}", a.len(), if same { "identical" } else { "different" }),
        json!({"bytes": a.len()}),
    ))
}
