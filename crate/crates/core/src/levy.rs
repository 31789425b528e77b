//! The limiting two-dimensional pure-jump Lévy process (𝒴₁, 𝒴₂), its first
//! passage functionals and the limit laws they realize.
//!
//! Jumps of 𝒴₁ above a cutoff ε form a Poisson point process with intensity
//! ds × C₂κx^{−κ−1}dx; each carries a mark ρ ~ R_κ and 𝒴₂ jumps by ξρ at the
//! same instant. Jumps below ε are optionally replaced by their mean drift
//! (d₁ = C₂κε^{1−κ}/(1−κ) for 𝒴₁ and d₁·E[ρ] for 𝒴₂). When that drift alone
//! carries 𝒴₂ over the level, the passage is resolved by a single small jump.

use crate::error::{domain, Error, Result};
use crate::renewal::with_resample;
use crate::specialfn::{gamma_fn, mittag_leffler_laplace};
use crate::stats::RngStream;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyJump {
    pub time: f64,
    /// Jump of 𝒴₁.
    pub size: f64,
    /// 𝒴₂ jumps by `size * mark`.
    pub mark: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyParams {
    pub kappa: f64,
    pub c2: f64,
    /// Small-jump cutoff ε.
    pub eps: f64,
    /// Replace the jumps below ε by their mean drift.
    pub compensate: bool,
    /// Level whose first passage ends generation (one more jump is added after it).
    pub level: f64,
    /// Jump budget per path; exceeding it is a horizon error.
    pub max_jumps: usize,
}

impl LevyParams {
    /// C₂ = 4^κ, compensated, passage over 1.
    pub fn new(kappa: f64, eps: f64) -> Self {
        LevyParams {
            kappa,
            c2: 4f64.powf(kappa),
            eps,
            compensate: true,
            level: 1.0,
            max_jumps: 50_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(domain(format!("kappa must lie in (0,1), got {}", self.kappa)));
        }
        if !(self.c2 > 0.0) || !(self.eps > 0.0) || !(self.level > 0.0) {
            return Err(domain("c2, eps and level must be positive"));
        }
        Ok(())
    }

    /// Rate of jumps above ε: C₂ε^{−κ}.
    pub fn jump_rate(&self) -> f64 {
        self.c2 * self.eps.powf(-self.kappa)
    }

    /// Mean 𝒴₁ mass per unit time carried by jumps ≤ ε: C₂κε^{1−κ}/(1−κ).
    pub fn missed_mass_rate(&self) -> f64 {
        self.c2 * self.kappa * self.eps.powf(1.0 - self.kappa) / (1.0 - self.kappa)
    }

    /// Variance per unit time of the 𝒴₁ jumps ≤ ε: C₂κε^{2−κ}/(2−κ).
    pub fn small_jump_variance_rate(&self) -> f64 {
        self.c2 * self.kappa * self.eps.powf(2.0 - self.kappa) / (2.0 - self.kappa)
    }
}

/// Expected jumps above ε per path used by [`LevyParams::for_pool`].
pub const DEFAULT_TARGET_JUMPS: f64 = 2000.0;

impl LevyParams {
    /// Compensated sampling with C₂ = 4^κ and ε from [`suggest_eps`] for
    /// [`DEFAULT_TARGET_JUMPS`], or a tenth of the pool if that is smaller.
    pub fn for_pool(pool: &MarkPool) -> Result<Self> {
        let k = pool.kappa();
        let target = DEFAULT_TARGET_JUMPS.min(pool.len() as f64 / 10.0);
        let eps = suggest_eps(k, 4f64.powf(k), pool.mean_pow_kappa(), target)?;
        Ok(LevyParams::new(k, eps))
    }
}

/// The cutoff giving about `target_jumps` jumps above ε before passage over 1.
/// Uses E[τ] = 1/(C_κ Γ(1+κ)) with C_κ = Γ(1−κ)·C₂·E[R_κ^κ].
pub fn suggest_eps(kappa: f64, c2: f64, mean_rk_kappa: f64, target_jumps: f64) -> Result<f64> {
    let c_kappa = gamma_fn(1.0 - kappa)? * c2 * mean_rk_kappa;
    let mean_tau = 1.0 / (c_kappa * gamma_fn(1.0 + kappa)?);
    Ok((target_jumps / (c2 * mean_tau)).powf(-1.0 / kappa))
}

/// A pre-generated pool of R_κ samples serving as marks. Within one path
/// marks are drawn without replacement; across paths the pool is reused.
#[derive(Debug, Clone)]
pub struct MarkPool {
    samples: Arc<Vec<f64>>,
    mean: f64,
    mean_sq: f64,
    mean_pow_kappa: f64,
    max: f64,
    kappa: f64,
}

impl MarkPool {
    pub fn new(kappa: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        if samples.len() > u32::MAX as usize {
            return Err(domain("mark pool too large"));
        }
        if samples.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(domain("marks must be positive and finite"));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let mean_sq = samples.iter().map(|r| r * r).sum::<f64>() / n;
        let mean_pow_kappa = samples.iter().map(|r| r.powf(kappa)).sum::<f64>() / n;
        let max = samples.iter().copied().fold(0.0, f64::max);
        Ok(MarkPool {
            max,
            samples: Arc::new(samples),
            mean,
            mean_sq,
            mean_pow_kappa,
            kappa,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Ê[ρ].
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Ê[ρ²].
    pub fn mean_sq(&self) -> f64 {
        self.mean_sq
    }

    /// Ê[ρ^κ].
    pub fn mean_pow_kappa(&self) -> f64 {
        self.mean_pow_kappa
    }

    /// A pool element drawn with probability proportional to its value
    /// (with replacement), by rejection.
    pub fn draw_size_biased<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let r = self.samples[rng.random_range(0..self.samples.len())];
            if rng.random::<f64>() * self.max < r {
                return r;
            }
        }
    }

    pub fn drawer(&self) -> MarkDrawer {
        MarkDrawer {
            pool: self.clone(),
            perm: (0..self.samples.len() as u32).collect(),
            swaps: Vec::new(),
        }
    }
}

/// Draws marks without replacement from a [`MarkPool`]. `reset` undoes the
/// partial shuffle, so the draws of a path depend only on its own stream.
#[derive(Debug, Clone)]
pub struct MarkDrawer {
    pool: MarkPool,
    perm: Vec<u32>,
    swaps: Vec<u32>,
}

impl MarkDrawer {
    pub fn draw<R: Rng>(&mut self, rng: &mut R) -> Result<f64> {
        let n = self.perm.len();
        if self.swaps.len() == n {
            return Err(Error::PoolExhausted { size: n });
        }
        let k = self.swaps.len();
        let j = rng.random_range(k..n);
        self.perm.swap(k, j);
        self.swaps.push(j as u32);
        Ok(self.pool.samples[self.perm[k] as usize])
    }

    pub fn reset(&mut self) {
        while let Some(j) = self.swaps.pop() {
            let k = self.swaps.len();
            self.perm.swap(k, j as usize);
        }
    }
}

/// Marked jump list of (𝒴₁, 𝒴₂), plus the drifts standing in for the jumps
/// below the cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyPath2D {
    pub params: LevyParams,
    pub jumps: Vec<LevyJump>,
    /// Drift of 𝒴₁ (0 without compensation).
    pub drift1: f64,
    /// Drift of 𝒴₂.
    pub drift2: f64,
    /// Index of the jump carrying 𝒴₂ over the level.
    pub passage: usize,
    /// Whether the passing jump was inserted for a drift crossing.
    pub crept: bool,
}

impl LevyPath2D {
    /// 𝒴₁(s).
    pub fn y1(&self, s: f64) -> f64 {
        self.jumps.iter().take_while(|j| j.time <= s).map(|j| j.size).sum::<f64>() + self.drift1 * s
    }

    /// 𝒴₂(s).
    pub fn y2(&self, s: f64) -> f64 {
        self.jumps.iter().take_while(|j| j.time <= s).map(|j| j.size * j.mark).sum::<f64>() + self.drift2 * s
    }

    /// 𝒴₂(s⁻).
    pub fn y2_minus(&self, s: f64) -> f64 {
        self.jumps.iter().take_while(|j| j.time < s).map(|j| j.size * j.mark).sum::<f64>() + self.drift2 * s
    }

    /// 𝒴₁(s⁻).
    pub fn y1_minus(&self, s: f64) -> f64 {
        self.jumps.iter().take_while(|j| j.time < s).map(|j| j.size).sum::<f64>() + self.drift1 * s
    }

    /// (time, jump) pairs of coordinate 1 or 2.
    pub fn coordinate(&self, which: usize) -> Vec<(f64, f64)> {
        self.jumps
            .iter()
            .map(|j| (j.time, if which == 1 { j.size } else { j.size * j.mark }))
            .collect()
    }
}

/// f♮(s): the largest jump at a time ≤ s (< s when `strict`), 0 if none.
pub fn largest_jump(jumps: &[(f64, f64)], s: f64, strict: bool) -> f64 {
    jumps
        .iter()
        .take_while(|(u, _)| if strict { *u < s } else { *u <= s })
        .map(|j| j.1)
        .fold(0.0, f64::max)
}

/// f⁻¹(a) for the pure-jump step function with these jumps: the first jump
/// time at which the running sum exceeds a strictly.
pub fn first_passage(jumps: &[(f64, f64)], a: f64) -> Result<f64> {
    let mut sum = 0.0;
    for &(u, x) in jumps {
        sum += x;
        if sum > a {
            return Ok(u);
        }
    }
    Err(Error::Horizon { level: a })
}

/// Samples the marked jumps until 𝒴₂ passes `params.level`, plus one more jump.
pub fn sample_levy_path<R: Rng>(params: &LevyParams, marks: &mut MarkDrawer, rng: &mut R) -> Result<LevyPath2D> {
    params.validate()?;
    marks.reset();
    let out = generate(params, marks, rng);
    marks.reset();
    out
}

fn generate<R: Rng>(params: &LevyParams, marks: &mut MarkDrawer, rng: &mut R) -> Result<LevyPath2D> {
    let k = params.kappa;
    let rate = params.jump_rate();
    let (d1, d2) = if params.compensate {
        let d1 = params.missed_mass_rate();
        (d1, d1 * marks.pool.mean())
    } else {
        (0.0, 0.0)
    };
    let mut jumps = Vec::new();
    let mut t = 0.0;
    // Jump part of 𝒴₂.
    let mut y2 = 0.0;
    let mut passage = None;
    let mut crept = false;
    loop {
        if jumps.len() >= params.max_jumps {
            return Err(Error::Horizon { level: params.level });
        }
        let u: f64 = rng.random();
        let t_next = t - (-u).ln_1p() / rate;
        if passage.is_none() && d2 > 0.0 && y2 + d2 * t_next > params.level {
            // The drift reaches the level before the next jump, so the passage
            // is made by a jump below ε. The crossing jump of 𝒴₂ is size-biased:
            // density ∝ ξ^{−κ} on (0, ε] and mark ∝ ρ·P(dρ).
            let tc = (params.level - y2) / d2;
            let v: f64 = rng.random();
            let size = params.eps * (1.0 - v).powf(1.0 / (1.0 - k));
            let mark = marks.pool.draw_size_biased(rng);
            // The level sits uniformly inside the jump.
            let w: f64 = rng.random();
            let shift = ((1.0 - w) * size * mark).min(d2 * (tc - t) * (1.0 - 1e-12));
            let mut time = tc - shift / d2;
            // Keep 𝒴₂(τ⁻) ≤ level < 𝒴₂(τ) exact in floating point.
            while y2 + d2 * time > params.level && time > t {
                time = time.next_down();
            }
            if !(time > t && y2 + size * mark + d2 * time > params.level) {
                return Err(Error::Resample("degenerate drift crossing".into()));
            }
            jumps.push(LevyJump { time, size, mark });
            y2 += size * mark;
            passage = Some(jumps.len() - 1);
            crept = true;
            t = tc;
            continue;
        }
        let v: f64 = rng.random();
        let size = params.eps * (1.0 - v).powf(-1.0 / k);
        let mark = marks.draw(rng)?;
        jumps.push(LevyJump { time: t_next, size, mark });
        t = t_next;
        y2 += size * mark;
        match passage {
            None if y2 + d2 * t > params.level => passage = Some(jumps.len() - 1),
            Some(_) => break,
            None => {}
        }
    }
    Ok(LevyPath2D {
        params: *params,
        jumps,
        drift1: d1,
        drift2: d2,
        passage: passage.expect("loop exits after the passage"),
        crept,
    })
}

/// Empirical ν̂([x,∞)×[y,∞)) from `n` i.i.d. jump/mark pairs above ε, with
/// binomial standard errors. Rows follow `grid` order.
pub fn empirical_jump_tail<R: Rng>(params: &LevyParams, pool: &MarkPool, n: usize, grid: &[(f64, f64)], rng: &mut R) -> Result<Vec<(f64, f64)>> {
    params.validate()?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut counts = vec![0usize; grid.len()];
    let mut drawer = pool.drawer();
    for _ in 0..n {
        let v: f64 = rng.random();
        let size = params.eps * (1.0 - v).powf(-1.0 / params.kappa);
        let mark = match drawer.draw(rng) {
            Ok(m) => m,
            Err(_) => {
                drawer.reset();
                drawer.draw(rng)?
            }
        };
        for (c, &(x, y)) in counts.iter_mut().zip(grid) {
            if size >= x && size * mark >= y {
                *c += 1;
            }
        }
    }
    drawer.reset();
    let rate = params.jump_rate();
    let nf = n as f64;
    Ok(counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / nf;
            (rate * p, rate * (p * (1.0 - p) / nf).sqrt())
        })
        .collect())
}

/// Functionals of one path at the first passage τ = 𝒴₂⁻¹(1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageReport {
    pub tau: f64,
    /// 𝒴₂(τ⁻).
    pub undershoot: f64,
    /// 𝒴₂(τ).
    pub overshoot: f64,
    /// ℐ₁ = 𝒴₁♮(τ⁻).
    pub i1: f64,
    /// ℐ₂ = (1 − 𝒴₂(τ⁻))·Δ𝒴₁(τ)/Δ𝒴₂(τ).
    pub i2: f64,
    /// ℐ = max(ℐ₁, ℐ₂).
    pub i: f64,
    /// F*/τ, with F* the time of the largest jump of 𝒴₁ before τ; `None`
    /// when no jump above the cutoff precedes τ.
    pub fstar_fraction: Option<f64>,
    /// 𝒴₁♮(τ).
    pub y1_sharp_tau: f64,
    /// 𝒴₁♮(τ⁻).
    pub y1_sharp_tau_minus: f64,
    /// 𝒴₁(τ) − 𝒴₁(τ⁻).
    pub passage_jump: f64,
    /// The passage was made by an inserted small jump.
    pub crept: bool,
}

pub fn passage_report(path: &LevyPath2D) -> Result<PassageReport> {
    let p = path.passage;
    let level = path.params.level;
    let pj = path.jumps.get(p).ok_or(Error::Horizon { level })?;
    let tau = pj.time;
    let mut jumps_before = 0.0;
    let mut i1 = 0.0;
    let mut fstar = None;
    for j in &path.jumps[..p] {
        jumps_before += j.size * j.mark;
        // Strict comparison keeps the earliest of tied jumps.
        if j.size > i1 {
            i1 = j.size;
            fstar = Some(j.time);
        }
    }
    // Same operation order as the generator.
    let under = jumps_before + path.drift2 * tau;
    let over = jumps_before + pj.size * pj.mark + path.drift2 * tau;
    if !(under <= level && over > level) {
        return Err(Error::Horizon { level });
    }
    let i2 = (level - under) / pj.mark;
    Ok(PassageReport {
        tau,
        undershoot: under,
        overshoot: over,
        i1,
        i2,
        i: i1.max(i2),
        fstar_fraction: fstar.map(|f| f / tau),
        y1_sharp_tau: i1.max(pj.size),
        y1_sharp_tau_minus: i1,
        passage_jump: pj.size,
        crept: path.crept,
    })
}

/// Limit-law samples and the summaries computed from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLawTable {
    pub reports: Vec<PassageReport>,
    /// P̂(ℐ₁ < ℐ₂).
    pub p_i1_lt_i2: f64,
    /// Paths with no jump above the cutoff before τ.
    pub no_prior_jump: usize,
    /// Paths whose passage was resolved as a drift crossing.
    pub crept: usize,
}

impl LimitLawTable {
    /// Favorite-site ratio in the limit: 1 when ℐ₁ < ℐ₂ (the last valley
    /// holds the most local time), otherwise the F*-fraction. Rows without a
    /// defined F*-fraction are skipped.
    pub fn favorite_mixture(&self) -> Vec<f64> {
        self.reports
            .iter()
            .filter_map(|r| if r.i1 < r.i2 { Some(1.0) } else { r.fstar_fraction })
            .collect()
    }

    pub fn column(&self, f: impl Fn(&PassageReport) -> Option<f64>) -> Vec<f64> {
        self.reports.iter().filter_map(f).collect()
    }
}

/// `n` independent passage reports; path i uses `stream.child(i)`, with
/// retries on `child(i).child(attempt)`.
pub fn limit_law_samples(n: usize, params: &LevyParams, pool: &MarkPool, stream: RngStream) -> Result<LimitLawTable> {
    params.validate()?;
    let reports = (0..n as u64)
        .into_par_iter()
        .map_init(
            || pool.drawer(),
            |drawer, i| {
                with_resample(stream, i, |s| {
                    let path = sample_levy_path(params, drawer, &mut s.rng())?;
                    passage_report(&path)
                })
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let m = reports.len().max(1) as f64;
    let lt = reports.iter().filter(|r| r.i1 < r.i2).count() as f64 / m;
    Ok(LimitLawTable {
        p_i1_lt_i2: lt,
        no_prior_jump: reports.iter().filter(|r| r.fstar_fraction.is_none()).count(),
        crept: reports.iter().filter(|r| r.crept).count(),
        reports,
    })
}

pub const PASSAGE_CSV_HEADER: &str =
    "tau,undershoot,overshoot,i1,i2,i,fstar_fraction,y1_sharp_tau,y1_sharp_tau_minus,passage_jump,crept";

pub fn write_passage_csv<W: Write>(reports: &[PassageReport], mut out: W) -> Result<()> {
    writeln!(out, "{PASSAGE_CSV_HEADER}")?;
    for r in reports {
        let f = r.fstar_fraction.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.tau,
            r.undershoot,
            r.overshoot,
            r.i1,
            r.i2,
            r.i,
            f,
            r.y1_sharp_tau,
            r.y1_sharp_tau_minus,
            r.passage_jump,
            u8::from(r.crept)
        )?;
    }
    Ok(())
}

/// C_κ = Γ(1−κ)·C₂·E[R_κ^κ], the scale of the Mittag-Leffler law of 𝒴₂⁻¹(1).
pub fn c_kappa(kappa: f64, c2: f64, mean_rk_kappa: f64) -> Result<f64> {
    Ok(gamma_fn(1.0 - kappa)? * c2 * mean_rk_kappa)
}

/// One row of [`renewal_count_transform`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformRow {
    pub u: f64,
    /// Empirical E[e^{−uτ}].
    pub empirical: f64,
    pub std_err: f64,
    /// Mittag-Leffler series at Ĉ_κ.
    pub series: f64,
    /// Heuristic bound on the cutoff bias: u·E[|Δτ|], with Δτ ≈ τ·σ(τ) and
    /// σ(τ)² the variance of the neglected small jumps of 𝒴₂ over [0, τ]
    /// (plus the uncompensated mean when compensation is off).
    pub bias_band: f64,
}

/// Empirical Laplace transform of τ = 𝒴₂⁻¹(1) over `n` paths against the
/// Mittag-Leffler series with Ĉ_κ = Γ(1−κ)·C₂·Ê[R_κ^κ].
pub fn renewal_count_transform(params: &LevyParams, pool: &MarkPool, u_grid: &[f64], n: usize, stream: RngStream) -> Result<(f64, Vec<TransformRow>)> {
    let table = limit_law_samples(n, params, pool, stream)?;
    let taus: Vec<f64> = table.reports.iter().map(|r| r.tau).collect();
    let ck = c_kappa(params.kappa, params.c2, pool.mean_pow_kappa())?;
    let var_rate = params.small_jump_variance_rate() * pool.mean_sq();
    let mean_rate = if params.compensate { 0.0 } else { params.missed_mass_rate() * pool.mean() };
    let nf = taus.len() as f64;
    let dtau = taus
        .iter()
        .map(|&t| t * ((var_rate * t).sqrt() + mean_rate * t))
        .sum::<f64>()
        / nf;
    let rows = u_grid
        .iter()
        .map(|&u| {
            let vals: Vec<f64> = taus.iter().map(|&t| (-u * t).exp()).collect();
            let m = vals.iter().sum::<f64>() / nf;
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (nf - 1.0).max(1.0);
            Ok(TransformRow {
                u,
                empirical: m,
                std_err: (var / nf).sqrt(),
                series: mittag_leffler_laplace(params.kappa, u, ck)?,
                bias_band: u * dtau,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ck, rows))
}
