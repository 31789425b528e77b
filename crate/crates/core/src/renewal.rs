//! Functionals of the drifted Bessel process W_κ↑ and of the drifted Brownian
//! motion W_κ^b, the variable R_κ, and the i.i.d. renewal tuples (S, R, e, ℓ, ℋ).
//!
//! W_κ↑ is simulated in law as |B₃(t) + (κ/2)t·e₁|, the norm of a drifted
//! three-dimensional Brownian motion, whose Gaussian increments are exact.
//! The time step adapts to how much the current position can still matter:
//! it starts at `dt_b` where the integrand is large and grows like
//! `dt_b·e^{deficit}` (capped at `dt_max`) where the integrand is
//! exponentially small.

use crate::error::{domain, Error, Result};
use crate::stats::RngStream;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselSimConfig {
    /// Base time step, used where the integrand is largest.
    pub dt_b: f64,
    /// Truncation level for the integrals making up R_κ.
    pub l_cut: f64,
    /// Target level for the hitting functionals.
    pub h: f64,
    /// Largest step the adaptive scheme may take.
    pub dt_max: f64,
    /// Step budget per path; exceeding it is a resample signal.
    pub max_steps: usize,
    /// Also test each step's Brownian bridge for a crossing of the target
    /// level. Without it crossings are detected on the discrete skeleton only,
    /// which raises the effective level by about 0.58·√dt.
    #[serde(default)]
    pub bridge: bool,
}

impl Default for BesselSimConfig {
    fn default() -> Self {
        BesselSimConfig {
            dt_b: 1e-4,
            l_cut: 30.0,
            h: 10.0,
            dt_max: 0.5,
            max_steps: 50_000_000,
            bridge: false,
        }
    }
}

impl BesselSimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_b > 0.0) || !(self.dt_max >= self.dt_b) {
            return Err(domain("need 0 < dt_b <= dt_max"));
        }
        if !(self.l_cut > 0.0) || !(self.h > 0.0) {
            return Err(domain("l_cut and h must be positive"));
        }
        if self.max_steps == 0 {
            return Err(domain("max_steps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn f(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// ∫₀^{τ(level)} e^{±W↑(s)} ds on one simulated path of W↑ from 0.
pub(crate) fn wup_integral<R: Rng>(kappa: f64, level: f64, sign: Sign, cfg: &BesselSimConfig, rng: &mut R) -> Result<f64> {
    let v = 0.5 * kappa;
    let sg = sign.f();
    let (mut x, mut y, mut z) = (0.0f64, 0.0f64, 0.0f64);
    let mut r = 0.0f64;
    let mut f_prev = 1.0;
    let mut acc = 0.0;
    let top = (sg * level).exp();
    for _ in 0..cfg.max_steps {
        // f_prev = e^{±r}, so dt_b/f_prev is dt_b·e^{r} (minus) and
        // dt_b·top/f_prev is dt_b·e^{level−r} (plus).
        let dt = match sign {
            // Depends on r only, so F⁻(h) is pathwise monotone in h.
            Sign::Minus => (cfg.dt_b / f_prev).min(cfg.dt_max),
            Sign::Plus => {
                let d = level - r;
                (cfg.dt_b * top / f_prev).min(cfg.dt_max).min(d * d / 36.0).max(cfg.dt_b)
            }
        };
        let s = dt.sqrt();
        x += v * dt + s * normal(rng);
        y += s * normal(rng);
        z += s * normal(rng);
        let r_new = (x * x + y * y + z * z).sqrt();
        if r_new >= level {
            let theta = (level - r) / (r_new - r);
            acc += 0.5 * theta * dt * (f_prev + top);
            return Ok(acc);
        }
        let f_new = (sg * r_new).exp();
        acc += 0.5 * dt * (f_prev + f_new);
        // One uniform per step whatever the level, so paths for different
        // levels stay coupled.
        if cfg.bridge && rng.random::<f64>() < (-2.0 * (level - r) * (level - r_new) / dt).exp() {
            return Ok(acc);
        }
        r = r_new;
        f_prev = f_new;
    }
    Err(Error::Resample(format!("W-up path did not reach {level} within {} steps", cfg.max_steps)))
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("kappa must lie in (0,1), got {kappa}")))
    }
}

/// F^±(h) = ∫₀^{τ(h)} e^{±W_κ↑(s)} ds, τ(h) the first hitting time of h.
pub fn sample_wup_hitting_functionals(kappa: f64, h: f64, sign: Sign, cfg: &BesselSimConfig, stream: RngStream) -> Result<f64> {
    check_kappa(kappa)?;
    cfg.validate()?;
    if !(h > 0.0) {
        return Err(domain("h must be positive"));
    }
    wup_integral(kappa, h, sign, cfg, &mut stream.rng())
}

/// R_κ = ∫₀^∞ e^{−W↑} + ∫₀^∞ e^{−W̃↑}, each integral stopped at the first
/// crossing of `cfg.l_cut` (mean neglected mass: [`rkappa_truncation_bias`]).
pub fn sample_r_kappa(kappa: f64, cfg: &BesselSimConfig, stream: RngStream) -> Result<f64> {
    check_kappa(kappa)?;
    cfg.validate()?;
    let mut rng = stream.rng();
    let a = wup_integral(kappa, cfg.l_cut, Sign::Minus, cfg, &mut rng)?;
    let b = wup_integral(kappa, cfg.l_cut, Sign::Minus, cfg, &mut rng)?;
    Ok(a + b)
}

/// G⁺(a,b) = ∫₀^{τ(a)} e^{W_κ^b(s)} ds for the (−κ/2)-drifted Brownian
/// motion W_κ^b started at b > a.
pub fn sample_g_plus(kappa: f64, a: f64, b: f64, cfg: &BesselSimConfig, stream: RngStream) -> Result<f64> {
    check_kappa(kappa)?;
    cfg.validate()?;
    if !(a < b) {
        return Err(domain(format!("sample_g_plus needs a < b, got ({a}, {b})")));
    }
    g_plus(kappa, a, b, cfg, &mut stream.rng())
}

fn g_plus<R: Rng>(kappa: f64, a: f64, b: f64, cfg: &BesselSimConfig, rng: &mut R) -> Result<f64> {
    let drift = -0.5 * kappa;
    let mut w = b;
    let mut top = b;
    // Integrate e^{w − b} and rescale at the end to stay in range.
    let mut f_prev = 1.0;
    let mut acc = 0.0;
    for _ in 0..cfg.max_steps {
        let dt = (cfg.dt_b * (top - w).exp()).min(cfg.dt_max);
        let w_new = w + drift * dt + dt.sqrt() * normal(rng);
        if w_new <= a {
            let theta = (w - a) / (w - w_new);
            acc += 0.5 * theta * dt * (f_prev + (a - b).exp());
            return Ok(acc * b.exp());
        }
        let f_new = (w_new - b).exp();
        acc += 0.5 * dt * (f_prev + f_new);
        if cfg.bridge && rng.random::<f64>() < (-2.0 * (w - a) * (w_new - a) / dt).exp() {
            return Ok(acc * b.exp());
        }
        w = w_new;
        top = top.max(w);
        f_prev = f_new;
    }
    Err(Error::Resample(format!("drifted path from {b} did not reach {a} within {} steps", cfg.max_steps)))
}

/// |B₃(t) + (κ/2)t·e₁| at a fixed time t, drawn in one Gaussian step.
pub fn sample_wup_at(kappa: f64, t: f64, stream: RngStream) -> f64 {
    let mut rng = stream.rng();
    let s = t.sqrt();
    let x = 0.5 * kappa * t + s * normal(&mut rng);
    let y = s * normal(&mut rng);
    let z = s * normal(&mut rng);
    (x * x + y * y + z * z).sqrt()
}

/// Green density of W_κ↑ from 0, killed at h, at level y < h.
fn wup_green(kappa: f64, h: f64, y: f64) -> f64 {
    let killed = if h.is_finite() { (kappa * y).exp_m1() / (kappa * h).exp_m1() } else { 0.0 };
    2.0 / kappa * (-(-kappa * y).exp_m1()) * (1.0 - killed)
}

/// E[F^±(h)], from the Green function of W_κ↑ by composite Simpson
/// quadrature; `h = ∞` is allowed for the minus sign (E[F⁻(∞)] = 2/(1+κ)).
pub fn wup_functional_mean(kappa: f64, h: f64, sign: Sign) -> Result<f64> {
    check_kappa(kappa)?;
    if !(h > 0.0) || (sign == Sign::Plus && !h.is_finite()) {
        return Err(domain("need h > 0, finite for the plus sign"));
    }
    if !h.is_finite() {
        return Ok(2.0 / (1.0 + kappa));
    }
    let n = 20_000;
    let step = h / n as f64;
    let f = |y: f64| wup_green(kappa, h, y) * (sign.f() * y).exp();
    let mut sum = f(0.0) + f(h);
    for i in 1..n {
        sum += f(i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    Ok(sum * step / 3.0)
}

/// Mean mass of R_κ lost by stopping each of its two integrals at `l_cut`:
/// 2·E[∫_{τ(L)}^∞ e^{−W↑}], in closed form from the Green function of W_κ↑.
pub fn rkappa_truncation_bias(kappa: f64, l_cut: f64) -> f64 {
    let k = kappa;
    let l = l_cut;
    let below = (1.0 - (-(1.0 - k) * l).exp()) / (1.0 - k) - 2.0 * (1.0 - (-l).exp()) + (1.0 - (-(1.0 + k) * l).exp()) / (1.0 + k);
    let above = (-l).exp() - (-(1.0 + k) * l).exp() / (1.0 + k);
    2.0 * (2.0 / (k * (k * l).exp_m1()) * below + 2.0 / k * above)
}

/// One renewal tuple; ℓ = e·S and ℋ = ℓ·R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalDraw {
    pub s: f64,
    pub r: f64,
    pub e: f64,
    pub ell: f64,
    pub big_h: f64,
}

impl RenewalDraw {
    pub fn new(s: f64, r: f64, e: f64) -> Self {
        let ell = e * s;
        RenewalDraw { s, r, e, ell, big_h: ell * r }
    }
}

/// S = F⁺(h_t) + G⁺(h_t/2, h_t), R = F⁻(h_t/2) + F⁻(h_t/2), e exponential
/// with mean 2, all five pieces independent.
pub fn sample_renewal_draw(kappa: f64, h_t: f64, cfg: &BesselSimConfig, stream: RngStream) -> Result<RenewalDraw> {
    check_kappa(kappa)?;
    cfg.validate()?;
    if !(h_t > 0.0) {
        return Err(domain("h_t must be positive"));
    }
    let mut rng = stream.rng();
    let u: f64 = rng.random();
    let e = -2.0 * (-u).ln_1p();
    let f_plus = wup_integral(kappa, h_t, Sign::Plus, cfg, &mut rng)?;
    let g = g_plus(kappa, 0.5 * h_t, h_t, cfg, &mut rng)?;
    let r1 = wup_integral(kappa, 0.5 * h_t, Sign::Minus, cfg, &mut rng)?;
    let r2 = wup_integral(kappa, 0.5 * h_t, Sign::Minus, cfg, &mut rng)?;
    Ok(RenewalDraw::new(f_plus + g, r1 + r2, e))
}

/// Number of fresh child streams tried after a resample signal.
pub const MAX_RESAMPLES: u64 = 16;

/// Runs `draw` on `stream.child(i)`; on a resample signal retries on
/// deterministic grandchildren.
pub(crate) fn with_resample<T>(stream: RngStream, i: u64, mut draw: impl FnMut(RngStream) -> Result<T>) -> Result<T> {
    let base = stream.child(i);
    let mut last = None;
    for attempt in 0..=MAX_RESAMPLES {
        let s = if attempt == 0 { base } else { base.child(attempt) };
        match draw(s) {
            Err(Error::Resample(m)) => {
                log::debug!("replica {i} attempt {attempt}: {m}");
                last = Some(m);
            }
            other => return other,
        }
    }
    Err(Error::Resample(last.unwrap_or_default()))
}

/// `n` renewal draws; draw i uses `stream.child(i)`.
pub fn sample_renewal_batch(kappa: f64, h_t: f64, cfg: &BesselSimConfig, n: usize, stream: RngStream) -> Result<Vec<RenewalDraw>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| with_resample(stream, i, |s| sample_renewal_draw(kappa, h_t, cfg, s)))
        .collect()
}

/// `n` samples of R_κ; sample i uses `stream.child(i)`.
pub fn sample_r_kappa_batch(kappa: f64, cfg: &BesselSimConfig, n: usize, stream: RngStream) -> Result<Vec<f64>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| with_resample(stream, i, |s| sample_r_kappa(kappa, cfg, s)))
        .collect()
}

/// One row of [`tail_constant_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub x: f64,
    /// x^κ e^{κφ} P̂(ℓ/t > x), to compare with C₂ = 4^κ.
    pub ell_stat: f64,
    pub ell_se: f64,
    /// x^κ e^{κφ} P̂(ℋ/t > x), to compare with C₂·E[R_κ^κ].
    pub h_stat: f64,
    pub h_se: f64,
    pub ell_exceed: usize,
    pub h_exceed: usize,
}

/// C₂ = 4^κ.
pub fn tail_constant(kappa: f64) -> f64 {
    4f64.powf(kappa)
}

/// Scaled empirical tails of ℓ/t and ℋ/t at each x, for draws generated at
/// h_t = log t − φ. A point beyond every sample yields 0.
pub fn tail_constant_check(draws: &[RenewalDraw], kappa: f64, t: f64, phi: f64, x_grid: &[f64]) -> Result<Vec<TailRow>> {
    if draws.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = draws.len() as f64;
    let mut ell: Vec<f64> = draws.iter().map(|d| d.ell / t).collect();
    let mut hh: Vec<f64> = draws.iter().map(|d| d.big_h / t).collect();
    ell.sort_by(f64::total_cmp);
    hh.sort_by(f64::total_cmp);
    let scale = |x: f64| x.powf(kappa) * (kappa * phi).exp();
    Ok(x_grid
        .iter()
        .map(|&x| {
            let ke = ell.len() - ell.partition_point(|&v| v <= x);
            let kh = hh.len() - hh.partition_point(|&v| v <= x);
            let (pe, ph) = (ke as f64 / n, kh as f64 / n);
            TailRow {
                x,
                ell_stat: scale(x) * pe,
                ell_se: scale(x) * (pe * (1.0 - pe) / n).sqrt(),
                h_stat: scale(x) * ph,
                h_se: scale(x) * (ph * (1.0 - ph) / n).sqrt(),
                ell_exceed: ke,
                h_exceed: kh,
            }
        })
        .collect())
}

pub const RENEWAL_CSV_HEADER: &str = "S,R,e,ell,H";

pub fn write_renewal_csv<W: Write>(draws: &[RenewalDraw], mut out: W) -> Result<()> {
    writeln!(out, "{RENEWAL_CSV_HEADER}")?;
    for d in draws {
        writeln!(out, "{},{},{},{},{}", d.s, d.r, d.e, d.ell, d.big_h)?;
    }
    Ok(())
}

pub fn read_renewal_csv<R: BufRead>(input: R) -> Result<Vec<RenewalDraw>> {
    let mut lines = input.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == RENEWAL_CSV_HEADER => {}
        _ => return Err(Error::Schema("renewal CSV header".into())),
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Schema(format!("bad renewal row `{line}`")))?;
        if v.len() != 5 {
            return Err(Error::Schema(format!("renewal row needs 5 fields: `{line}`")));
        }
        out.push(RenewalDraw {
            s: v[0],
            r: v[1],
            e: v[2],
            ell: v[3],
            big_h: v[4],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, std_err};
    use approx::assert_relative_eq;

    fn cfg(dt_b: f64) -> BesselSimConfig {
        BesselSimConfig {
            dt_b,
            ..BesselSimConfig::default()
        }
    }

    fn bridged(dt_b: f64) -> BesselSimConfig {
        BesselSimConfig {
            bridge: true,
            ..cfg(dt_b)
        }
    }

    #[test]
    fn green_function_means_match_reference() {
        // Reference values by adaptive high-precision quadrature.
        let cases = [
            (0.5, 1.0, Sign::Minus, 0.206_424_162_328_233_965_85),
            (0.5, 3.0, Sign::Minus, 0.804_702_330_761_339_046_82),
            (0.3, 2.0, Sign::Minus, 0.538_208_664_755_010_248_46),
            (0.7, 5.0, Sign::Minus, 1.051_590_244_683_851_335_99),
            (0.5, 2.0, Sign::Plus, 3.936_656_589_350_079_675_35),
            (0.5, 6.0, Sign::Plus, 485.676_959_528_479_716_17),
            (0.3, 4.0, Sign::Plus, 56.390_797_922_849_208_22),
        ];
        for (k, h, s, want) in cases {
            assert_relative_eq!(wup_functional_mean(k, h, s).unwrap(), want, max_relative = 1e-9);
        }
        assert_relative_eq!(wup_functional_mean(0.5, f64::INFINITY, Sign::Minus).unwrap(), 4.0 / 3.0);
    }

    #[test]
    fn truncation_bias_is_the_missing_mean() {
        for k in [0.3, 0.5, 0.7] {
            for l in [1.0, 4.0, 10.0] {
                let missing = 2.0 * (2.0 / (1.0 + k) - wup_functional_mean(k, l, Sign::Minus).unwrap());
                assert_relative_eq!(rkappa_truncation_bias(k, l), missing, max_relative = 1e-7);
            }
        }
        assert!(rkappa_truncation_bias(0.5, 30.0) < 1e-5);
    }

    #[test]
    fn wup_second_moment() {
        let (k, t) = (0.6, 2.5);
        let v = k / 2.0;
        let xs: Vec<f64> = (0..40_000).map(|i| sample_wup_at(k, t, RngStream::new(21, i)).powi(2)).collect();
        let want = 3.0 * t + v * v * t * t;
        assert!((mean(&xs) - want).abs() < 3.0 * std_err(&xs));
    }

    #[test]
    fn f_minus_mean_matches_green_function() {
        let c = bridged(1e-3);
        for (k, h) in [(0.5, 1.0), (0.3, 2.0), (0.7, 5.0)] {
            let xs: Vec<f64> = (0..20_000)
                .map(|i| sample_wup_hitting_functionals(k, h, Sign::Minus, &c, RngStream::new(22, i)).unwrap())
                .collect();
            let want = wup_functional_mean(k, h, Sign::Minus).unwrap();
            assert!((mean(&xs) - want).abs() < 3.0 * std_err(&xs), "k={k} h={h}: {} vs {want}", mean(&xs));
        }
    }

    #[test]
    fn f_plus_mean_matches_green_function() {
        let c = bridged(1e-3);
        for (k, h) in [(0.5, 2.0), (0.3, 4.0)] {
            let xs: Vec<f64> = (0..20_000)
                .map(|i| sample_wup_hitting_functionals(k, h, Sign::Plus, &c, RngStream::new(23, i)).unwrap())
                .collect();
            let want = wup_functional_mean(k, h, Sign::Plus).unwrap();
            assert!((mean(&xs) - want).abs() < 3.0 * std_err(&xs), "k={k} h={h}: {} vs {want}", mean(&xs));
        }
    }

    #[test]
    fn f_minus_monotone_in_h_pathwise() {
        for (i, c) in (0..200).flat_map(|i| [(i, cfg(1e-3)), (i, bridged(1e-3))]) {
            let mut prev = 0.0;
            for h in [0.01, 0.5, 1.0, 2.0, 5.0] {
                let v = sample_wup_hitting_functionals(0.5, h, Sign::Minus, &c, RngStream::new(24, i)).unwrap();
                assert!(v >= prev, "path {i}, h {h}");
                prev = v;
            }
            assert!(prev > 0.0);
        }
    }

    #[test]
    fn functionals_vanish_as_h_shrinks() {
        let c = cfg(1e-5);
        for i in 0..50 {
            let v = sample_wup_hitting_functionals(0.5, 1e-3, Sign::Plus, &c, RngStream::new(25, i)).unwrap();
            assert!(v > 0.0 && v < 1e-4);
        }
    }

    #[test]
    fn r_kappa_positive_and_mean() {
        let c = cfg(1e-3);
        let xs = sample_r_kappa_batch(0.5, &c, 20_000, RngStream::new(26, 0)).unwrap();
        assert!(xs.iter().all(|&x| x > 0.0));
        let want = crate::specialfn::rkappa_mean(0.5).unwrap();
        assert!((mean(&xs) - want).abs() < 3.0 * std_err(&xs), "{} vs {want}", mean(&xs));
    }

    #[test]
    fn g_plus_small_gap_is_small() {
        let c = cfg(1e-5);
        let v = sample_g_plus(0.5, 9.999, 10.0, &c, RngStream::new(27, 0)).unwrap();
        assert!(v < 1e-3 * 10f64.exp());
        assert!(sample_g_plus(0.5, 2.0, 1.0, &c, RngStream::new(27, 0)).is_err());
    }

    #[test]
    fn g_plus_quantiles_stable_under_doubling() {
        // The mean of G⁺ is infinite for κ < 1 (the path may climb far above b);
        // quantiles are the stable summaries.
        let c = cfg(1e-2);
        let draw = |seed: u64, n: u64| -> Vec<f64> {
            (0..n)
                .map(|i| sample_g_plus(0.5, 5.0, 10.0, &c, RngStream::new(seed, i)).unwrap() / 10f64.exp())
                .collect()
        };
        let a = crate::stats::Ecdf::new(&draw(28, 4000)).unwrap();
        let b = crate::stats::Ecdf::new(&draw(29, 8000)).unwrap();
        for p in [0.25, 0.5, 0.75] {
            let (qa, qb) = (a.quantile(p), b.quantile(p));
            assert!((qa - qb).abs() / qb < 0.1, "p {p}: {qa} vs {qb}");
        }
        // P(G⁺(h/2,h) ≤ b·e^h) grows with b, slowly: the tail decays like b^{−κ}.
        let mut prev = 0.0;
        for mult in [0.5, 2.0, 10.0, 100.0, 1e4] {
            let p = b.eval(mult);
            assert!(p >= prev);
            prev = p;
        }
        assert!(prev > 0.9);
    }

    #[test]
    fn renewal_draw_identities() {
        let c = cfg(1e-2);
        let ds = sample_renewal_batch(0.5, 6.0, &c, 200, RngStream::new(30, 0)).unwrap();
        for d in &ds {
            assert!(d.s > 0.0 && d.r > 0.0 && d.e > 0.0);
            assert_eq!(d.ell, d.e * d.s);
            assert_eq!(d.big_h, d.ell * d.r);
            assert_relative_eq!(d.big_h / d.ell, d.r, max_relative = 1e-15);
        }
    }

    #[test]
    fn exponential_mean_two() {
        let c = cfg(1e-1);
        let es: Vec<f64> = sample_renewal_batch(0.5, 2.0, &c, 100_000, RngStream::new(31, 0))
            .unwrap()
            .iter()
            .map(|d| d.e)
            .collect();
        assert!((mean(&es) - 2.0).abs() < 3.0 * std_err(&es));
    }

    #[test]
    fn tail_check_edge_cases() {
        assert!(matches!(tail_constant_check(&[], 0.5, 1.0, 1.0, &[1.0]), Err(Error::EmptySample)));
        let d = [RenewalDraw::new(1.0, 1.0, 1.0)];
        let rows = tail_constant_check(&d, 0.5, 1.0, 0.0, &[10.0]).unwrap();
        assert_eq!(rows[0].ell_stat, 0.0);
        assert_eq!(tail_constant(0.5), 2.0);
    }

    #[test]
    fn csv_round_trip() {
        let ds = sample_renewal_batch(0.5, 4.0, &cfg(1e-2), 20, RngStream::new(32, 0)).unwrap();
        let mut buf = Vec::new();
        write_renewal_csv(&ds, &mut buf).unwrap();
        assert_eq!(read_renewal_csv(&buf[..]).unwrap(), ds);
    }
}
