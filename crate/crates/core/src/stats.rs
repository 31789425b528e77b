//! ECDFs, Kolmogorov-Smirnov and contingency tests, confidence intervals and
//! reproducible random-number streams.

use crate::error::{domain, Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// A reproducible random stream: one ChaCha8 key (`base_seed`) and one of its
/// 2^64 independent streams (`stream_id`).
///
/// Replica `k` of an experiment uses `RngStream::new(seed, k)` (or a child of
/// it), so its draws do not depend on how replicas are spread across workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub base_seed: u64,
    pub stream_id: u64,
}

/// The splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        RngStream { base_seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A derived stream, keyed by `tag`. Children with different tags (or of
    /// different parents) are distinct streams of the same key.
    pub fn child(&self, tag: u64) -> RngStream {
        RngStream {
            base_seed: self.base_seed,
            stream_id: splitmix64(splitmix64(self.stream_id) ^ tag.rotate_left(17) ^ 0x5851_f42d_4c95_7f2d),
        }
    }
}

/// Empirical distribution function of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(domain("ECDF sample contains NaN"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Ecdf { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of the sample ≤ x.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Fraction of the sample > x.
    pub fn survival(&self, x: f64) -> f64 {
        1.0 - self.eval(x)
    }

    /// Lower empirical quantile.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let i = ((p.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[i - 1]
    }

    /// Plot-ready step points `(x_i, i/n)`.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, (i + 1) as f64 / n))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic Kolmogorov p-value.
    pub p_value: f64,
}

/// Kolmogorov's limiting survival function Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p(en: f64, d: f64) -> f64 {
    kolmogorov_q((en + 0.12 + 0.11 / en) * d)
}

/// One-sample KS test of `samples` against a continuous `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.len() < 10 {
        return Err(Error::TinySample {
            got: samples.len(),
            min: 10,
        });
    }
    let ecdf = Ecdf::new(samples)?;
    let n = ecdf.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in ecdf.sorted().iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p(n.sqrt(), d),
    })
}

/// Two-sample KS statistic: the largest gap between the two ECDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let ea = Ecdf::new(a)?;
    let eb = Ecdf::new(b)?;
    let (xa, xb) = (ea.sorted(), eb.sorted());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: ks_p(en, d),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn rank_cells(values: &[f64], k: usize) -> Vec<usize> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut cell = vec![0; n];
    for (rank, &i) in idx.iter().enumerate() {
        cell[i] = rank * k / n;
    }
    cell
}

/// Chi-square test of independence on the k×k grid of empirical quantiles.
pub fn grid_independence(pairs: &[(f64, f64)], k: usize) -> Result<ChiSquareResult> {
    if k < 2 {
        return Err(domain("grid_independence needs k >= 2"));
    }
    let need = 10 * k * k;
    if pairs.len() < need {
        return Err(Error::SparseCells {
            n: pairs.len(),
            k,
            need,
        });
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (cx, cy) = (rank_cells(&xs, k), rank_cells(&ys, k));
    let mut table = vec![0usize; k * k];
    for (a, b) in cx.iter().zip(&cy) {
        table[a * k + b] += 1;
    }
    let n = pairs.len() as f64;
    let mut row = vec![0usize; k];
    let mut col = vec![0usize; k];
    for a in 0..k {
        for b in 0..k {
            row[a] += table[a * k + b];
            col[b] += table[a * k + b];
        }
    }
    let mut stat = 0.0;
    for a in 0..k {
        for b in 0..k {
            let e = row[a] as f64 * col[b] as f64 / n;
            let o = table[a * k + b] as f64;
            stat += (o - e) * (o - e) / e;
        }
    }
    let dof = (k - 1) * (k - 1);
    let chi = ChiSquared::new(dof as f64).map_err(|e| domain(e.to_string()))?;
    Ok(ChiSquareResult {
        statistic: stat,
        dof,
        p_value: 1.0 - chi.cdf(stat),
    })
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Unbiased sample variance.
pub fn variance(samples: &[f64]) -> f64 {
    let m = mean(samples);
    samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (samples.len() as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn std_err(samples: &[f64]) -> f64 {
    (variance(samples) / samples.len() as f64).sqrt()
}

/// Normal-approximation confidence interval: `(mean, half_width)`.
pub fn mean_ci(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::TinySample {
            got: samples.len(),
            min: 2,
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(domain(format!("confidence level must lie in (0,1), got {level}")));
    }
    let z = Normal::standard().inverse_cdf(0.5 + 0.5 * level);
    Ok((mean(samples), z * std_err(samples)))
}

/// Pearson correlation coefficient.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn uniforms(stream: RngStream, n: usize) -> Vec<f64> {
        let mut rng = stream.rng();
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = uniforms(RngStream::new(7, 3), 16);
        assert_eq!(a, uniforms(RngStream::new(7, 3), 16));
        assert_ne!(a, uniforms(RngStream::new(7, 4), 16));
        assert_ne!(a, uniforms(RngStream::new(8, 3), 16));
        let s = RngStream::new(7, 3);
        assert_ne!(s.child(0), s.child(1));
        assert_ne!(s.child(0), RngStream::new(7, 4).child(0));
        assert_eq!(s.child(5), s.child(5));
    }

    #[test]
    fn ecdf_basics() {
        let e = Ecdf::new(&[3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.sorted(), &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(2.0), 0.75);
        assert_eq!(e.eval(3.0), 1.0);
        assert_eq!(e.quantile(0.5), 2.0);
        assert_eq!(e.quantile(1.0), 3.0);
        assert!(Ecdf::new(&[]).is_err());
    }

    #[test]
    fn ks_rejects_tiny_samples() {
        assert!(matches!(ks_one_sample(&[0.5], |x| x), Err(Error::TinySample { .. })));
    }

    #[test]
    fn ks_constant_sample_against_uniform() {
        let r = ks_one_sample(&[0.5; 100], |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.statistic >= 0.5);
    }

    #[test]
    fn ks_against_own_ecdf_is_one_step() {
        let xs = uniforms(RngStream::new(1, 1), 500);
        let e = Ecdf::new(&xs).unwrap();
        let r = ks_one_sample(&xs, |x| e.eval(x)).unwrap();
        assert!(r.statistic <= 1.0 / 500.0 + 1e-12);
    }

    #[test]
    fn ks_one_percent_point_calibrated() {
        // Under the null, D exceeds 1.63/√n about 1% of the time.
        let reps = 1000;
        let n = 10_000;
        let crit = 1.63 / (n as f64).sqrt();
        let exceed = (0..reps)
            .filter(|&r| {
                let xs = uniforms(RngStream::new(99, r), n);
                ks_one_sample(&xs, |x| x).unwrap().statistic >= crit
            })
            .count();
        let rate = exceed as f64 / reps as f64;
        let se = (0.01f64 * 0.99 / reps as f64).sqrt();
        assert!(rate <= 0.01 + 3.0 * se, "rate {rate}");
    }

    #[test]
    fn ks_p_value_matches_kolmogorov_table() {
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_q(1.63) - 0.0098).abs() < 1e-3);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn ks_two_sample_extremes() {
        let a = uniforms(RngStream::new(2, 0), 300);
        assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 5.0).collect();
        assert_eq!(ks_two_sample(&a, &b).unwrap().statistic, 1.0);
        assert_eq!(ks_two_sample(&[1.0; 10], &[2.0; 7]).unwrap().statistic, 1.0);
        assert!(ks_two_sample(&a, &[]).is_err());
    }

    #[test]
    fn ks_two_sample_matches_brute_force() {
        let a = uniforms(RngStream::new(3, 0), 137);
        let b: Vec<f64> = uniforms(RngStream::new(3, 1), 211).iter().map(|x| x * 1.1).collect();
        let (ea, eb) = (Ecdf::new(&a).unwrap(), Ecdf::new(&b).unwrap());
        let brute = a
            .iter()
            .chain(&b)
            .map(|&x| (ea.eval(x) - eb.eval(x)).abs())
            .fold(0.0, f64::max);
        assert_eq!(ks_two_sample(&a, &b).unwrap().statistic, brute);
    }

    #[test]
    fn ks_two_sample_random_split_is_null() {
        // Random halves of one pool: the p-values should look uniform, so
        // rejections at 1% stay rare.
        let mut rejects = 0;
        for r in 0..200 {
            let xs = uniforms(RngStream::new(4, r), 2000);
            let res = ks_two_sample(&xs[..1000], &xs[1000..]).unwrap();
            if res.p_value < 0.01 {
                rejects += 1;
            }
        }
        assert!(rejects <= 6, "{rejects} rejections");
    }

    #[test]
    fn grid_independence_detects_dependence() {
        let xs = uniforms(RngStream::new(5, 0), 1000);
        let pairs: Vec<(f64, f64)> = xs.iter().map(|&x| (x, x)).collect();
        let r = grid_independence(&pairs, 4).unwrap();
        assert_eq!(r.dof, 9);
        assert!(r.statistic > 100.0 && r.p_value < 1e-10);
    }

    #[test]
    fn grid_independence_calibrated_under_null() {
        let reps = 500;
        let mut rejects = 0;
        for r in 0..reps {
            let xs = uniforms(RngStream::new(6, r), 2000);
            let pairs: Vec<(f64, f64)> = xs.chunks(2).map(|c| (c[0], c[1])).collect();
            if grid_independence(&pairs, 4).unwrap().p_value < 0.01 {
                rejects += 1;
            }
        }
        assert!(rejects as f64 / reps as f64 <= 0.02, "{rejects} rejections");
    }

    #[test]
    fn grid_independence_needs_enough_pairs() {
        let pairs = vec![(0.0, 0.0); 159];
        assert!(matches!(grid_independence(&pairs, 4), Err(Error::SparseCells { .. })));
    }

    #[test]
    fn mean_ci_cases() {
        assert_eq!(mean_ci(&[2.0; 5], 0.95).unwrap(), (2.0, 0.0));
        assert!(mean_ci(&[1.0], 0.95).is_err());
        let mut covered = 0;
        for r in 0..400 {
            let mut rng = RngStream::new(8, r).rng();
            let xs: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
            let (m, hw) = mean_ci(&xs, 0.95).unwrap();
            assert!((hw - 1.96e-2).abs() < 1e-3);
            if m.abs() <= 0.0196 {
                covered += 1;
            }
        }
        let rate = covered as f64 / 400.0;
        assert!((rate - 0.95).abs() < 3.0 * (0.95f64 * 0.05 / 400.0).sqrt(), "coverage {rate}");
    }
}
