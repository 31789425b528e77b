//! The quenched environment: a two-sided drifted Brownian potential
//! W_κ(x) = W(x) − κx/2 sampled on a grid and interpolated linearly, and its
//! exponential functionals A(r) = ∫₀^r e^{W_κ}.

use crate::error::{domain, Error, Result};
use crate::stats::RngStream;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// How far to extend the path on each side of the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtentPolicy {
    /// Extend right until W_κ has fallen this far below its running maximum.
    pub stop_depth: f64,
    /// Extend left until W_κ exceeds W_κ(0) by this much.
    pub left_barrier: f64,
    /// Before the `stop_depth` rule applies, require a rise of this height
    /// above the running minimum. A diffusion run for time t cannot cross a
    /// rise much higher than log t, so this keeps it inside the path.
    #[serde(default)]
    pub right_rise: Option<f64>,
    /// Never stop before this right extent.
    #[serde(default)]
    pub min_right: f64,
    /// Upper bound on nodes per side; exceeding it is an extent overflow.
    pub max_nodes: usize,
}

impl Default for ExtentPolicy {
    fn default() -> Self {
        ExtentPolicy {
            stop_depth: 30.0,
            left_barrier: 30.0,
            right_rise: None,
            min_right: 0.0,
            max_nodes: 50_000_000,
        }
    }
}

impl ExtentPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.stop_depth >= 0.0) || !(self.left_barrier > 0.0) {
            return Err(domain("stop_depth must be nonnegative and left_barrier positive"));
        }
        if matches!(self.right_rise, Some(r) if !(r > 0.0)) {
            return Err(domain("right_rise must be positive"));
        }
        if self.max_nodes < 2 {
            return Err(domain("max_nodes must be at least 2"));
        }
        Ok(())
    }
}

/// W_κ on the grid `x_j = (j − origin)·grid_step`, linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPath {
    pub kappa: f64,
    pub grid_step: f64,
    /// Index of x = 0.
    pub origin: usize,
    pub values: Vec<f64>,
    /// The stream the path was drawn from, if it was sampled.
    pub seed: Option<RngStream>,
}

impl PotentialPath {
    /// A path from explicit node values; `values[origin]` must be 0.
    pub fn from_values(kappa: f64, grid_step: f64, origin: usize, values: Vec<f64>) -> Result<Self> {
        if !(grid_step > 0.0) {
            return Err(domain("grid_step must be positive"));
        }
        if values.len() < 2 || origin >= values.len() {
            return Err(domain("need at least two nodes and an origin inside the array"));
        }
        if values[origin] != 0.0 {
            return Err(domain("path must vanish at the origin"));
        }
        Ok(PotentialPath {
            kappa,
            grid_step,
            origin,
            values,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn left_extent(&self) -> f64 {
        self.origin as f64 * self.grid_step
    }

    pub fn right_extent(&self) -> f64 {
        (self.values.len() - 1 - self.origin) as f64 * self.grid_step
    }

    pub fn x_at(&self, index: usize) -> f64 {
        (index as f64 - self.origin as f64) * self.grid_step
    }

    /// Fractional grid coordinate of x.
    pub fn coord(&self, x: f64) -> f64 {
        x / self.grid_step + self.origin as f64
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= -self.left_extent() && x <= self.right_extent()
    }

    /// The interpolated potential at x.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::Extent {
                coordinate: format!("x = {x}"),
            });
        }
        let c = self.coord(x);
        let j = (c.floor() as usize).min(self.values.len() - 2);
        let f = c - j as f64;
        Ok(self.values[j] + f * (self.values[j + 1] - self.values[j]))
    }

    /// Slope of the segment containing x; at a node the segment to its right.
    pub fn slope_at(&self, x: f64) -> f64 {
        let c = self.coord(x).clamp(0.0, (self.values.len() - 1) as f64);
        let j = (c.floor() as usize).min(self.values.len() - 2);
        (self.values[j + 1] - self.values[j]) / self.grid_step
    }

    /// Brownian-bridge refinement to half the grid step: old nodes are kept,
    /// midpoints are drawn from the bridge law of the drifted motion.
    pub fn refine(&self, stream: RngStream) -> PotentialPath {
        let mut rng = stream.rng();
        let sd = (self.grid_step / 4.0).sqrt();
        let mut values = Vec::with_capacity(2 * self.values.len() - 1);
        for w in self.values.windows(2) {
            values.push(w[0]);
            let z: f64 = rng.sample(StandardNormal);
            values.push(0.5 * (w[0] + w[1]) + sd * z);
        }
        values.push(*self.values.last().unwrap());
        PotentialPath {
            kappa: self.kappa,
            grid_step: self.grid_step / 2.0,
            origin: 2 * self.origin,
            values,
            seed: self.seed,
        }
    }

    /// Writes the path as CSV: a header row of metadata, one data row, then
    /// the node values one per line under a `value` header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "kappa,grid_step,left_extent,right_extent,origin,base_seed,stream_id")?;
        let (bs, sid) = match self.seed {
            Some(s) => (s.base_seed.to_string(), s.stream_id.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            self.kappa,
            self.grid_step,
            self.left_extent(),
            self.right_extent(),
            self.origin,
            bs,
            sid
        )?;
        writeln!(out, "value")?;
        for v in &self.values {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let bad = |m: &str| Error::Schema(format!("potential CSV: {m}"));
        let header = lines.next().ok_or_else(|| bad("missing header"))??;
        if header.trim() != "kappa,grid_step,left_extent,right_extent,origin,base_seed,stream_id" {
            return Err(bad("unexpected header"));
        }
        let meta = lines.next().ok_or_else(|| bad("missing metadata row"))??;
        let f: Vec<&str> = meta.trim().split(',').collect();
        if f.len() != 7 {
            return Err(bad("metadata row needs 7 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let kappa = num(f[0])?;
        let grid_step = num(f[1])?;
        let origin: usize = f[4].parse().map_err(|_| bad("bad origin"))?;
        let seed = if f[5].is_empty() {
            None
        } else {
            Some(RngStream::new(
                f[5].parse().map_err(|_| bad("bad seed"))?,
                f[6].parse().map_err(|_| bad("bad stream"))?,
            ))
        };
        if lines.next().transpose()?.as_deref().map(str::trim) != Some("value") {
            return Err(bad("missing value header"));
        }
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                values.push(num(line.trim())?);
            }
        }
        let mut path = PotentialPath::from_values(kappa, grid_step, origin, values)?;
        path.seed = seed;
        Ok(path)
    }
}

/// Samples W_κ on both sides of 0 until `policy` is met.
///
/// The right half uses the stream's child 1 and the left half child 2, so a
/// longer path drawn from the same stream extends a shorter one node for node.
pub fn sample_potential(
    kappa: f64,
    grid_step: f64,
    policy: &ExtentPolicy,
    stream: RngStream,
) -> Result<PotentialPath> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(domain(format!("kappa must lie in (0,1), got {kappa}")));
    }
    if !(grid_step > 0.0) {
        return Err(domain("grid_step must be positive"));
    }
    policy.validate()?;
    let mean = -0.5 * kappa * grid_step;
    let sd = grid_step.sqrt();

    let mut rng = stream.child(1).rng();
    let mut right = vec![0.0];
    let mut w: f64 = 0.0;
    let mut run_min: f64 = 0.0;
    let mut run_max: f64 = 0.0;
    let mut risen = policy.right_rise.is_none();
    let min_nodes = (policy.min_right / grid_step - 1e-9).ceil().max(0.0) as usize;
    loop {
        if right.len() > min_nodes && risen && w <= run_max - policy.stop_depth {
            break;
        }
        if right.len() >= policy.max_nodes {
            return Err(Error::Resample(format!(
                "right extent overflow after {} nodes",
                right.len()
            )));
        }
        let z: f64 = rng.sample(StandardNormal);
        w += mean + sd * z;
        right.push(w);
        if !risen {
            run_min = run_min.min(w);
            if w - run_min >= policy.right_rise.unwrap() {
                risen = true;
                run_max = w;
            }
        } else {
            run_max = run_max.max(w);
        }
    }

    let mut rng = stream.child(2).rng();
    let mut left = Vec::new();
    let mut w: f64 = 0.0;
    while w < policy.left_barrier {
        if left.len() >= policy.max_nodes {
            return Err(Error::Resample(format!("left extent overflow after {} nodes", left.len())));
        }
        let z: f64 = rng.sample(StandardNormal);
        w += -mean + sd * z;
        left.push(w);
    }

    let origin = left.len();
    let mut values = Vec::with_capacity(left.len() + right.len());
    values.extend(left.iter().rev());
    values.extend(right);
    Ok(PotentialPath {
        kappa,
        grid_step,
        origin,
        values,
        seed: Some(stream),
    })
}

/// ∫_{x_j}^{x_j + f·Δx} e^{W} over a fraction f of segment j.
fn segment_integral(a: f64, b: f64, dx: f64, frac: f64) -> f64 {
    let d = (b - a) * frac;
    let g = if d.abs() < 1e-12 { 1.0 + 0.5 * d } else { d.exp_m1() / d };
    a.exp() * g * dx * frac
}

/// A(r) = ∫₀^r e^{W_κ(x)} dx, exact for the interpolated path (negative for r < 0).
pub fn a_integral(path: &PotentialPath, r: f64) -> Result<f64> {
    if !path.contains(r) {
        return Err(Error::Extent {
            coordinate: format!("A({r})"),
        });
    }
    let v = &path.values;
    let dx = path.grid_step;
    let c = path.coord(r);
    let o = path.origin;
    let mut sum = 0.0;
    if r >= 0.0 {
        let full = c.floor() as usize;
        for j in o..full.min(v.len() - 1) {
            sum += segment_integral(v[j], v[j + 1], dx, 1.0);
        }
        let frac = c - full as f64;
        if frac > 0.0 && full + 1 < v.len() {
            sum += segment_integral(v[full], v[full + 1], dx, frac);
        }
        Ok(sum)
    } else {
        let full = c.ceil() as usize;
        for j in (full + 1..=o).rev() {
            sum += segment_integral(v[j], v[j - 1], dx, 1.0);
        }
        let frac = full as f64 - c;
        if frac > 0.0 {
            sum += segment_integral(v[full], v[full - 1], dx, frac);
        }
        Ok(-sum)
    }
}

/// Deepest terminal value accepted as "far below 0" by [`a_infinity`].
pub const A_INFINITY_MIN_DEPTH: f64 = 20.0;

/// A_∞ = A(right extent). The neglected tail equals e^{W_κ(end)} times an
/// independent copy of A_∞; see [`a_infinity_tail_factor`].
pub fn a_infinity(path: &PotentialPath) -> Result<f64> {
    let end = *path.values.last().unwrap();
    if end > -A_INFINITY_MIN_DEPTH {
        return Err(Error::Extent {
            coordinate: format!("A_inf: path ends at {end}, not below -{A_INFINITY_MIN_DEPTH}"),
        });
    }
    a_integral(path, path.right_extent())
}

/// A_∞ on a fresh right half-path (the increments of [`sample_potential`]'s
/// right side), integrated until W_κ first drops below −`depth`. The omitted
/// tail is e^{−depth} times an independent copy of A_∞.
pub fn sample_a_infinity(kappa: f64, grid_step: f64, depth: f64, stream: RngStream) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(domain(format!("kappa must lie in (0,1), got {kappa}")));
    }
    if !(grid_step > 0.0 && depth > 0.0) {
        return Err(domain("grid_step and depth must be positive"));
    }
    let mean = -0.5 * kappa * grid_step;
    let sd = grid_step.sqrt();
    let mut rng = stream.child(1).rng();
    let (mut w, mut sum) = (0.0f64, 0.0);
    while w > -depth {
        let z: f64 = rng.sample(StandardNormal);
        let next = w + mean + sd * z;
        sum += segment_integral(w, next, grid_step, 1.0);
        w = next;
    }
    Ok(sum)
}

/// e^{W_κ(end)}: the factor multiplying the neglected tail of A_∞.
pub fn a_infinity_tail_factor(path: &PotentialPath) -> f64 {
    path.values.last().unwrap().exp()
}
