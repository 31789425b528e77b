//! The diffusion X in a fixed potential: simulation, local-time field and the
//! observables H(r), N_t, ℒ*(t), F_t*.
//!
//! Two engines are available. [`Engine::Euler`] is Euler–Maruyama with drift
//! −½·W'(X). [`Engine::GridWalk`] moves between neighbouring nodes of a
//! lattice (every m-th potential node) with the exact exit probabilities of
//! the diffusion in the piecewise-linear potential and advances time by the
//! exact mean exit time; it reaches t = 10⁶ in about 10⁸ cheap steps. Its
//! local-time field holds expected point values on the potential grid.

use crate::environment::{sample_potential, ExtentPolicy, PotentialPath};
use crate::error::{config, Error, Result};
use crate::extrema::ValleyRecord;
use crate::stats::RngStream;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Euler,
    GridWalk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub t_max: f64,
    /// Euler step; ignored by the grid walk.
    pub dt: f64,
    /// β in φ(t) = (log t)^β.
    pub phi_exponent: f64,
    /// Local-time bin width, a whole multiple of the potential grid step.
    /// The grid walk reports on the potential grid itself.
    pub bin_width: f64,
    pub engine: Engine,
    /// Grid-walk lattice spacing, a whole multiple of the potential grid
    /// step; the potential grid step when absent.
    #[serde(default)]
    pub walk_step: Option<f64>,
    /// Keep every k-th position in the trajectory.
    pub record_every: usize,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            t_max: 1e4,
            dt: 1e-3,
            phi_exponent: 0.5,
            bin_width: 0.1,
            engine: Engine::GridWalk,
            walk_step: None,
            record_every: 1000,
        }
    }
}

/// φ(t) = (log t)^β.
pub fn phi(t: f64, beta: f64) -> f64 {
    t.ln().powf(beta)
}

impl DiffusionConfig {
    pub fn phi(&self) -> f64 {
        phi(self.t_max, self.phi_exponent)
    }

    /// h_t = log t − φ(t).
    pub fn h_t(&self) -> f64 {
        self.t_max.ln() - self.phi()
    }

    pub fn validate(&self, grid_step: f64) -> Result<()> {
        if !(self.t_max > 1.0) {
            return Err(config("t_max", "must exceed 1"));
        }
        if !(self.dt > 0.0) {
            return Err(config("dt", "must be positive"));
        }
        if !(self.phi_exponent > 0.0 && self.phi_exponent < 1.0) {
            return Err(config("phi_exponent", "must lie in (0,1)"));
        }
        if !(self.h_t() > 0.0) {
            return Err(config("t_max", "h_t = log t - phi(t) must be positive"));
        }
        if self.record_every == 0 {
            return Err(config("record_every", "must be at least 1"));
        }
        whole_multiple("bin_width", self.bin_width, grid_step)?;
        if self.engine == Engine::GridWalk {
            if (self.bin_width - grid_step).abs() > 1e-9 * grid_step {
                return Err(config("bin_width", "the grid walk reports on the potential grid; set it to the grid step"));
            }
            if let Some(w) = self.walk_step {
                whole_multiple("walk_step", w, grid_step)?;
            }
        }
        if self.engine == Engine::Euler && self.dt > 0.1 * self.bin_width * self.bin_width {
            return Err(config("dt", "must be well below bin_width^2"));
        }
        Ok(())
    }
}

/// First passage over a requested level, with ℒ* at that moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitRecord {
    pub level: f64,
    pub time: Option<f64>,
    /// ℒ*(H(level)).
    pub lstar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Thinned step times, starting at 0.
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub running_max: f64,
    pub final_time: f64,
    pub final_position: f64,
    pub hits: Vec<HitRecord>,
    pub steps: u64,
}

impl Trajectory {
    /// A trajectory from explicit samples (no recorded hits).
    pub fn from_samples(times: Vec<f64>, positions: Vec<f64>) -> Self {
        let running_max = positions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Trajectory {
            final_time: *times.last().unwrap_or(&0.0),
            final_position: *positions.last().unwrap_or(&0.0),
            steps: times.len().saturating_sub(1) as u64,
            times,
            positions,
            running_max,
            hits: Vec::new(),
        }
    }
}

/// Occupation times in bins of width `bin_width` centred at j·bin_width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeField {
    pub bin_width: f64,
    /// Bin index of `occupation[0]`.
    pub first_bin: i64,
    /// Time spent in each bin.
    pub occupation: Vec<f64>,
    /// Point local time at each bin centre, when the engine knows it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    pub elapsed: f64,
}

impl LocalTimeField {
    pub fn from_occupation(bin_width: f64, first_bin: i64, occupation: Vec<f64>) -> Self {
        let elapsed = occupation.iter().sum();
        LocalTimeField {
            bin_width,
            first_bin,
            occupation,
            point: None,
            elapsed,
        }
    }

    pub fn len(&self) -> usize {
        self.occupation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupation.is_empty()
    }

    pub fn center(&self, k: usize) -> f64 {
        (self.first_bin + k as i64) as f64 * self.bin_width
    }

    /// ℒ(t, center(k)): the point value if present, else occupation / bin_width.
    pub fn density(&self, k: usize) -> f64 {
        match &self.point {
            Some(p) => p[k],
            None => self.occupation[k] / self.bin_width,
        }
    }

    pub fn densities(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.density(k)).collect()
    }

    /// Largest density over bins centred strictly left of 0.
    pub fn sup_negative(&self) -> f64 {
        (0..self.len())
            .filter(|&k| self.center(k) < 0.0)
            .map(|k| self.density(k))
            .fold(0.0, f64::max)
    }
}

/// (ℒ*, F*): the largest density and the leftmost bin centre attaining it.
pub fn sup_local_time(field: &LocalTimeField) -> Result<(f64, f64)> {
    if field.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut best = 0;
    for k in 1..field.len() {
        if field.density(k) > field.density(best) {
            best = k;
        }
    }
    Ok((field.density(best), field.center(best)))
}

pub const RIGHT_EXIT: &str = "diffusion beyond right extent";
pub const LEFT_EXIT: &str = "diffusion beyond left extent";

pub fn simulate(path: &PotentialPath, cfg: &DiffusionConfig, stream: RngStream) -> Result<(Trajectory, LocalTimeField)> {
    simulate_with_levels(path, cfg, &[], stream)
}

/// Runs X up to `cfg.t_max`, recording H(r) and ℒ*(H(r)) for each level.
pub fn simulate_with_levels(path: &PotentialPath, cfg: &DiffusionConfig, levels: &[f64], stream: RngStream) -> Result<(Trajectory, LocalTimeField)> {
    cfg.validate(path.grid_step)?;
    let mut levels = levels.to_vec();
    levels.sort_by(f64::total_cmp);
    match cfg.engine {
        Engine::Euler => euler(path, cfg, &levels, stream),
        Engine::GridWalk => grid_walk(path, cfg, &levels, stream),
    }
}

fn bin_of_x(x: f64, bw: f64) -> i64 {
    (x / bw + 0.5).floor() as i64
}

fn bin_range(path: &PotentialPath, bw: f64) -> (i64, usize) {
    let lo = bin_of_x(-path.left_extent(), bw);
    let hi = bin_of_x(path.right_extent(), bw);
    (lo, (hi - lo + 1) as usize)
}

fn extent_error(right: bool) -> Error {
    Error::Extent {
        coordinate: if right { RIGHT_EXIT } else { LEFT_EXIT }.into(),
    }
}

/// Hits recorded at time 0 for levels ≤ 0, then pending.
fn initial_hits(levels: &[f64]) -> (Vec<HitRecord>, usize) {
    let mut hits = Vec::with_capacity(levels.len());
    let mut next = 0;
    for &level in levels {
        let at_start = level <= 0.0;
        if at_start {
            next += 1;
        }
        hits.push(HitRecord {
            level,
            time: at_start.then_some(0.0),
            lstar: at_start.then_some(0.0),
        });
    }
    (hits, next)
}

fn euler(path: &PotentialPath, cfg: &DiffusionConfig, levels: &[f64], stream: RngStream) -> Result<(Trajectory, LocalTimeField)> {
    let mut rng = stream.rng();
    let n_steps = (cfg.t_max / cfg.dt).ceil() as u64;
    let h = cfg.t_max / n_steps as f64;
    let sq = h.sqrt();
    let bw = cfg.bin_width;
    let (first_bin, nbins) = bin_range(path, bw);
    let mut counts = vec![0u64; nbins];
    let mut best = 0u64;
    let (lo, hi) = (-path.left_extent(), path.right_extent());
    let (mut hits, mut next) = initial_hits(levels);
    let mut x = 0.0f64;
    let mut run_max = 0.0f64;
    let mut times = vec![0.0];
    let mut positions = vec![0.0];
    for k in 0..n_steps {
        let b = (bin_of_x(x, bw) - first_bin) as usize;
        counts[b] += 1;
        best = best.max(counts[b]);
        let z: f64 = rng.sample(StandardNormal);
        let xn = x - 0.5 * path.slope_at(x) * h + sq * z;
        if !(lo..=hi).contains(&xn) {
            return Err(extent_error(xn > hi));
        }
        while next < levels.len() && xn >= levels[next] {
            let frac = ((levels[next] - x) / (xn - x)).clamp(0.0, 1.0);
            hits[next].time = Some((k as f64 + frac) * h);
            hits[next].lstar = Some(best as f64 * h / bw);
            next += 1;
        }
        x = xn;
        run_max = run_max.max(x);
        if (k + 1) % cfg.record_every as u64 == 0 || k + 1 == n_steps {
            times.push((k + 1) as f64 * h);
            positions.push(x);
        }
    }
    let occupation = counts.iter().map(|&c| c as f64 * h).collect();
    let field = LocalTimeField::from_occupation(bw, first_bin, occupation);
    Ok((
        Trajectory {
            times,
            positions,
            running_max: run_max,
            final_time: cfg.t_max,
            final_position: x,
            hits,
            steps: n_steps,
        },
        field,
    ))
}

/// (1 − e^{−D})/D.
fn q(d: f64) -> f64 {
    if d == 0.0 {
        1.0
    } else {
        -(-d).exp_m1() / d
    }
}

/// (D − 1 + e^{−D})/D².
fn a(d: f64) -> f64 {
    if d.abs() < 1e-3 {
        0.5 - d / 6.0 + d * d / 24.0 - d * d * d / 120.0
    } else {
        ((-d).exp_m1() + d) / (d * d)
    }
}

/// Probability of stepping right from a node, and the mean time to reach a
/// neighbour, for left rise `d1 = V_i − V_{i−1}` and right rise
/// `d2 = V_{i+1} − V_i` over spacing `step`.
pub fn node_exit_law(d1: f64, d2: f64, step: f64) -> (f64, f64) {
    let ql = q(d1);
    let qr = q(-d2);
    let p_right = ql / (ql + qr);
    let mean = step * step * 2.0 * (qr * a(d1) + ql * a(-d2)) / (ql + qr);
    (p_right, mean)
}

/// Exit law of the window (c − m, c + m) around fine node `c` for the
/// diffusion in the piecewise-linear potential `v` with spacing `dx`.
/// Returns (P(exit right), mean exit time). `sink(j, point, occ)` receives,
/// per fine node j of the window, the expected point local time at x_j and
/// the expected time spent in the cell of width `dx` centred at x_j, both
/// per visit to c. Potentials are taken relative to v[c].
fn window_law(v: &[f64], c: usize, m: usize, dx: f64, mut sink: impl FnMut(usize, f64, f64)) -> (f64, f64) {
    let lo = c - m;
    let e = |j: usize| (v[j] - v[c]).exp();
    let half = 0.5 * dx;
    // ŝ(x_j) = ∫_{x_lo}^{x_j} e^{W−W(c)} and r(x_j) = ∫_{x_j}^{x_{c+m}} e^{W−W(c)}.
    let mut s = vec![0.0; 2 * m + 1];
    for k in 0..2 * m {
        let j = lo + k;
        s[k + 1] = s[k] + dx * e(j) * q(v[j] - v[j + 1]);
    }
    let total = s[2 * m];
    let (sl, sr) = (s[m], total - s[m]);
    let mut hold = 0.0;
    let mut emit = |j: usize, point: f64, occ: f64, hold: &mut f64| {
        *hold += occ;
        sink(j, point, occ);
    };
    for k in 0..=2 * m {
        let j = lo + k;
        let g = if k <= m { s[k] * sr } else { sl * (total - s[k]) };
        emit(j, 2.0 * g / total / e(j), 0.0, &mut hold);
    }
    for k in 0..2 * m {
        let j = lo + k;
        let dh = 0.5 * (v[j + 1] - v[j]);
        let wm = 0.5 * (v[j] + v[j + 1]);
        let em = (wm - v[c]).exp();
        if k < m {
            // Integrand 2·S_R/Ŝ·ŝ(y)·e^{−(W(y)−W(c))}, integrated forward from each half's left end.
            let sm = s[k] + half * e(j) * q(-dh);
            let lower = s[k] / e(j) * half * q(dh) + half * half * a(dh);
            let upper = sm / em * half * q(dh) + half * half * a(dh);
            emit(j, 0.0, 2.0 * sr / total * lower, &mut hold);
            emit(j + 1, 0.0, 2.0 * sr / total * upper, &mut hold);
        } else {
            // Integrand 2·S_L/Ŝ·r(y)·e^{−(W(y)−W(c))}, integrated backward from each half's right end.
            let r1 = total - s[k + 1];
            let rm = r1 + half * e(j + 1) * q(dh);
            let upper = r1 / e(j + 1) * half * q(-dh) + half * half * a(-dh);
            let lower = rm / em * half * q(-dh) + half * half * a(-dh);
            emit(j, 0.0, 2.0 * sl / total * lower, &mut hold);
            emit(j + 1, 0.0, 2.0 * sl / total * upper, &mut hold);
        }
    }
    (sl / total, hold)
}

fn whole_multiple(field: &str, step: f64, grid_step: f64) -> Result<usize> {
    if !(step > 0.0) {
        return Err(config(field, "must be positive"));
    }
    let m = (step / grid_step).round();
    if m < 1.0 || ((step / grid_step) - m).abs() > 1e-9 * m {
        return Err(config(field, "must be a whole multiple of the grid step"));
    }
    Ok(m as usize)
}

/// Walk nodes are every m-th potential node, aligned with the origin.
struct WalkLattice<'a> {
    v: &'a [f64],
    dx: f64,
    m: usize,
    first: usize,
    len: usize,
}

impl WalkLattice<'_> {
    fn fine(&self, k: usize) -> usize {
        self.first + k * self.m
    }

    /// Point local time and cell occupation on potential nodes
    /// `fine(lo) − m ..= fine(hi) + m`, from visit counts of walk nodes
    /// `lo..=hi` plus a partial stay. Returns the first node index and both
    /// profiles.
    fn profile(&self, visits: &[u64], lo: usize, hi: usize, partial: Option<(usize, f64)>, hold: &[f64]) -> (usize, Vec<f64>, Vec<f64>) {
        let base = self.fine(lo) - self.m;
        let len = self.fine(hi) + self.m + 1 - base;
        let mut point = vec![0.0; len];
        let mut occ = vec![0.0; len];
        let mut add = |k: usize, w: f64| {
            window_law(self.v, self.fine(k), self.m, self.dx, |j, p, o| {
                point[j - base] += w * p;
                occ[j - base] += w * o;
            });
        };
        for k in lo..=hi {
            if visits[k] > 0 {
                add(k, visits[k] as f64);
            }
        }
        if let Some((k, dt)) = partial {
            add(k, dt / hold[k]);
        }
        (base, point, occ)
    }
}

fn grid_walk(path: &PotentialPath, cfg: &DiffusionConfig, levels: &[f64], stream: RngStream) -> Result<(Trajectory, LocalTimeField)> {
    let mut rng = stream.rng();
    let dx = path.grid_step;
    let m = cfg.walk_step.map_or(Ok(1), |w| whole_multiple("walk_step", w, dx))?;
    let first = path.origin % m;
    let lat = WalkLattice {
        v: &path.values,
        dx,
        m,
        first,
        len: (path.len() - 1 - first) / m + 1,
    };
    let n = lat.len;
    if n < 3 {
        return Err(extent_error(true));
    }
    // Threshold on a 32-bit uniform, and mean holding time, per walk node;
    // filled on first visit (hold 0 marks an unvisited node).
    let mut thr = vec![0u64; n];
    let mut hold = vec![0.0f64; n];
    let x_of = |k: usize| path.x_at(lat.fine(k));
    let (hits, mut next) = initial_hits(levels);
    let mut hits = hits;
    let mut visits = vec![0u64; n];
    let mut i = (path.origin - first) / m;
    let (mut min_node, mut max_node) = (i, i);
    let mut t = 0.0f64;
    let mut times = vec![0.0];
    let mut positions = vec![0.0];
    let mut steps = 0u64;
    let mut countdown = cfg.record_every;
    let partial = loop {
        if i == 0 || i == n - 1 {
            return Err(extent_error(i == n - 1));
        }
        if hold[i] == 0.0 {
            let (p, h) = window_law(lat.v, lat.fine(i), m, dx, |_, _, _| {});
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::Domain(format!("degenerate holding time at walk node {i}")));
            }
            thr[i] = (p * 4294967296.0).round() as u64;
            hold[i] = h;
        }
        let hi = hold[i];
        if t + hi >= cfg.t_max {
            break (i, cfg.t_max - t);
        }
        t += hi;
        visits[i] += 1;
        steps += 1;
        if (rng.next_u32() as u64) < thr[i] {
            i += 1;
            if i > max_node {
                max_node = i;
                let x = x_of(i);
                if next < levels.len() && x >= levels[next] {
                    let (_, point, _) = lat.profile(&visits, min_node, max_node - 1, None, &hold);
                    let lstar = point.iter().copied().fold(0.0, f64::max);
                    while next < levels.len() && x >= levels[next] {
                        hits[next].time = Some(t);
                        hits[next].lstar = Some(lstar);
                        next += 1;
                    }
                }
            }
        } else {
            i -= 1;
            min_node = min_node.min(i);
        }
        countdown -= 1;
        if countdown == 0 {
            countdown = cfg.record_every;
            times.push(t);
            positions.push(x_of(i));
        }
    };
    let (base, point, occ) = lat.profile(&visits, min_node, max_node.min(n - 2), Some(partial), &hold);
    let x = x_of(i);
    if *times.last().unwrap() != cfg.t_max {
        times.push(cfg.t_max);
        positions.push(x);
    }
    let (first_bin, nbins) = bin_range(path, dx);
    let offset = (bin_of_x(path.x_at(0), dx) - first_bin) as usize;
    let mut field = LocalTimeField::from_occupation(dx, first_bin, vec![0.0; nbins]);
    let mut pts = vec![0.0; nbins];
    for j in 0..occ.len() {
        field.occupation[offset + base + j] = occ[j];
        pts[offset + base + j] = point[j];
    }
    field.point = Some(pts);
    field.elapsed = cfg.t_max;
    Ok((
        Trajectory {
            times,
            positions,
            running_max: x_of(max_node),
            final_time: cfg.t_max,
            final_position: x,
            hits,
            steps,
        },
        field,
    ))
}

/// H(r): the recorded passage time if r was requested, otherwise the first
/// crossing of r by the linear interpolation of the stored samples.
pub fn hitting_time(traj: &Trajectory, r: f64) -> Option<f64> {
    if let Some(h) = traj.hits.iter().find(|h| h.level == r) {
        return h.time;
    }
    if r > traj.running_max {
        return None;
    }
    let (t, p) = (&traj.times, &traj.positions);
    for k in 0..p.len() {
        if p[k] == r {
            return Some(t[k]);
        }
        if k + 1 < p.len() && (p[k] - r) * (p[k + 1] - r) < 0.0 {
            return Some(t[k] + (r - p[k]) / (p[k + 1] - p[k]) * (t[k + 1] - t[k]));
        }
    }
    None
}

/// N_t: the number of valley bottoms m̃ₖ at or below the running maximum.
pub fn visited_minima_count(traj: &Trajectory, valleys: &[ValleyRecord]) -> usize {
    valleys.iter().take_while(|v| v.m <= traj.running_max).count()
}

/// |X(t) − m̃_{N_t}|.
pub fn localization_gap(traj: &Trajectory, valleys: &[ValleyRecord]) -> Result<f64> {
    match visited_minima_count(traj, valleys) {
        0 => Err(Error::Undefined("localization gap with N_t = 0".into())),
        n => Ok((traj.final_position - valleys[n - 1].m).abs()),
    }
}

/// Environment and diffusion settings for one replica of the quenched model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSpec {
    pub kappa: f64,
    pub grid_step: f64,
    pub delta: f64,
    pub diffusion: DiffusionConfig,
    /// Extra height beyond log t for the right barrier and the left wall.
    pub extent_margin: f64,
}

impl ReplicaSpec {
    /// The initial extent policy: a rise of log t + margin must appear on the
    /// right, followed by enough descent to close the valleys before it.
    pub fn extent_policy(&self) -> ExtentPolicy {
        let lt = self.diffusion.t_max.ln();
        let h_plus = (1.0 + self.kappa + 2.0 * self.delta) * self.diffusion.h_t();
        ExtentPolicy {
            stop_depth: lt + self.extent_margin + h_plus + 2.0,
            left_barrier: lt + self.extent_margin,
            right_rise: Some(lt + self.extent_margin),
            min_right: 0.0,
            max_nodes: ExtentPolicy::default().max_nodes.max((1e6 / self.grid_step) as usize),
        }
    }
}

/// One row of the per-replica output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub base_seed: u64,
    pub stream_id: u64,
    pub t: f64,
    pub n_t: usize,
    /// H(m̃_{N_t}).
    pub h_last: Option<f64>,
    /// ℒ*(t)/t.
    pub lstar_over_t: f64,
    /// ℒ*(H(m̃_{N_t}))/t.
    pub lstar_at_last_over_t: Option<f64>,
    /// F_t*/X(t).
    pub favorite_over_x: Option<f64>,
    pub gap: Option<f64>,
    /// sup_{x<0} ℒ(t,x)/t.
    pub negative_side_over_t: f64,
    /// Environment re-draws needed to contain the diffusion.
    pub extensions: u32,
}

pub const MAX_EXTENSIONS: u32 = 12;

/// Samples an environment from `stream.child(0)` and runs X on it from
/// `stream.child(3)`. If X leaves the path, the path is regrown further on
/// the offending side from the same streams and the run repeats, so the
/// result does not depend on the initial extent.
pub fn run_replica(spec: &ReplicaSpec, stream: RngStream) -> Result<ReplicaRecord> {
    let cfg = &spec.diffusion;
    cfg.validate(spec.grid_step)?;
    let mut policy = spec.extent_policy();
    let env_stream = stream.child(0);
    for extensions in 0..=MAX_EXTENSIONS {
        let path = sample_potential(spec.kappa, spec.grid_step, &policy, env_stream)?;
        let valleys = crate::extrema::build_all_valleys(&path, cfg.h_t(), spec.delta)?;
        let levels: Vec<f64> = valleys.iter().map(|v| v.m).collect();
        match simulate_with_levels(&path, cfg, &levels, stream.child(3)) {
            Ok((traj, field)) => return Ok(replica_record(stream, cfg, &traj, &field, &valleys, extensions)),
            Err(Error::Extent { coordinate }) if coordinate == RIGHT_EXIT => {
                policy.min_right = 2.0 * path.right_extent();
            }
            Err(Error::Extent { coordinate }) if coordinate == LEFT_EXIT => {
                policy.left_barrier += 5.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Resample(format!("diffusion left the path after {MAX_EXTENSIONS} extensions")))
}

fn replica_record(stream: RngStream, cfg: &DiffusionConfig, traj: &Trajectory, field: &LocalTimeField, valleys: &[ValleyRecord], extensions: u32) -> ReplicaRecord {
    let t = cfg.t_max;
    let n_t = visited_minima_count(traj, valleys);
    let last = n_t.checked_sub(1).map(|k| traj.hits[k]);
    let (lstar, fav) = sup_local_time(field).expect("field covers the path");
    ReplicaRecord {
        base_seed: stream.base_seed,
        stream_id: stream.stream_id,
        t,
        n_t,
        h_last: last.and_then(|h| h.time),
        lstar_over_t: lstar / t,
        lstar_at_last_over_t: last.and_then(|h| h.lstar).map(|l| l / t),
        favorite_over_x: (traj.final_position != 0.0).then(|| fav / traj.final_position),
        gap: localization_gap(traj, valleys).ok(),
        negative_side_over_t: field.sup_negative() / t,
        extensions,
    }
}

pub const REPLICA_CSV_HEADER: &str =
    "base_seed,stream_id,t,n_t,h_last,lstar_over_t,lstar_at_last_over_t,favorite_over_x,gap,negative_side_over_t,extensions";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_replica_csv<W: Write>(rows: &[ReplicaRecord], mut out: W) -> Result<()> {
    writeln!(out, "{REPLICA_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.base_seed,
            r.stream_id,
            r.t,
            r.n_t,
            opt(r.h_last),
            r.lstar_over_t,
            opt(r.lstar_at_last_over_t),
            opt(r.favorite_over_x),
            opt(r.gap),
            r.negative_side_over_t,
            r.extensions
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, std_err};
    use approx::assert_relative_eq;

    fn flat(half: usize, step: f64) -> PotentialPath {
        PotentialPath::from_values(0.5, step, half, vec![0.0; 2 * half + 1]).unwrap()
    }

    fn vshape(half: usize, step: f64, s: f64) -> PotentialPath {
        let values = (0..=2 * half).map(|i| s * (i as f64 - half as f64).abs() * step).collect();
        PotentialPath::from_values(0.5, step, half, values).unwrap()
    }

    fn cfg(engine: Engine, t: f64) -> DiffusionConfig {
        DiffusionConfig {
            t_max: t,
            dt: 1e-3,
            bin_width: 0.1,
            engine,
            record_every: 1,
            ..DiffusionConfig::default()
        }
    }

    #[test]
    fn exit_law_limits() {
        let (p, m) = node_exit_law(0.0, 0.0, 0.1);
        assert_eq!(p, 0.5);
        assert_relative_eq!(m, 0.01, max_relative = 1e-12);
        // Small-D branch agrees with the direct formula.
        let d = 1.0001e-3;
        assert_relative_eq!(a(d), ((-d).exp_m1() + d) / (d * d), max_relative = 1e-9);
        // Linear potential V = c·x: p_right = 1/(1 + e^{cΔ}).
        let (p, _) = node_exit_law(0.3, 0.3, 0.1);
        assert_relative_eq!(p, 1.0 / (1.0 + 0.3f64.exp()), max_relative = 1e-12);
    }

    #[test]
    fn window_law_single_step_matches_node_law() {
        let v = [0.3, -0.2, 0.4];
        let (p, h) = window_law(&v, 1, 1, 0.1, |_, _, _| {});
        let (p0, h0) = node_exit_law(-0.5, 0.6, 0.1);
        assert_relative_eq!(p, p0, max_relative = 1e-12);
        assert_relative_eq!(h, h0, max_relative = 1e-12);
    }

    #[test]
    fn window_law_oracles() {
        // Flat: BM from the centre of (−L, L) exits right w.p. ½ after L²,
        // with point local time L at the centre.
        let (m, dx) = (10, 0.01);
        let v = vec![0.0; 2 * m + 1];
        let mut point = vec![0.0; 2 * m + 1];
        let (p, h) = window_law(&v, m, m, dx, |j, pt, _| point[j] += pt);
        let l = m as f64 * dx;
        assert_relative_eq!(p, 0.5, max_relative = 1e-12);
        assert_relative_eq!(h, l * l, max_relative = 1e-12);
        assert_relative_eq!(point[m], l, max_relative = 1e-12);
        assert_eq!((point[0], point[2 * m]), (0.0, 0.0));
        // Linear V = c·x over a window of half-width L behaves as one step of size L.
        let c = 1.7;
        let v: Vec<f64> = (0..=2 * m).map(|j| c * j as f64 * dx).collect();
        let mut occ = vec![0.0; 2 * m + 1];
        let mut point = vec![0.0; 2 * m + 1];
        let (p, h) = window_law(&v, m, m, dx, |j, pt, o| {
            point[j] += pt;
            occ[j] += o;
        });
        let (p0, h0) = node_exit_law(c * l, c * l, l);
        assert_relative_eq!(p, p0, max_relative = 1e-12);
        assert_relative_eq!(h, h0, max_relative = 1e-12);
        assert_relative_eq!(occ.iter().sum::<f64>(), h, max_relative = 1e-12);
        // Trapezoid rule on the point profile approximates the occupation.
        let trap: f64 = point.iter().sum::<f64>() * dx;
        assert_relative_eq!(trap, h, max_relative = 1e-3);
    }

    /// Exit probability to the right and mean exit time of the fine embedded
    /// chain from node m of 0..=2m, by solving the tridiagonal systems
    /// u_j = p_j u_{j+1} + (1 − p_j) u_{j−1} + c_j.
    fn fine_chain_exit(v: &[f64], dx: f64) -> (f64, f64) {
        let n = v.len();
        let solve = |rhs: &dyn Fn(usize) -> f64, right: f64| -> Vec<f64> {
            // Forward sweep for u_j = α_j u_{j+1} + β_j, with u_0 = 0.
            let (mut alpha, mut beta) = (vec![0.0; n], vec![0.0; n]);
            for j in 1..n - 1 {
                let (p, _) = node_exit_law(v[j] - v[j - 1], v[j + 1] - v[j], dx);
                let den = 1.0 - (1.0 - p) * alpha[j - 1];
                alpha[j] = p / den;
                beta[j] = (rhs(j) + (1.0 - p) * beta[j - 1]) / den;
            }
            let mut u = vec![0.0; n];
            u[n - 1] = right;
            for j in (1..n - 1).rev() {
                u[j] = alpha[j] * u[j + 1] + beta[j];
            }
            u
        };
        let hit = solve(&|_| 0.0, 1.0);
        let time = solve(&|j| node_exit_law(v[j] - v[j - 1], v[j + 1] - v[j], dx).1, 0.0);
        (hit[n / 2], time[n / 2])
    }

    proptest::proptest! {
        #[test]
        fn window_law_matches_fine_chain(m in 1usize..8, steps in proptest::collection::vec(-0.3f64..0.3, 16)) {
            let dx = 0.05;
            let mut v = vec![0.0];
            for k in 0..2 * m {
                v.push(v[k] + steps[k]);
            }
            let mut occ = 0.0;
            let mut point_ok = true;
            let (p, h) = window_law(&v, m, m, dx, |_, pt, o| {
                occ += o;
                point_ok &= pt >= 0.0 && o >= 0.0;
            });
            let (p0, h0) = fine_chain_exit(&v, dx);
            proptest::prop_assert!(point_ok && p > 0.0 && p < 1.0);
            proptest::prop_assert!((p - p0).abs() < 1e-10, "p {} vs {}", p, p0);
            proptest::prop_assert!((h - h0).abs() < 1e-10 * h0, "hold {} vs {}", h, h0);
            proptest::prop_assert!((occ - h).abs() < 1e-12 * h);
        }
    }

    #[test]
    fn exit_time_matches_drifted_bm() {
        // V = c·x gives drift −c/2; exit time from (−Δ, Δ) of BM with drift μ
        // is (Δ/μ)·tanh(μΔ)·… ; use the closed form Δ·(2p−1)/μ with p the
        // probability of exiting at +Δ... equivalently E[T] = Δ(1 − 2p)/(−μ).
        let (c, step) = (0.8, 0.5);
        let mu = -c / 2.0;
        let (p, m) = node_exit_law(c * step, c * step, step);
        let want = step * (2.0 * p - 1.0) / mu;
        assert_relative_eq!(m, want, max_relative = 1e-10);
    }

    #[test]
    fn flat_potential_is_brownian() {
        for engine in [Engine::Euler, Engine::GridWalk] {
            let path = flat(2000, 0.1);
            let t = 4.0;
            let xs: Vec<f64> = (0..2000)
                .map(|i| {
                    let (traj, _) = simulate(&path, &cfg(engine, t), RngStream::new(1, i)).unwrap();
                    traj.final_position * traj.final_position
                })
                .collect();
            let (m, se) = (mean(&xs), std_err(&xs));
            assert!((m - t).abs() < 3.0 * se + 0.02, "{engine:?}: {m} ± {se}");
        }
    }

    #[test]
    fn occupation_identity() {
        let path = vshape(200, 0.1, 1.0);
        for engine in [Engine::Euler, Engine::GridWalk] {
            let (_, field) = simulate(&path, &cfg(engine, 7.3), RngStream::new(2, 0)).unwrap();
            let total: f64 = field.occupation.iter().sum();
            assert_relative_eq!(total, 7.3, max_relative = 1e-12);
            assert_relative_eq!(field.elapsed, 7.3, max_relative = 1e-12);
            assert!(field.occupation.iter().all(|&o| o >= 0.0));
            let (l, _) = sup_local_time(&field).unwrap();
            assert!(l * field.bin_width <= field.elapsed);
        }
    }

    #[test]
    fn coarse_walk_on_fine_potential() {
        let path = vshape(3000, 0.01, 2.0);
        let c = DiffusionConfig {
            bin_width: 0.01,
            walk_step: Some(0.1),
            record_every: 1000,
            ..cfg(Engine::GridWalk, 5000.0)
        };
        let (traj, field) = simulate(&path, &c, RngStream::new(7, 0)).unwrap();
        assert_relative_eq!(field.occupation.iter().sum::<f64>(), 5000.0, max_relative = 1e-9);
        let inner: f64 = (0..field.len()).filter(|&k| field.center(k).abs() < 1.0).map(|k| field.occupation[k]).sum();
        assert!((inner / 5000.0 - (1.0 - (-2.0f64).exp())).abs() < 0.02);
        // Stationary point local time at the bottom is t·e^{0}/∫e^{−2|x|} = t.
        let (l, f) = sup_local_time(&field).unwrap();
        assert!((l / 5000.0 - 1.0).abs() < 0.1 && f.abs() < 0.2, "{l} at {f}");
        assert!(traj.positions.iter().all(|x| (x / 0.1 - (x / 0.1).round()).abs() < 1e-9));
        let bad = DiffusionConfig { walk_step: Some(0.015), ..c };
        assert!(matches!(simulate(&path, &bad, RngStream::new(7, 0)), Err(Error::Config { .. })));
    }

    #[test]
    fn gibbs_occupancy_in_v_potential() {
        // Long-run occupation density ∝ e^{−V} = e^{−s|x|}: mass in |x| < 1 is 1 − e^{−s}.
        let s = 2.0;
        let path = vshape(300, 0.05, s);
        for (engine, t) in [(Engine::Euler, 2000.0), (Engine::GridWalk, 20000.0)] {
            let c = DiffusionConfig {
                bin_width: 0.05,
                dt: 1e-4,
                record_every: 1000,
                ..cfg(engine, t)
            };
            let (_, field) = simulate(&path, &c, RngStream::new(3, 0)).unwrap();
            let inner: f64 = (0..field.len())
                .filter(|&k| field.center(k).abs() < 1.0 - 1e-9)
                .map(|k| field.occupation[k])
                .sum::<f64>()
                + 0.5 * (0..field.len()).filter(|&k| (field.center(k).abs() - 1.0).abs() < 1e-9).map(|k| field.occupation[k]).sum::<f64>();
            let frac = inner / t;
            let want = 1.0 - (-s).exp();
            assert!((frac - want).abs() < 0.02, "{engine:?}: {frac} vs {want}");
        }
    }

    #[test]
    fn hitting_time_cases() {
        let traj = Trajectory::from_samples(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.5, 1.5, 1.2]);
        assert_eq!(hitting_time(&traj, 0.0), Some(0.0));
        assert_eq!(hitting_time(&traj, 1.0), Some(1.5));
        assert_eq!(hitting_time(&traj, 2.0), None);
        let path = vshape(500, 0.1, -0.2);
        let (traj, _) = simulate(&path, &cfg(Engine::Euler, 30.0), RngStream::new(4, 0)).unwrap();
        let mut last = 0.0;
        for k in 0..40 {
            let r = k as f64 * 0.25;
            match hitting_time(&traj, r) {
                Some(h) => {
                    assert!(h >= last);
                    last = h;
                }
                None => assert!(r > traj.running_max),
            }
        }
    }

    #[test]
    fn recorded_levels_agree_with_samples() {
        let path = vshape(500, 0.1, -0.5);
        let levels = [0.7, 2.3, 4.1, 40.0];
        let (traj, _) = simulate_with_levels(&path, &cfg(Engine::Euler, 20.0), &levels, RngStream::new(5, 0)).unwrap();
        let plain = Trajectory {
            hits: Vec::new(),
            ..traj.clone()
        };
        for h in &traj.hits {
            match (h.time, hitting_time(&plain, h.level)) {
                (Some(a), Some(b)) => assert_relative_eq!(a, b, max_relative = 1e-12),
                (a, b) => assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn sup_local_time_ties_and_single_bin() {
        let f = LocalTimeField::from_occupation(0.5, -2, vec![0.0, 0.0, 3.0, 0.0]);
        assert_eq!(sup_local_time(&f).unwrap(), (6.0, 0.0));
        let f = LocalTimeField::from_occupation(0.5, -2, vec![0.0, 2.0, 1.0, 2.0]);
        assert_eq!(sup_local_time(&f).unwrap(), (4.0, -0.5));
        // Linear-scan oracle on an irregular field.
        let occ: Vec<f64> = (0..97).map(|i| ((i * 37) % 23) as f64).collect();
        let f = LocalTimeField::from_occupation(0.1, -10, occ.clone());
        let k = (0..occ.len()).fold(0, |b, k| if occ[k] > occ[b] { k } else { b });
        assert_eq!(sup_local_time(&f).unwrap().1, f.center(k));
    }

    fn valley_at(m: f64) -> ValleyRecord {
        ValleyRecord {
            index: 1,
            m,
            l_sharp: m,
            tau: m,
            l_star: m,
            l: m,
            l_plus: m,
            big_m: m,
            l_minus: m,
            bottom: 0.0,
            h_t: 1.0,
            h_plus: 1.0,
        }
    }

    #[test]
    fn minima_count_and_gap() {
        let valleys = [valley_at(1.0), valley_at(3.0), valley_at(5.0)];
        let traj = Trajectory::from_samples(vec![0.0, 1.0], vec![0.0, 0.5]);
        assert_eq!(visited_minima_count(&traj, &valleys), 0);
        assert!(localization_gap(&traj, &valleys).is_err());
        let traj = Trajectory::from_samples(vec![0.0, 1.0, 2.0], vec![0.0, 4.0, 5.0 - 3.0 + 3.0]);
        assert_eq!(visited_minima_count(&traj, &valleys), 3);
        let traj = Trajectory::from_samples(vec![0.0, 1.0, 2.0], vec![0.0, 4.0, 5.0]);
        let traj = Trajectory { running_max: 4.0, ..traj };
        assert_eq!(visited_minima_count(&traj, &valleys), 2);
        assert_eq!(localization_gap(&traj, &valleys).unwrap(), 2.0);
        let traj = Trajectory::from_samples(vec![0.0, 1.0], vec![0.0, 3.0]);
        assert_eq!(localization_gap(&traj, &valleys).unwrap(), 0.0);
    }

    #[test]
    fn replica_runs_and_is_reproducible() {
        let spec = ReplicaSpec {
            kappa: 0.5,
            grid_step: 0.1,
            delta: crate::extrema::default_delta(0.5),
            diffusion: DiffusionConfig {
                t_max: 1e3,
                ..DiffusionConfig::default()
            },
            extent_margin: 6.0,
        };
        let a = run_replica(&spec, RngStream::new(6, 1)).unwrap();
        let b = run_replica(&spec, RngStream::new(6, 1)).unwrap();
        assert_eq!(a, b);
        assert!(a.lstar_over_t > 0.0 && a.lstar_over_t * 0.1 <= 1.0);
        let mut buf = Vec::new();
        write_replica_csv(&[a], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }
}
