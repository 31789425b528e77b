//! h-extrema of a potential path and the h_t-valleys built around them.

use crate::environment::PotentialPath;
use crate::error::{domain, Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtremumKind {
    Minimum,
    Maximum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HExtremum {
    pub position: f64,
    pub value: f64,
    pub kind: ExtremumKind,
    /// Grid index of the extremum.
    pub index: usize,
}

fn window_nodes(path: &PotentialPath, window: (f64, f64)) -> Result<(usize, usize)> {
    let (lo, hi) = window;
    if !(lo <= hi) || !path.contains(lo) || !path.contains(hi) {
        return Err(Error::Extent {
            coordinate: format!("window [{lo}, {hi}]"),
        });
    }
    let first = (path.coord(lo) - 1e-9).ceil().max(0.0) as usize;
    let last = ((path.coord(hi) + 1e-9).floor() as usize).min(path.len() - 1);
    Ok((first, last))
}

/// The h-extrema among the grid nodes inside `window`, in increasing position.
///
/// A node x is an h-minimum when some u < x < v inside the window have
/// f(u) ≥ f(x) + h, f(v) ≥ f(x) + h and f ≥ f(x) on [u, v]; maxima are
/// symmetric. On flat bottoms (tops) the leftmost node is reported.
pub fn find_h_extrema(path: &PotentialPath, h: f64, window: (f64, f64)) -> Result<Vec<HExtremum>> {
    if !(h > 0.0) {
        return Err(domain(format!("h must be positive, got {h}")));
    }
    let (first, last) = window_nodes(path, window)?;
    let f = &path.values;
    let mk = |i: usize, kind| HExtremum {
        position: path.x_at(i),
        value: f[i],
        kind,
        index: i,
    };

    #[derive(PartialEq)]
    enum Seek {
        Either,
        Min,
        Max,
    }
    let mut seek = Seek::Either;
    let (mut lo, mut hi) = (first, first);
    let mut pivots = Vec::new();
    for i in first..=last {
        let v = f[i];
        match seek {
            Seek::Either => {
                if v < f[lo] {
                    lo = i;
                }
                if v > f[hi] {
                    hi = i;
                }
                if v >= f[lo] + h {
                    pivots.push(mk(lo, ExtremumKind::Minimum));
                    seek = Seek::Max;
                    hi = i;
                } else if v <= f[hi] - h {
                    pivots.push(mk(hi, ExtremumKind::Maximum));
                    seek = Seek::Min;
                    lo = i;
                }
            }
            Seek::Min => {
                if v < f[lo] {
                    lo = i;
                }
                if v >= f[lo] + h {
                    pivots.push(mk(lo, ExtremumKind::Minimum));
                    seek = Seek::Max;
                    hi = i;
                }
            }
            Seek::Max => {
                if v > f[hi] {
                    hi = i;
                }
                if v <= f[hi] - h {
                    pivots.push(mk(hi, ExtremumKind::Maximum));
                    seek = Seek::Min;
                    lo = i;
                }
            }
        }
    }
    // The first pivot has only been confirmed on its right.
    if !pivots.is_empty() {
        pivots.remove(0);
    }
    Ok(pivots)
}

/// Direct O(n²) check of the h-extremum definition at every node of the window.
pub fn brute_force_h_extrema(path: &PotentialPath, h: f64, window: (f64, f64)) -> Result<Vec<HExtremum>> {
    let (first, last) = window_nodes(path, window)?;
    let f = &path.values;
    let mut out = Vec::new();
    for x in first..=last {
        for kind in [ExtremumKind::Minimum, ExtremumKind::Maximum] {
            // s orients the comparison so that a maximum is a minimum of −f.
            let s = if kind == ExtremumKind::Minimum { 1.0 } else { -1.0 };
            let g = |i: usize| s * f[i];
            // Left: reach g(x)+h before any value ≤ g(x) (ties go to the leftmost node).
            let mut left_ok = false;
            for u in (first..x).rev() {
                if g(u) <= g(x) {
                    break;
                }
                if g(u) >= g(x) + h {
                    left_ok = true;
                    break;
                }
            }
            let mut right_ok = false;
            for v in x + 1..=last {
                if g(v) < g(x) {
                    break;
                }
                if g(v) >= g(x) + h {
                    right_ok = true;
                    break;
                }
            }
            if left_ok && right_ok {
                out.push(HExtremum {
                    position: path.x_at(x),
                    value: f[x],
                    kind,
                    index: x,
                });
            }
        }
    }
    Ok(out)
}

/// Default δ in h_t⁺ = (1+κ+2δ)h_t: min(0.1, (1/κ − 1)/6), which keeps κ(1+3δ) < 1.
pub fn default_delta(kappa: f64) -> f64 {
    (0.1f64).min((1.0 / kappa - 1.0) / 6.0)
}

/// Coordinates of one h_t-valley; all positions are points of the
/// interpolated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValleyRecord {
    /// 1-based valley index i.
    pub index: usize,
    /// m̃ᵢ, the valley bottom.
    pub m: f64,
    /// L̃ᵢ♯.
    pub l_sharp: f64,
    /// τ̃ᵢ(h_t).
    pub tau: f64,
    /// L̃ᵢ*, where the potential first comes back down to bottom + 3h_t/4.
    pub l_star: f64,
    /// L̃ᵢ, first return to bottom + h_t/2 after τ̃ᵢ(h_t).
    pub l: f64,
    /// L̃ᵢ⁺.
    pub l_plus: f64,
    /// M̃ᵢ, the highest point between m̃ᵢ and L̃ᵢ⁺.
    pub big_m: f64,
    /// L̃ᵢ⁻ = τ̃ᵢ⁻(h_t⁺).
    pub l_minus: f64,
    /// W_κ(m̃ᵢ).
    pub bottom: f64,
    pub h_t: f64,
    pub h_plus: f64,
}

/// Walks the interpolated path rightwards from `x0` and returns the first
/// x > x0 where it reaches ≤ `level` (`down`) or ≥ `level` (`!down`).
fn first_crossing_right(path: &PotentialPath, x0: f64, level: f64, down: bool) -> Option<f64> {
    let v = &path.values;
    let c0 = path.coord(x0);
    let mut j = c0.floor() as usize;
    let mut xa = x0;
    let mut va = path.value_at(x0).ok()?;
    while j + 1 < v.len() {
        let xb = path.x_at(j + 1);
        let vb = v[j + 1];
        if xb > xa {
            let hit = if down { vb <= level } else { vb >= level };
            if hit {
                let already = if down { va <= level } else { va >= level };
                if already || va == vb {
                    return Some(xa);
                }
                let x = xa + (va - level) / (va - vb) * (xb - xa);
                return Some(x.clamp(xa, xb));
            }
        }
        xa = xb;
        va = vb;
        j += 1;
    }
    None
}

/// Walks leftwards from `x0` and returns the last x < x0 where the path is ≥ `level`.
fn first_crossing_left_up(path: &PotentialPath, x0: f64, level: f64) -> Option<f64> {
    let v = &path.values;
    let c0 = path.coord(x0);
    let mut j = c0.ceil() as usize;
    let mut xb = x0;
    let mut vb = path.value_at(x0).ok()?;
    while j >= 1 {
        let xa = path.x_at(j - 1);
        let va = v[j - 1];
        if xa < xb && va >= level {
            if vb >= level || va == vb {
                return Some(xb);
            }
            let x = xb - (level - vb) / (va - vb) * (xb - xa);
            return Some(x.clamp(xa, xb));
        }
        xb = xa;
        vb = va;
        j -= 1;
    }
    None
}

fn extent(coordinate: &str, i: usize) -> Error {
    Error::Extent {
        coordinate: format!("{coordinate} of valley {i}"),
    }
}

fn build_one(path: &PotentialPath, prev_l_plus: f64, i: usize, h_t: f64, h_plus: f64) -> Result<ValleyRecord> {
    let w_prev = path.value_at(prev_l_plus)?;
    let l_sharp = first_crossing_right(path, prev_l_plus, w_prev - h_plus, true)
        .ok_or_else(|| extent("L_sharp", i))?;

    // τ̃ᵢ(h_t) and m̃ᵢ: scan from L♯ tracking the running minimum.
    let v = &path.values;
    let mut min_x = l_sharp;
    let mut min_v = path.value_at(l_sharp)?;
    let mut j = path.coord(l_sharp).floor() as usize;
    let mut xa = l_sharp;
    let mut va = min_v;
    let mut tau = None;
    while j + 1 < v.len() {
        let xb = path.x_at(j + 1);
        let vb = v[j + 1];
        if xb > xa {
            if vb >= min_v + h_t {
                let level = min_v + h_t;
                let x = if va >= level { xa } else { xa + (level - va) / (vb - va) * (xb - xa) };
                tau = Some(x.clamp(xa, xb));
                break;
            }
            if vb < min_v {
                min_v = vb;
                min_x = xb;
            }
        }
        xa = xb;
        va = vb;
        j += 1;
    }
    let tau = tau.ok_or_else(|| extent("tau(h_t)", i))?;
    let m = min_x;
    let bottom = min_v;

    let l_plus = first_crossing_right(path, tau, bottom - h_plus, true).ok_or_else(|| extent("L_plus", i))?;
    let l_star = first_crossing_right(path, tau, bottom + 0.75 * h_t, true).ok_or_else(|| extent("L_star", i))?;
    let l = first_crossing_right(path, tau, bottom + 0.5 * h_t, true).ok_or_else(|| extent("L", i))?;

    // M̃ᵢ: the highest node in (m̃ᵢ, L̃ᵢ⁺), leftmost on ties.
    let j0 = path.coord(m).floor() as usize + 1;
    let j1 = path.coord(l_plus).ceil() as usize;
    let mut big_j = j0;
    for jj in j0..j1.min(v.len()) {
        if v[jj] > v[big_j] {
            big_j = jj;
        }
    }
    let big_m = path.x_at(big_j);

    let l_minus = first_crossing_left_up(path, m, bottom + h_plus).ok_or_else(|| extent("L_minus", i))?;

    Ok(ValleyRecord {
        index: i,
        m,
        l_sharp,
        tau,
        l_star,
        l,
        l_plus,
        big_m,
        l_minus,
        bottom,
        h_t,
        h_plus,
    })
}

fn check_valley_params(path: &PotentialPath, h_t: f64, delta: f64) -> Result<f64> {
    if !(h_t > 0.0) {
        return Err(domain(format!("h_t must be positive, got {h_t}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("delta must lie in (0,1), got {delta}")));
    }
    Ok((1.0 + path.kappa + 2.0 * delta) * h_t)
}

/// The first `n` h_t-valleys to the right of 0, by the recursive stopping-time
/// construction started at L̃₀⁺ = 0. Fails with an extent error naming the
/// coordinate that ran off the path.
pub fn build_valleys(path: &PotentialPath, h_t: f64, delta: f64, n: usize) -> Result<Vec<ValleyRecord>> {
    let h_plus = check_valley_params(path, h_t, delta)?;
    let mut out = Vec::with_capacity(n);
    let mut prev = 0.0;
    for i in 1..=n {
        let rec = build_one(path, prev, i, h_t, h_plus)?;
        prev = rec.l_plus;
        out.push(rec);
    }
    Ok(out)
}

/// Every valley that fits inside the path.
pub fn build_all_valleys(path: &PotentialPath, h_t: f64, delta: f64) -> Result<Vec<ValleyRecord>> {
    let h_plus = check_valley_params(path, h_t, delta)?;
    let mut out = Vec::new();
    let mut prev = 0.0;
    loop {
        match build_one(path, prev, out.len() + 1, h_t, h_plus) {
            Ok(rec) => {
                prev = rec.l_plus;
                out.push(rec);
            }
            Err(Error::Extent { .. }) => return Ok(out),
            Err(e) => return Err(e),
        }
    }
}

/// τ̃ᵢ(h): first point after m̃ᵢ where the potential is h above the bottom.
pub fn tau_plus(path: &PotentialPath, valley: &ValleyRecord, h: f64) -> Option<f64> {
    first_crossing_right(path, valley.m, valley.bottom + h, false)
}

/// τ̃ᵢ⁻(h): last point before m̃ᵢ where the potential is h above the bottom.
pub fn tau_minus(path: &PotentialPath, valley: &ValleyRecord, h: f64) -> Option<f64> {
    first_crossing_left_up(path, valley.m, valley.bottom + h)
}

/// Ṽ⁽ⁱ⁾ = W_κ − W_κ(m̃ᵢ) restricted to [L̃ᵢ⁻, L̃ᵢ], as a polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedPotential {
    pub index: usize,
    pub m: f64,
    /// Breakpoints (x, Ṽ(x)) in increasing x, including both ends and m̃ᵢ.
    pub points: Vec<(f64, f64)>,
}

impl ShiftedPotential {
    pub fn start(&self) -> f64 {
        self.points[0].0
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    pub fn value_at(&self, x: f64) -> Option<f64> {
        if x < self.start() || x > self.end() {
            return None;
        }
        let k = self.points.partition_point(|p| p.0 <= x);
        if k == self.points.len() {
            return Some(self.points[k - 1].1);
        }
        let (x0, y0) = self.points[k - 1];
        let (x1, y1) = self.points[k];
        Some(if x1 == x0 { y0 } else { y0 + (x - x0) / (x1 - x0) * (y1 - y0) })
    }

    pub fn min(&self) -> (f64, f64) {
        self.points
            .iter()
            .cloned()
            .fold((f64::NAN, f64::INFINITY), |a, p| if p.1 < a.1 { p } else { a })
    }
}

pub fn valley_shifted_potentials(path: &PotentialPath, valleys: &[ValleyRecord]) -> Result<Vec<ShiftedPotential>> {
    valleys
        .iter()
        .map(|r| {
            let mut xs = vec![r.l_minus, r.m, r.l];
            let j0 = path.coord(r.l_minus).ceil() as usize;
            let j1 = path.coord(r.l).floor() as usize;
            xs.extend((j0..=j1).map(|j| path.x_at(j)));
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let points = xs
                .into_iter()
                .map(|x| Ok((x, if x == r.m { 0.0 } else { path.value_at(x)? - r.bottom })))
                .collect::<Result<Vec<_>>>()?;
            Ok(ShiftedPotential {
                index: r.index,
                m: r.m,
                points,
            })
        })
        .collect()
}

pub const VALLEY_CSV_HEADER: &str = "index,m,l_sharp,tau,l_star,l,l_plus,big_m,l_minus,bottom,h_t,h_plus";

/// One CSV row per valley under [`VALLEY_CSV_HEADER`].
pub fn write_valleys_csv<W: Write>(valleys: &[ValleyRecord], mut out: W) -> Result<()> {
    writeln!(out, "{VALLEY_CSV_HEADER}")?;
    for r in valleys {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.index, r.m, r.l_sharp, r.tau, r.l_star, r.l, r.l_plus, r.big_m, r.l_minus, r.bottom, r.h_t, r.h_plus
        )?;
    }
    Ok(())
}

/// Ordering and value identities a valley must satisfy; returns the violated
/// relations by name (empty when the record is sound).
pub fn valley_violations(path: &PotentialPath, r: &ValleyRecord, prev_l_plus: f64, tol: f64) -> Vec<&'static str> {
    let mut bad = Vec::new();
    let mut check = |ok: bool, name| {
        if !ok {
            bad.push(name);
        }
    };
    check(prev_l_plus < r.l_sharp, "prev L+ < L#");
    check(r.l_sharp <= r.m, "L# <= m");
    check(r.m < r.tau, "m < tau");
    check(r.tau < r.l_star, "tau < L*");
    check(r.l_star < r.l, "L* < L");
    check(r.l < r.l_plus, "L < L+");
    check(prev_l_plus <= r.l_minus, "prev L+ <= L-");
    check(r.l_minus < r.m, "L- < m");
    check(r.tau < r.big_m || (r.tau <= r.big_m && path.value_at(r.big_m).ok() == path.value_at(r.tau).ok()), "tau < M");
    check(r.big_m < r.l_plus, "M < L+");
    let at = |x: f64| path.value_at(x).unwrap_or(f64::NAN) - r.bottom;
    check((at(r.tau) - r.h_t).abs() <= tol, "W(tau) = bottom + h_t");
    check((at(r.l) - 0.5 * r.h_t).abs() <= tol, "W(L) = bottom + h_t/2");
    check((at(r.l_star) - 0.75 * r.h_t).abs() <= tol, "W(L*) = bottom + 3h_t/4");
    check((at(r.l_plus) + r.h_plus).abs() <= tol, "W(L+) = bottom - h_t+");
    check((at(r.l_minus) - r.h_plus).abs() <= tol, "W(L-) = bottom + h_t+");
    bad
}

/// Grid tolerance for value identities: 3√(Δx·log(1/Δx)).
pub fn grid_tolerance(grid_step: f64) -> f64 {
    3.0 * (grid_step * (1.0 / grid_step).ln().max(1.0)).sqrt()
}
