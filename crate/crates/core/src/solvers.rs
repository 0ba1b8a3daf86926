//! Self-contained numeric primitives: monotone bisection with geometric
//! bracket expansion, and multi-start local search over probability
//! simplices.
//!
//! Both routines are deterministic for fixed inputs and configuration; the
//! simplex search draws its random restarts from the in-crate seedable
//! generator.

use crate::rng::Rng;

/// Absolute bound on bracket expansion before a threshold search gives up.
pub const BRACKET_LIMIT: f64 = 1e6;

const GOLDEN_INV: f64 = 0.618_033_988_749_894_9; // 1/φ

/// Configuration shared by the bisection and simplex search layers.
#[derive(Clone, Copy, Debug)]
pub struct SolverCfg {
    /// Width tolerance for threshold bisection.
    pub bisect_tol: f64,
    /// Padding added around `[min x, max x]` when forming initial brackets.
    pub bracket_pad: f64,
    /// Number of random restarts in the simplex search.
    pub restarts: usize,
    /// Subdivisions per simplex dimension for the grid fallback.
    pub grid_fallback_resolution: usize,
    /// Seed for the random restarts.
    pub seed: u64,
}

impl Default for SolverCfg {
    fn default() -> Self {
        SolverCfg {
            bisect_tol: 1e-9,
            bracket_pad: 1.0,
            restarts: 16,
            grid_fallback_resolution: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BisectStatus {
    Converged,
    /// The predicate held everywhere down to `-BRACKET_LIMIT`.
    Unbounded,
    /// The predicate failed everywhere up to `+BRACKET_LIMIT`.
    BracketExhausted,
}

#[derive(Clone, Copy, Debug)]
pub struct BisectResult {
    pub root: f64,
    pub bracket_final: (f64, f64),
    pub iterations: u32,
    pub status: BisectStatus,
}

/// Locate the threshold of a nondecreasing boolean predicate (false below,
/// true above).
///
/// The initial bracket is expanded geometrically (factor 2) on whichever side
/// fails to straddle the threshold, up to `±BRACKET_LIMIT`. On convergence
/// the returned root is within `tol` of the true threshold.
pub fn bisect(pred: impl Fn(f64) -> bool, lo: f64, hi: f64, tol: f64) -> BisectResult {
    assert!(tol > 0.0, "tolerance must be positive");
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut iterations = 0u32;

    // Expand downward until the predicate fails at the low end.
    let mut step = (hi - lo).max(1.0);
    while pred(lo) {
        iterations += 1;
        if lo <= -BRACKET_LIMIT {
            return BisectResult {
                root: -BRACKET_LIMIT,
                bracket_final: (lo, hi),
                iterations,
                status: BisectStatus::Unbounded,
            };
        }
        hi = hi.min(lo); // predicate already true here; tighten the top
        lo = (lo - step).max(-BRACKET_LIMIT);
        step *= 2.0;
    }

    // Expand upward until the predicate holds at the high end.
    let mut step = (hi - lo).max(1.0);
    while !pred(hi) {
        iterations += 1;
        if hi >= BRACKET_LIMIT {
            return BisectResult {
                root: BRACKET_LIMIT,
                bracket_final: (lo, hi),
                iterations,
                status: BisectStatus::BracketExhausted,
            };
        }
        lo = lo.max(hi); // predicate false here; tighten the bottom
        hi = (hi + step).min(BRACKET_LIMIT);
        step *= 2.0;
    }

    // Invariant: pred(lo) = false, pred(hi) = true.
    while hi - lo > tol {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // floating-point resolution reached
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    BisectResult {
        root: 0.5 * (lo + hi),
        bracket_final: (lo, hi),
        iterations,
        status: BisectStatus::Converged,
    }
}

/// Result of a simplex maximization.
#[derive(Clone, Debug)]
pub struct SimplexOutcome {
    pub weights: Vec<f64>,
    pub value: f64,
    /// Total coordinate-pair line searches performed.
    pub iterations: u64,
    /// Starts actually refined (mandatory + extra + random + grid best).
    pub starts_used: usize,
    /// Final improvement observed in the last ascent pass of the winner.
    pub final_spread: f64,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Golden-section maximization of `g` on `[a, b]`, endpoints included.
fn golden_max(g: &mut impl FnMut(f64) -> f64, a: f64, b: f64, iters: u32) -> (f64, f64) {
    let mut lo = a;
    let mut hi = b;
    let mut x1 = hi - GOLDEN_INV * (hi - lo);
    let mut x2 = lo + GOLDEN_INV * (hi - lo);
    let mut f1 = sanitize(g(x1));
    let mut f2 = sanitize(g(x2));
    for _ in 0..iters {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN_INV * (hi - lo);
            f1 = sanitize(g(x1));
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN_INV * (hi - lo);
            f2 = sanitize(g(x2));
        }
    }
    // Compare the interior incumbent against both endpoints so boundary
    // maxima (common for linear objectives) are found exactly.
    let mut best_x = if f1 >= f2 { x1 } else { x2 };
    let mut best_f = f1.max(f2);
    for (x, f) in [(a, sanitize(g(a))), (b, sanitize(g(b)))] {
        if f > best_f {
            best_f = f;
            best_x = x;
        }
    }
    (best_x, best_f)
}

fn renormalize(w: &mut [f64]) {
    for v in w.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        for v in w.iter_mut() {
            *v /= s;
        }
    } else {
        let u = 1.0 / w.len() as f64;
        for v in w.iter_mut() {
            *v = u;
        }
    }
}

/// Projected coordinate-pair ascent from `w`, in place. Returns
/// (value, line searches, last-pass improvement).
fn ascend(
    f: &impl Fn(&[f64]) -> f64,
    w: &mut [f64],
    max_passes: u32,
    line_iters: u32,
) -> (f64, u64, f64) {
    let dim = w.len();
    let mut value = sanitize(f(w));
    let mut searches = 0u64;
    let mut last_gain = f64::INFINITY;
    let mut probe = vec![0.0; dim];
    for _ in 0..max_passes {
        let pass_start = value;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let s = w[i] + w[j];
                if s <= 0.0 {
                    continue;
                }
                searches += 1;
                probe.copy_from_slice(w);
                let mut g = |t: f64| {
                    probe[i] = t;
                    probe[j] = s - t;
                    f(&probe)
                };
                let (t, fv) = golden_max(&mut g, 0.0, s, line_iters);
                if fv > value {
                    w[i] = t;
                    w[j] = s - t;
                    value = fv;
                }
            }
        }
        last_gain = value - pass_start;
        if !(last_gain > 1e-12) {
            break;
        }
    }
    (value, searches, if last_gain.is_finite() { last_gain } else { 0.0 })
}

/// Enumerate all compositions of `res` into `dim` nonnegative parts,
/// invoking `visit` with the normalized weight vector.
pub fn for_each_grid_point(dim: usize, res: usize, visit: &mut impl FnMut(&[f64])) {
    fn rec(
        buf: &mut Vec<usize>,
        remaining: usize,
        dim: usize,
        res: usize,
        visit: &mut impl FnMut(&[f64]),
    ) {
        if buf.len() == dim - 1 {
            buf.push(remaining);
            let w: Vec<f64> = buf.iter().map(|&c| c as f64 / res as f64).collect();
            visit(&w);
            buf.pop();
            return;
        }
        for c in 0..=remaining {
            buf.push(c);
            rec(buf, remaining - c, dim, res, visit);
            buf.pop();
        }
    }
    rec(&mut Vec::with_capacity(dim), res, dim, res, visit);
}

fn grid_point_count(dim: usize, res: usize) -> u64 {
    // C(res + dim - 1, dim - 1)
    let mut c = 1u64;
    for k in 1..dim as u64 {
        c = c.saturating_mul(res as u64 + k) / k;
    }
    c
}

/// Maximize `f` over the probability simplex of dimension `dim`.
///
/// Starts: the uniform point, every vertex, any caller-provided seeds,
/// `cfg.restarts` random points, and the best point of a coarse grid scan.
/// Each start is refined by projected coordinate-pair ascent with
/// golden-section line searches. Ties are broken toward the earliest start,
/// so the result is deterministic.
pub fn simplex_search(
    f: impl Fn(&[f64]) -> f64,
    dim: usize,
    extra_seeds: &[Vec<f64>],
    cfg: &SolverCfg,
) -> SimplexOutcome {
    assert!(dim >= 1);
    if dim == 1 {
        let value = sanitize(f(&[1.0]));
        return SimplexOutcome {
            weights: vec![1.0],
            value,
            iterations: 0,
            starts_used: 1,
            final_spread: 0.0,
        };
    }

    let mut starts: Vec<Vec<f64>> = Vec::new();
    starts.push(vec![1.0 / dim as f64; dim]);
    for i in 0..dim {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        starts.push(v);
    }
    for s in extra_seeds {
        if s.len() == dim {
            let mut v = s.clone();
            renormalize(&mut v);
            starts.push(v);
        }
    }
    let mut rng = Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.restarts {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.next_f64() + 1e-3).collect();
        renormalize(&mut v);
        starts.push(v);
    }

    // Coarse grid scan; shrink the resolution when the composition count
    // would be excessive for the dimension.
    let mut res = cfg.grid_fallback_resolution.max(1);
    while res > 2 && grid_point_count(dim, res) > 20_000 {
        res -= 1;
    }
    let mut grid_best: Option<(Vec<f64>, f64)> = None;
    for_each_grid_point(dim, res, &mut |w| {
        let v = sanitize(f(w));
        if grid_best.as_ref().map_or(true, |(_, b)| v > *b) {
            grid_best = Some((w.to_vec(), v));
        }
    });
    if let Some((w, _)) = grid_best {
        starts.push(w);
    }

    // Coarse ascent from every start, then a finer polish of the incumbent.
    let mut best_w = starts[0].clone();
    let mut best_v = f64::NEG_INFINITY;
    let mut best_spread = 0.0;
    let mut total_searches = 0u64;
    let starts_used = starts.len();
    for mut w in starts {
        let (v, searches, spread) = ascend(&f, &mut w, 25, 24);
        total_searches += searches;
        if v > best_v {
            best_v = v;
            best_w = w;
            best_spread = spread;
        }
    }
    let (v, searches, spread) = ascend(&f, &mut best_w, 30, 44);
    total_searches += searches;
    if v > best_v {
        best_v = v;
        best_spread = spread;
    }
    renormalize(&mut best_w);
    SimplexOutcome {
        weights: best_w,
        value: best_v,
        iterations: total_searches,
        starts_used,
        final_spread: best_spread,
    }
}
