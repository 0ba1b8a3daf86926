//! Independent brute-force ground truth: grid minimization for the inner
//! infimum (inequality- and equality-constrained variants), grid
//! maximization for the support oracle, and exhaustive enumeration of
//! coarser partitions. Used by tests to cross-check the analytic engine.

use crate::maps::{MapError, MapSpec, Transform};
use crate::prob_core::{AtomValue, Density, FiniteSpace, Partition, PerAtom, ProbError, Rv};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("atom has {0} points; the grid oracle is limited to 4")]
    AtomTooLarge(usize),
    #[error("no grid point satisfies the constraint")]
    EmptyFeasibleGrid,
    #[error("partition has {0} atoms; enumeration is limited to 6")]
    TooManyAtoms(usize),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// Grid geometry for the brute-force scans.
#[derive(Clone, Copy, Debug)]
pub struct GridCfg {
    pub box_lo: f64,
    pub box_hi: f64,
    pub step: f64,
}

impl Default for GridCfg {
    fn default() -> Self {
        GridCfg {
            box_lo: -5.0,
            box_hi: 5.0,
            step: 0.05,
        }
    }
}

impl GridCfg {
    fn points(&self) -> Vec<f64> {
        let n = ((self.box_hi - self.box_lo) / self.step).round() as usize;
        (0..=n).map(|j| self.box_lo + j as f64 * self.step).collect()
    }
}

/// The atom objective reduced to a form the grid scan can accumulate
/// coordinate by coordinate. Increasing outer transforms are peeled off and
/// re-applied to the minimum at the end, which preserves the argmin.
enum Kernel {
    /// Σ table[i][j] then finalize (entropic log-sum-exp, composite).
    ExpSum { finalize: fn(f64) -> f64 },
    /// max_i ξ_i (worst case).
    Max,
}

fn ln_kernel(s: f64) -> f64 {
    s.ln()
}

fn atan_kernel(s: f64) -> f64 {
    s.atan()
}

/// Peel increasing transforms; returns the base map and the composed outer
/// function applied at the end.
fn unwrap_increasing(m: &MapSpec) -> (&MapSpec, Vec<Transform>) {
    let mut chain = Vec::new();
    let mut cur = m;
    while let MapSpec::Transformed { inner, transform } = cur {
        if !transform.is_increasing() {
            break;
        }
        chain.push(*transform);
        cur = inner;
    }
    chain.reverse();
    (cur, chain)
}

struct AtomScan {
    /// table[i][j]: kernel contribution of coordinate i at grid point j.
    table: Vec<Vec<f64>>,
    kernel: Kernel,
    /// transforms applied, innermost first, to the kernel minimum.
    outer: Vec<Transform>,
    /// scaling applied after `ExpSum`'s finalize (1/γ for entropic).
    post_scale: f64,
}

impl AtomScan {
    fn build(
        m: &MapSpec,
        space: &FiniteSpace,
        atom: &[usize],
        grid: &[f64],
    ) -> Result<AtomScan, OracleError> {
        let (base, outer) = unwrap_increasing(m);
        let pa = space.prob_of(atom);
        match base {
            MapSpec::Entropic { gamma, .. } => {
                let table = atom
                    .iter()
                    .map(|&i| {
                        let v = space.probs()[i] / pa;
                        grid.iter().map(|&g| v * (gamma * g).exp()).collect()
                    })
                    .collect();
                Ok(AtomScan {
                    table,
                    kernel: Kernel::ExpSum { finalize: ln_kernel },
                    outer,
                    post_scale: 1.0 / gamma,
                })
            }
            MapSpec::Composite { .. } => {
                let table = atom
                    .iter()
                    .map(|&i| {
                        let v = space.probs()[i] / pa;
                        grid.iter().map(|&g| v * g.exp()).collect()
                    })
                    .collect();
                Ok(AtomScan {
                    table,
                    kernel: Kernel::ExpSum { finalize: atan_kernel },
                    outer,
                    post_scale: 1.0,
                })
            }
            MapSpec::WorstCase { .. } => Ok(AtomScan {
                table: atom.iter().map(|_| grid.to_vec()).collect(),
                kernel: Kernel::Max,
                outer,
                post_scale: 1.0,
            }),
            other => Err(OracleError::Map(MapError::UnsupportedFamily(match other {
                MapSpec::Mirrored { .. } => "grid oracle covers the quasiconvex orientation only",
                _ => "grid oracle covers the base families only",
            }))),
        }
    }

    fn finish(&self, acc: f64) -> f64 {
        let mut v = match self.kernel {
            Kernel::ExpSum { finalize } => finalize(acc) * self.post_scale,
            Kernel::Max => acc,
        };
        for t in &self.outer {
            v = t.apply(v);
        }
        v
    }
}

/// Minimize the atom objective over grid points whose weighted sum lies in
/// `[t_lo, t_hi]`; returns the minimum of the *kernel accumulator*, finished
/// afterwards. `None` when no grid point is feasible.
fn scan_atom(
    scan: &AtomScan,
    w: &[f64],
    grid: &[f64],
    t_lo: f64,
    t_hi: f64,
) -> Option<f64> {
    let dim = w.len();
    // Per-coordinate bounds on the remaining weighted sum, for pruning.
    let mut min_rest = vec![0.0f64; dim + 1];
    let mut max_rest = vec![0.0f64; dim + 1];
    for i in (0..dim).rev() {
        let lo = w[i] * grid[0];
        let hi = w[i] * grid[grid.len() - 1];
        min_rest[i] = min_rest[i + 1] + lo.min(hi);
        max_rest[i] = max_rest[i + 1] + lo.max(hi);
    }
    let mut best: Option<f64> = None;
    fn rec(
        scan: &AtomScan,
        w: &[f64],
        grid: &[f64],
        t_lo: f64,
        t_hi: f64,
        min_rest: &[f64],
        max_rest: &[f64],
        depth: usize,
        lin: f64,
        acc: f64,
        best: &mut Option<f64>,
    ) {
        if lin + max_rest[depth] < t_lo || lin + min_rest[depth] > t_hi {
            return; // no completion can satisfy the constraint
        }
        if depth == w.len() {
            if best.map_or(true, |b| acc < b) {
                *best = Some(acc);
            }
            return;
        }
        for (j, &g) in grid.iter().enumerate() {
            let acc2 = match scan.kernel {
                Kernel::ExpSum { .. } => acc + scan.table[depth][j],
                Kernel::Max => acc.max(scan.table[depth][j]),
            };
            rec(
                scan,
                w,
                grid,
                t_lo,
                t_hi,
                min_rest,
                max_rest,
                depth + 1,
                lin + w[depth] * g,
                acc2,
                best,
            );
        }
    }
    let acc0 = match scan.kernel {
        Kernel::ExpSum { .. } => 0.0,
        Kernel::Max => f64::NEG_INFINITY,
    };
    rec(
        scan, w, grid, t_lo, t_hi, &min_rest, &max_rest, 0, 0.0, acc0, &mut best,
    );
    best
}

fn grid_k_impl(
    space: &FiniteSpace,
    m: &MapSpec,
    x: &Rv,
    q: &Density,
    cfg: &GridCfg,
    equality_band: bool,
) -> Result<PerAtom, OracleError> {
    let grid = cfg.points();
    let mut out = Vec::new();
    for atom in m.partition().blocks() {
        if atom.len() > 4 {
            return Err(OracleError::AtomTooLarge(atom.len()));
        }
        let Some(w) = q.conditional_weights(space, atom) else {
            out.push(AtomValue::Val(m.atom_range_inf()));
            continue;
        };
        let t: f64 = atom.iter().zip(&w).map(|(&i, wi)| wi * x.values()[i]).sum();
        let (t_lo, t_hi) = if equality_band {
            let band = cfg.step * w.iter().cloned().fold(0.0, f64::max);
            (t - band, t + band)
        } else {
            (t, f64::INFINITY)
        };
        let scan = AtomScan::build(m, space, atom, &grid)?;
        match scan_atom(&scan, &w, &grid, t_lo, t_hi) {
            Some(acc) => out.push(AtomValue::Val(scan.finish(acc))),
            None => return Err(OracleError::EmptyFeasibleGrid),
        }
    }
    Ok(PerAtom::new(out))
}

/// Brute-force inner infimum: minimum of the atom objective over the grid
/// under Σ w_i ξ_i ≥ t. One-sided bound: the result is ≥ the true infimum
/// and exceeds it by at most `slope_bound · step`.
pub fn grid_k(
    space: &FiniteSpace,
    m: &MapSpec,
    x: &Rv,
    q: &Density,
    cfg: &GridCfg,
) -> Result<PerAtom, OracleError> {
    grid_k_impl(space, m, x, q, cfg, false)
}

/// The equality-constrained variant: minimize under
/// |Σ w_i ξ_i − t| ≤ step · max(w) (a discrete band standing in for exact
/// equality, which is measure-zero on a grid). For monotone regular maps
/// this agrees with `grid_k` up to grid resolution.
pub fn equality_k(
    space: &FiniteSpace,
    m: &MapSpec,
    x: &Rv,
    q: &Density,
    cfg: &GridCfg,
) -> Result<PerAtom, OracleError> {
    grid_k_impl(space, m, x, q, cfg, true)
}

/// Brute-force support oracle: max of Σ w_i ξ_i over grid points with
/// atom objective ≤ c. One-sided: never exceeds the analytic value.
pub fn grid_support(
    space: &FiniteSpace,
    m: &MapSpec,
    atom: &[usize],
    c: f64,
    w: &[f64],
    cfg: &GridCfg,
) -> Result<Option<f64>, OracleError> {
    if atom.len() > 4 {
        return Err(OracleError::AtomTooLarge(atom.len()));
    }
    let grid = cfg.points();
    let scan = AtomScan::build(m, space, atom, &grid)?;
    let dim = atom.len();
    let mut best: Option<f64> = None;
    let mut idx = vec![0usize; dim];
    loop {
        let mut acc = match scan.kernel {
            Kernel::ExpSum { .. } => 0.0,
            Kernel::Max => f64::NEG_INFINITY,
        };
        let mut lin = 0.0;
        for (d, &j) in idx.iter().enumerate() {
            acc = match scan.kernel {
                Kernel::ExpSum { .. } => acc + scan.table[d][j],
                Kernel::Max => acc.max(scan.table[d][j]),
            };
            lin += w[d] * grid[j];
        }
        if scan.finish(acc) <= c && best.map_or(true, |b| lin > b) {
            best = Some(lin);
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == dim {
                return Ok(best);
            }
            idx[d] += 1;
            if idx[d] < grid.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Per-coordinate slope bound L of the atom objective on the grid box:
/// moving every coordinate by one step changes the value by at most
/// L · step. Used to convert grid minima into two-sided bounds.
pub fn slope_bound(m: &MapSpec, cfg: &GridCfg) -> f64 {
    match m {
        MapSpec::Entropic { .. } | MapSpec::WorstCase { .. } => 1.0,
        // d/ds arctan(s) · s ≤ s/(1+s²) ≤ 1/2 summed over the tilt weights
        MapSpec::Composite { .. } => 0.5,
        MapSpec::Transformed { inner, transform } => {
            let l = slope_bound(inner, cfg);
            match transform {
                Transform::Arctan | Transform::NegArctan => l,
                Transform::ShiftedCubic => {
                    // |g'(t)| = 3t² + 1 on |t| ≤ box bound + 1 (monotone
                    // inner maps stay inside the box range).
                    let mbound = cfg.box_lo.abs().max(cfg.box_hi.abs()) + 1.0;
                    l * (3.0 * mbound * mbound + 1.0)
                }
            }
        }
        MapSpec::Coarsened { inner, .. } | MapSpec::Mirrored { inner } => slope_bound(inner, cfg),
    }
}

/// All partitions of the atoms of `g`, each returned as a partition of
/// sample points whose blocks are unions of `g`-atoms. Enumeration is by
/// restricted-growth strings, so the order is canonical and deterministic.
pub fn enumerate_partitions(
    space: &FiniteSpace,
    g: &Partition,
) -> Result<Vec<Partition>, OracleError> {
    let n = g.n_atoms();
    if n > 6 {
        return Err(OracleError::TooManyAtoms(n));
    }
    let mut result = Vec::new();
    let mut rgs = vec![0usize; n];
    loop {
        let n_blocks = rgs.iter().copied().max().unwrap_or(0) + 1;
        let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); n_blocks];
        for (atom_idx, &b) in rgs.iter().enumerate() {
            blocks[b].extend(g.blocks()[atom_idx].iter().copied());
        }
        result.push(Partition::new(space, blocks)?);

        // next restricted-growth string
        let mut i = n;
        loop {
            if i == 1 {
                return Ok(result);
            }
            i -= 1;
            let cap = rgs[..i].iter().copied().max().unwrap_or(0) + 1;
            if rgs[i] < cap {
                rgs[i] += 1;
                for v in rgs[i + 1..].iter_mut() {
                    *v = 0;
                }
                break;
            }
        }
    }
}
