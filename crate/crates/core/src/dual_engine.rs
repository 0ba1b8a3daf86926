//! The dual side: the inner infimum K(X,Q), the free-target variant R(Y,ξ'),
//! the outer supremum H(X), the conditional Fenchel conjugate, coarsened
//! variants, and density gluing.
//!
//! Every problem decomposes per atom of the map's partition: the inner
//! infimum becomes a one-dimensional threshold search against the level-set
//! support oracle, and the outer supremum becomes an independent
//! maximization over the conditional-weight simplex of each atom.

use crate::maps::{MapError, MapSpec, Orientation};
use crate::prob_core::{AtomValue, Density, FiniteSpace, PerAtom, ProbError, Rv};
use crate::rng::splitmix64;
use crate::solvers::{bisect, simplex_search, BisectStatus, SolverCfg};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("threshold search exhausted its bracket ({lo}, {hi})")]
    BracketExhausted { lo: f64, hi: f64 },
    #[error("density vanishes on atom {0}")]
    QNullAtom(usize),
    #[error("target variable is not measurable with respect to the map's partition")]
    TargetNotMeasurable,
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// Per-atom record of a primal/dual comparison.
#[derive(Clone, Debug)]
pub struct AtomReport {
    pub atom_index: usize,
    /// Value of the map on the atom.
    pub primal: f64,
    /// Best dual value found on the atom.
    pub dual: f64,
    /// primal − dual.
    pub gap: f64,
    /// Conditional weights of the best density found (sums to 1).
    pub argmax_weights: Vec<f64>,
    pub k_at_argmax: f64,
    /// Line searches performed by the simplex search.
    pub iterations: u64,
    pub starts_used: usize,
    pub final_spread: f64,
}

/// Primal value, dual value, and gap for every atom of the map's partition.
#[derive(Clone, Debug)]
pub struct DualReport {
    pub atoms: Vec<AtomReport>,
}

impl DualReport {
    pub fn max_abs_gap(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.gap.abs())
            .fold(0.0, f64::max)
    }
}

/// Inner threshold search on one atom: inf { c : support(c, w) ≥ t }.
///
/// Returns `-∞` when every level is feasible down to the expansion limit.
/// The caller must have validated the weight vector against the oracle.
fn k_atom(
    space: &FiniteSpace,
    m: &MapSpec,
    atom: &[usize],
    w: &[f64],
    t: f64,
    bracket: (f64, f64),
    tol: f64,
) -> Result<f64, EngineError> {
    let pred = |c: f64| {
        m.support_value(space, atom, c, w)
            .expect("support oracle failed after validation")
            >= t
    };
    let r = bisect(pred, bracket.0, bracket.1, tol);
    match r.status {
        BisectStatus::Converged => Ok(r.root),
        BisectStatus::Unbounded => Ok(f64::NEG_INFINITY),
        BisectStatus::BracketExhausted => Err(EngineError::BracketExhausted {
            lo: r.bracket_final.0,
            hi: r.bracket_final.1,
        }),
    }
}

fn require_quasiconvex(m: &MapSpec) -> Result<(), EngineError> {
    if m.orientation() == Orientation::Quasiconcave {
        Err(EngineError::Map(MapError::UnsupportedFamily(
            "dual functionals are computed on the quasiconvex orientation; \
             use duality_gap, which mirrors the problem",
        )))
    } else {
        Ok(())
    }
}

/// K(X,Q): per atom, the infimum of the map over inputs whose Q-conditional
/// expectation dominates that of `x`.
///
/// On Q-null atoms the constraint is vacuous and the unconstrained infimum
/// of the atom component (the infimum of its value range) is returned.
/// Invariant under positive scaling of `q`.
///
/// For coarsened maps the conditioning stays with the inner partition: the
/// objective couples the inner atoms of a coarse block, but the inputs
/// decompose across them, so the block value is the maximum of the inner
/// per-atom values. This is the convention under which the minimum over
/// coarsenings recovers the original K.
pub fn k_value(
    space: &FiniteSpace,
    m: &MapSpec,
    x: &Rv,
    q: &Density,
    cfg: &SolverCfg,
) -> Result<PerAtom, EngineError> {
    require_quasiconvex(m)?;
    if let MapSpec::Coarsened { inner, coarse } = m {
        let inner_k = k_value(space, inner, x, q, cfg)?;
        let mut out = Vec::with_capacity(coarse.n_atoms());
        for block in coarse.blocks() {
            let v = inner
                .partition()
                .blocks()
                .iter()
                .enumerate()
                .filter(|(_, b)| block.contains(&b[0]))
                .map(|(i, _)| match inner_k.get(i) {
                    AtomValue::Val(v) => v,
                    AtomValue::QNull => inner.atom_range_inf(),
                })
                .fold(f64::NEG_INFINITY, f64::max);
            out.push(AtomValue::Val(v));
        }
        return Ok(PerAtom::new(out));
    }
    let mut out = Vec::with_capacity(m.partition().n_atoms());
    for atom in m.partition().blocks() {
        let Some(w) = q.conditional_weights(space, atom) else {
            out.push(AtomValue::Val(m.atom_range_inf()));
            continue;
        };
        let xa: Vec<f64> = atom.iter().map(|&i| x.values()[i]).collect();
        let t: f64 = w.iter().zip(&xa).map(|(a, b)| a * b).sum();
        let lo = xa.iter().cloned().fold(f64::INFINITY, f64::min) - cfg.bracket_pad;
        let hi = xa.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + cfg.bracket_pad;
        // Surface oracle errors before entering the closure-based search.
        m.support_value(space, atom, 0.5 * (lo + hi), &w)?;
        out.push(AtomValue::Val(k_atom(
            space,
            m,
            atom,
            &w,
            t,
            (lo, hi),
            cfg.bisect_tol,
        )?));
    }
    Ok(PerAtom::new(out))
}

/// R(Y,ξ'): the same infimum with a free measurable target `y` and an
/// unnormalized nonnegative weighting `xi`.
///
/// Normalized so that R(E_P[ξ'X|G], ξ') = K(X, ξ'/‖ξ'‖); invariant under
/// joint positive scaling of `y` and `xi`. Atoms where `xi` integrates to
/// zero return the unconstrained infimum.
pub fn r_value(
    space: &FiniteSpace,
    m: &MapSpec,
    y: &Rv,
    xi: &Density,
    cfg: &SolverCfg,
) -> Result<PerAtom, EngineError> {
    require_quasiconvex(m)?;
    if !crate::prob_core::is_measurable(y, m.partition()) {
        return Err(EngineError::TargetNotMeasurable);
    }
    let mut out = Vec::with_capacity(m.partition().n_atoms());
    for atom in m.partition().blocks() {
        let Some(w) = xi.conditional_weights(space, atom) else {
            out.push(AtomValue::Val(m.atom_range_inf()));
            continue;
        };
        // Constraint E_P[ξ'ξ|G] ≥ y on the atom reads Σ w_i ξ_i ≥ y_A·P(A)/μ_A
        // with μ_A the ξ'-mass of the atom.
        let mass = xi.mass_on(space, atom);
        let t = y.values()[atom[0]] * space.prob_of(atom) / mass;
        let lo = t.min(0.0) - cfg.bracket_pad;
        let hi = t.max(0.0) + cfg.bracket_pad;
        m.support_value(space, atom, 0.5 * (lo + hi), &w)?;
        out.push(AtomValue::Val(k_atom(
            space,
            m,
            atom,
            &w,
            t,
            (lo, hi),
            cfg.bisect_tol,
        )?));
    }
    Ok(PerAtom::new(out))
}

/// Conditional-weight seed vectors that are known stationary points for a
/// family (the exponential-tilt optimizer, preserved by increasing
/// transforms of the inner map).
fn analytic_seeds(m: &MapSpec, space: &FiniteSpace, atom: &[usize], xa: &[f64]) -> Vec<Vec<f64>> {
    fn tilt(space: &FiniteSpace, atom: &[usize], xa: &[f64], gamma: f64) -> Vec<f64> {
        let raw: Vec<f64> = atom
            .iter()
            .zip(xa)
            .map(|(&i, &x)| space.probs()[i] * (gamma * x).exp())
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }
    match m {
        MapSpec::Entropic { gamma, .. } => vec![tilt(space, atom, xa, *gamma)],
        MapSpec::Composite { .. } => vec![tilt(space, atom, xa, 1.0)],
        MapSpec::Transformed { inner, transform } if transform.is_increasing() => {
            analytic_seeds(inner, space, atom, xa)
        }
        _ => Vec::new(),
    }
}

/// H(X): per atom, the supremum of the atom K over conditional weight
/// vectors on the simplex, together with the primal value and the gap.
pub fn h_value(
    space: &FiniteSpace,
    m: &MapSpec,
    x: &Rv,
    cfg: &SolverCfg,
) -> Result<DualReport, EngineError> {
    require_quasiconvex(m)?;
    let primal = m.evaluate(space, x)?;
    let mut atoms = Vec::with_capacity(m.partition().n_atoms());
    for (idx, atom) in m.partition().blocks().iter().enumerate() {
        let xa: Vec<f64> = atom.iter().map(|&i| x.values()[i]).collect();
        let lo = xa.iter().cloned().fold(f64::INFINITY, f64::min) - cfg.bracket_pad;
        let hi = xa.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + cfg.bracket_pad;
        // Validate the oracle once on this atom before the search.
        m.support_value(space, atom, 0.5 * (lo + hi), &vec![1.0; atom.len()])?;

        let objective = |w: &[f64]| -> f64 {
            let s: f64 = w.iter().sum();
            if s <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let t: f64 = w.iter().zip(&xa).map(|(a, b)| a * b).sum::<f64>() / s;
            match k_atom(space, m, atom, w, t * s, (lo, hi), cfg.bisect_tol) {
                Ok(v) => v,
                Err(_) => f64::NEG_INFINITY,
            }
        };
        let seeds = analytic_seeds(m, space, atom, &xa);
        let mut atom_cfg = *cfg;
        atom_cfg.seed = splitmix64(&mut (cfg.seed ^ (idx as u64).wrapping_mul(0x9E37)));
        let out = simplex_search(objective, atom.len(), &seeds, &atom_cfg);
        let p = primal.values()[atom[0]];
        atoms.push(AtomReport {
            atom_index: idx,
            primal: p,
            dual: out.value,
            gap: p - out.value,
            argmax_weights: out.weights,
            k_at_argmax: out.value,
            iterations: out.iterations,
            starts_used: out.starts_used,
            final_spread: out.final_spread,
        });
    }
    Ok(DualReport { atoms })
}

/// Primal vs. dual comparison for either orientation.
///
/// For quasiconcave (mirrored) maps the dual problem of the inner map is
/// solved at `-x` and all values are negated, which flips the sign of the
/// gap: the dual then dominates the primal.
pub fn duality_gap(
    space: &FiniteSpace,
    m: &MapSpec,
    x: &Rv,
    cfg: &SolverCfg,
) -> Result<DualReport, EngineError> {
    match m {
        MapSpec::Mirrored { inner } => {
            let mut report = h_value(space, inner, &x.neg(), cfg)?;
            for a in &mut report.atoms {
                a.primal = -a.primal;
                a.dual = -a.dual;
                a.k_at_argmax = -a.k_at_argmax;
                a.gap = a.primal - a.dual;
            }
            Ok(report)
        }
        _ => h_value(space, m, x, cfg),
    }
}

/// Conditional Fenchel conjugate of a cash-invariant map at `q`,
/// per atom, computed as −K(0, Q).
pub fn fenchel_conjugate(
    space: &FiniteSpace,
    m: &MapSpec,
    q: &Density,
    cfg: &SolverCfg,
) -> Result<PerAtom, EngineError> {
    if !m.is_cash_invariant() {
        return Err(EngineError::Map(MapError::NotCashInvariant));
    }
    let zero = Rv::zeros(space);
    let k = k_value(space, m, &zero, q, cfg)?;
    Ok(PerAtom::new(
        k.values()
            .iter()
            .map(|v| match v {
                AtomValue::Val(c) => AtomValue::Val(-c),
                AtomValue::QNull => AtomValue::QNull,
            })
            .collect(),
    ))
}

/// Paste one conditional weight vector per atom into a single normalized
/// density: q_i = w_i · P(A) / p_i
/// (the resulting measure agrees with P on the partition).
pub fn glue_density(
    space: &FiniteSpace,
    g: &crate::prob_core::Partition,
    per_atom_weights: &[Vec<f64>],
) -> Result<Density, EngineError> {
    if per_atom_weights.len() != g.n_atoms() {
        return Err(EngineError::Prob(ProbError::DimensionMismatch {
            expected: g.n_atoms(),
            got: per_atom_weights.len(),
        }));
    }
    let mut q = vec![0.0; space.len()];
    for (atom, w) in g.blocks().iter().zip(per_atom_weights) {
        if w.len() != atom.len() {
            return Err(EngineError::Prob(ProbError::DimensionMismatch {
                expected: atom.len(),
                got: w.len(),
            }));
        }
        let s: f64 = w.iter().sum();
        if w.iter().any(|&v| v < 0.0) || (s - 1.0).abs() > 1e-9 {
            return Err(EngineError::Prob(ProbError::NegativeDensity(
                w.iter().position(|&v| v < 0.0).unwrap_or(0),
            )));
        }
        let pa = space.prob_of(atom);
        for (&i, &wi) in atom.iter().zip(w) {
            q[i] = wi * pa / space.probs()[i];
        }
    }
    Ok(Density::new(space, q, true)?)
}

/// Rescale `q` within each atom so the result agrees with P on the
/// partition; conditional expectations with respect to the result are
/// unchanged. Fails when `q` vanishes on some atom.
pub fn restrict_to_p_g(
    space: &FiniteSpace,
    q: &Density,
    g: &crate::prob_core::Partition,
) -> Result<Density, EngineError> {
    let mut out = q.q().to_vec();
    for (idx, atom) in g.blocks().iter().enumerate() {
        let mass = q.mass_on(space, atom);
        if mass <= 0.0 {
            return Err(EngineError::QNullAtom(idx));
        }
        let scale = space.prob_of(atom) / mass;
        for &i in atom {
            out[i] *= scale;
        }
    }
    Ok(Density::new(space, out, true)?)
}
