//! Concrete families of monotone, quasiconvex, regular conditional maps
//! π: L_F → L_G, each exposing primal evaluation and a per-atom level-set
//! support oracle used by the dual engine.
//!
//! Regularity holds by construction for every family: the value on an atom
//! depends only on the restriction of the input to that atom.

use crate::prob_core::{ess_sup_on, FiniteSpace, Partition, ProbError, Rv};
use crate::solvers::bisect;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("input outside the map's domain: {0}")]
    DomainViolation(String),
    #[error("weight vector is identically zero")]
    WeightAllZero,
    #[error("coarsening block is not a union of the map's atoms")]
    NotGMeasurablePartition,
    #[error("map is not cash invariant")]
    NotCashInvariant,
    #[error("operation not supported for this family: {0}")]
    UnsupportedFamily(&'static str),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// A scalar monotone transform applied on top of an inner map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    /// t ↦ arctan t: strictly increasing, bounded range (−π/2, π/2).
    Arctan,
    /// t ↦ t³ + t: strictly increasing, unbounded, nonlinear.
    ShiftedCubic,
    /// t ↦ −arctan t: strictly *decreasing*. Deliberately breaks
    /// monotonicity and quasiconvexity; used as a negative control only.
    NegArctan,
}

impl Transform {
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Transform::Arctan => t.atan(),
            Transform::ShiftedCubic => t * t * t + t,
            Transform::NegArctan => -t.atan(),
        }
    }

    /// Inverse on the transform's range (increasing transforms only).
    pub fn inverse(self, y: f64) -> f64 {
        match self {
            Transform::Arctan => y.tan(),
            Transform::ShiftedCubic => {
                // Real root of t³ + t = y by Cardano; the discriminant
                // y²/4 + 1/27 is always positive.
                let d = (y * y / 4.0 + 1.0 / 27.0).sqrt();
                (y / 2.0 + d).cbrt() + (y / 2.0 - d).cbrt()
            }
            Transform::NegArctan => (-y).tan(),
        }
    }

    pub fn is_increasing(self) -> bool {
        !matches!(self, Transform::NegArctan)
    }

    /// Closure of the transform's range as (inf, sup).
    pub fn range(self) -> (f64, f64) {
        match self {
            Transform::Arctan | Transform::NegArctan => {
                (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2)
            }
            Transform::ShiftedCubic => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

/// A deterministic utility function with closed-form inverse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Utility {
    /// u(x) = 1 − exp(−αx), α > 0, on all of ℝ.
    Exponential { alpha: f64 },
    /// u(x) = x^η, η ∈ (0,1), on x > 0.
    Power { eta: f64 },
    /// u(x) = ln x on x > 0.
    Log,
}

impl Utility {
    pub fn apply(self, x: f64) -> Result<f64, MapError> {
        match self {
            Utility::Exponential { alpha } => Ok(1.0 - (-alpha * x).exp()),
            Utility::Power { eta } => {
                if x <= 0.0 {
                    Err(MapError::DomainViolation(format!(
                        "power utility requires x > 0, got {x}"
                    )))
                } else {
                    Ok(x.powf(eta))
                }
            }
            Utility::Log => {
                if x <= 0.0 {
                    Err(MapError::DomainViolation(format!(
                        "log utility requires x > 0, got {x}"
                    )))
                } else {
                    Ok(x.ln())
                }
            }
        }
    }

    pub fn inverse(self, y: f64) -> f64 {
        match self {
            Utility::Exponential { alpha } => -(1.0 - y).ln() / alpha,
            Utility::Power { eta } => y.powf(1.0 / eta),
            Utility::Log => y.exp(),
        }
    }
}

/// Orientation of a conditional map's level sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Quasiconvex,
    Quasiconcave,
}

/// A quasiconvex (or, via `Mirrored`, quasiconcave) conditional map family.
///
/// Each variant owning a partition models a map into the corresponding
/// conditional space; wrappers inherit the inner partition except
/// `Coarsened`, which is measurable with respect to its coarser partition.
#[derive(Clone, Debug, PartialEq)]
pub enum MapSpec {
    /// Atomwise (1/γ)·log Σ v_i e^{γ x_i} with conditional reference
    /// weights v; monotone, convex, cash invariant.
    Entropic { gamma: f64, g: Partition },
    /// Atomwise maximum; monotone, convex, cash invariant.
    WorstCase { g: Partition },
    /// Atomwise arctan(Σ v_i e^{x_i}): an increasing continuous function of
    /// a convex expected loss — monotone, quasiconvex, not cash invariant.
    Composite { g: Partition },
    /// g ∘ inner for a scalar transform g.
    Transformed { inner: Box<MapSpec>, transform: Transform },
    /// Block-wise essential supremum of the inner map over a coarser
    /// partition (each block a union of inner atoms).
    Coarsened { inner: Box<MapSpec>, coarse: Partition },
    /// X ↦ −inner(−X): the quasiconcave companion (certainty equivalents).
    Mirrored { inner: Box<MapSpec> },
}

impl MapSpec {
    pub fn entropic(gamma: f64, g: Partition) -> Result<MapSpec, MapError> {
        if !(gamma > 0.0) {
            return Err(MapError::DomainViolation(format!(
                "entropic parameter must be positive, got {gamma}"
            )));
        }
        Ok(MapSpec::Entropic { gamma, g })
    }

    /// The partition with respect to which `evaluate` output is measurable.
    pub fn partition(&self) -> &Partition {
        match self {
            MapSpec::Entropic { g, .. }
            | MapSpec::WorstCase { g }
            | MapSpec::Composite { g } => g,
            MapSpec::Transformed { inner, .. } | MapSpec::Mirrored { inner } => inner.partition(),
            MapSpec::Coarsened { coarse, .. } => coarse,
        }
    }

    pub fn is_cash_invariant(&self) -> bool {
        match self {
            MapSpec::Entropic { .. } | MapSpec::WorstCase { .. } => true,
            MapSpec::Coarsened { inner, .. } => inner.is_cash_invariant(),
            _ => false,
        }
    }

    pub fn orientation(&self) -> Orientation {
        match self {
            MapSpec::Mirrored { .. } => Orientation::Quasiconcave,
            _ => Orientation::Quasiconvex,
        }
    }

    /// Wrap in the quasiconcave mirror; mirroring twice unwraps.
    pub fn mirror(self) -> MapSpec {
        match self {
            MapSpec::Mirrored { inner } => *inner,
            other => MapSpec::Mirrored {
                inner: Box::new(other),
            },
        }
    }

    /// Coarsen to a partition whose blocks are unions of this map's atoms.
    pub fn coarsen(self, coarse: Partition) -> Result<MapSpec, MapError> {
        if !self.partition().refines(&coarse) {
            return Err(MapError::NotGMeasurablePartition);
        }
        Ok(MapSpec::Coarsened {
            inner: Box::new(self),
            coarse,
        })
    }

    /// Value of the atom component of the map on one atom.
    ///
    /// `atom` lists sample-point indices and `xi` the input values at those
    /// indices, in the same order. For `Coarsened`, `atom` must be a block
    /// of the coarse partition.
    pub fn atom_eval(&self, space: &FiniteSpace, atom: &[usize], xi: &[f64]) -> Result<f64, MapError> {
        debug_assert_eq!(atom.len(), xi.len());
        match self {
            MapSpec::Entropic { gamma, .. } => {
                let pa = space.prob_of(atom);
                let s: f64 = atom
                    .iter()
                    .zip(xi)
                    .map(|(&i, &x)| space.probs()[i] / pa * (gamma * x).exp())
                    .sum();
                Ok(s.ln() / gamma)
            }
            MapSpec::WorstCase { .. } => {
                Ok(xi.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
            }
            MapSpec::Composite { .. } => {
                let pa = space.prob_of(atom);
                let s: f64 = atom
                    .iter()
                    .zip(xi)
                    .map(|(&i, &x)| space.probs()[i] / pa * x.exp())
                    .sum();
                Ok(s.atan())
            }
            MapSpec::Transformed { inner, transform } => {
                Ok(transform.apply(inner.atom_eval(space, atom, xi)?))
            }
            MapSpec::Coarsened { inner, .. } => {
                let mut best = f64::NEG_INFINITY;
                for block in inner.partition().blocks() {
                    if !block.iter().all(|i| atom.contains(i)) {
                        continue;
                    }
                    let sub: Vec<f64> = block
                        .iter()
                        .map(|i| xi[atom.iter().position(|a| a == i).unwrap()])
                        .collect();
                    best = best.max(inner.atom_eval(space, block, &sub)?);
                }
                Ok(best)
            }
            MapSpec::Mirrored { inner } => {
                let neg: Vec<f64> = xi.iter().map(|&v| -v).collect();
                Ok(-inner.atom_eval(space, atom, &neg)?)
            }
        }
    }

    /// Evaluate the map at `x`; the output is constant on every block of
    /// `partition()`.
    pub fn evaluate(&self, space: &FiniteSpace, x: &Rv) -> Result<Rv, MapError> {
        match self {
            MapSpec::Transformed { inner, transform } => {
                Ok(inner.evaluate(space, x)?.map(|v| transform.apply(v)))
            }
            MapSpec::Mirrored { inner } => Ok(inner.evaluate(space, &x.neg())?.neg()),
            MapSpec::Coarsened { inner, coarse } => {
                let inner_vals = inner.evaluate(space, x)?;
                let mut out = vec![0.0; space.len()];
                for block in coarse.blocks() {
                    let v = ess_sup_on(&inner_vals, block)?;
                    for &i in block {
                        out[i] = v;
                    }
                }
                Ok(Rv::new(space, out)?)
            }
            _ => {
                let mut out = vec![0.0; space.len()];
                for block in self.partition().blocks() {
                    let xi: Vec<f64> = block.iter().map(|&i| x.values()[i]).collect();
                    let v = self.atom_eval(space, block, &xi)?;
                    for &i in block {
                        out[i] = v;
                    }
                }
                Ok(Rv::new(space, out)?)
            }
        }
    }

    /// Infimum of the atom component's value range (over all inputs).
    pub fn atom_range_inf(&self) -> f64 {
        match self {
            MapSpec::Entropic { .. } | MapSpec::WorstCase { .. } => f64::NEG_INFINITY,
            MapSpec::Composite { .. } => 0.0,
            MapSpec::Transformed { inner, transform } => {
                if transform.is_increasing() {
                    let lo = inner.atom_range_inf();
                    if lo == f64::NEG_INFINITY {
                        transform.range().0
                    } else {
                        transform.apply(lo)
                    }
                } else {
                    let hi = inner.atom_range_sup();
                    if hi == f64::INFINITY {
                        transform.range().0
                    } else {
                        transform.apply(hi)
                    }
                }
            }
            MapSpec::Coarsened { inner, .. } => inner.atom_range_inf(),
            MapSpec::Mirrored { inner } => -inner.atom_range_sup(),
        }
    }

    /// Supremum of the atom component's value range.
    pub fn atom_range_sup(&self) -> f64 {
        match self {
            MapSpec::Entropic { .. } | MapSpec::WorstCase { .. } => f64::INFINITY,
            MapSpec::Composite { .. } => std::f64::consts::FRAC_PI_2,
            MapSpec::Transformed { inner, transform } => {
                if transform.is_increasing() {
                    let hi = inner.atom_range_sup();
                    if hi == f64::INFINITY {
                        transform.range().1
                    } else {
                        transform.apply(hi)
                    }
                } else {
                    let lo = inner.atom_range_inf();
                    if lo == f64::NEG_INFINITY {
                        transform.range().1
                    } else {
                        transform.apply(lo)
                    }
                }
            }
            MapSpec::Coarsened { inner, .. } => inner.atom_range_sup(),
            MapSpec::Mirrored { inner } => -inner.atom_range_inf(),
        }
    }

    /// sup { Σ_i w_i ξ_i : π_atom(ξ) ≤ c } over inputs ξ on the atom, as an
    /// extended real: `+∞` when the constraint leaves the objective
    /// unbounded, `-∞` when the sublevel set is empty.
    ///
    /// Nondecreasing in `c` and positively homogeneous in `w`.
    pub fn support_value(
        &self,
        space: &FiniteSpace,
        atom: &[usize],
        c: f64,
        w: &[f64],
    ) -> Result<f64, MapError> {
        if w.len() != atom.len() {
            return Err(MapError::Prob(ProbError::DimensionMismatch {
                expected: atom.len(),
                got: w.len(),
            }));
        }
        if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(MapError::DomainViolation(
                "weights must be nonnegative and finite".into(),
            ));
        }
        let s_w: f64 = w.iter().sum();
        if s_w <= 0.0 {
            return Err(MapError::WeightAllZero);
        }
        // Empty or full sublevel sets are family-independent given the range.
        if c <= self.atom_range_inf() {
            return Ok(f64::NEG_INFINITY);
        }
        if c >= self.atom_range_sup() {
            return Ok(f64::INFINITY);
        }
        match self {
            MapSpec::WorstCase { .. } => Ok(c * s_w),
            MapSpec::Entropic { gamma, .. } => {
                // With normalized weights ŵ the value is c + KL(ŵ‖v)/γ;
                // positive homogeneity restores the scale.
                let pa = space.prob_of(atom);
                let mut kl = 0.0;
                for (&i, &wi) in atom.iter().zip(w) {
                    if wi > 0.0 {
                        let wn = wi / s_w;
                        let vi = space.probs()[i] / pa;
                        kl += wn * (wn / vi).ln();
                    }
                }
                Ok(s_w * (c + kl / gamma))
            }
            MapSpec::Composite { .. } => {
                // Constraint: Σ v_i e^{ξ_i} ≤ b with b = tan c > 0.
                // Coordinates with zero weight are sent to −∞ and drop out;
                // the remaining concave problem is solved through its scalar
                // dual D(λ) = λb + Σ w_i (ln(w_i/(λ v_i)) − 1), minimized by
                // a one-dimensional search on the multiplier.
                let b = c.tan();
                let pa = space.prob_of(atom);
                let active: Vec<(f64, f64)> = atom
                    .iter()
                    .zip(w)
                    .filter(|(_, &wi)| wi > 0.0)
                    .map(|(&i, &wi)| (wi, space.probs()[i] / pa))
                    .collect();
                let s: f64 = active.iter().map(|(wi, _)| wi).sum();
                // D'(λ) = b − S/λ; search on μ = ln λ for the sign change.
                let mu0 = (s / b).ln();
                let r = bisect(|mu| b - s * (-mu).exp() >= 0.0, mu0 - 8.0, mu0 + 8.0, 1e-12);
                let lambda = r.root.exp();
                let d = lambda * b
                    + active
                        .iter()
                        .map(|(wi, vi)| wi * ((wi / (lambda * vi)).ln() - 1.0))
                        .sum::<f64>();
                Ok(d)
            }
            MapSpec::Transformed { inner, transform } => {
                if !transform.is_increasing() {
                    // A decreasing transform turns the sublevel set into a
                    // superlevel set of the inner map, which never bounds
                    // the objective from above.
                    return Ok(f64::INFINITY);
                }
                inner.support_value(space, atom, transform.inverse(c), w)
            }
            MapSpec::Coarsened { inner, .. } => {
                // Constraint and objective both separate across the inner
                // atoms inside the block: π^Γ ≤ c iff every inner-atom value
                // is ≤ c.
                let mut total = 0.0;
                for block in inner.partition().blocks() {
                    if !block.iter().all(|i| atom.contains(i)) {
                        continue;
                    }
                    let wb: Vec<f64> = block
                        .iter()
                        .map(|i| w[atom.iter().position(|a| a == i).unwrap()])
                        .collect();
                    if wb.iter().all(|&v| v == 0.0) {
                        // Zero objective on this block; it only matters that
                        // the sublevel set is nonempty, which the range
                        // check above already guaranteed.
                        continue;
                    }
                    let sv = inner.support_value(space, block, c, &wb)?;
                    if sv == f64::INFINITY {
                        return Ok(f64::INFINITY);
                    }
                    total += sv;
                }
                Ok(total)
            }
            MapSpec::Mirrored { .. } => Err(MapError::UnsupportedFamily(
                "support oracle is defined for the quasiconvex orientation; \
                 mirror the problem instead",
            )),
        }
    }
}

/// Conditional certainty equivalent u⁻¹(E_P[u(x) | G]) per atom.
pub fn cce_evaluate(
    u: Utility,
    space: &FiniteSpace,
    x: &Rv,
    g: &Partition,
) -> Result<Rv, MapError> {
    let mut out = vec![0.0; space.len()];
    for block in g.blocks() {
        let pa = space.prob_of(block);
        let mut e = 0.0;
        for &i in block {
            e += space.probs()[i] / pa * u.apply(x.values()[i])?;
        }
        let v = u.inverse(e);
        for &i in block {
            out[i] = v;
        }
    }
    Ok(Rv::new(space, out)?)
}
