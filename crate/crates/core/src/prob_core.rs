//! Finite probability spaces, partitions modeling sub-sigma-algebras, random
//! variables, densities, and conditional expectation with explicit null-atom
//! semantics.
//!
//! Everything here is immutable after construction and all operations are
//! pure, so the types can be shared freely across threads.

use thiserror::Error;

/// Tolerance for the reference probabilities summing to one.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Tolerance for a normalized density having unit P-expectation.
pub const DENSITY_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum ProbError {
    #[error("probability at index {0} is not strictly positive")]
    NonPositiveProbability(usize),
    #[error("probabilities sum to {0}, expected 1")]
    ProbabilitySumMismatch(f64),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("labels and probabilities have different lengths")]
    LengthMismatch,
    #[error("index {0} appears in more than one block")]
    OverlappingBlocks(usize),
    #[error("index {0} is not covered by any block")]
    UncoveredIndex(usize),
    #[error("partition contains an empty block")]
    EmptyBlock,
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("partitions live on different spaces")]
    SpaceMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("random variable is not measurable with respect to the partition")]
    NotMeasurable,
    #[error("empty atom")]
    EmptyAtom,
    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),
    #[error("negative density entry at index {0}")]
    NegativeDensity(usize),
    #[error("density has P-expectation {0}, expected 1")]
    DensityNormalization(f64),
    #[error("density vanishes on atom {0}")]
    QNullAtom(usize),
}

/// A finite sample space with strictly positive reference probabilities.
///
/// The sigma-algebra is the full power set and P has full support, so
/// "P-a.s." statements are pointwise statements.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSpace {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl FiniteSpace {
    pub fn new<S: Into<String>>(labels: Vec<S>, probs: Vec<f64>) -> Result<Self, ProbError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != probs.len() {
            return Err(ProbError::LengthMismatch);
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(p > 0.0) || !p.is_finite() {
                return Err(ProbError::NonPositiveProbability(i));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(ProbError::ProbabilitySumMismatch(sum));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.clone()) {
                return Err(ProbError::DuplicateLabel(l.clone()));
            }
        }
        Ok(FiniteSpace { labels, probs })
    }

    /// Uniform space over `n` anonymous points, for tests and generators.
    pub fn uniform(n: usize) -> Self {
        let labels: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let probs = vec![1.0 / n as f64; n];
        FiniteSpace::new(labels, probs).expect("uniform space is always valid")
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// P(A) for an index set A.
    pub fn prob_of(&self, atom: &[usize]) -> f64 {
        atom.iter().map(|&i| self.probs[i]).sum()
    }
}

/// A partition of the sample points into disjoint nonempty blocks.
///
/// Models a sub-sigma-algebra: a random variable is measurable iff it is
/// constant on every block. Blocks are kept in canonical order (each block
/// sorted, blocks ordered by smallest element) so equality is structural.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    n_points: usize,
}

fn canonicalize(mut blocks: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for b in &mut blocks {
        b.sort_unstable();
    }
    blocks.sort_by_key(|b| b[0]);
    blocks
}

impl Partition {
    pub fn new(space: &FiniteSpace, blocks: Vec<Vec<usize>>) -> Result<Self, ProbError> {
        let n = space.len();
        let mut seen = vec![false; n];
        for block in &blocks {
            if block.is_empty() {
                return Err(ProbError::EmptyBlock);
            }
            for &i in block {
                if i >= n {
                    return Err(ProbError::IndexOutOfRange(i));
                }
                if seen[i] {
                    return Err(ProbError::OverlappingBlocks(i));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(ProbError::UncoveredIndex(i));
        }
        Ok(Partition {
            blocks: canonicalize(blocks),
            n_points: n,
        })
    }

    /// The trivial partition `{Ω}`.
    pub fn trivial(space: &FiniteSpace) -> Self {
        Partition {
            blocks: vec![(0..space.len()).collect()],
            n_points: space.len(),
        }
    }

    /// The discrete partition (one block per point, i.e. G = F).
    pub fn discrete(space: &FiniteSpace) -> Self {
        Partition {
            blocks: (0..space.len()).map(|i| vec![i]).collect(),
            n_points: space.len(),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Index of the block containing point `i`.
    pub fn atom_of(&self, i: usize) -> usize {
        self.blocks
            .iter()
            .position(|b| b.contains(&i))
            .expect("every index is covered")
    }

    /// True iff every block of `self` is contained in a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.n_points != coarser.n_points {
            return false;
        }
        self.blocks.iter().all(|b| {
            let host = coarser.atom_of(b[0]);
            b.iter().all(|&i| coarser.atom_of(i) == host)
        })
    }

    /// Coarsest common refinement of two partitions of the same space.
    pub fn common_refinement(&self, other: &Partition) -> Result<Partition, ProbError> {
        if self.n_points != other.n_points {
            return Err(ProbError::SpaceMismatch);
        }
        let mut blocks = Vec::new();
        for a in &self.blocks {
            for b in &other.blocks {
                let inter: Vec<usize> = a.iter().copied().filter(|i| b.contains(i)).collect();
                if !inter.is_empty() {
                    blocks.push(inter);
                }
            }
        }
        Ok(Partition {
            blocks: canonicalize(blocks),
            n_points: self.n_points,
        })
    }
}

/// A real-valued random variable indexed by sample points. Inputs are always
/// finite; extended-real values only appear in dual-side outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Rv {
    values: Vec<f64>,
}

impl Rv {
    pub fn new(space: &FiniteSpace, values: Vec<f64>) -> Result<Self, ProbError> {
        if values.len() != space.len() {
            return Err(ProbError::DimensionMismatch {
                expected: space.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ProbError::NonFiniteValue(i));
        }
        Ok(Rv { values })
    }

    pub fn zeros(space: &FiniteSpace) -> Self {
        Rv {
            values: vec![0.0; space.len()],
        }
    }

    pub fn constant(space: &FiniteSpace, c: f64) -> Result<Self, ProbError> {
        Rv::new(space, vec![c; space.len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Rv {
        Rv {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn neg(&self) -> Rv {
        self.map(|v| -v)
    }
}

/// A nonnegative density vector dQ/dP. When `normalized`, membership in the
/// set of probability densities (unit P-expectation) is enforced.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    q: Vec<f64>,
    normalized: bool,
}

impl Density {
    pub fn new(space: &FiniteSpace, q: Vec<f64>, normalized: bool) -> Result<Self, ProbError> {
        if q.len() != space.len() {
            return Err(ProbError::DimensionMismatch {
                expected: space.len(),
                got: q.len(),
            });
        }
        for (i, &v) in q.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(ProbError::NegativeDensity(i));
            }
        }
        if normalized {
            let mass: f64 = q.iter().zip(space.probs()).map(|(a, p)| a * p).sum();
            if (mass - 1.0).abs() > DENSITY_NORM_TOL {
                return Err(ProbError::DensityNormalization(mass));
            }
        }
        Ok(Density { q, normalized })
    }

    /// The reference density dP/dP = 1.
    pub fn reference(space: &FiniteSpace) -> Self {
        Density {
            q: vec![1.0; space.len()],
            normalized: true,
        }
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Q(A) = Σ_{i∈A} q_i p_i.
    pub fn mass_on(&self, space: &FiniteSpace, atom: &[usize]) -> f64 {
        atom.iter().map(|&i| self.q[i] * space.probs()[i]).sum()
    }

    /// Membership in P_G: Q agrees with P on every atom of `g`.
    pub fn is_in_p_g(&self, space: &FiniteSpace, g: &Partition, tol: f64) -> bool {
        g.blocks()
            .iter()
            .all(|b| (self.mass_on(space, b) - space.prob_of(b)).abs() <= tol)
    }

    /// Conditional Q-weights on `atom` (normalized to sum 1), or `None` when
    /// the atom is Q-null.
    pub fn conditional_weights(&self, space: &FiniteSpace, atom: &[usize]) -> Option<Vec<f64>> {
        let mass = self.mass_on(space, atom);
        if mass <= 0.0 {
            return None;
        }
        Some(
            atom.iter()
                .map(|&i| self.q[i] * space.probs()[i] / mass)
                .collect(),
        )
    }
}

/// One entry of a per-atom quantity: a value in the extended reals (IEEE
/// infinities are used for ±∞) or the marker for a Q-null atom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AtomValue {
    Val(f64),
    QNull,
}

impl AtomValue {
    pub fn value(self) -> Option<f64> {
        match self {
            AtomValue::Val(v) => Some(v),
            AtomValue::QNull => None,
        }
    }

    pub fn is_qnull(self) -> bool {
        matches!(self, AtomValue::QNull)
    }
}

/// A quantity with one entry per block of a partition, such as a conditional
/// expectation. Comparisons against a Q-null entry are vacuously true,
/// matching the Q-a.s. comparison convention.
#[derive(Clone, Debug, PartialEq)]
pub struct PerAtom {
    values: Vec<AtomValue>,
}

impl PerAtom {
    pub fn new(values: Vec<AtomValue>) -> Self {
        PerAtom { values }
    }

    pub fn from_f64(values: Vec<f64>) -> Self {
        PerAtom {
            values: values.into_iter().map(AtomValue::Val).collect(),
        }
    }

    pub fn values(&self) -> &[AtomValue] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> AtomValue {
        self.values[i]
    }

    /// Entrywise `self ≥ other - tol`, vacuous on Q-null entries of either side.
    pub fn ge(&self, other: &PerAtom, tol: f64) -> bool {
        self.values
            .iter()
            .zip(&other.values)
            .all(|(a, b)| match (a, b) {
                (AtomValue::Val(x), AtomValue::Val(y)) => *x >= *y - tol,
                _ => true,
            })
    }

    /// Entrywise closeness on finite entries; Q-null entries must align.
    pub fn approx_eq(&self, other: &PerAtom, tol: f64) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| match (a, b) {
                    (AtomValue::Val(x), AtomValue::Val(y)) => {
                        (x - y).abs() <= tol || (x == y)
                    }
                    (AtomValue::QNull, AtomValue::QNull) => true,
                    _ => false,
                })
    }
}

/// True iff `x` is constant (exact equality) on every block of `g`.
pub fn is_measurable(x: &Rv, g: &Partition) -> bool {
    g.blocks().iter().all(|b| {
        let v0 = x.values()[b[0]];
        b.iter().all(|&i| x.values()[i] == v0)
    })
}

/// Conditional expectation E_Q[x | G] per atom; Q-null atoms get the marker.
pub fn cond_expect(
    space: &FiniteSpace,
    x: &Rv,
    q: &Density,
    g: &Partition,
) -> Result<PerAtom, ProbError> {
    if x.len() != space.len() || q.q().len() != space.len() {
        return Err(ProbError::DimensionMismatch {
            expected: space.len(),
            got: x.len().max(q.q().len()),
        });
    }
    let values = g
        .blocks()
        .iter()
        .map(|b| {
            let mass = q.mass_on(space, b);
            if mass <= 0.0 {
                AtomValue::QNull
            } else {
                let num: f64 = b
                    .iter()
                    .map(|&i| q.q()[i] * space.probs()[i] * x.values()[i])
                    .sum();
                AtomValue::Val(num / mass)
            }
        })
        .collect();
    Ok(PerAtom::new(values))
}

/// Essential supremum of `x` over an index set; on a full-support finite
/// space this is the plain maximum.
pub fn ess_sup_on(x: &Rv, atom: &[usize]) -> Result<f64, ProbError> {
    if atom.is_empty() {
        return Err(ProbError::EmptyAtom);
    }
    Ok(atom
        .iter()
        .map(|&i| x.values()[i])
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Partition of the G-atoms by dyadic cells of a G-measurable variable.
///
/// Cells have width 2^-n over (-n, n], with tail blocks for y ≤ -n and
/// y > n; each returned block is a union of G-atoms. As n grows, the
/// block-max coarse-graining of `y` converges to `y`.
pub fn dyadic_partition(
    space: &FiniteSpace,
    g: &Partition,
    y: &Rv,
    n: u32,
) -> Result<Partition, ProbError> {
    if !is_measurable(y, g) {
        return Err(ProbError::NotMeasurable);
    }
    let nf = n as f64;
    let scale = (2.0f64).powi(n as i32);
    let max_cell = (n as u64) * 2u64.pow(n + 1);
    let mut groups: std::collections::BTreeMap<u64, Vec<usize>> = std::collections::BTreeMap::new();
    for block in g.blocks() {
        let v = y.values()[block[0]];
        let cell = if v <= -nf {
            0
        } else if v > nf {
            max_cell + 1
        } else {
            // cells (−n+(j−1)/2ⁿ, −n+j/2ⁿ], j = 1..n·2^{n+1}
            (((v + nf) * scale).ceil() as u64).clamp(1, max_cell)
        };
        groups.entry(cell).or_default().extend(block.iter().copied());
    }
    let blocks: Vec<Vec<usize>> = groups.into_values().collect();
    Partition::new(space, blocks)
}
