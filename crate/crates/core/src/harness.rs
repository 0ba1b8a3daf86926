//! Seeded property-test suites and random instance generators.
//!
//! Every check is listed in [`CHECK_REGISTRY`] with a one-line description;
//! [`run_property_suite`] executes all of them against deterministically
//! generated instances and returns a machine-readable report. Reports are
//! reproducible bit-exactly for a fixed seed and case count.

use crate::dual_engine::{
    duality_gap, fenchel_conjugate, glue_density, h_value, k_value, r_value, restrict_to_p_g,
};
use crate::maps::{cce_evaluate, MapSpec, Transform, Utility};
use crate::oracle::{enumerate_partitions, equality_k, grid_k, grid_support, slope_bound, GridCfg};
use crate::prob_core::{cond_expect, AtomValue, Density, FiniteSpace, Partition, PerAtom, Rv};
use crate::rng::{splitmix64, Rng};
use crate::solvers::SolverCfg;

/// The map families exercised by the suite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilyKind {
    Entropic(f64),
    WorstCase,
    Composite,
    TransformedArctan,
    TransformedCubic,
    MirroredEntropic,
    /// Decreasing transform of an entropic map: breaks monotonicity and
    /// quasiconvexity on purpose.
    NegativeControl,
}

impl FamilyKind {
    /// The quasiconvex families under test.
    pub const STANDARD: [FamilyKind; 7] = [
        FamilyKind::Entropic(0.5),
        FamilyKind::Entropic(1.0),
        FamilyKind::Entropic(2.0),
        FamilyKind::WorstCase,
        FamilyKind::Composite,
        FamilyKind::TransformedArctan,
        FamilyKind::TransformedCubic,
    ];

    pub fn build(self, g: Partition) -> MapSpec {
        match self {
            FamilyKind::Entropic(gamma) => MapSpec::entropic(gamma, g).unwrap(),
            FamilyKind::WorstCase => MapSpec::WorstCase { g },
            FamilyKind::Composite => MapSpec::Composite { g },
            FamilyKind::TransformedArctan => MapSpec::Transformed {
                inner: Box::new(MapSpec::entropic(1.0, g).unwrap()),
                transform: Transform::Arctan,
            },
            FamilyKind::TransformedCubic => MapSpec::Transformed {
                inner: Box::new(MapSpec::entropic(1.0, g).unwrap()),
                transform: Transform::ShiftedCubic,
            },
            FamilyKind::MirroredEntropic => MapSpec::entropic(1.0, g).unwrap().mirror(),
            FamilyKind::NegativeControl => MapSpec::Transformed {
                inner: Box::new(MapSpec::entropic(1.0, g).unwrap()),
                transform: Transform::NegArctan,
            },
        }
    }

    pub fn is_cash_invariant(self) -> bool {
        matches!(self, FamilyKind::Entropic(_) | FamilyKind::WorstCase)
    }
}

/// A generated test instance: space, partition, map, input, density pool.
#[derive(Clone, Debug)]
pub struct Instance {
    pub space: FiniteSpace,
    pub g: Partition,
    pub map: MapSpec,
    pub x: Rv,
    /// Always contains the reference density first, then a random
    /// full-support density, then degenerate ones (zero coordinates, a
    /// density vanishing on one atom, per-atom point masses).
    pub densities: Vec<Density>,
}

/// Deterministically generate an instance from a seed.
pub fn gen_instance(seed: u64, n_points: usize, n_atoms: usize, family: FamilyKind) -> Instance {
    assert!(n_atoms >= 1 && n_atoms <= n_points);
    let mut rng = Rng::seed_from_u64(seed);

    let raw: Vec<f64> = (0..n_points).map(|_| 0.2 + rng.next_f64()).collect();
    let s: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.into_iter().map(|v| v / s).collect();
    let labels: Vec<String> = (0..n_points).map(|i| format!("w{i}")).collect();
    let space = FiniteSpace::new(labels, probs).expect("generated space is valid");

    let mut blocks: Vec<Vec<usize>> = (0..n_atoms).map(|a| vec![a]).collect();
    for i in n_atoms..n_points {
        blocks[rng.below(n_atoms)].push(i);
    }
    let g = Partition::new(&space, blocks).expect("generated partition is valid");

    let x = Rv::new(
        &space,
        (0..n_points).map(|_| rng.range_f64(-3.0, 3.0)).collect(),
    )
    .unwrap();

    let normalize = |raw: Vec<f64>, space: &FiniteSpace| -> Option<Density> {
        let mass: f64 = raw.iter().zip(space.probs()).map(|(a, b)| a * b).sum();
        if mass <= 0.0 {
            return None;
        }
        Density::new(space, raw.into_iter().map(|v| v / mass).collect(), true).ok()
    };

    let mut densities = vec![Density::reference(&space)];
    // random full support
    let raw: Vec<f64> = (0..n_points).map(|_| 0.1 + rng.next_f64()).collect();
    densities.extend(normalize(raw, &space));
    // one zero coordinate
    if n_points >= 2 {
        let mut raw: Vec<f64> = (0..n_points).map(|_| 0.1 + rng.next_f64()).collect();
        raw[rng.below(n_points)] = 0.0;
        densities.extend(normalize(raw, &space));
    }
    // vanishing on the first atom
    if n_atoms >= 2 {
        let mut raw: Vec<f64> = (0..n_points).map(|_| 0.1 + rng.next_f64()).collect();
        for &i in &g.blocks()[0] {
            raw[i] = 0.0;
        }
        densities.extend(normalize(raw, &space));
    }
    // per-atom point masses
    let mut raw = vec![0.0; n_points];
    for block in g.blocks() {
        raw[block[rng.below(block.len())]] = 1.0;
    }
    densities.extend(normalize(raw, &space));

    let map = family.build(g.clone());
    Instance {
        space,
        g,
        map,
        x,
        densities,
    }
}

/// One failing case of a check.
#[derive(Clone, Debug, PartialEq)]
pub struct FailureRecord {
    pub case_index: usize,
    pub case_seed: u64,
    pub detail: String,
}

/// Outcome of one named check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<FailureRecord>,
    pub max_deviation: f64,
    /// Wall-clock time spent on this check. Diagnostic only: never part of
    /// the serialized report, which must be reproducible byte for byte.
    pub wall: std::time::Duration,
}

/// Aggregated suite outcome.
#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub seed: u64,
    pub cases_requested: usize,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.failures.is_empty())
    }

    /// CSV serialization with a versioned, fixed schema.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("schema_version,check,cases,failures,max_deviation\n");
        for c in &self.checks {
            out.push_str(&format!(
                "1,{},{},{},{:.12e}\n",
                c.name,
                c.cases,
                c.failures.len(),
                c.max_deviation
            ));
        }
        out
    }

    /// Human-readable summary, one line per check.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {:<32} cases={:<4} failures={:<3} max_dev={:.3e}\n",
                if c.failures.is_empty() { "PASS" } else { "FAIL" },
                c.name,
                c.cases,
                c.failures.len(),
                c.max_deviation
            ));
            for f in c.failures.iter().take(3) {
                out.push_str(&format!(
                    "     case {} (seed {}): {}\n",
                    f.case_index, f.case_seed, f.detail
                ));
            }
        }
        out.push_str(&format!(
            "suite: {} (seed={}, cases={})\n",
            if self.passed() { "PASS" } else { "FAIL" },
            self.seed,
            self.cases_requested
        ));
        out
    }
}

/// Registry of every check: (name, description). The suite emits results in
/// exactly this order.
pub const CHECK_REGISTRY: &[(&str, &str)] = &[
    ("reg-locality", "patching inputs on measurable events patches outputs"),
    ("mon-pointwise", "evaluation is pointwise monotone"),
    ("qco-mixture", "conditional mixtures stay inside sublevel sets"),
    ("cas-translation", "cash invariance for translation-invariant families"),
    ("support-monotone-level", "support value is nondecreasing in the level"),
    ("support-homogeneous", "support value is positively homogeneous in the weights"),
    ("support-grid-bound", "entropic support closed form brackets the grid maximum"),
    ("weak-duality", "dual values never exceed the primal value"),
    ("strong-duality-gap", "primal equals the dual supremum to tolerance"),
    ("r-scale-invariance", "joint scaling of target and weighting leaves R unchanged"),
    ("r-monotone-target", "R is monotone in the target"),
    ("r-lattice-min", "R of a pointwise minimum is the minimum of the R values"),
    ("r-lattice-max", "R of a pointwise maximum is the maximum of the R values"),
    ("r-quasi-affine", "R of a measurable mixture is sandwiched by the R values"),
    ("k-scale-invariance", "K is invariant under positive scaling of the density"),
    ("k-locality", "densities agreeing on an atom give identical K there"),
    ("k-upward-directed-glue", "pasting per-atom densities attains the per-atom best K"),
    ("k-transform-equivariance", "increasing transforms commute with K"),
    ("cas-conjugate-identity", "K equals conditional expectation minus the conjugate"),
    ("feasible-min-glue", "pasting feasible points attains the minimum map value"),
    ("mirror-cce-agreement", "certainty equivalents match the mirrored dual value"),
    ("oracle-grid-vs-engine", "grid minimization brackets the engine's K"),
    ("oracle-equality-coincidence", "equality- and inequality-constrained grid K coincide"),
    ("coarsen-k-min", "the minimum of coarsened K over partitions recovers K"),
    ("coarsen-primal-dual", "coarsened maps certify zero gap and dominate the original"),
    ("coarsen-transfer-bound", "coarsened K transfers between densities up to the base excess"),
    ("glued-eps-optimal", "gluing per-atom argmax weights yields a near-optimal density"),
    ("trivial-partition-real-valued", "the one-atom case reproduces the real-valued duality"),
    ("negative-control-gap", "a non-quasiconvex variant exhibits a strict duality gap"),
    ("negative-control-mon", "the decreasing-transform variant violates monotonicity"),
];

fn solver_cfg(seed: u64) -> SolverCfg {
    SolverCfg {
        bisect_tol: 1e-10,
        bracket_pad: 1.0,
        restarts: 3,
        grid_fallback_resolution: 6,
        seed,
    }
}

fn harness_grid() -> GridCfg {
    GridCfg {
        box_lo: -6.0,
        box_hi: 6.0,
        step: 0.1,
    }
}

fn pick_standard(rng: &mut Rng) -> FamilyKind {
    FamilyKind::STANDARD[rng.below(FamilyKind::STANDARD.len())]
}

fn gen_sizes(rng: &mut Rng) -> (usize, usize) {
    let n_atoms = 1 + rng.below(3);
    let n_points = n_atoms + 1 + rng.below(3);
    (n_points.min(6), n_atoms)
}

fn random_rv(rng: &mut Rng, space: &FiniteSpace, lo: f64, hi: f64) -> Rv {
    Rv::new(
        space,
        (0..space.len()).map(|_| rng.range_f64(lo, hi)).collect(),
    )
    .unwrap()
}

fn g_measurable_rv(rng: &mut Rng, space: &FiniteSpace, g: &Partition, lo: f64, hi: f64) -> Rv {
    let mut v = vec![0.0; space.len()];
    for block in g.blocks() {
        let c = rng.range_f64(lo, hi);
        for &i in block {
            v[i] = c;
        }
    }
    Rv::new(space, v).unwrap()
}

fn finite(pa: &PerAtom, idx: usize) -> Option<f64> {
    match pa.get(idx) {
        AtomValue::Val(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

/// Maximum absolute difference over atoms where both entries are finite.
fn max_diff(a: &PerAtom, b: &PerAtom) -> f64 {
    (0..a.len())
        .filter_map(|i| Some((finite(a, i)? - finite(b, i)?).abs()))
        .fold(0.0, f64::max)
}

type CheckBody = fn(u64) -> Result<f64, String>;

fn run_check(name: &'static str, cases: usize, mut stream: u64, body: CheckBody) -> CheckResult {
    let start = std::time::Instant::now();
    let mut failures = Vec::new();
    let mut max_deviation = 0.0f64;
    for case_index in 0..cases {
        let case_seed = splitmix64(&mut stream);
        match body(case_seed) {
            Ok(dev) => max_deviation = max_deviation.max(dev),
            Err(detail) => failures.push(FailureRecord {
                case_index,
                case_seed,
                detail,
            }),
        }
    }
    CheckResult {
        name,
        cases,
        failures,
        max_deviation,
        wall: start.elapsed(),
    }
}

// ---------------------------------------------------------------------------
// check bodies
// ---------------------------------------------------------------------------

fn chk_reg_locality(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let fam = if rng.below(5) == 0 {
        FamilyKind::MirroredEntropic
    } else {
        pick_standard(&mut rng)
    };
    let inst = gen_instance(rng.next_u64(), np, na, fam);
    let x2 = random_rv(&mut rng, &inst.space, -3.0, 3.0);
    let in_a: Vec<bool> = (0..na).map(|_| rng.below(2) == 0).collect();
    let mut z = inst.x.values().to_vec();
    for (ai, block) in inst.g.blocks().iter().enumerate() {
        if !in_a[ai] {
            for &i in block {
                z[i] = x2.values()[i];
            }
        }
    }
    let z = Rv::new(&inst.space, z).unwrap();
    let ez = inst.map.evaluate(&inst.space, &z).map_err(|e| e.to_string())?;
    let ex = inst.map.evaluate(&inst.space, &inst.x).map_err(|e| e.to_string())?;
    let ex2 = inst.map.evaluate(&inst.space, &x2).map_err(|e| e.to_string())?;
    for (ai, block) in inst.g.blocks().iter().enumerate() {
        let want = if in_a[ai] { &ex } else { &ex2 };
        for &i in block {
            if ez.values()[i] != want.values()[i] {
                return Err(format!(
                    "patched value differs on atom {ai}: {} vs {}",
                    ez.values()[i],
                    want.values()[i]
                ));
            }
        }
    }
    Ok(0.0)
}

fn chk_mon_pointwise(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let fam = if rng.below(5) == 0 {
        FamilyKind::MirroredEntropic
    } else {
        pick_standard(&mut rng)
    };
    let inst = gen_instance(rng.next_u64(), np, na, fam);
    let y = Rv::new(
        &inst.space,
        inst.x
            .values()
            .iter()
            .map(|&v| v + rng.range_f64(0.0, 2.0))
            .collect(),
    )
    .unwrap();
    let ex = inst.map.evaluate(&inst.space, &inst.x).map_err(|e| e.to_string())?;
    let ey = inst.map.evaluate(&inst.space, &y).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for (a, b) in ex.values().iter().zip(ey.values()) {
        if a > &(b + 1e-12) {
            return Err(format!("monotonicity violated: {a} > {b}"));
        }
        dev = dev.max((a - b).min(0.0).abs() * 0.0); // deviation not meaningful here
    }
    Ok(dev)
}

fn chk_qco_mixture(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inst = gen_instance(rng.next_u64(), np, na, pick_standard(&mut rng));
    let x2 = random_rv(&mut rng, &inst.space, -3.0, 3.0);
    let e1 = inst.map.evaluate(&inst.space, &inst.x).map_err(|e| e.to_string())?;
    let e2 = inst.map.evaluate(&inst.space, &x2).map_err(|e| e.to_string())?;
    let lam = g_measurable_rv(&mut rng, &inst.space, &inst.g, 0.0, 1.0);
    let z = Rv::new(
        &inst.space,
        (0..inst.space.len())
            .map(|i| {
                lam.values()[i] * inst.x.values()[i] + (1.0 - lam.values()[i]) * x2.values()[i]
            })
            .collect(),
    )
    .unwrap();
    let ez = inst.map.evaluate(&inst.space, &z).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for i in 0..inst.space.len() {
        let bound = e1.values()[i].max(e2.values()[i]);
        let excess = ez.values()[i] - bound;
        dev = dev.max(excess);
        if excess > 1e-9 {
            return Err(format!("mixture escapes the sublevel set by {excess:.3e}"));
        }
    }
    Ok(dev.max(0.0))
}

fn chk_cas_translation(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let fam = if rng.below(2) == 0 {
        FamilyKind::Entropic(0.5 + rng.next_f64() * 1.5)
    } else {
        FamilyKind::WorstCase
    };
    let inst = gen_instance(rng.next_u64(), np, na, fam);
    let lam = g_measurable_rv(&mut rng, &inst.space, &inst.g, -2.0, 2.0);
    let shifted = Rv::new(
        &inst.space,
        inst.x
            .values()
            .iter()
            .zip(lam.values())
            .map(|(a, b)| a + b)
            .collect(),
    )
    .unwrap();
    let e = inst.map.evaluate(&inst.space, &inst.x).map_err(|e| e.to_string())?;
    let es = inst.map.evaluate(&inst.space, &shifted).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for i in 0..inst.space.len() {
        let d = (es.values()[i] - e.values()[i] - lam.values()[i]).abs();
        dev = dev.max(d);
    }
    if dev > 1e-10 {
        return Err(format!("translation invariance off by {dev:.3e}"));
    }
    Ok(dev)
}

fn chk_support_monotone(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inst = gen_instance(rng.next_u64(), np, na, pick_standard(&mut rng));
    let atom = &inst.g.blocks()[rng.below(na)];
    let w: Vec<f64> = (0..atom.len()).map(|_| rng.next_f64() + 0.01).collect();
    let mut prev = f64::NEG_INFINITY;
    let base = rng.range_f64(-2.0, 0.0);
    for k in 0..7 {
        let c = base + 0.4 * k as f64;
        let v = inst
            .map
            .support_value(&inst.space, atom, c, &w)
            .map_err(|e| e.to_string())?;
        if v < prev - 1e-12 && v.is_finite() && prev.is_finite() {
            return Err(format!("support decreased: {prev} -> {v} at level {c}"));
        }
        if v > prev || v.is_infinite() {
            prev = v;
        }
    }
    Ok(0.0)
}

fn chk_support_homogeneous(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inst = gen_instance(rng.next_u64(), np, na, pick_standard(&mut rng));
    let atom = &inst.g.blocks()[rng.below(na)];
    let w: Vec<f64> = (0..atom.len()).map(|_| rng.next_f64() + 0.05).collect();
    let c = rng.range_f64(-1.0, 1.0).abs() + 0.1; // keep inside every range
    let base = inst
        .map
        .support_value(&inst.space, atom, c, &w)
        .map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for lambda in [0.5f64, 2.0, 10.0] {
        let ws: Vec<f64> = w.iter().map(|v| v * lambda).collect();
        let scaled = inst
            .map
            .support_value(&inst.space, atom, c, &ws)
            .map_err(|e| e.to_string())?;
        if base.is_infinite() || scaled.is_infinite() {
            if base.is_infinite() != scaled.is_infinite() {
                return Err("homogeneity broken at infinity".into());
            }
            continue;
        }
        let d = (scaled - lambda * base).abs() / (1.0 + (lambda * base).abs());
        dev = dev.max(d);
        if d > 1e-9 {
            return Err(format!("homogeneity off by {d:.3e} at lambda={lambda}"));
        }
    }
    Ok(dev)
}

fn chk_support_grid_bound(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let space = FiniteSpace::uniform(2);
    let m = MapSpec::entropic(1.0, Partition::trivial(&space)).unwrap();
    let w: Vec<f64> = (0..2).map(|_| 0.1 + 0.9 * rng.next_f64()).collect();
    let c = rng.range_f64(-1.0, 1.0);
    let analytic = m
        .support_value(&space, &[0, 1], c, &w)
        .map_err(|e| e.to_string())?;
    let cfg = GridCfg {
        box_lo: -6.0,
        box_hi: 6.0,
        step: 0.05,
    };
    let grid = grid_support(&space, &m, &[0, 1], c, &w, &cfg)
        .map_err(|e| e.to_string())?
        .ok_or("empty sublevel set on grid")?;
    if grid > analytic + 1e-9 {
        return Err(format!("grid beat the closed form: {grid} > {analytic}"));
    }
    let dev = analytic - grid;
    if dev > 0.1 {
        return Err(format!("grid too far below the closed form: {dev:.3e}"));
    }
    Ok(dev)
}

fn chk_weak_duality(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inst = gen_instance(rng.next_u64(), np, na, pick_standard(&mut rng));
    let primal = inst.map.evaluate(&inst.space, &inst.x).map_err(|e| e.to_string())?;
    let cfg = solver_cfg(seed);
    let mut dev = 0.0f64;
    for q in &inst.densities {
        let k = k_value(&inst.space, &inst.map, &inst.x, q, &cfg).map_err(|e| e.to_string())?;
        for (idx, block) in inst.g.blocks().iter().enumerate() {
            if let AtomValue::Val(kv) = k.get(idx) {
                let p = primal.values()[block[0]];
                let excess = kv - p;
                dev = dev.max(excess);
                if excess > 1e-8 {
                    return Err(format!("K exceeds primal by {excess:.3e} on atom {idx}"));
                }
            }
        }
    }
    Ok(dev.max(0.0))
}

fn chk_strong_duality(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inst = gen_instance(rng.next_u64(), np, na, pick_standard(&mut rng));
    let rep = duality_gap(&inst.space, &inst.map, &inst.x, &solver_cfg(seed))
        .map_err(|e| e.to_string())?;
    let gap = rep.max_abs_gap();
    if gap > 1e-6 {
        return Err(format!("duality gap {gap:.3e} exceeds 1e-6"));
    }
    Ok(gap)
}

fn chk_r_scale(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inst = gen_instance(rng.next_u64(), np, na, pick_standard(&mut rng));
    let y = g_measurable_rv(&mut rng, &inst.space, &inst.g, -2.0, 2.0);
    let xi = inst.densities[1].clone();
    let cfg = solver_cfg(seed);
    let r1 = r_value(&inst.space, &inst.map, &y, &xi, &cfg).map_err(|e| e.to_string())?;
    for lambda in [0.5f64, 2.0] {
        let ys = y.map(|v| lambda * v);
        let xis = Density::new(
            &inst.space,
            xi.q().iter().map(|v| v * lambda).collect(),
            false,
        )
        .unwrap();
        let r2 = r_value(&inst.space, &inst.map, &ys, &xis, &cfg).map_err(|e| e.to_string())?;
        if r1 != r2 {
            return Err(format!("scale invariance not exact at lambda={lambda}"));
        }
    }
    let ys = y.map(|v| 10.0 * v);
    let xis = Density::new(&inst.space, xi.q().iter().map(|v| v * 10.0).collect(), false).unwrap();
    let r2 = r_value(&inst.space, &inst.map, &ys, &xis, &cfg).map_err(|e| e.to_string())?;
    let dev = max_diff(&r1, &r2);
    if dev > 1e-9 {
        return Err(format!("scale invariance off by {dev:.3e} at lambda=10"));
    }
    Ok(dev)
}

fn chk_r_monotone(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inst = gen_instance(rng.next_u64(), np, na, pick_standard(&mut rng));
    let y1 = g_measurable_rv(&mut rng, &inst.space, &inst.g, -2.0, 2.0);
    let bump = g_measurable_rv(&mut rng, &inst.space, &inst.g, 0.0, 2.0);
    let y2 = Rv::new(
        &inst.space,
        y1.values().iter().zip(bump.values()).map(|(a, b)| a + b).collect(),
    )
    .unwrap();
    let xi = inst.densities[1].clone();
    let cfg = solver_cfg(seed);
    let r1 = r_value(&inst.space, &inst.map, &y1, &xi, &cfg).map_err(|e| e.to_string())?;
    let r2 = r_value(&inst.space, &inst.map, &y2, &xi, &cfg).map_err(|e| e.to_string())?;
    for i in 0..r1.len() {
        if let (Some(a), Some(b)) = (finite(&r1, i), finite(&r2, i)) {
            if a > b + 1e-9 {
                return Err(format!("R not monotone on atom {i}: {a} > {b}"));
            }
        }
    }
    Ok(0.0)
}

fn r_pair(
    seed: u64,
) -> Result<(Instance, Rv, Rv, Density, SolverCfg, Rng), String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inst = gen_instance(rng.next_u64(), np, na, pick_standard(&mut rng));
    let y1 = g_measurable_rv(&mut rng, &inst.space, &inst.g, -2.0, 2.0);
    let y2 = g_measurable_rv(&mut rng, &inst.space, &inst.g, -2.0, 2.0);
    let xi = inst.densities[1].clone();
    let cfg = solver_cfg(seed);
    Ok((inst, y1, y2, xi, cfg, rng))
}

fn chk_r_lattice_min(seed: u64) -> Result<f64, String> {
    let (inst, y1, y2, xi, cfg, _) = r_pair(seed)?;
    let ymin = Rv::new(
        &inst.space,
        y1.values().iter().zip(y2.values()).map(|(a, b)| a.min(*b)).collect(),
    )
    .unwrap();
    let r1 = r_value(&inst.space, &inst.map, &y1, &xi, &cfg).map_err(|e| e.to_string())?;
    let r2 = r_value(&inst.space, &inst.map, &y2, &xi, &cfg).map_err(|e| e.to_string())?;
    let rm = r_value(&inst.space, &inst.map, &ymin, &xi, &cfg).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for i in 0..rm.len() {
        if let (Some(a), Some(b), Some(m)) = (finite(&r1, i), finite(&r2, i), finite(&rm, i)) {
            let d = (m - a.min(b)).abs();
            dev = dev.max(d);
            if d > 1e-9 {
                return Err(format!("lattice-min identity off by {d:.3e} on atom {i}"));
            }
        }
    }
    Ok(dev)
}

fn chk_r_lattice_max(seed: u64) -> Result<f64, String> {
    let (inst, y1, y2, xi, cfg, _) = r_pair(seed)?;
    let ymax = Rv::new(
        &inst.space,
        y1.values().iter().zip(y2.values()).map(|(a, b)| a.max(*b)).collect(),
    )
    .unwrap();
    let r1 = r_value(&inst.space, &inst.map, &y1, &xi, &cfg).map_err(|e| e.to_string())?;
    let r2 = r_value(&inst.space, &inst.map, &y2, &xi, &cfg).map_err(|e| e.to_string())?;
    let rm = r_value(&inst.space, &inst.map, &ymax, &xi, &cfg).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for i in 0..rm.len() {
        if let (Some(a), Some(b), Some(m)) = (finite(&r1, i), finite(&r2, i), finite(&rm, i)) {
            let d = (m - a.max(b)).abs();
            dev = dev.max(d);
            if d > 1e-9 {
                return Err(format!("lattice-max identity off by {d:.3e} on atom {i}"));
            }
        }
    }
    Ok(dev)
}

fn chk_r_quasi_affine(seed: u64) -> Result<f64, String> {
    let (inst, y1, y2, xi, cfg, mut rng) = r_pair(seed)?;
    let lam = g_measurable_rv(&mut rng, &inst.space, &inst.g, 0.0, 1.0);
    let ymix = Rv::new(
        &inst.space,
        (0..inst.space.len())
            .map(|i| lam.values()[i] * y1.values()[i] + (1.0 - lam.values()[i]) * y2.values()[i])
            .collect(),
    )
    .unwrap();
    let r1 = r_value(&inst.space, &inst.map, &y1, &xi, &cfg).map_err(|e| e.to_string())?;
    let r2 = r_value(&inst.space, &inst.map, &y2, &xi, &cfg).map_err(|e| e.to_string())?;
    let rm = r_value(&inst.space, &inst.map, &ymix, &xi, &cfg).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for i in 0..rm.len() {
        if let (Some(a), Some(b), Some(m)) = (finite(&r1, i), finite(&r2, i), finite(&rm, i)) {
            let lo = a.min(b) - 1e-9;
            let hi = a.max(b) + 1e-9;
            dev = dev.max((lo - m).max(m - hi).max(0.0));
            if m < lo || m > hi {
                return Err(format!(
                    "quasi-affinity sandwich broken on atom {i}: {m} outside [{lo}, {hi}]"
                ));
            }
        }
    }
    Ok(dev)
}

fn chk_k_scale(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inst = gen_instance(rng.next_u64(), np, na, pick_standard(&mut rng));
    let q = inst.densities[1].clone();
    let cfg = solver_cfg(seed);
    let k1 = k_value(&inst.space, &inst.map, &inst.x, &q, &cfg).map_err(|e| e.to_string())?;
    for lambda in [0.5f64, 2.0, 4.0] {
        let qs = Density::new(
            &inst.space,
            q.q().iter().map(|v| v * lambda).collect(),
            false,
        )
        .unwrap();
        let k2 = k_value(&inst.space, &inst.map, &inst.x, &qs, &cfg).map_err(|e| e.to_string())?;
        if k1 != k2 {
            return Err(format!("K changed under scaling by {lambda}"));
        }
    }
    let qs = Density::new(&inst.space, q.q().iter().map(|v| v * 10.0).collect(), false).unwrap();
    let k2 = k_value(&inst.space, &inst.map, &inst.x, &qs, &cfg).map_err(|e| e.to_string())?;
    let dev = max_diff(&k1, &k2);
    if dev > 1e-9 {
        return Err(format!("K off by {dev:.3e} under scaling by 10"));
    }
    Ok(dev)
}

fn chk_k_locality(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inst = gen_instance(rng.next_u64(), np, na, pick_standard(&mut rng));
    let q1 = &inst.densities[1];
    let mut raw: Vec<f64> = (0..np).map(|_| 0.1 + rng.next_f64()).collect();
    let atom_idx = rng.below(na);
    for &i in &inst.g.blocks()[atom_idx] {
        raw[i] = q1.q()[i];
    }
    let q2 = Density::new(&inst.space, raw, false).unwrap();
    let cfg = solver_cfg(seed);
    let k1 = k_value(&inst.space, &inst.map, &inst.x, q1, &cfg).map_err(|e| e.to_string())?;
    let k2 = k_value(&inst.space, &inst.map, &inst.x, &q2, &cfg).map_err(|e| e.to_string())?;
    if k1.get(atom_idx) != k2.get(atom_idx) {
        return Err(format!(
            "locality broken on atom {atom_idx}: {:?} vs {:?}",
            k1.get(atom_idx),
            k2.get(atom_idx)
        ));
    }
    Ok(0.0)
}

fn chk_k_glue(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inst = gen_instance(rng.next_u64(), np, na, pick_standard(&mut rng));
    let cfg = solver_cfg(seed);
    let q1 = &inst.densities[0];
    let q2 = &inst.densities[1];
    let k1 = k_value(&inst.space, &inst.map, &inst.x, q1, &cfg).map_err(|e| e.to_string())?;
    let k2 = k_value(&inst.space, &inst.map, &inst.x, q2, &cfg).map_err(|e| e.to_string())?;
    let mut weights = Vec::new();
    for (idx, atom) in inst.g.blocks().iter().enumerate() {
        let a = finite(&k1, idx).unwrap_or(f64::NEG_INFINITY);
        let b = finite(&k2, idx).unwrap_or(f64::NEG_INFINITY);
        let src = if a >= b { q1 } else { q2 };
        weights.push(src.conditional_weights(&inst.space, atom).unwrap());
    }
    let glued = glue_density(&inst.space, &inst.g, &weights).map_err(|e| e.to_string())?;
    let kg = k_value(&inst.space, &inst.map, &inst.x, &glued, &cfg).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for idx in 0..na {
        let best = finite(&k1, idx)
            .unwrap_or(f64::NEG_INFINITY)
            .max(finite(&k2, idx).unwrap_or(f64::NEG_INFINITY));
        if let Some(g) = finite(&kg, idx) {
            let short = best - g;
            dev = dev.max(short);
            if short > 1e-8 {
                return Err(format!("glued K short of the best by {short:.3e} on atom {idx}"));
            }
        }
    }
    Ok(dev.max(0.0))
}

fn chk_k_transform(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inner_fam = [
        FamilyKind::Entropic(1.0),
        FamilyKind::WorstCase,
        FamilyKind::Composite,
    ][rng.below(3)];
    let transform = [Transform::Arctan, Transform::ShiftedCubic][rng.below(2)];
    let inst = gen_instance(rng.next_u64(), np, na, inner_fam);
    let wrapped = MapSpec::Transformed {
        inner: Box::new(inst.map.clone()),
        transform,
    };
    let q = inst.densities[1].clone();
    let cfg = solver_cfg(seed);
    let ki = k_value(&inst.space, &inst.map, &inst.x, &q, &cfg).map_err(|e| e.to_string())?;
    let kt = k_value(&inst.space, &wrapped, &inst.x, &q, &cfg).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for idx in 0..na {
        if let (Some(a), Some(b)) = (finite(&ki, idx), finite(&kt, idx)) {
            let d = (transform.apply(a) - b).abs();
            dev = dev.max(d);
            if d > 1e-8 {
                return Err(format!("transform equivariance off by {d:.3e} on atom {idx}"));
            }
        }
    }
    Ok(dev)
}

fn chk_cas_conjugate(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let fam = if rng.below(2) == 0 {
        FamilyKind::Entropic(0.5 + 1.5 * rng.next_f64())
    } else {
        FamilyKind::WorstCase
    };
    let inst = gen_instance(rng.next_u64(), np, na, fam);
    let q = inst.densities[1].clone();
    let cfg = solver_cfg(seed);
    let qt = restrict_to_p_g(&inst.space, &q, &inst.g).map_err(|e| e.to_string())?;
    let k = k_value(&inst.space, &inst.map, &inst.x, &q, &cfg).map_err(|e| e.to_string())?;
    let e = cond_expect(&inst.space, &inst.x, &qt, &inst.g).map_err(|e| e.to_string())?;
    let conj = fenchel_conjugate(&inst.space, &inst.map, &qt, &cfg).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for idx in 0..na {
        if let (Some(kv), Some(ev), Some(cv)) =
            (finite(&k, idx), finite(&e, idx), finite(&conj, idx))
        {
            let d = (kv - (ev - cv)).abs();
            dev = dev.max(d);
            if d > 1e-8 {
                return Err(format!("conjugate identity off by {d:.3e} on atom {idx}"));
            }
        }
    }
    Ok(dev)
}

fn chk_feasible_min_glue(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inst = gen_instance(rng.next_u64(), np, na, pick_standard(&mut rng));
    let q = inst.densities[rng.below(inst.densities.len())].clone();
    let xi1 = Rv::new(
        &inst.space,
        inst.x.values().iter().map(|&v| v + rng.range_f64(0.0, 2.0)).collect(),
    )
    .unwrap();
    let xi2 = Rv::new(
        &inst.space,
        inst.x.values().iter().map(|&v| v + rng.range_f64(0.0, 2.0)).collect(),
    )
    .unwrap();
    let e1 = inst.map.evaluate(&inst.space, &xi1).map_err(|e| e.to_string())?;
    let e2 = inst.map.evaluate(&inst.space, &xi2).map_err(|e| e.to_string())?;
    // paste the better of the two on each atom
    let mut z = vec![0.0; inst.space.len()];
    for block in inst.g.blocks() {
        let take1 = e1.values()[block[0]] <= e2.values()[block[0]];
        for &i in block {
            z[i] = if take1 { xi1.values()[i] } else { xi2.values()[i] };
        }
    }
    let z = Rv::new(&inst.space, z).unwrap();
    let ez = inst.map.evaluate(&inst.space, &z).map_err(|e| e.to_string())?;
    for i in 0..inst.space.len() {
        let want = e1.values()[i].min(e2.values()[i]);
        if ez.values()[i] != want {
            return Err(format!("pasted value differs at point {i}"));
        }
    }
    // pasted point stays feasible for the original constraint
    let target = cond_expect(&inst.space, &inst.x, &q, &inst.g).map_err(|e| e.to_string())?;
    let attained = cond_expect(&inst.space, &z, &q, &inst.g).map_err(|e| e.to_string())?;
    if !attained.ge(&target, 1e-12) {
        return Err("pasted point lost feasibility".into());
    }
    Ok(0.0)
}

fn chk_mirror_cce(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let alpha = [0.5, 1.0, 2.0][rng.below(3)];
    let inst = gen_instance(rng.next_u64(), np, na, FamilyKind::WorstCase); // space/x only
    let mirrored = MapSpec::entropic(alpha, inst.g.clone()).unwrap().mirror();
    let cce = cce_evaluate(
        Utility::Exponential { alpha },
        &inst.space,
        &inst.x,
        &inst.g,
    )
    .map_err(|e| e.to_string())?;
    let rep = duality_gap(&inst.space, &mirrored, &inst.x, &solver_cfg(seed))
        .map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for (idx, block) in inst.g.blocks().iter().enumerate() {
        let a = cce.values()[block[0]];
        let r = &rep.atoms[idx];
        if (a - r.primal).abs() > 1e-10 {
            return Err(format!("certainty equivalent differs from the mirrored primal"));
        }
        let d = (a - r.dual).abs();
        dev = dev.max(d);
        if d > 1e-6 {
            return Err(format!("mirrored dual off by {d:.3e} on atom {idx}"));
        }
    }
    Ok(dev)
}

/// A balanced density keeping grid minimizers inside the oracle box.
fn balanced_density(rng: &mut Rng, space: &FiniteSpace) -> Density {
    let raw: Vec<f64> = (0..space.len()).map(|_| 0.5 + rng.next_f64()).collect();
    let mass: f64 = raw.iter().zip(space.probs()).map(|(a, b)| a * b).sum();
    Density::new(space, raw.into_iter().map(|v| v / mass).collect(), true).unwrap()
}

fn oracle_instance(seed: u64) -> (Instance, Density, Rv) {
    let mut rng = Rng::seed_from_u64(seed);
    let fam = [
        FamilyKind::Entropic(1.0),
        FamilyKind::WorstCase,
        FamilyKind::Composite,
    ][rng.below(3)];
    let n_atoms = 1 + rng.below(2);
    let n_points = (n_atoms + 1 + rng.below(2)).min(4);
    let inst = gen_instance(rng.next_u64(), n_points, n_atoms, fam);
    let q = balanced_density(&mut rng, &inst.space);
    let x = random_rv(&mut rng, &inst.space, -1.5, 1.5);
    (inst, q, x)
}

fn chk_oracle_grid(seed: u64) -> Result<f64, String> {
    let (inst, q, x) = oracle_instance(seed);
    let gcfg = harness_grid();
    let scfg = solver_cfg(seed);
    let gk = grid_k(&inst.space, &inst.map, &x, &q, &gcfg).map_err(|e| e.to_string())?;
    let kv = k_value(&inst.space, &inst.map, &x, &q, &scfg).map_err(|e| e.to_string())?;
    let l = slope_bound(&inst.map, &gcfg);
    let mut dev = 0.0f64;
    for idx in 0..gk.len() {
        if let (Some(a), Some(b)) = (finite(&gk, idx), finite(&kv, idx)) {
            if a < b - 1e-6 {
                return Err(format!("grid minimum beat the engine on atom {idx}: {a} < {b}"));
            }
            let d = a - b;
            dev = dev.max(d);
            if d > l * gcfg.step + 1e-6 {
                return Err(format!("grid gap {d:.3e} exceeds the slope bound on atom {idx}"));
            }
        }
    }
    Ok(dev.max(0.0))
}

fn chk_oracle_equality(seed: u64) -> Result<f64, String> {
    let (inst, q, x) = oracle_instance(seed);
    let gcfg = harness_grid();
    let gk = grid_k(&inst.space, &inst.map, &x, &q, &gcfg).map_err(|e| e.to_string())?;
    let ek = equality_k(&inst.space, &inst.map, &x, &q, &gcfg).map_err(|e| e.to_string())?;
    let l = slope_bound(&inst.map, &gcfg);
    let mut dev = 0.0f64;
    for idx in 0..gk.len() {
        if let (Some(a), Some(b)) = (finite(&gk, idx), finite(&ek, idx)) {
            let d = (a - b).abs();
            dev = dev.max(d);
            if d > 2.0 * l * gcfg.step {
                return Err(format!(
                    "equality and inequality variants differ by {d:.3e} on atom {idx}"
                ));
            }
        }
    }
    Ok(dev)
}

fn coarsen_instance(seed: u64) -> (Instance, Density) {
    let mut rng = Rng::seed_from_u64(seed);
    let fam = [
        FamilyKind::Entropic(1.0),
        FamilyKind::WorstCase,
        FamilyKind::Composite,
        FamilyKind::TransformedArctan,
    ][rng.below(4)];
    let n_atoms = 2 + rng.below(2);
    let n_points = (n_atoms + 1 + rng.below(2)).min(5);
    let inst = gen_instance(rng.next_u64(), n_points, n_atoms, fam);
    let q = balanced_density(&mut rng, &inst.space);
    (inst, q)
}

fn chk_coarsen_k_min(seed: u64) -> Result<f64, String> {
    let (inst, q) = coarsen_instance(seed);
    let cfg = solver_cfg(seed);
    let k = k_value(&inst.space, &inst.map, &inst.x, &q, &cfg).map_err(|e| e.to_string())?;
    let partitions = enumerate_partitions(&inst.space, &inst.g).map_err(|e| e.to_string())?;
    let na = inst.g.n_atoms();
    let mut best = vec![f64::INFINITY; na];
    for gamma in &partitions {
        let cm = inst.map.clone().coarsen(gamma.clone()).map_err(|e| e.to_string())?;
        let kg = k_value(&inst.space, &cm, &inst.x, &q, &cfg).map_err(|e| e.to_string())?;
        for (bidx, block) in gamma.blocks().iter().enumerate() {
            if let Some(v) = finite(&kg, bidx) {
                for (aidx, atom) in inst.g.blocks().iter().enumerate() {
                    if block.contains(&atom[0]) {
                        best[aidx] = best[aidx].min(v);
                    }
                }
            }
        }
    }
    let mut dev = 0.0f64;
    for idx in 0..na {
        if let Some(kv) = finite(&k, idx) {
            let d = (best[idx] - kv).abs();
            dev = dev.max(d);
            if d > 1e-8 {
                return Err(format!(
                    "coarsened minimum {} differs from K {} by {d:.3e} on atom {idx}",
                    best[idx], kv
                ));
            }
        }
    }
    Ok(dev)
}

fn chk_coarsen_primal_dual(seed: u64) -> Result<f64, String> {
    let (inst, _) = coarsen_instance(seed);
    let cfg = solver_cfg(seed);
    let base = inst.map.evaluate(&inst.space, &inst.x).map_err(|e| e.to_string())?;
    let partitions = enumerate_partitions(&inst.space, &inst.g).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for gamma in &partitions {
        let cm = inst.map.clone().coarsen(gamma.clone()).map_err(|e| e.to_string())?;
        let coarse_eval = cm.evaluate(&inst.space, &inst.x).map_err(|e| e.to_string())?;
        for i in 0..inst.space.len() {
            if coarse_eval.values()[i] < base.values()[i] - 1e-12 {
                return Err(format!("coarsened map fell below the original at point {i}"));
            }
        }
        let rep = h_value(&inst.space, &cm, &inst.x, &cfg).map_err(|e| e.to_string())?;
        let gap = rep.max_abs_gap();
        dev = dev.max(gap);
        if gap > 1e-6 {
            return Err(format!("coarsened duality gap {gap:.3e} exceeds 1e-6"));
        }
    }
    Ok(dev)
}

fn chk_coarsen_transfer(seed: u64) -> Result<f64, String> {
    let (inst, q) = coarsen_instance(seed);
    let mut rng = Rng::seed_from_u64(seed ^ 0xB0B);
    let p = balanced_density(&mut rng, &inst.space);
    let cfg = solver_cfg(seed);
    let na = inst.g.n_atoms();
    // B: a random nonempty union of atoms
    let mut in_b: Vec<bool> = (0..na).map(|_| rng.below(2) == 0).collect();
    if !in_b.iter().any(|&b| b) {
        in_b[rng.below(na)] = true;
    }
    let kq = k_value(&inst.space, &inst.map, &inst.x, &q, &cfg).map_err(|e| e.to_string())?;
    let kp = k_value(&inst.space, &inst.map, &inst.x, &p, &cfg).map_err(|e| e.to_string())?;
    let mut eps = 0.0f64;
    for idx in 0..na {
        if in_b[idx] {
            if let (Some(a), Some(b)) = (finite(&kq, idx), finite(&kp, idx)) {
                eps = eps.max((a - b).max(0.0));
            }
        }
    }
    // partitions of the atoms inside B, with the complement kept whole
    let b_atoms: Vec<usize> = (0..na).filter(|&i| in_b[i]).collect();
    let c_points: Vec<usize> = (0..na)
        .filter(|&i| !in_b[i])
        .flat_map(|i| inst.g.blocks()[i].iter().copied())
        .collect();
    let b_points: Vec<usize> = b_atoms
        .iter()
        .flat_map(|&i| inst.g.blocks()[i].iter().copied())
        .collect();
    let sub_space_blocks: Vec<Vec<usize>> = b_atoms
        .iter()
        .map(|&i| inst.g.blocks()[i].clone())
        .collect();
    // enumerate partitions of b_atoms via a helper partition on the points of B
    let gammas = {
        // restricted-growth enumeration over the atoms of B
        let nb = b_atoms.len();
        let mut result: Vec<Vec<Vec<usize>>> = Vec::new();
        let mut rgs = vec![0usize; nb];
        loop {
            let n_blocks = rgs.iter().copied().max().unwrap_or(0) + 1;
            let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); n_blocks];
            for (k, &b) in rgs.iter().enumerate() {
                blocks[b].extend(sub_space_blocks[k].iter().copied());
            }
            result.push(blocks);
            let mut i = nb;
            let mut advanced = false;
            while i > 1 {
                i -= 1;
                let cap = rgs[..i].iter().copied().max().unwrap_or(0) + 1;
                if rgs[i] < cap {
                    rgs[i] += 1;
                    for v in rgs[i + 1..].iter_mut() {
                        *v = 0;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
        result
    };
    let mut dev = 0.0f64;
    for mut blocks in gammas {
        if !c_points.is_empty() {
            blocks.push(c_points.clone());
        }
        let gamma = Partition::new(&inst.space, blocks).map_err(|e| e.to_string())?;
        let cm = inst.map.clone().coarsen(gamma.clone()).map_err(|e| e.to_string())?;
        let kgq = k_value(&inst.space, &cm, &inst.x, &q, &cfg).map_err(|e| e.to_string())?;
        let kgp = k_value(&inst.space, &cm, &inst.x, &p, &cfg).map_err(|e| e.to_string())?;
        for (bidx, block) in gamma.blocks().iter().enumerate() {
            if !block.iter().all(|i| b_points.contains(i)) {
                continue;
            }
            if let (Some(a), Some(b)) = (finite(&kgq, bidx), finite(&kgp, bidx)) {
                let excess = a - b - eps;
                dev = dev.max(excess);
                if excess > 1e-8 {
                    return Err(format!(
                        "transfer bound violated by {excess:.3e} on a coarse block"
                    ));
                }
            }
        }
    }
    Ok(dev.max(0.0))
}

fn chk_glued_eps_optimal(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let (np, na) = gen_sizes(&mut rng);
    let inst = gen_instance(rng.next_u64(), np, na, pick_standard(&mut rng));
    let cfg = solver_cfg(seed);
    let rep = h_value(&inst.space, &inst.map, &inst.x, &cfg).map_err(|e| e.to_string())?;
    let weights: Vec<Vec<f64>> = rep.atoms.iter().map(|a| a.argmax_weights.clone()).collect();
    let glued = glue_density(&inst.space, inst.map.partition(), &weights).map_err(|e| e.to_string())?;
    let k = k_value(&inst.space, &inst.map, &inst.x, &glued, &cfg).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for (idx, a) in rep.atoms.iter().enumerate() {
        if let Some(kv) = finite(&k, idx) {
            let short = a.dual - kv;
            dev = dev.max(short);
            if short > 1e-6 {
                return Err(format!(
                    "single glued density misses the dual by {short:.3e} on atom {idx}"
                ));
            }
        }
    }
    Ok(dev.max(0.0))
}

fn chk_trivial_partition(seed: u64) -> Result<f64, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let n_points = 2 + rng.below(4);
    let fam = if rng.below(5) == 0 {
        FamilyKind::MirroredEntropic
    } else {
        pick_standard(&mut rng)
    };
    let inst = gen_instance(rng.next_u64(), n_points, 1, fam);
    let rep = duality_gap(&inst.space, &inst.map, &inst.x, &solver_cfg(seed))
        .map_err(|e| e.to_string())?;
    let gap = rep.max_abs_gap();
    if gap > 1e-6 {
        return Err(format!("real-valued duality gap {gap:.3e} exceeds 1e-6"));
    }
    Ok(gap)
}

fn negative_control_checks(seed: u64, cases: usize) -> (CheckResult, CheckResult) {
    let start = std::time::Instant::now();
    let mut stream = seed;
    let mut min_gap = f64::INFINITY;
    let mut gap_seen = false;
    let mut mon_violation = false;
    let mut max_mon_dev = 0.0f64;
    for _ in 0..cases {
        let case_seed = splitmix64(&mut stream);
        let mut rng = Rng::seed_from_u64(case_seed);
        let (np, na) = gen_sizes(&mut rng);
        let inst = gen_instance(rng.next_u64(), np, na, FamilyKind::NegativeControl);
        if let Ok(rep) = duality_gap(&inst.space, &inst.map, &inst.x, &solver_cfg(case_seed)) {
            let g = rep.max_abs_gap();
            min_gap = min_gap.min(g);
            if g > 1e-3 {
                gap_seen = true;
            }
        }
        let y = Rv::new(
            &inst.space,
            inst.x.values().iter().map(|&v| v + rng.range_f64(0.1, 2.0)).collect(),
        )
        .unwrap();
        if let (Ok(ex), Ok(ey)) = (
            inst.map.evaluate(&inst.space, &inst.x),
            inst.map.evaluate(&inst.space, &y),
        ) {
            for (a, b) in ex.values().iter().zip(ey.values()) {
                let d = a - b; // positive d means increasing inputs lowered the value
                max_mon_dev = max_mon_dev.max(d.max(0.0));
                if d > 1e-6 {
                    mon_violation = true;
                }
            }
        }
    }
    let gap_result = CheckResult {
        name: "negative-control-gap",
        cases,
        failures: if gap_seen {
            Vec::new()
        } else {
            vec![FailureRecord {
                case_index: 0,
                case_seed: seed,
                detail: "no instance exhibited a duality gap above 1e-3".into(),
            }]
        },
        max_deviation: if min_gap.is_finite() { min_gap } else { 0.0 },
        wall: start.elapsed(),
    };
    let mon_result = CheckResult {
        name: "negative-control-mon",
        cases,
        failures: if mon_violation {
            Vec::new()
        } else {
            vec![FailureRecord {
                case_index: 0,
                case_seed: seed,
                detail: "no monotonicity violation observed".into(),
            }]
        },
        max_deviation: max_mon_dev,
        wall: start.elapsed(),
    };
    (gap_result, mon_result)
}

/// Run every registered check. Cheap checks run `cases` times; checks that
/// invoke the full dual search or the grid oracle run `max(1, cases / 10)`
/// times (the per-check count is recorded in the report).
pub fn run_property_suite(seed: u64, cases: usize) -> SuiteReport {
    assert!(cases >= 1);
    let heavy = (cases / 10).max(1);
    // The full-dual-search checks cost the most per case; halve them again.
    let heavier = (cases / 20).max(1);
    let bodies: &[(&'static str, usize, CheckBody)] = &[
        ("reg-locality", cases, chk_reg_locality),
        ("mon-pointwise", cases, chk_mon_pointwise),
        ("qco-mixture", cases, chk_qco_mixture),
        ("cas-translation", cases, chk_cas_translation),
        ("support-monotone-level", cases, chk_support_monotone),
        ("support-homogeneous", cases, chk_support_homogeneous),
        ("support-grid-bound", heavy, chk_support_grid_bound),
        ("weak-duality", cases, chk_weak_duality),
        ("strong-duality-gap", heavy, chk_strong_duality),
        ("r-scale-invariance", cases, chk_r_scale),
        ("r-monotone-target", cases, chk_r_monotone),
        ("r-lattice-min", cases, chk_r_lattice_min),
        ("r-lattice-max", cases, chk_r_lattice_max),
        ("r-quasi-affine", cases, chk_r_quasi_affine),
        ("k-scale-invariance", cases, chk_k_scale),
        ("k-locality", cases, chk_k_locality),
        ("k-upward-directed-glue", cases, chk_k_glue),
        ("k-transform-equivariance", cases, chk_k_transform),
        ("cas-conjugate-identity", cases, chk_cas_conjugate),
        ("feasible-min-glue", cases, chk_feasible_min_glue),
        ("mirror-cce-agreement", heavy, chk_mirror_cce),
        ("oracle-grid-vs-engine", heavy, chk_oracle_grid),
        ("oracle-equality-coincidence", heavy, chk_oracle_equality),
        ("coarsen-k-min", heavy, chk_coarsen_k_min),
        ("coarsen-primal-dual", heavier, chk_coarsen_primal_dual),
        ("coarsen-transfer-bound", heavy, chk_coarsen_transfer),
        ("glued-eps-optimal", heavier, chk_glued_eps_optimal),
        ("trivial-partition-real-valued", heavier, chk_trivial_partition),
    ];
    let mut checks = Vec::with_capacity(CHECK_REGISTRY.len());
    for (idx, &(name, n, body)) in bodies.iter().enumerate() {
        let mut s = seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let stream = splitmix64(&mut s);
        checks.push(run_check(name, n, stream, body));
    }
    let mut s = seed ^ (bodies.len() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let stream = splitmix64(&mut s);
    let (gap_check, mon_check) = negative_control_checks(stream, heavy);
    checks.push(gap_check);
    checks.push(mon_check);
    SuiteReport {
        seed,
        cases_requested: cases,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_deterministic() {
        let a = gen_instance(1, 5, 2, FamilyKind::Entropic(1.0));
        let b = gen_instance(1, 5, 2, FamilyKind::Entropic(1.0));
        assert_eq!(a.space, b.space);
        assert_eq!(a.g, b.g);
        assert_eq!(a.x, b.x);
        assert_eq!(a.densities, b.densities);
    }

    #[test]
    fn density_pool_contains_reference() {
        let inst = gen_instance(7, 6, 3, FamilyKind::WorstCase);
        assert_eq!(inst.densities[0].q(), &vec![1.0; 6][..]);
        // a density vanishing on the first atom is present
        assert!(inst.densities.iter().any(|q| {
            inst.g.blocks()[0].iter().all(|&i| q.q()[i] == 0.0)
        }));
    }

    #[test]
    fn trivial_g_instance() {
        let inst = gen_instance(3, 2, 1, FamilyKind::Composite);
        assert_eq!(inst.g.n_atoms(), 1);
    }

    #[test]
    fn registry_matches_suite_output() {
        let report = run_property_suite(9, 1);
        assert_eq!(report.checks.len(), CHECK_REGISTRY.len());
        for (c, (name, _)) in report.checks.iter().zip(CHECK_REGISTRY) {
            assert_eq!(&c.name, name);
        }
    }

    #[test]
    fn suite_reports_are_reproducible() {
        let a = run_property_suite(11, 3);
        let b = run_property_suite(11, 3);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.summary(), b.summary());
    }

    #[test]
    fn small_suite_passes() {
        let report = run_property_suite(42, 12);
        assert!(report.passed(), "failures:\n{}", report.summary());
    }
}
