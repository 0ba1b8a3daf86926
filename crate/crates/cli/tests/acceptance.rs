//! Acceptance gate: one test per criterion, each emitting a single
//! pass/fail line through the test harness. Tolerances and case counts are
//! pinned; loosening them is not an option.

use std::process::Command;

use quasidual::{
    cce_evaluate, cond_expect, duality_gap, enumerate_partitions, gen_instance, glue_density,
    grid_k, equality_k, h_value, k_value, r_value, slope_bound, AtomValue, Density, FamilyKind,
    FiniteSpace, GridCfg, Instance, MapSpec, Partition, PerAtom, Rng, Rv, SolverCfg, Utility,
};

fn bulk_cfg(seed: u64) -> SolverCfg {
    SolverCfg {
        bisect_tol: 1e-9,
        bracket_pad: 1.0,
        restarts: 2,
        grid_fallback_resolution: 5,
        seed,
    }
}

fn precise_cfg(seed: u64) -> SolverCfg {
    SolverCfg {
        bisect_tol: 1e-11,
        bracket_pad: 1.0,
        restarts: 8,
        grid_fallback_resolution: 10,
        seed,
    }
}

fn sizes(rng: &mut Rng) -> (usize, usize) {
    let n_atoms = 1 + rng.below(3);
    let n_points = n_atoms + 1 + rng.below(2);
    (n_points, n_atoms)
}

fn finite(pa: &PerAtom, idx: usize) -> Option<f64> {
    match pa.get(idx) {
        AtomValue::Val(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

fn balanced_density(rng: &mut Rng, space: &FiniteSpace) -> Density {
    let raw: Vec<f64> = (0..space.len()).map(|_| 0.5 + rng.next_f64()).collect();
    let mass: f64 = raw.iter().zip(space.probs()).map(|(a, b)| a * b).sum();
    Density::new(space, raw.into_iter().map(|v| v / mass).collect(), true).unwrap()
}

/// Criterion 1: strong duality on 200 instances per family within 1e-6,
/// plus a non-quasiconvex negative control with a visible gap.
#[test]
fn c01_strong_duality_all_families() {
    for (fi, fam) in FamilyKind::STANDARD.iter().enumerate() {
        let mut rng = Rng::seed_from_u64(0xC01 + fi as u64);
        for case in 0..200u32 {
            let seed = rng.next_u64();
            let mut r = Rng::seed_from_u64(seed);
            let (np, na) = sizes(&mut r);
            let inst = gen_instance(r.next_u64(), np, na, *fam);
            let rep = duality_gap(&inst.space, &inst.map, &inst.x, &bulk_cfg(seed)).unwrap();
            assert!(
                rep.max_abs_gap() <= 1e-6,
                "family {fam:?}, case {case}: gap {:.3e}",
                rep.max_abs_gap()
            );
        }
    }
    // negative control: a decreasing transform breaks quasiconvexity
    let mut best_gap = 0.0f64;
    for case in 0..5u64 {
        let inst = gen_instance(0xBAD + case, 4, 2, FamilyKind::NegativeControl);
        let rep = duality_gap(&inst.space, &inst.map, &inst.x, &bulk_cfg(case)).unwrap();
        best_gap = best_gap.max(rep.max_abs_gap());
    }
    assert!(best_gap > 1e-3, "negative control gap only {best_gap:.3e}");
}

/// Criterion 2: entropic closed forms — the log 2 fixture, the dual argmax,
/// and the conjugate identity on 200 random (x, q).
#[test]
fn c02_entropic_closed_forms() {
    let space = FiniteSpace::uniform(2);
    let g = Partition::trivial(&space);
    let m = MapSpec::entropic(1.0, g.clone()).unwrap();
    let x = Rv::new(&space, vec![0.0, 3.0f64.ln()]).unwrap();
    let ln2 = 2.0f64.ln();

    let primal = m.evaluate(&space, &x).unwrap();
    assert!((primal.values()[0] - ln2).abs() <= 1e-12);

    let rep = h_value(&space, &m, &x, &precise_cfg(2)).unwrap();
    assert!((rep.atoms[0].dual - ln2).abs() <= 1e-6);
    let w = &rep.atoms[0].argmax_weights;
    assert!(
        (w[0] - 0.25).abs() <= 1e-5 && (w[1] - 0.75).abs() <= 1e-5,
        "argmax {w:?}"
    );

    // K(X,Q) = E_Q[X|G] - (1/gamma) KL(w || v) on random inputs
    let mut rng = Rng::seed_from_u64(0xC02);
    for case in 0..200usize {
        let seed = rng.next_u64();
        let mut r = Rng::seed_from_u64(seed);
        let (np, na) = sizes(&mut r);
        let gamma = [0.5, 1.0, 2.0][case % 3];
        let inst = gen_instance(r.next_u64(), np, na, FamilyKind::Entropic(gamma));
        let q = balanced_density(&mut r, &inst.space);
        let k = k_value(&inst.space, &inst.map, &inst.x, &q, &bulk_cfg(seed)).unwrap();
        let e = cond_expect(&inst.space, &inst.x, &q, &inst.g).unwrap();
        for (idx, atom) in inst.g.blocks().iter().enumerate() {
            let w = q.conditional_weights(&inst.space, atom).unwrap();
            let pa = inst.space.prob_of(atom);
            let kl: f64 = atom
                .iter()
                .zip(&w)
                .filter(|(_, &wi)| wi > 0.0)
                .map(|(&i, &wi)| wi * (wi / (inst.space.probs()[i] / pa)).ln())
                .sum();
            let expected = finite(&e, idx).unwrap() - kl / gamma;
            let got = finite(&k, idx).unwrap();
            assert!(
                (got - expected).abs() <= 1e-8,
                "case {case}, atom {idx}: {got} vs {expected}"
            );
        }
    }
}

/// Criterion 3: worst-case duals equal the per-atom maximum, attained at a
/// simplex vertex.
#[test]
fn c03_worst_case_vertex_duality() {
    let mut rng = Rng::seed_from_u64(0xC03);
    for case in 0..200usize {
        let seed = rng.next_u64();
        let mut r = Rng::seed_from_u64(seed);
        let (np, na) = sizes(&mut r);
        let inst = gen_instance(r.next_u64(), np, na, FamilyKind::WorstCase);
        let rep = h_value(&inst.space, &inst.map, &inst.x, &bulk_cfg(seed)).unwrap();
        for (idx, atom) in inst.g.blocks().iter().enumerate() {
            let max_x = atom
                .iter()
                .map(|&i| inst.x.values()[i])
                .fold(f64::NEG_INFINITY, f64::max);
            let a = &rep.atoms[idx];
            assert!(
                (a.dual - max_x).abs() <= 1e-9,
                "case {case}: dual {} vs max {max_x}",
                a.dual
            );
            let peak = a.argmax_weights.iter().cloned().fold(0.0, f64::max);
            assert!(peak >= 1.0 - 1e-6, "case {case}: argmax not a vertex: {:?}", a.argmax_weights);
        }
    }
}

/// Criterion 4: certainty equivalents match the mirrored dual, and the
/// log(3/2) fixture is reproduced.
#[test]
fn c04_cce_mirror() {
    let space = FiniteSpace::uniform(2);
    let g = Partition::trivial(&space);
    let x = Rv::new(&space, vec![0.0, 3.0f64.ln()]).unwrap();
    let mirrored = MapSpec::entropic(1.0, g.clone()).unwrap().mirror();
    let rep = duality_gap(&space, &mirrored, &x, &precise_cfg(4)).unwrap();
    let fixture = 1.5f64.ln();
    assert!((rep.atoms[0].primal - fixture).abs() <= 1e-6);
    assert!((rep.atoms[0].dual - fixture).abs() <= 1e-6);

    let mut rng = Rng::seed_from_u64(0xC04);
    for case in 0..200usize {
        let seed = rng.next_u64();
        let mut r = Rng::seed_from_u64(seed);
        let (np, na) = sizes(&mut r);
        let alpha = [0.5, 1.0, 2.0][case % 3];
        let inst = gen_instance(r.next_u64(), np, na, FamilyKind::WorstCase); // space/x donor
        let mirrored = MapSpec::entropic(alpha, inst.g.clone()).unwrap().mirror();
        let cce = cce_evaluate(Utility::Exponential { alpha }, &inst.space, &inst.x, &inst.g)
            .unwrap();
        let rep = duality_gap(&inst.space, &mirrored, &inst.x, &bulk_cfg(seed)).unwrap();
        for (idx, atom) in inst.g.blocks().iter().enumerate() {
            let d = (cce.values()[atom[0]] - rep.atoms[idx].dual).abs();
            assert!(d <= 1e-6, "case {case}, atom {idx}: |cce - dual| = {d:.3e}");
        }
    }
}

fn random_g_rv(rng: &mut Rng, inst: &Instance, lo: f64, hi: f64) -> Rv {
    let mut v = vec![0.0; inst.space.len()];
    for block in inst.g.blocks() {
        let c = rng.range_f64(lo, hi);
        for &i in block {
            v[i] = c;
        }
    }
    Rv::new(&inst.space, v).unwrap()
}

/// Criterion 5: R is scale invariant, lattice compatible, and quasi-affine.
#[test]
fn c05_r_properties() {
    let mut rng = Rng::seed_from_u64(0xC05);
    for case in 0..200usize {
        let seed = rng.next_u64();
        let mut r = Rng::seed_from_u64(seed);
        let (np, na) = sizes(&mut r);
        let fam = FamilyKind::STANDARD[case % FamilyKind::STANDARD.len()];
        let inst = gen_instance(r.next_u64(), np, na, fam);
        let xi = balanced_density(&mut r, &inst.space);
        let cfg = bulk_cfg(seed);
        let y1 = random_g_rv(&mut r, &inst, -2.0, 2.0);
        let y2 = random_g_rv(&mut r, &inst, -2.0, 2.0);
        let r1 = r_value(&inst.space, &inst.map, &y1, &xi, &cfg).unwrap();
        let r2 = r_value(&inst.space, &inst.map, &y2, &xi, &cfg).unwrap();

        // scale invariance: exact for dyadic factors, float-noise for 10
        for lambda in [0.5f64, 2.0] {
            let ys = y1.map(|v| lambda * v);
            let xis =
                Density::new(&inst.space, xi.q().iter().map(|v| v * lambda).collect(), false)
                    .unwrap();
            let rs = r_value(&inst.space, &inst.map, &ys, &xis, &cfg).unwrap();
            assert_eq!(r1, rs, "case {case}: scaling by {lambda} changed R");
        }
        let ys = y1.map(|v| 10.0 * v);
        let xis =
            Density::new(&inst.space, xi.q().iter().map(|v| v * 10.0).collect(), false).unwrap();
        let rs = r_value(&inst.space, &inst.map, &ys, &xis, &cfg).unwrap();
        for idx in 0..r1.len() {
            if let (Some(a), Some(b)) = (finite(&r1, idx), finite(&rs, idx)) {
                assert!((a - b).abs() <= 1e-12, "case {case}: scaling by 10 moved R");
            }
        }

        // lattice identities and the quasi-affinity sandwich
        let ymin = Rv::new(
            &inst.space,
            y1.values().iter().zip(y2.values()).map(|(a, b)| a.min(*b)).collect(),
        )
        .unwrap();
        let ymax = Rv::new(
            &inst.space,
            y1.values().iter().zip(y2.values()).map(|(a, b)| a.max(*b)).collect(),
        )
        .unwrap();
        let lam = random_g_rv(&mut r, &inst, 0.0, 1.0);
        let ymix = Rv::new(
            &inst.space,
            (0..inst.space.len())
                .map(|i| lam.values()[i] * y1.values()[i] + (1.0 - lam.values()[i]) * y2.values()[i])
                .collect(),
        )
        .unwrap();
        let rmin = r_value(&inst.space, &inst.map, &ymin, &xi, &cfg).unwrap();
        let rmax = r_value(&inst.space, &inst.map, &ymax, &xi, &cfg).unwrap();
        let rmix = r_value(&inst.space, &inst.map, &ymix, &xi, &cfg).unwrap();
        for idx in 0..r1.len() {
            let (Some(a), Some(b)) = (finite(&r1, idx), finite(&r2, idx)) else { continue };
            if let Some(m) = finite(&rmin, idx) {
                assert!((m - a.min(b)).abs() <= 1e-9, "case {case}: lattice min");
            }
            if let Some(m) = finite(&rmax, idx) {
                assert!((m - a.max(b)).abs() <= 1e-9, "case {case}: lattice max");
            }
            if let Some(m) = finite(&rmix, idx) {
                assert!(
                    m >= a.min(b) - 1e-9 && m <= a.max(b) + 1e-9,
                    "case {case}: quasi-affinity"
                );
            }
        }
    }
}

/// Criterion 6: K is positively homogeneous in Q, local, and upward
/// directed via density gluing.
#[test]
fn c06_k_properties() {
    let mut rng = Rng::seed_from_u64(0xC06);
    for case in 0..200usize {
        let seed = rng.next_u64();
        let mut r = Rng::seed_from_u64(seed);
        let (np, na) = sizes(&mut r);
        let fam = FamilyKind::STANDARD[case % FamilyKind::STANDARD.len()];
        let inst = gen_instance(r.next_u64(), np, na, fam);
        let cfg = bulk_cfg(seed);
        let q1 = &inst.densities[1];
        let k1 = k_value(&inst.space, &inst.map, &inst.x, q1, &cfg).unwrap();

        // positive homogeneity (exact for dyadic factors)
        for lambda in [0.5f64, 2.0, 4.0] {
            let qs =
                Density::new(&inst.space, q1.q().iter().map(|v| v * lambda).collect(), false)
                    .unwrap();
            let ks = k_value(&inst.space, &inst.map, &inst.x, &qs, &cfg).unwrap();
            assert_eq!(k1, ks, "case {case}: scaling q by {lambda} changed K");
        }

        // locality: a density agreeing on one atom gives the same K there
        let atom_idx = r.below(na);
        let mut raw: Vec<f64> = (0..np).map(|_| 0.1 + r.next_f64()).collect();
        for &i in &inst.g.blocks()[atom_idx] {
            raw[i] = q1.q()[i];
        }
        let q2 = Density::new(&inst.space, raw, false).unwrap();
        let k2 = k_value(&inst.space, &inst.map, &inst.x, &q2, &cfg).unwrap();
        if let (Some(a), Some(b)) = (finite(&k1, atom_idx), finite(&k2, atom_idx)) {
            assert!((a - b).abs() <= 1e-9, "case {case}: locality broken");
        }

        // gluing attains the per-atom best of two densities
        let q3 = balanced_density(&mut r, &inst.space);
        let k3 = k_value(&inst.space, &inst.map, &inst.x, &q3, &cfg).unwrap();
        let weights: Vec<Vec<f64>> = inst
            .g
            .blocks()
            .iter()
            .enumerate()
            .map(|(idx, atom)| {
                let a = finite(&k1, idx).unwrap_or(f64::NEG_INFINITY);
                let b = finite(&k3, idx).unwrap_or(f64::NEG_INFINITY);
                let src = if a >= b { q1 } else { &q3 };
                src.conditional_weights(&inst.space, atom).unwrap_or_else(|| {
                    vec![1.0 / atom.len() as f64; atom.len()]
                })
            })
            .collect();
        let glued = glue_density(&inst.space, &inst.g, &weights).unwrap();
        let kg = k_value(&inst.space, &inst.map, &inst.x, &glued, &cfg).unwrap();
        for idx in 0..na {
            let best = finite(&k1, idx)
                .unwrap_or(f64::NEG_INFINITY)
                .max(finite(&k3, idx).unwrap_or(f64::NEG_INFINITY));
            if let Some(g) = finite(&kg, idx) {
                assert!(g >= best - 1e-8, "case {case}, atom {idx}: glued K {g} < best {best}");
            }
        }
    }
}

fn oracle_instance(seed: u64) -> (Instance, Density, Rv) {
    let mut r = Rng::seed_from_u64(seed);
    let fam = [
        FamilyKind::Entropic(1.0),
        FamilyKind::WorstCase,
        FamilyKind::Composite,
    ][r.below(3)];
    let n_atoms = 1 + r.below(2);
    let n_points = n_atoms + 1 + r.below(2);
    let inst = gen_instance(r.next_u64(), n_points, n_atoms, fam);
    let q = balanced_density(&mut r, &inst.space);
    let x = Rv::new(
        &inst.space,
        (0..inst.space.len()).map(|_| r.range_f64(-1.5, 1.5)).collect(),
    )
    .unwrap();
    (inst, q, x)
}

const ORACLE_GRID: GridCfg = GridCfg {
    box_lo: -5.0,
    box_hi: 5.0,
    step: 0.05,
};

/// Criterion 7: equality- and inequality-constrained grid infima coincide
/// within twice the slope bound times the grid step.
#[test]
fn c07_equality_constraint_coincidence() {
    let mut rng = Rng::seed_from_u64(0xC07);
    for case in 0..100usize {
        let seed = rng.next_u64();
        let (inst, q, x) = oracle_instance(seed);
        let gk = grid_k(&inst.space, &inst.map, &x, &q, &ORACLE_GRID).unwrap();
        let ek = equality_k(&inst.space, &inst.map, &x, &q, &ORACLE_GRID).unwrap();
        let l = slope_bound(&inst.map, &ORACLE_GRID);
        for idx in 0..gk.len() {
            if let (Some(a), Some(b)) = (finite(&gk, idx), finite(&ek, idx)) {
                assert!(
                    (a - b).abs() <= 2.0 * l * ORACLE_GRID.step,
                    "case {case}, atom {idx}: |{a} - {b}| > 2L*step"
                );
            }
        }
    }
}

/// Criterion 8: the grid oracle brackets the engine's K on the same
/// instance distribution.
#[test]
fn c08_grid_oracle_agreement() {
    let mut rng = Rng::seed_from_u64(0xC07); // same instance set as criterion 7
    for case in 0..100usize {
        let seed = rng.next_u64();
        let (inst, q, x) = oracle_instance(seed);
        let gk = grid_k(&inst.space, &inst.map, &x, &q, &ORACLE_GRID).unwrap();
        let kv = k_value(&inst.space, &inst.map, &x, &q, &bulk_cfg(seed)).unwrap();
        let l = slope_bound(&inst.map, &ORACLE_GRID);
        for idx in 0..gk.len() {
            if let (Some(a), Some(b)) = (finite(&gk, idx), finite(&kv, idx)) {
                assert!(
                    a >= b - 1e-6 && a - b <= l * ORACLE_GRID.step + 1e-6,
                    "case {case}, atom {idx}: grid {a} vs engine {b}"
                );
            }
        }
    }
}

fn coarsen_instance(seed: u64, max_atoms: usize) -> (Instance, Density) {
    let mut r = Rng::seed_from_u64(seed);
    let fam = [
        FamilyKind::Entropic(1.0),
        FamilyKind::WorstCase,
        FamilyKind::Composite,
        FamilyKind::TransformedArctan,
    ][r.below(4)];
    let n_atoms = 2 + r.below(max_atoms - 1);
    let n_points = n_atoms + r.below(2);
    let inst = gen_instance(r.next_u64(), n_points, n_atoms, fam);
    let q = balanced_density(&mut r, &inst.space);
    (inst, q)
}

/// Criterion 9a: the minimum of K over all coarsenings recovers K, attained
/// at the discrete partition.
#[test]
fn c09a_coarsened_k_minimum() {
    let mut rng = Rng::seed_from_u64(0xC9A);
    for case in 0..60usize {
        let seed = rng.next_u64();
        let (inst, q) = coarsen_instance(seed, 4);
        let cfg = bulk_cfg(seed);
        let k = k_value(&inst.space, &inst.map, &inst.x, &q, &cfg).unwrap();
        let partitions = enumerate_partitions(&inst.space, &inst.g).unwrap();
        let na = inst.g.n_atoms();
        let mut best = vec![f64::INFINITY; na];
        for gamma in &partitions {
            let cm = inst.map.clone().coarsen(gamma.clone()).unwrap();
            let kg = k_value(&inst.space, &cm, &inst.x, &q, &cfg).unwrap();
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
        for idx in 0..na {
            let kv = finite(&k, idx).unwrap();
            assert!(
                (best[idx] - kv).abs() <= 1e-8,
                "case {case}, atom {idx}: min over coarsenings {} vs K {kv}",
                best[idx]
            );
        }
    }
}

/// Criterion 9b: coarsened maps certify zero duality gap and dominate the
/// original map pointwise.
#[test]
fn c09b_coarsened_strong_duality() {
    let mut rng = Rng::seed_from_u64(0xC9B);
    for case in 0..12usize {
        let seed = rng.next_u64();
        let (inst, _) = coarsen_instance(seed, 4);
        let cfg = bulk_cfg(seed);
        let base = inst.map.evaluate(&inst.space, &inst.x).unwrap();
        for gamma in enumerate_partitions(&inst.space, &inst.g).unwrap() {
            let cm = inst.map.clone().coarsen(gamma.clone()).unwrap();
            let coarse = cm.evaluate(&inst.space, &inst.x).unwrap();
            for i in 0..inst.space.len() {
                assert!(
                    coarse.values()[i] >= base.values()[i] - 1e-12,
                    "case {case}: coarsened map fell below the original"
                );
            }
            let rep = h_value(&inst.space, &cm, &inst.x, &cfg).unwrap();
            assert!(
                rep.max_abs_gap() <= 1e-6,
                "case {case}: coarsened gap {:.3e}",
                rep.max_abs_gap()
            );
        }
    }
}

/// Criterion 9c: the monotone-transfer inequality across densities holds
/// for every coarsening that keeps the complement of B whole.
#[test]
fn c09c_monotone_transfer() {
    let mut rng = Rng::seed_from_u64(0xC9C);
    for case in 0..100usize {
        let seed = rng.next_u64();
        let (inst, q) = coarsen_instance(seed, 3);
        let mut r = Rng::seed_from_u64(seed ^ 0xB0B);
        let p = balanced_density(&mut r, &inst.space);
        let cfg = bulk_cfg(seed);
        let na = inst.g.n_atoms();
        let mut in_b: Vec<bool> = (0..na).map(|_| r.below(2) == 0).collect();
        if !in_b.iter().any(|&b| b) {
            in_b[r.below(na)] = true;
        }
        let kq = k_value(&inst.space, &inst.map, &inst.x, &q, &cfg).unwrap();
        let kp = k_value(&inst.space, &inst.map, &inst.x, &p, &cfg).unwrap();
        let mut eps = 0.0f64;
        for idx in 0..na {
            if in_b[idx] {
                if let (Some(a), Some(b)) = (finite(&kq, idx), finite(&kp, idx)) {
                    eps = eps.max((a - b).max(0.0));
                }
            }
        }
        let b_atoms: Vec<usize> = (0..na).filter(|&i| in_b[i]).collect();
        let c_points: Vec<usize> = (0..na)
            .filter(|&i| !in_b[i])
            .flat_map(|i| inst.g.blocks()[i].iter().copied())
            .collect();
        let b_points: Vec<usize> = b_atoms
            .iter()
            .flat_map(|&i| inst.g.blocks()[i].iter().copied())
            .collect();
        // enumerate partitions of the atoms of B by restricted-growth strings
        let nb = b_atoms.len();
        let mut rgs = vec![0usize; nb];
        loop {
            let n_blocks = rgs.iter().copied().max().unwrap_or(0) + 1;
            let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); n_blocks];
            for (k, &b) in rgs.iter().enumerate() {
                blocks[b].extend(inst.g.blocks()[b_atoms[k]].iter().copied());
            }
            if !c_points.is_empty() {
                blocks.push(c_points.clone());
            }
            let gamma = Partition::new(&inst.space, blocks).unwrap();
            let cm = inst.map.clone().coarsen(gamma.clone()).unwrap();
            let kgq = k_value(&inst.space, &cm, &inst.x, &q, &cfg).unwrap();
            let kgp = k_value(&inst.space, &cm, &inst.x, &p, &cfg).unwrap();
            for (bidx, block) in gamma.blocks().iter().enumerate() {
                if !block.iter().all(|i| b_points.contains(i)) {
                    continue;
                }
                if let (Some(a), Some(b)) = (finite(&kgq, bidx), finite(&kgp, bidx)) {
                    assert!(
                        a <= b + eps + 1e-8,
                        "case {case}: transfer bound violated by {:.3e}",
                        a - b - eps
                    );
                }
            }
            // advance the restricted-growth string
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
    }
}

/// Criterion 10: the glued argmax density is epsilon-optimal on every atom.
#[test]
fn c10_glued_single_density() {
    let mut rng = Rng::seed_from_u64(0xC10);
    for case in 0..200usize {
        let seed = rng.next_u64();
        let mut r = Rng::seed_from_u64(seed);
        let n_atoms = 1 + r.below(2);
        let n_points = n_atoms + 1 + r.below(2);
        let fam = FamilyKind::STANDARD[case % FamilyKind::STANDARD.len()];
        let inst = gen_instance(r.next_u64(), n_points, n_atoms, fam);
        let cfg = bulk_cfg(seed);
        let rep = h_value(&inst.space, &inst.map, &inst.x, &cfg).unwrap();
        let weights: Vec<Vec<f64>> =
            rep.atoms.iter().map(|a| a.argmax_weights.clone()).collect();
        let glued = glue_density(&inst.space, inst.map.partition(), &weights).unwrap();
        let k = k_value(&inst.space, &inst.map, &inst.x, &glued, &cfg).unwrap();
        for (idx, a) in rep.atoms.iter().enumerate() {
            if let Some(kv) = finite(&k, idx) {
                assert!(
                    a.dual - kv < 1e-6,
                    "case {case}, atom {idx}: H - K = {:.3e}",
                    a.dual - kv
                );
            }
        }
    }
}

/// Criterion 11: with the trivial conditioning the machinery reduces to the
/// real-valued duality, gap within 1e-6 for every family.
#[test]
fn c11_real_valued_duality() {
    let families = [
        FamilyKind::Entropic(0.5),
        FamilyKind::Entropic(1.0),
        FamilyKind::Entropic(2.0),
        FamilyKind::WorstCase,
        FamilyKind::Composite,
        FamilyKind::TransformedArctan,
        FamilyKind::TransformedCubic,
        FamilyKind::MirroredEntropic,
    ];
    let mut rng = Rng::seed_from_u64(0xC11);
    for case in 0..100usize {
        let seed = rng.next_u64();
        let mut r = Rng::seed_from_u64(seed);
        let n_points = 2 + r.below(3);
        let fam = families[case % families.len()];
        let inst = gen_instance(r.next_u64(), n_points, 1, fam);
        let rep = duality_gap(&inst.space, &inst.map, &inst.x, &bulk_cfg(seed)).unwrap();
        assert!(
            rep.max_abs_gap() <= 1e-6,
            "case {case} ({fam:?}): gap {:.3e}",
            rep.max_abs_gap()
        );
    }
}

/// Criterion 12: the property-suite report is byte-identical across runs.
#[test]
fn c12_props_determinism() {
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_quasidual"))
            .env_remove("QUASIDUAL_SEED")
            .args(["props", "--seed", "42", "--cases", "200"])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "props failed:\n{}",
            String::from_utf8_lossy(&out.stdout)
        );
        out.stdout
    };
    let first = run();
    let second = run();
    assert_eq!(first, second, "props output differs between runs");
}
