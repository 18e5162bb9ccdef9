//! The evaluator against an independent oracle: each plan stage is a 5×5
//! row-stochastic matrix over (vanished, omm, ut, hang, ed), and a FF's
//! counts are the row vector times the product of its stage matrices.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resilex_core::catalog::{Applicability, Mode, PerFf, TechniqueCatalog};
use resilex_core::eval::{apply_plan, ProtectionPlan};
use resilex_core::parity::group_first_fit;
use resilex_core::{Benchmark, DesignModel, FfId, FlipFlop, OutcomeCounts, Position, Stage, VulnerabilityProfile};

type M = [[f64; 5]; 5];
const V: usize = 0;
const OMM: usize = 1;
const UT: usize = 2;
const HANG: usize = 3;
const ED: usize = 4;

fn identity() -> M {
    let mut m = [[0.0; 5]; 5];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

/// Moves share `p` of each `from` category to `to`.
fn mover(from: &[usize], to: usize, p: f64) -> M {
    let mut m = identity();
    for &f in from {
        m[f][f] = 1.0 - p;
        m[f][to] += p;
    }
    m
}

fn mul(a: &M, b: &M) -> M {
    let mut c = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            c[i][j] = (0..5).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn vec_of(c: &OutcomeCounts) -> [f64; 5] {
    [c.vanished, c.omm, c.ut, c.hang, c.ed]
}

fn apply(v: [f64; 5], m: &M) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (j, o) in out.iter_mut().enumerate() {
        *o = (0..5).map(|i| v[i] * m[i][j]).sum();
    }
    out
}

fn top_fraction(profile: &VulnerabilityProfile, design: &DesignModel, sdc: bool, fraction: f64) -> HashSet<FfId> {
    let agg = profile.aggregate();
    let area = |id: FfId| design.flip_flops.iter().find(|f| f.id == id).unwrap().area_weight;
    let mut v: Vec<(f64, f64, FfId)> = profile
        .ff_ids
        .iter()
        .zip(&agg)
        .map(|(id, c)| (if sdc { c.omm } else { c.ut + c.hang }, area(*id), *id))
        .filter(|(m, _, _)| *m > 0.0)
        .collect();
    let take = (fraction * v.len() as f64).round() as usize;
    v.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    v.into_iter().take(take).map(|t| t.2).collect()
}

pub fn oracle(
    profile: &VulnerabilityProfile,
    plan: &ProtectionPlan,
    cat: &TechniqueCatalog,
    design: &DesignModel,
) -> Vec<Vec<[f64; 5]>> {
    let hl: Vec<_> = plan.high_level.iter().map(|n| cat.high_level(n).unwrap()).collect();
    let sets: Vec<(HashSet<FfId>, HashSet<FfId>)> = hl
        .iter()
        .map(|h| {
            (
                top_fraction(profile, design, true, h.sdc.ff_fraction),
                top_fraction(profile, design, false, h.due.ff_fraction),
            )
        })
        .collect();
    let rec = plan.recovery.as_ref().map(|r| cat.recovery(r).unwrap());
    profile
        .benchmarks
        .iter()
        .map(|b| {
            let abft = design.benchmarks.iter().find(|d| d.name == b.benchmark).unwrap().abft_compatible;
            profile
                .ff_ids
                .iter()
                .zip(&b.counts)
                .map(|(id, c)| {
                    let ff = design.flip_flops.iter().find(|f| f.id == *id).unwrap();
                    let mut m = identity();
                    for mode in [Mode::Correct, Mode::Detect] {
                        for (h, (s, d)) in hl.iter().zip(&sets) {
                            if h.mode != mode || (h.applicability == Applicability::AbftCompatible && !abft) {
                                continue;
                            }
                            let to = if mode == Mode::Correct { V } else { ED };
                            if s.contains(id) {
                                m = mul(&m, &mover(&[OMM], to, h.sdc.per_ff));
                            }
                            if d.contains(id) {
                                m = mul(&m, &mover(&[UT, HANG], to, h.due.per_ff));
                            }
                        }
                    }
                    match plan.per_ff.get(id).map(|t| cat.per_ff(t).unwrap()) {
                        Some(PerFf::Hardened(h)) => {
                            m = mul(&m, &mover(&[OMM, UT, HANG, ED], V, 1.0 - h.ser_multiplier))
                        }
                        Some(PerFf::Detector(d)) => m = mul(&m, &mover(&[OMM, UT, HANG], ED, d.detect_prob)),
                        Some(PerFf::Parity(p)) => m = mul(&m, &mover(&[OMM, UT, HANG], ED, p.detect_prob)),
                        None => {}
                    }
                    if let Some(r) = rec {
                        if r.is_bounded() && r.recovers(ff) {
                            m = mul(&m, &mover(&[ED], V, 1.0));
                        }
                    }
                    for row in &m {
                        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12, "stage product must conserve counts");
                    }
                    apply(vec_of(c), &m)
                })
                .collect()
        })
        .collect()
}

pub fn random_case(
    rng: &mut ChaCha8Rng,
    cat: &TechniqueCatalog,
) -> (DesignModel, VulnerabilityProfile, ProtectionPlan) {
    let n = rng.random_range(2..=12u32);
    let ffs: Vec<FlipFlop> = (0..n)
        .map(|i| {
            let stage = *Stage::ALL.choose(rng).unwrap();
            FlipFlop::new(i, stage, Position::new(1.5 * i as f64, 0.0), rng.random_range(0.0..2.0))
                .with_weights(rng.random_range(0.5..2.0), rng.random_range(0.5..2.0))
        })
        .collect();
    let benches: Vec<Benchmark> = (0..rng.random_range(1..=3))
        .map(|b| Benchmark { name: format!("b{b}"), nominal_cycles: 100, abft_compatible: rng.random_bool(0.5) })
        .collect();
    let design = DesignModel {
        name: "r".into(),
        flip_flops: ffs,
        ff_area_fraction: 0.3,
        ff_power_fraction: 0.3,
        benchmarks: benches,
    };
    let mut profile = VulnerabilityProfile::new((0..n).map(FfId).collect());
    for b in &design.benchmarks {
        let counts = (0..n)
            .map(|_| {
                let mut k = || if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0..50) as f64 };
                OutcomeCounts::new(k() + 10.0, k(), k(), k(), 0.0)
            })
            .collect();
        profile.push_benchmark(b.name.clone(), counts).unwrap();
    }
    let per_ff_names = ["LEAP-DICE", "LHL", "EDS", "parity"];
    let hl_names = ["DFC", "assertions", "CFCSS", "EDDI", "ABFT-correction", "ABFT-detection"];
    let rec_names = [None, Some("unconstrained"), Some("IR"), Some("EIR"), Some("flush")];
    loop {
        let mut plan = ProtectionPlan::empty();
        for ff in &design.flip_flops {
            if rng.random_bool(0.6) {
                plan.per_ff.insert(ff.id, per_ff_names.choose(rng).unwrap().to_string());
            }
        }
        plan.high_level = hl_names.iter().filter(|_| rng.random_bool(0.3)).map(|s| s.to_string()).collect();
        plan.recovery = rec_names.choose(rng).unwrap().map(str::to_string);
        let parity: Vec<FlipFlop> = design
            .flip_flops
            .iter()
            .filter(|f| plan.per_ff.get(&f.id).is_some_and(|t| t == "parity"))
            .cloned()
            .collect();
        plan.parity_groups = if parity.is_empty() { vec![] } else { group_first_fit(&parity, &cat.parity) };
        if plan.validate(cat, &design).is_ok() {
            return (design, profile, plan);
        }
    }
}

/// Runs `cases` random plans against the oracle; the error names the first mismatch.
pub fn check_cases(seed: u64, cases: usize) -> Result<(), String> {
    let cat = TechniqueCatalog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let (design, profile, plan) = random_case(&mut rng, &cat);
        let got = apply_plan(&profile, &plan, &cat, &design).map_err(|e| e.to_string())?;
        let want = oracle(&profile, &plan, &cat, &design);
        for (b, (gb, wb)) in got.benchmarks.iter().zip(&want).enumerate() {
            for (i, (g, w)) in gb.counts.iter().zip(wb).enumerate() {
                let g = vec_of(g);
                for k in 0..5 {
                    if (g[k] - w[k]).abs() > 1e-12 {
                        return Err(format!("case {case} bench {b} ff {i} slot {k}: {} vs {}", g[k], w[k]));
                    }
                }
                let before = profile.benchmarks[b].counts[i].total();
                if (g.iter().sum::<f64>() - before).abs() > 1e-12 * before.max(1.0) {
                    return Err(format!("case {case} bench {b} ff {i}: counts not conserved"));
                }
            }
        }
    }
    Ok(())
}
