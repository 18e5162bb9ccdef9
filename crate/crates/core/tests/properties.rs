use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resilex_core::catalog::{gamma, TechniqueCatalog, EDS, FLUSH, LEAP_DICE, PARITY, ROB, UNCONSTRAINED};
use resilex_core::dependence::{lhl_fallback, subset_similarity};
use resilex_core::eval::{apply_plan, evaluate, ProtectionPlan};
use resilex_core::explore::{
    heuristic1_assign, joint_protect, pareto_front, selective_protect, ParetoPoint, Strategy, Target, TargetMetric,
};
use resilex_core::parity::{enforce_min_spacing, group_optimized, spacing_histogram, MIN_SPACING};
use resilex_core::synth::{generate_design, DesignParams, Preset};
use resilex_core::{
    always_vanish_set, vulnerability_rank, Benchmark, DesignModel, FfId, FlipFlop, Metric, OutcomeCounts, Position,
    Stage, VulnerabilityProfile,
};

fn random_design(rng: &mut ChaCha8Rng, n: u32, benches: usize) -> DesignModel {
    DesignModel {
        name: "p".into(),
        flip_flops: (0..n)
            .map(|i| {
                FlipFlop::new(
                    i,
                    *Stage::ALL.choose(rng).unwrap(),
                    Position::new(2.0 * i as f64, 0.0),
                    rng.random_range(0.0..2.5),
                )
                .with_weights(rng.random_range(0.5..2.0), rng.random_range(0.5..2.0))
            })
            .collect(),
        ff_area_fraction: 0.3,
        ff_power_fraction: 0.4,
        benchmarks: (0..benches)
            .map(|b| Benchmark { name: format!("b{b}"), nominal_cycles: 100, abft_compatible: false })
            .collect(),
    }
}

fn random_profile(rng: &mut ChaCha8Rng, design: &DesignModel, zero_p: f64) -> VulnerabilityProfile {
    let mut p = VulnerabilityProfile::new(design.flip_flops.iter().map(|f| f.id).collect());
    for b in &design.benchmarks {
        let counts = design
            .flip_flops
            .iter()
            .map(|_| {
                let mut k = || if rng.random_bool(zero_p) { 0.0 } else { rng.random_range(1..40) as f64 };
                OutcomeCounts::new(50.0, k(), k(), k(), 0.0)
            })
            .collect();
        p.push_benchmark(b.name.clone(), counts).unwrap();
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_is_a_scale_invariant_permutation(seed in any::<u64>(), n in 1u32..40, k in 1u32..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_design(&mut rng, n, 2);
        let p = random_profile(&mut rng, &d, 0.4);
        for m in [Metric::Sdc, Metric::Due, Metric::Combined] {
            let r = vulnerability_rank(&p, m, Some(&d));
            let mut sorted = r.clone();
            sorted.sort();
            prop_assert_eq!(&sorted, &p.ff_ids);
            let mut scaled = p.clone();
            for b in &mut scaled.benchmarks {
                for c in &mut b.counts {
                    *c = c.scaled(k as f64);
                }
            }
            prop_assert_eq!(vulnerability_rank(&scaled, m, Some(&d)), r);
        }
    }

    #[test]
    fn always_vanish_is_disjoint_from_vulnerable(seed in any::<u64>(), n in 1u32..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_design(&mut rng, n, 3);
        let p = random_profile(&mut rng, &d, 0.7);
        let dead = always_vanish_set(&p).unwrap();
        for (id, c) in p.ff_ids.iter().zip(p.aggregate()) {
            prop_assert_eq!(dead.contains(id), c.harmful() == 0.0);
        }
    }

    #[test]
    fn gamma_is_at_least_one_and_monotone(a in 0.0f64..2.0, b in 0.0f64..2.0, da in 0.0f64..1.0) {
        let g = gamma(a, b).unwrap();
        prop_assert!(g >= 1.0);
        prop_assert!(gamma(a + da, b).unwrap() >= g);
        prop_assert!(gamma(a, b + da).unwrap() >= g);
    }

    #[test]
    fn plans_conserve_counts_and_never_add_errors_without_detection(seed in any::<u64>(), n in 2u32..20) {
        let cat = TechniqueCatalog::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_design(&mut rng, n, 2);
        let p = random_profile(&mut rng, &d, 0.3);
        let mut plan = ProtectionPlan::empty();
        for ff in &d.flip_flops {
            if rng.random_bool(0.5) {
                plan.per_ff.insert(ff.id, ["LEAP-DICE", "LHL", "EDS"].choose(&mut rng).unwrap().to_string());
            }
        }
        let after = apply_plan(&p, &plan, &cat, &d).unwrap();
        for (b, a) in p.benchmarks.iter().zip(&after.benchmarks) {
            for (x, y) in b.counts.iter().zip(&a.counts) {
                prop_assert!((x.total() - y.total()).abs() < 1e-9);
                prop_assert!(y.is_nonnegative());
                prop_assert!(y.omm <= x.omm + 1e-12 && y.ut + y.hang <= x.ut + x.hang + 1e-12);
            }
        }
    }

    #[test]
    fn empty_plan_is_identity(seed in any::<u64>(), n in 1u32..20) {
        let cat = TechniqueCatalog::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_design(&mut rng, n, 2);
        let p = random_profile(&mut rng, &d, 0.0);
        let r = evaluate(&p, &ProtectionPlan::empty(), &cat, &d).unwrap();
        prop_assert_eq!(r.sdc_improvement, Some(1.0));
        prop_assert_eq!(r.due_improvement, Some(1.0));
        prop_assert_eq!(r.cost.energy_pct, 0.0);
    }

    #[test]
    fn repaired_groupings_keep_spacing_and_sizes(seed in any::<u64>(), n in 20usize..300) {
        let d = generate_design(&DesignParams::preset(Preset::InoLike, n, seed)).unwrap();
        let spec = TechniqueCatalog::default().parity;
        let groups = group_optimized(&d.flip_flops, &spec);
        let sizes: Vec<usize> = groups.iter().map(|g| g.members.len()).collect();
        // Small designs can have too few groups to swap with.
        let fixed = match enforce_min_spacing(groups, &d.flip_flops) {
            Err(resilex_core::Error::SpacingInfeasible { .. }) if n < 100 => return Ok(()),
            r => r.unwrap(),
        };
        prop_assert_eq!(fixed.iter().map(|g| g.members.len()).collect::<Vec<_>>(), sizes);
        if fixed.iter().any(|g| g.members.len() > 1) {
            let h = spacing_histogram(&d.flip_flops, Some(&fixed)).unwrap();
            prop_assert_eq!(h.buckets[0], 0);
        }
        let pos = |id: FfId| d.flip_flops.iter().find(|f| f.id == id).unwrap().position;
        for g in &fixed {
            for (i, a) in g.members.iter().enumerate() {
                for b in &g.members[i + 1..] {
                    prop_assert!(pos(*a).distance(&pos(*b)) >= MIN_SPACING);
                }
            }
        }
    }

    #[test]
    fn heuristic1_respects_recovery(seed in any::<u64>(), n in 1u32..60) {
        let cat = TechniqueCatalog::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_design(&mut rng, n, 1);
        for rec in [FLUSH, ROB] {
            let r = cat.recovery(rec).unwrap();
            for ff in &d.flip_flops {
                if !ff.flush_recoverable {
                    prop_assert_eq!(heuristic1_assign(ff, Some(r)), LEAP_DICE);
                }
            }
        }
        for r in [None, Some(cat.recovery(UNCONSTRAINED).unwrap())] {
            for ff in &d.flip_flops {
                let want = if ff.timing_slack >= 1.0 { PARITY } else { LEAP_DICE };
                prop_assert_eq!(heuristic1_assign(ff, r), want);
            }
        }
    }

    #[test]
    fn selective_meets_target_with_minimal_prefix(seed in any::<u64>(), n in 3u32..25, f in 1.0f64..200.0) {
        let cat = TechniqueCatalog::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_design(&mut rng, n, 2);
        let p = random_profile(&mut rng, &d, 0.3);
        let s = selective_protect(&p, &d, &cat, Target::sdc(f), &Strategy::leap_dice(), Default::default()).unwrap();
        prop_assert!(s.sdc_improvement.unwrap() >= f);
        let k = s.plan.per_ff.len();
        if k > 0 {
            let rank: Vec<FfId> = vulnerability_rank(&p, Metric::Sdc, Some(&d));
            let mut shorter = s.plan.clone();
            shorter.per_ff.remove(&rank[k - 1]);
            prop_assert!(evaluate(&p, &shorter, &cat, &d).unwrap().sdc_improvement.unwrap() < f);
        }
    }

    #[test]
    fn joint_meets_both_targets_in_both_orders(seed in any::<u64>(), n in 3u32..25, a in 1.0f64..100.0, b in 1.0f64..100.0) {
        let cat = TechniqueCatalog::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_design(&mut rng, n, 2);
        let p = random_profile(&mut rng, &d, 0.2);
        for first in [TargetMetric::Sdc, TargetMetric::Due] {
            let s = joint_protect(&p, &d, &cat, a, b, &Strategy::leap_dice(), first).unwrap();
            prop_assert!(s.sdc_improvement.unwrap() >= a && s.due_improvement.unwrap() >= b);
        }
    }

    #[test]
    fn detection_only_unconstrained_never_improves_due(seed in any::<u64>(), n in 1u32..20) {
        let cat = TechniqueCatalog::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_design(&mut rng, n, 2);
        let p = random_profile(&mut rng, &d, 0.2);
        let mut plan = ProtectionPlan { recovery: Some(UNCONSTRAINED.into()), ..ProtectionPlan::empty() };
        for ff in &d.flip_flops {
            if rng.random_bool(0.6) {
                plan.per_ff.insert(ff.id, EDS.into());
            }
        }
        plan.high_level = ["DFC", "assertions", "CFCSS", "EDDI"].iter().filter(|_| rng.random_bool(0.4)).map(|s| s.to_string()).collect();
        let r = evaluate(&p, &plan, &cat, &d).unwrap();
        prop_assert!(r.due_improvement.unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn pareto_front_matches_pairwise_oracle(pts in prop::collection::vec((0.0f64..50.0, 1.0f64..100.0), 1..60)) {
        let points: Vec<ParetoPoint> = pts.iter().enumerate().map(|(i, (e, m))| ParetoPoint::new(format!("p{i}"), *e, *m)).collect();
        let front = pareto_front(&points);
        for p in &points {
            let dominated = points.iter().any(|q| q.dominates(p));
            prop_assert_eq!(!dominated, front.iter().any(|f| f.id == p.id));
        }
        for a in &front {
            for b in &front {
                prop_assert!(!a.dominates(b));
            }
        }
    }

    #[test]
    fn similarity_bounds_and_order_invariance(seed in any::<u64>(), n in 10u32..60, benches in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_design(&mut rng, n, benches);
        let p = random_profile(&mut rng, &d, 0.3);
        let mut rev = p.clone();
        rev.benchmarks.reverse();
        for k in 1..=10 {
            let s = subset_similarity(&p, Some(&d), k).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, subset_similarity(&rev, Some(&d), k).unwrap());
        }
    }

    #[test]
    fn lhl_fallback_is_monotone(seed in any::<u64>(), n in 2u32..30) {
        let cat = TechniqueCatalog::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_design(&mut rng, n, 2);
        let p = random_profile(&mut rng, &d, 0.2);
        let mut plan = ProtectionPlan::empty();
        for ff in &d.flip_flops {
            if rng.random_bool(0.4) {
                plan.per_ff.insert(ff.id, LEAP_DICE.into());
            }
        }
        let a = evaluate(&p, &plan, &cat, &d).unwrap();
        let fb = lhl_fallback(&plan, &d, &cat).unwrap();
        let b = evaluate(&p, &fb, &cat, &d).unwrap();
        prop_assert!(b.sdc_improvement >= a.sdc_improvement);
        prop_assert!(b.due_improvement >= a.due_improvement);
        for (id, t) in &plan.per_ff {
            prop_assert_eq!(&fb.per_ff[id], t);
        }
    }

    #[test]
    fn design_json_round_trips(seed in any::<u64>(), n in 2usize..50) {
        let d = generate_design(&DesignParams::preset(Preset::OooLike, n, seed)).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        let back: DesignModel = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, d);
    }
}
