//! Train/validate generalization of plans across benchmarks, decile subset
//! similarity, and the LHL fallback.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::catalog::{TechniqueCatalog, LHL};
use crate::error::{Error, Result};
use crate::eval::{evaluate, ProtectionPlan};
use crate::explore::{selective_protect, SelectiveOptions, Strategy, Target, TargetMetric};
use crate::model::{vulnerability_rank, DesignModel, FfId, Metric, VulnerabilityProfile};

pub const DEFAULT_PAIRS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_count: usize,
    pub validate_count: usize,
    pub pair_count: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_count: usize, validate_count: usize, seed: u64) -> Self {
        Self { train_count, validate_count, pair_count: DEFAULT_PAIRS, seed }
    }

    fn check(&self, benchmarks: usize) -> Result<()> {
        if self.pair_count == 0 || self.train_count == 0 || self.validate_count == 0 {
            return Err(Error::InvalidArgument("train, validate and pair counts must be positive".into()));
        }
        if self.train_count + self.validate_count > benchmarks {
            return Err(Error::InvalidArgument(format!(
                "split needs {} benchmarks, profile has {benchmarks}",
                self.train_count + self.validate_count
            )));
        }
        Ok(())
    }

    /// Seeded disjoint (train, validate) benchmark sets, one per pair.
    pub fn splits(&self, names: &[String]) -> Result<Vec<(Vec<String>, Vec<String>)>> {
        self.check(names.len())?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok((0..self.pair_count)
            .map(|_| {
                let mut v = names.to_vec();
                v.shuffle(&mut rng);
                let train = v[..self.train_count].to_vec();
                let val = v[self.train_count..self.train_count + self.validate_count].to_vec();
                (train, val)
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub pair_id: usize,
    pub train: Vec<String>,
    pub validate: Vec<String>,
    pub protected_ffs: usize,
    pub trained: f64,
    pub validated: f64,
    pub underestimate_pct: f64,
    /// Validation improvement after the LHL fallback.
    pub validated_lhl: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub target: Target,
    pub strategy: Strategy,
    pub split: SplitSpec,
    pub pairs: Vec<PairResult>,
    pub mean_trained: f64,
    pub mean_validated: f64,
    pub mean_underestimate_pct: f64,
    /// Two-sided sign test of validated vs trained.
    pub p_value: f64,
}

impl DependenceReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["pair_id", "trained", "validated", "underestimate_pct", "validated_lhl"])?;
        for p in &self.pairs {
            out.write_record([
                p.pair_id.to_string(),
                p.trained.to_string(),
                p.validated.to_string(),
                p.underestimate_pct.to_string(),
                p.validated_lhl.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `(validated - trained) / trained × 100`.
pub fn underestimate_pct(trained: f64, validated: f64) -> f64 {
    (validated - trained) / trained * 100.0
}

/// Two-sided sign test on paired samples; zero differences are dropped.
pub fn sign_test(pairs: &[(f64, f64)]) -> f64 {
    let pos = pairs.iter().filter(|(a, b)| b > a).count() as u64;
    let neg = pairs.iter().filter(|(a, b)| b < a).count() as u64;
    let n = pos + neg;
    if n == 0 {
        return 1.0;
    }
    let bin = Binomial::new(0.5, n).expect("valid binomial");
    let k = pos.min(neg);
    (2.0 * bin.cdf(k)).min(1.0)
}

fn achieved(
    profile: &VulnerabilityProfile,
    plan: &ProtectionPlan,
    catalog: &TechniqueCatalog,
    design: &DesignModel,
    metric: TargetMetric,
) -> Result<f64> {
    let r = evaluate(profile, plan, catalog, design)?;
    let s = r.sdc_improvement.ok_or(Error::NoBaselineErrors("SDC"));
    let d = r.due_improvement.ok_or(Error::NoBaselineErrors("DUE"));
    Ok(match metric {
        TargetMetric::Sdc => s?,
        TargetMetric::Due => d?,
        TargetMetric::Joint => s?.min(d?),
    })
}

/// Builds a plan on each training aggregate and evaluates it unchanged on the
/// matching validation aggregate.
pub fn train_validate(
    profile: &VulnerabilityProfile,
    design: &DesignModel,
    catalog: &TechniqueCatalog,
    split: SplitSpec,
    target: Target,
    strategy: &Strategy,
) -> Result<DependenceReport> {
    let names: Vec<String> = profile.benchmark_names().into_iter().map(str::to_string).collect();
    let splits = split.splits(&names)?;
    let pairs: Vec<PairResult> = splits
        .into_par_iter()
        .enumerate()
        .map(|(pair_id, (train, validate))| {
            let t: Vec<&str> = train.iter().map(String::as_str).collect();
            let v: Vec<&str> = validate.iter().map(String::as_str).collect();
            let tp = profile.select(&t)?;
            let vp = profile.select(&v)?;
            let sel = selective_protect(&tp, design, catalog, target, strategy, SelectiveOptions::default())?;
            let trained = sel.achieved(target.metric);
            let validated = achieved(&vp, &sel.plan, catalog, design, target.metric)?;
            let fallback = lhl_fallback(&sel.plan, design, catalog)?;
            let validated_lhl = achieved(&vp, &fallback, catalog, design, target.metric)?;
            Ok(PairResult {
                pair_id,
                train,
                validate,
                protected_ffs: sel.plan.per_ff.len(),
                trained,
                validated,
                underestimate_pct: underestimate_pct(trained, validated),
                validated_lhl,
            })
        })
        .collect::<Result<_>>()?;
    let n = pairs.len() as f64;
    let mean = |f: fn(&PairResult) -> f64| pairs.iter().map(f).sum::<f64>() / n;
    let diffs: Vec<(f64, f64)> = pairs.iter().map(|p| (p.trained, p.validated)).collect();
    Ok(DependenceReport {
        target,
        strategy: strategy.clone(),
        split,
        mean_trained: mean(|p| p.trained),
        mean_validated: mean(|p| p.validated),
        mean_underestimate_pct: mean(|p| p.underestimate_pct),
        p_value: sign_test(&diffs),
        pairs,
    })
}

/// The `decile`-th 10% slice (1-based) of a ranking of `n` FFs.
pub fn decile_bounds(n: usize, decile: usize) -> (usize, usize) {
    ((decile - 1) * n / 10, decile * n / 10)
}

/// Intersection over union of every benchmark's `decile` slice of its
/// SDC+DUE ranking.
pub fn subset_similarity(profile: &VulnerabilityProfile, design: Option<&DesignModel>, decile: usize) -> Result<f64> {
    if !(1..=10).contains(&decile) {
        return Err(Error::InvalidArgument(format!("decile index must be in 1..=10, got {decile}")));
    }
    let names = profile.benchmark_names();
    if names.len() < 2 {
        return Err(Error::InvalidArgument("similarity needs at least 2 benchmarks".into()));
    }
    let n = profile.ff_ids.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!("similarity needs at least 10 flip-flops, got {n}")));
    }
    let (lo, hi) = decile_bounds(n, decile);
    let slices: Vec<BTreeSet<FfId>> = names
        .iter()
        .map(|b| {
            let p = profile.select(&[b])?;
            Ok(vulnerability_rank(&p, Metric::Combined, design)[lo..hi].iter().copied().collect())
        })
        .collect::<Result<_>>()?;
    let mut inter = slices[0].clone();
    let mut union = BTreeSet::new();
    for s in &slices {
        inter.retain(|id| s.contains(id));
        union.extend(s.iter().copied());
    }
    Ok(inter.len() as f64 / union.len() as f64)
}

/// Gives LHL to every flip-flop the plan leaves without a per-FF technique.
pub fn lhl_fallback(plan: &ProtectionPlan, design: &DesignModel, catalog: &TechniqueCatalog) -> Result<ProtectionPlan> {
    catalog.hardened(LHL)?;
    let mut out = plan.clone();
    let mut added = false;
    for ff in &design.flip_flops {
        if let std::collections::btree_map::Entry::Vacant(e) = out.per_ff.entry(ff.id) {
            e.insert(LHL.to_string());
            added = true;
        }
    }
    if added {
        out.name = format!("{}+lhl", plan.name);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Benchmark, FlipFlop, OutcomeCounts, Position, Stage};

    fn design(n: u32, benches: &[&str]) -> DesignModel {
        DesignModel {
            name: "t".into(),
            flip_flops: (0..n)
                .map(|i| FlipFlop::new(i, Stage::Decode, Position::new(2.0 * i as f64, 0.0), 0.5))
                .collect(),
            ff_area_fraction: 0.3,
            ff_power_fraction: 0.3,
            benchmarks: benches
                .iter()
                .map(|b| Benchmark { name: b.to_string(), nominal_cycles: 100, abft_compatible: false })
                .collect(),
        }
    }

    fn profile(n: u32, benches: &[&str], f: impl Fn(usize, u32) -> f64) -> VulnerabilityProfile {
        let mut p = VulnerabilityProfile::new((0..n).map(FfId).collect());
        for (b, name) in benches.iter().enumerate() {
            p.push_benchmark(
                *name,
                (0..n).map(|i| OutcomeCounts::new(50.0, f(b, i), 0.5 * f(b, i), 0.0, 0.0)).collect(),
            )
            .unwrap();
        }
        p
    }

    #[test]
    fn identical_benchmarks_do_not_underestimate() {
        let benches = ["a", "b", "c", "d"];
        let d = design(20, &benches);
        let p = profile(20, &benches, |_, i| (20 - i) as f64);
        let split = SplitSpec { pair_count: 5, ..SplitSpec::new(2, 2, 7) };
        let r = train_validate(&p, &d, &TechniqueCatalog::default(), split, Target::sdc(5.0), &Strategy::leap_dice())
            .unwrap();
        for pair in &r.pairs {
            assert!((pair.validated - pair.trained).abs() < 1e-9 * pair.trained);
        }
        assert!(r.mean_underestimate_pct.abs() < 1e-9);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn splits_are_seeded_and_disjoint() {
        let names: Vec<String> = (0..8).map(|i| format!("b{i}")).collect();
        let s = SplitSpec::new(4, 3, 11);
        let a = s.splits(&names).unwrap();
        assert_eq!(a, s.splits(&names).unwrap());
        assert_eq!(a.len(), DEFAULT_PAIRS);
        for (t, v) in &a {
            assert!(t.iter().all(|x| !v.contains(x)));
        }
        assert!(SplitSpec::new(5, 4, 0).splits(&names).is_err());
    }

    #[test]
    fn sign_test_values() {
        assert_eq!(sign_test(&[]), 1.0);
        // 6 of 6 decreased: p = 2 / 64.
        let six: Vec<(f64, f64)> = (0..6).map(|_| (2.0, 1.0)).collect();
        assert!((sign_test(&six) - 2.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_extremes() {
        let benches = ["a", "b"];
        let same = profile(20, &benches, |_, i| (20 - i) as f64);
        for d in 1..=10 {
            assert_eq!(subset_similarity(&same, None, d).unwrap(), 1.0);
        }
        let flipped = profile(20, &benches, |b, i| if b == 0 { (20 - i) as f64 } else { i as f64 + 1.0 });
        assert_eq!(subset_similarity(&flipped, None, 1).unwrap(), 0.0);
        assert!(subset_similarity(&same, None, 0).is_err());
        assert!(subset_similarity(&profile(9, &benches, |_, _| 1.0), None, 1).is_err());
    }

    #[test]
    fn lhl_fallback_on_empty_plan_gives_four_x() {
        let d = design(10, &["a"]);
        let p = profile(10, &["a"], |_, i| i as f64 + 1.0);
        let c = TechniqueCatalog::default();
        let plan = lhl_fallback(&ProtectionPlan::empty(), &d, &c).unwrap();
        assert_eq!(plan.per_ff.len(), 10);
        let r = evaluate(&p, &plan, &c, &d).unwrap();
        assert!((r.sdc_improvement.unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(lhl_fallback(&plan, &d, &c).unwrap(), plan);
    }
}
