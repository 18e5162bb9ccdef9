use serde::{Deserialize, Serialize};

use crate::catalog::{Applicability, PerFf, TechniqueCatalog};
use crate::error::{Error, Result};
use crate::eval::{evaluate, improvement, per_ff_after, PlanContext, ProtectionPlan};
use crate::model::{vulnerability_rank, DesignModel, FfId, Metric, OutcomeCounts, VulnerabilityProfile};
use crate::parity::{enforce_min_spacing, group_first_fit, group_optimized};

use super::heuristic::heuristic1_assign;
use super::{Factor, Strategy, Target, TargetMetric};

/// Subsets above this size are not searched exhaustively.
pub const OPTIMAL_MAX_FFS: usize = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectiveOptions {
    /// Include always-vanish flip-flops when protecting for a `max` target.
    pub max_improvement: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub plan: ProtectionPlan,
    pub sdc_improvement: Option<f64>,
    pub due_improvement: Option<f64>,
    pub energy_pct: f64,
}

impl Selection {
    pub fn achieved(&self, metric: TargetMetric) -> f64 {
        let s = self.sdc_improvement.unwrap_or(f64::INFINITY);
        let d = self.due_improvement.unwrap_or(f64::INFINITY);
        match metric {
            TargetMetric::Sdc => s,
            TargetMetric::Due => d,
            TargetMetric::Joint => s.min(d),
        }
    }
}

fn rank_metric(m: TargetMetric) -> Metric {
    match m {
        TargetMetric::Sdc => Metric::Sdc,
        TargetMetric::Due => Metric::Due,
        TargetMetric::Joint => Metric::Combined,
    }
}

/// Incremental greedy state. Per-FF post-plan counts are precomputed for the
/// unprotected and protected cases under both plan contexts (with and without
/// the strategy's recovery), so each addition is O(1).
struct Engine<'a> {
    profile: &'a VulnerabilityProfile,
    design: &'a DesignModel,
    catalog: &'a TechniqueCatalog,
    base: ProtectionPlan,
    strategy_recovery: Option<String>,
    /// Context 0 lacks the strategy's recovery; context 1 has it.
    gammas: [f64; 2],
    none: [Vec<OutcomeCounts>; 2],
    prot: [Vec<OutcomeCounts>; 2],
    tech: Vec<String>,
    detects: Vec<bool>,
    sums_none: [OutcomeCounts; 2],
    delta: [OutcomeCounts; 2],
    chosen: Vec<bool>,
    order: Vec<usize>,
    detecting: bool,
    before: OutcomeCounts,
}

impl<'a> Engine<'a> {
    fn new(
        profile: &'a VulnerabilityProfile,
        design: &'a DesignModel,
        catalog: &'a TechniqueCatalog,
        base: &ProtectionPlan,
        strategy: &Strategy,
    ) -> Result<Self> {
        let strategy_recovery = match &base.recovery {
            Some(r) => Some(r.clone()),
            None => strategy.recovery().map(str::to_string),
        };
        let mut with_rec = base.clone();
        with_rec.recovery = strategy_recovery.clone();
        let ctx =
            [PlanContext::new(profile, base, catalog, design)?, PlanContext::new(profile, &with_rec, catalog, design)?];
        let rec_spec = strategy_recovery.as_deref().map(|r| catalog.recovery(r)).transpose()?;
        let idx = design.index();
        let tech: Vec<String> = profile
            .ff_ids
            .iter()
            .map(|id| {
                let ff = idx
                    .get(id)
                    .map(|&i| &design.flip_flops[i])
                    .ok_or_else(|| Error::InvalidProfile(format!("{id} is not in the design")))?;
                Ok(match strategy {
                    Strategy::Harden { cell } => cell.clone(),
                    Strategy::Detect { technique, .. } => technique.clone(),
                    Strategy::Heuristic1 { .. } => heuristic1_assign(ff, rec_spec).to_string(),
                })
            })
            .collect::<Result<_>>()?;
        let detects: Vec<bool> =
            tech.iter().map(|t| Ok(!matches!(catalog.per_ff(t)?, PerFf::Hardened(_)))).collect::<Result<_>>()?;
        let mut none = [Vec::new(), Vec::new()];
        let mut prot = [Vec::new(), Vec::new()];
        let mut distinct: Vec<&String> = tech.iter().collect();
        distinct.sort();
        distinct.dedup();
        for k in 0..2 {
            none[k] = per_ff_after(&ctx[k], profile, design, None)?;
            prot[k] = none[k].clone();
            for t in &distinct {
                let v = per_ff_after(&ctx[k], profile, design, Some(catalog.per_ff(t)?))?;
                for (i, name) in tech.iter().enumerate() {
                    if name == *t {
                        prot[k][i] = v[i];
                    }
                }
            }
        }
        let sums_none = [none[0].iter().copied().sum(), none[1].iter().copied().sum()];
        Ok(Self {
            profile,
            design,
            catalog,
            base: base.clone(),
            strategy_recovery,
            gammas: [ctx[0].gamma, ctx[1].gamma],
            none,
            prot,
            detects,
            tech,
            sums_none,
            delta: [OutcomeCounts::default(); 2],
            chosen: vec![false; profile.ff_ids.len()],
            order: Vec::new(),
            detecting: false,
            before: profile.totals(),
        })
    }

    fn active(&self) -> usize {
        usize::from(self.detecting || self.base.recovery.is_some())
    }

    fn after(&self) -> OutcomeCounts {
        let k = self.active();
        self.sums_none[k] + self.delta[k]
    }

    fn improvement(&self, m: Metric) -> Result<f64> {
        improvement(m, &self.before, &self.after(), self.gammas[self.active()])
    }

    fn achieved(&self, m: TargetMetric) -> Result<f64> {
        Ok(match m {
            TargetMetric::Sdc => self.improvement(Metric::Sdc)?,
            TargetMetric::Due => self.improvement(Metric::Due)?,
            TargetMetric::Joint => self.improvement(Metric::Sdc)?.min(self.improvement(Metric::Due)?),
        })
    }

    fn add(&mut self, i: usize) {
        debug_assert!(!self.chosen[i]);
        self.chosen[i] = true;
        self.order.push(i);
        self.detecting |= self.detects[i];
        for k in 0..2 {
            let (p, n) = (self.prot[k][i], self.none[k][i]);
            self.delta[k] +=
                OutcomeCounts::new(p.vanished - n.vanished, p.omm - n.omm, p.ut - n.ut, p.hang - n.hang, p.ed - n.ed);
        }
    }

    fn plan_for(&self, members: &[usize], name: String) -> Result<ProtectionPlan> {
        let mut plan = self.base.clone();
        plan.name = name;
        let mut detecting = false;
        for &i in members {
            plan.per_ff.insert(self.profile.ff_ids[i], self.tech[i].clone());
            detecting |= self.detects[i];
        }
        if self.base.recovery.is_none() && detecting {
            plan.recovery = self.strategy_recovery.clone();
        }
        plan.parity_groups = parity_groups(&plan, self.design, self.catalog);
        Ok(plan)
    }

    /// Candidate rows in rank order for `metric`, skipping zero-vulnerability FFs
    /// unless `all` is set.
    fn ranked(&self, metric: Metric, all: bool) -> Vec<usize> {
        let agg = self.profile.aggregate();
        let row: std::collections::HashMap<FfId, usize> =
            self.profile.ff_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        vulnerability_rank(self.profile, metric, Some(self.design))
            .into_iter()
            .map(|id| row[&id])
            .filter(|&i| all || metric.vulnerability(&agg[i]) > 0.0)
            .collect()
    }

    fn finish(&self, name: String) -> Result<Selection> {
        let plan = self.plan_for(&self.order, name)?;
        let r = evaluate(self.profile, &plan, self.catalog, self.design)?;
        Ok(Selection {
            plan,
            sdc_improvement: r.sdc_improvement,
            due_improvement: r.due_improvement,
            energy_pct: r.cost.energy_pct,
        })
    }

    /// Adds FFs from `order` until `target` is met; confirms with a full
    /// evaluation before stopping.
    fn walk(&mut self, order: &[usize], metric: TargetMetric, factor: Factor, name: &str) -> Result<Option<Selection>> {
        let mut at = 0;
        loop {
            if factor.met_by(self.achieved(metric)?) {
                let s = self.finish(name.to_string())?;
                if factor.met_by(s.achieved(metric)) {
                    return Ok(Some(s));
                }
            }
            while at < order.len() && self.chosen[order[at]] {
                at += 1;
            }
            if at == order.len() {
                return Ok(None);
            }
            self.add(order[at]);
        }
    }
}

fn parity_groups(
    plan: &ProtectionPlan,
    design: &DesignModel,
    catalog: &TechniqueCatalog,
) -> Vec<crate::parity::ParityGroup> {
    let members: Vec<_> =
        design.flip_flops.iter().filter(|f| plan.per_ff.get(&f.id) == Some(&catalog.parity.name)).cloned().collect();
    if members.is_empty() {
        return Vec::new();
    }
    enforce_min_spacing(group_optimized(&members, &catalog.parity), &members)
        .unwrap_or_else(|_| group_first_fit(&members, &catalog.parity))
}

fn unreachable(strategy: &Strategy, metric: TargetMetric, factor: Factor, achieved: f64, engine: &Engine) -> Error {
    let unbounded = engine
        .strategy_recovery
        .as_deref()
        .and_then(|r| engine.catalog.recovery(r).ok())
        .is_none_or(|r| !r.is_bounded());
    if strategy.detection_only() && unbounded && metric != TargetMetric::Sdc {
        return Error::TargetUnreachable(format!(
            "{metric:?} target {factor}x with detection-only {strategy}: without bounded-latency recovery \
             detected errors stay DUE, so DUE improvement cannot exceed 1x"
        ));
    }
    Error::TargetUnreachable(format!(
        "{metric:?} target {factor}x: protecting every candidate flip-flop with {strategy} reaches only {achieved:.4}x"
    ))
}

fn plan_name(strategy: &Strategy, target: &Target) -> String {
    format!("{strategy}@{:?}:{}", target.metric, target.factor).to_lowercase()
}

/// Greedy rank-prefix protection until `target` is met.
pub fn selective_protect(
    profile: &VulnerabilityProfile,
    design: &DesignModel,
    catalog: &TechniqueCatalog,
    target: Target,
    strategy: &Strategy,
    opts: SelectiveOptions,
) -> Result<Selection> {
    selective_from(&ProtectionPlan::empty(), profile, design, catalog, target, strategy, opts)
}

fn selective_from(
    base: &ProtectionPlan,
    profile: &VulnerabilityProfile,
    design: &DesignModel,
    catalog: &TechniqueCatalog,
    target: Target,
    strategy: &Strategy,
    opts: SelectiveOptions,
) -> Result<Selection> {
    if target.metric == TargetMetric::Joint {
        if let Factor::Finite(f) = target.factor {
            return joint_from(base, profile, design, catalog, f, f, strategy, TargetMetric::Sdc, opts);
        }
    }
    let mut e = Engine::new(profile, design, catalog, base, strategy)?;
    let name = plan_name(strategy, &target);
    let metric = rank_metric(target.metric);
    let mut order = match target.factor {
        Factor::Max => e.ranked(Metric::Combined, false),
        Factor::Finite(_) => e.ranked(metric, false),
    };
    if target.factor == Factor::Max && opts.max_improvement {
        let rest: Vec<usize> = e.ranked(Metric::Combined, true).into_iter().filter(|i| !order.contains(i)).collect();
        order.extend(rest);
    }
    if let Some(s) = e.walk(&order, target.metric, target.factor, &name)? {
        return Ok(s);
    }
    if target.factor == Factor::Max {
        let mut s = e.finish(name)?;
        s.plan.max_improvement = opts.max_improvement;
        return Ok(s);
    }
    let achieved = e.achieved(target.metric)?;
    Err(unreachable(strategy, target.metric, target.factor, achieved, &e))
}

/// Meets `first` metric's target, then keeps protecting unprotected FFs in
/// the other metric's rank order until both targets hold.
pub fn joint_protect(
    profile: &VulnerabilityProfile,
    design: &DesignModel,
    catalog: &TechniqueCatalog,
    sdc_factor: f64,
    due_factor: f64,
    strategy: &Strategy,
    first: TargetMetric,
) -> Result<Selection> {
    joint_from(
        &ProtectionPlan::empty(),
        profile,
        design,
        catalog,
        sdc_factor,
        due_factor,
        strategy,
        first,
        SelectiveOptions::default(),
    )
}

#[allow(clippy::too_many_arguments)]
fn joint_from(
    base: &ProtectionPlan,
    profile: &VulnerabilityProfile,
    design: &DesignModel,
    catalog: &TechniqueCatalog,
    sdc_factor: f64,
    due_factor: f64,
    strategy: &Strategy,
    first: TargetMetric,
    _opts: SelectiveOptions,
) -> Result<Selection> {
    for f in [sdc_factor, due_factor] {
        if !(f >= 1.0) {
            return Err(Error::InvalidArgument(format!("improvement factor must be >= 1, got {f}")));
        }
    }
    let (m1, f1, m2, f2) = match first {
        TargetMetric::Due => (TargetMetric::Due, due_factor, TargetMetric::Sdc, sdc_factor),
        _ => (TargetMetric::Sdc, sdc_factor, TargetMetric::Due, due_factor),
    };
    let mut e = Engine::new(profile, design, catalog, base, strategy)?;
    let name = format!("{strategy}@joint:{sdc_factor}/{due_factor}").to_lowercase();
    let both = |e: &Engine| -> Result<bool> {
        Ok(e.achieved(TargetMetric::Sdc)? >= sdc_factor && e.achieved(TargetMetric::Due)? >= due_factor)
    };
    let phases = [
        (e.ranked(rank_metric(m1), false), m1, f1),
        (e.ranked(rank_metric(m2), false), m2, f2),
        (e.ranked(Metric::Combined, false), TargetMetric::Joint, 1.0),
    ];
    for (order, metric, factor) in &phases {
        for &i in order {
            let met = if *metric == TargetMetric::Joint { both(&e)? } else { e.achieved(*metric)? >= *factor };
            if met {
                break;
            }
            if !e.chosen[i] {
                e.add(i);
            }
        }
    }
    // The final evaluation decides; add remaining candidates if rounding left a gap.
    let rest = e.ranked(Metric::Combined, false);
    let mut at = 0;
    loop {
        if both(&e)? {
            let s = e.finish(name.clone())?;
            if s.achieved(TargetMetric::Sdc) >= sdc_factor && s.achieved(TargetMetric::Due) >= due_factor {
                return Ok(s);
            }
        }
        while at < rest.len() && e.chosen[rest[at]] {
            at += 1;
        }
        if at == rest.len() {
            let (metric, factor) = if e.achieved(TargetMetric::Sdc)? < sdc_factor {
                (TargetMetric::Sdc, sdc_factor)
            } else {
                (TargetMetric::Due, due_factor)
            };
            let achieved = e.achieved(metric)?;
            return Err(unreachable(strategy, metric, Factor::Finite(factor), achieved, &e));
        }
        e.add(rest[at]);
    }
}

/// High-level techniques first, then selective protection of the residual.
pub fn compose_top_down(
    profile: &VulnerabilityProfile,
    design: &DesignModel,
    catalog: &TechniqueCatalog,
    high_level: &[String],
    recovery: Option<String>,
    residual: &Strategy,
    target: Target,
) -> Result<Selection> {
    for name in high_level {
        let h = catalog.high_level(name)?;
        if h.applicability == Applicability::AbftCompatible {
            if let Some(b) =
                profile.benchmarks.iter().find(|b| !design.benchmark(&b.benchmark).is_some_and(|d| d.abft_compatible))
            {
                return Err(Error::NotApplicable(format!(
                    "{name} needs ABFT-compatible benchmarks; `{}` is not",
                    b.benchmark
                )));
            }
        }
    }
    let base = ProtectionPlan { high_level: high_level.to_vec(), recovery, ..ProtectionPlan::default() };
    base.validate(catalog, design)?;
    selective_from(&base, profile, design, catalog, target, residual, SelectiveOptions::default())
}

/// Minimum-energy subset of vulnerable FFs meeting the target, by exhaustive
/// search. Used to measure the greedy optimality gap on small designs.
pub fn optimal_protect(
    profile: &VulnerabilityProfile,
    design: &DesignModel,
    catalog: &TechniqueCatalog,
    target: Target,
    strategy: &Strategy,
) -> Result<Selection> {
    let Factor::Finite(factor) = target.factor else {
        return Err(Error::InvalidArgument("exhaustive search needs a finite target".into()));
    };
    let e = Engine::new(profile, design, catalog, &ProtectionPlan::empty(), strategy)?;
    let cands = e.ranked(rank_metric(target.metric), false);
    if cands.len() > OPTIMAL_MAX_FFS {
        return Err(Error::InvalidArgument(format!(
            "exhaustive search is limited to {OPTIMAL_MAX_FFS} candidate flip-flops, got {}",
            cands.len()
        )));
    }
    let mut best: Option<(f64, u32, u64)> = None;
    for mask in 0u64..(1u64 << cands.len()) {
        let mut probe = Engine { chosen: vec![false; e.chosen.len()], order: Vec::new(), ..e.shallow() };
        for (b, &i) in cands.iter().enumerate() {
            if mask >> b & 1 == 1 {
                probe.add(i);
            }
        }
        if probe.achieved(target.metric)? < factor {
            continue;
        }
        let plan = probe.plan_for(&probe.order, String::new())?;
        let energy = crate::eval::cost_report(&plan, design, catalog)?.energy_pct;
        let key = (energy, mask.count_ones(), mask);
        if best.is_none_or(|b| key < b) {
            best = Some(key);
        }
    }
    let Some((_, _, mask)) = best else {
        let achieved = {
            let mut all = e.shallow();
            for &i in &cands {
                all.add(i);
            }
            all.achieved(target.metric)?
        };
        return Err(unreachable(strategy, target.metric, target.factor, achieved, &e));
    };
    let mut win = e.shallow();
    for (b, &i) in cands.iter().enumerate() {
        if mask >> b & 1 == 1 {
            win.add(i);
        }
    }
    win.finish(format!("optimal:{}", plan_name(strategy, &target)))
}

impl Engine<'_> {
    /// Fresh state sharing the precomputed tables.
    fn shallow(&self) -> Self {
        Self {
            profile: self.profile,
            design: self.design,
            catalog: self.catalog,
            base: self.base.clone(),
            strategy_recovery: self.strategy_recovery.clone(),
            gammas: self.gammas,
            none: self.none.clone(),
            prot: self.prot.clone(),
            tech: self.tech.clone(),
            detects: self.detects.clone(),
            sums_none: self.sums_none,
            delta: [OutcomeCounts::default(); 2],
            chosen: vec![false; self.chosen.len()],
            order: Vec::new(),
            detecting: false,
            before: self.before,
        }
    }
}
