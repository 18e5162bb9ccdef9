//! Plan application, Eq. 1 improvements and cost accounting.
//!
//! Counts move between outcome categories in a fixed order:
//!
//! 1. high-level correct-mode techniques (detected share → vanished)
//! 2. high-level detect-mode techniques (detected share → ed)
//! 3. per-FF hardening (counts × residual rate, remainder → vanished)
//! 4. per-FF detection: EDS or parity (detected share → ed)
//! 5. bounded recovery at recoverable FFs (ed → vanished)
//!
//! Every step conserves the per-FF total.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{
    self, gamma, Applicability, HighLevelTechniqueSpec, Mode, PerFf, RecoverySpec, TechniqueCatalog, DFC, EIR,
};
use crate::error::{Error, Result};
use crate::model::{vulnerability_rank, DesignModel, FfId, FlipFlop, Metric, OutcomeCounts, VulnerabilityProfile};
use crate::parity::{parity_cost, ParityGroup};

/// Improvement reported when the post-protection count reaches zero.
pub const IMPROVEMENT_CEILING: f64 = 1e6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoverageSelection {
    /// High-level techniques touch the most vulnerable FFs first.
    #[default]
    MostVulnerable,
    Random {
        seed: u64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProtectionPlan {
    #[serde(default)]
    pub name: String,
    /// Per-FF technique: a hardened cell, a detector cell or `parity`.
    #[serde(default)]
    pub per_ff: BTreeMap<FfId, String>,
    #[serde(default)]
    pub parity_groups: Vec<ParityGroup>,
    #[serde(default)]
    pub high_level: Vec<String>,
    /// `None` means no recovery at all.
    #[serde(default)]
    pub recovery: Option<String>,
    /// Always-vanish FFs are candidates too.
    #[serde(default)]
    pub max_improvement: bool,
    #[serde(default)]
    pub coverage: CoverageSelection,
}

impl ProtectionPlan {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn protected_count(&self) -> usize {
        self.per_ff.len()
    }

    /// Checks the plan against the catalog and design.
    pub fn validate(&self, catalog: &TechniqueCatalog, design: &DesignModel) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPlan(m));
        let idx = design.index();
        let mut latencies: Vec<(String, u64)> = Vec::new();
        for (id, tech) in &self.per_ff {
            if !idx.contains_key(id) {
                return bad(format!("{id} is not in the design"));
            }
            let t = catalog.per_ff(tech)?;
            if let Some(l) = t.detection_latency() {
                latencies.push((tech.clone(), l));
            }
        }
        let parity_name = &catalog.parity.name;
        let mut grouped = BTreeSet::new();
        for g in &self.parity_groups {
            for m in &g.members {
                if !grouped.insert(*m) {
                    return bad(format!("{m} is in more than one parity group"));
                }
                if self.per_ff.get(m) != Some(parity_name) {
                    return bad(format!("{m} is in a parity group but not assigned {parity_name}"));
                }
            }
        }
        if let Some(id) =
            self.per_ff.iter().find(|(id, t)| *t == parity_name && !grouped.contains(id)).map(|(id, _)| id)
        {
            return bad(format!("{id} is assigned {parity_name} but belongs to no group"));
        }
        let mut seen = HashSet::new();
        for name in &self.high_level {
            let h = catalog.high_level(name)?;
            if !seen.insert(name.as_str()) {
                return bad(format!("{name} listed twice"));
            }
            if let Some(l) = h.detection_latency {
                latencies.push((name.clone(), l));
            }
        }
        if seen.contains(catalog::ABFT_CORRECTION) && seen.contains(catalog::ABFT_DETECTION) {
            return bad("ABFT correction and detection are mutually exclusive".into());
        }
        if let Some(r) = &self.recovery {
            let spec = catalog.recovery(r)?;
            let has_dfc = seen.contains(DFC);
            if r == EIR && !has_dfc {
                return bad("EIR recovery is only used alongside DFC".into());
            }
            if spec.is_bounded() {
                if has_dfc && r != EIR {
                    return bad(format!("DFC needs EIR buffers for bounded recovery, not {r}"));
                }
                if let Some((name, l)) = latencies.iter().find(|(_, l)| !spec.accepts_latency(*l)) {
                    return bad(format!(
                        "{name} detection latency {l} cycles exceeds {r} limit of {} cycles",
                        spec.max_detection_latency.unwrap_or(u64::MAX)
                    ));
                }
            }
        }
        Ok(())
    }
}

struct ResolvedHl<'a> {
    spec: &'a HighLevelTechniqueSpec,
    sdc: HashSet<FfId>,
    due: HashSet<FfId>,
}

/// A plan's plan-wide parts (high-level coverage sets, recovery, γ) resolved
/// against one profile, so per-FF outcomes can be computed independently.
pub struct PlanContext<'a> {
    catalog: &'a TechniqueCatalog,
    correct: Vec<ResolvedHl<'a>>,
    detect: Vec<ResolvedHl<'a>>,
    /// Per profile benchmark, whether each high-level technique applies.
    applicable: Vec<HashSet<&'a str>>,
    recovery: Option<&'a RecoverySpec>,
    pub gamma: f64,
    pub exec_time_impact: f64,
    pub ff_count_delta: f64,
}

fn coverage_set(
    profile: &VulnerabilityProfile,
    design: &DesignModel,
    metric: Metric,
    fraction: f64,
    selection: CoverageSelection,
    salt: u64,
) -> HashSet<FfId> {
    let agg = profile.aggregate();
    let vulnerable: HashSet<FfId> =
        profile.ff_ids.iter().zip(&agg).filter(|(_, c)| metric.vulnerability(c) > 0.0).map(|(id, _)| *id).collect();
    let take = (fraction * vulnerable.len() as f64).round() as usize;
    let mut ordered: Vec<FfId> =
        vulnerability_rank(profile, metric, Some(design)).into_iter().filter(|id| vulnerable.contains(id)).collect();
    if let CoverageSelection::Random { seed } = selection {
        ordered.sort();
        ordered.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ salt));
    }
    ordered.into_iter().take(take).collect()
}

impl<'a> PlanContext<'a> {
    pub fn new(
        profile: &VulnerabilityProfile,
        plan: &ProtectionPlan,
        catalog: &'a TechniqueCatalog,
        design: &DesignModel,
    ) -> Result<Self> {
        let mut correct = Vec::new();
        let mut detect = Vec::new();
        let mut ff_delta = 0.0;
        let mut exec = 1.0;
        for (i, name) in plan.high_level.iter().enumerate() {
            let spec = catalog.high_level(name)?;
            let salt = 2 * i as u64;
            let r = ResolvedHl {
                spec,
                sdc: coverage_set(profile, design, Metric::Sdc, spec.sdc.ff_fraction, plan.coverage, salt),
                due: coverage_set(profile, design, Metric::Due, spec.due.ff_fraction, plan.coverage, salt + 1),
            };
            ff_delta += spec.ff_count_delta;
            exec *= 1.0 + spec.exec_time_impact;
            match spec.mode {
                Mode::Correct => correct.push(r),
                Mode::Detect => detect.push(r),
            }
        }
        let recovery = plan.recovery.as_deref().map(|r| catalog.recovery(r)).transpose()?;
        if let Some(r) = recovery {
            ff_delta += r.ff_count_delta;
        }
        let applicable = profile
            .benchmarks
            .iter()
            .map(|b| {
                let abft = design.benchmark(&b.benchmark).is_some_and(|d| d.abft_compatible);
                catalog
                    .high_level
                    .iter()
                    .filter(|h| plan.high_level.contains(&h.name))
                    .filter(|h| h.applicability == Applicability::All || abft)
                    .map(|h| h.name.as_str())
                    .collect()
            })
            .collect();
        let exec_time_impact = exec - 1.0;
        Ok(Self {
            catalog,
            correct,
            detect,
            applicable,
            recovery,
            gamma: gamma(ff_delta, exec_time_impact)?,
            exec_time_impact,
            ff_count_delta: ff_delta,
        })
    }

    pub fn catalog(&self) -> &'a TechniqueCatalog {
        self.catalog
    }

    pub fn recovery(&self) -> Option<&'a RecoverySpec> {
        self.recovery
    }

    /// Outcome counts of one FF on one benchmark after the plan, with `tech`
    /// as that FF's per-FF technique.
    pub fn transform(&self, bench: usize, ff: &FlipFlop, tech: Option<PerFf>, c: OutcomeCounts) -> OutcomeCounts {
        let mut c = c;
        let applies = &self.applicable[bench];
        for hl in &self.correct {
            if !applies.contains(hl.spec.name.as_str()) {
                continue;
            }
            if hl.sdc.contains(&ff.id) {
                let m = hl.spec.sdc.per_ff * c.omm;
                c.omm -= m;
                c.vanished += m;
            }
            if hl.due.contains(&ff.id) {
                let (u, h) = (hl.spec.due.per_ff * c.ut, hl.spec.due.per_ff * c.hang);
                c.ut -= u;
                c.hang -= h;
                c.vanished += u + h;
            }
        }
        for hl in &self.detect {
            if !applies.contains(hl.spec.name.as_str()) {
                continue;
            }
            if hl.sdc.contains(&ff.id) {
                let m = hl.spec.sdc.per_ff * c.omm;
                c.omm -= m;
                c.ed += m;
            }
            if hl.due.contains(&ff.id) {
                let (u, h) = (hl.spec.due.per_ff * c.ut, hl.spec.due.per_ff * c.hang);
                c.ut -= u;
                c.hang -= h;
                c.ed += u + h;
            }
        }
        match tech {
            Some(PerFf::Hardened(h)) => {
                let s = h.ser_multiplier;
                let removed = (1.0 - s) * (c.omm + c.ut + c.hang + c.ed);
                c.omm *= s;
                c.ut *= s;
                c.hang *= s;
                c.ed *= s;
                c.vanished += removed;
            }
            Some(PerFf::Detector(d)) => detect_cell(&mut c, d.detect_prob),
            Some(PerFf::Parity(p)) => detect_cell(&mut c, p.detect_prob),
            None => {}
        }
        if let Some(r) = self.recovery {
            if r.is_bounded() && r.recovers(ff) {
                c.vanished += c.ed;
                c.ed = 0.0;
            }
        }
        c
    }
}

fn detect_cell(c: &mut OutcomeCounts, p: f64) {
    let (o, u, h) = (p * c.omm, p * c.ut, p * c.hang);
    c.omm -= o;
    c.ut -= u;
    c.hang -= h;
    c.ed += o + u + h;
}

fn design_lookup<'d>(profile: &VulnerabilityProfile, design: &'d DesignModel) -> Result<Vec<&'d FlipFlop>> {
    let idx = design.index();
    profile
        .ff_ids
        .iter()
        .map(|id| {
            idx.get(id)
                .map(|&i| &design.flip_flops[i])
                .ok_or_else(|| Error::InvalidProfile(format!("{id} is not in the design")))
        })
        .collect()
}

/// Transformed profile after applying `plan`.
pub fn apply_plan(
    profile: &VulnerabilityProfile,
    plan: &ProtectionPlan,
    catalog: &TechniqueCatalog,
    design: &DesignModel,
) -> Result<VulnerabilityProfile> {
    plan.validate(catalog, design)?;
    let ffs = design_lookup(profile, design)?;
    let techs: Vec<Option<PerFf>> = profile
        .ff_ids
        .iter()
        .map(|id| plan.per_ff.get(id).map(|t| catalog.per_ff(t)).transpose())
        .collect::<Result<_>>()?;
    let ctx = PlanContext::new(profile, plan, catalog, design)?;
    let mut out = profile.clone();
    for (b, bench) in out.benchmarks.iter_mut().enumerate() {
        for (i, c) in bench.counts.iter_mut().enumerate() {
            *c = ctx.transform(b, ffs[i], techs[i], *c);
        }
    }
    Ok(out)
}

/// Monte Carlo counterpart of [`apply_plan`] for integer-count profiles:
/// every injection's fate is drawn through the same five steps.
pub fn apply_plan_stochastic(
    profile: &VulnerabilityProfile,
    plan: &ProtectionPlan,
    catalog: &TechniqueCatalog,
    design: &DesignModel,
    seed: u64,
) -> Result<VulnerabilityProfile> {
    plan.validate(catalog, design)?;
    let ffs = design_lookup(profile, design)?;
    let ctx = PlanContext::new(profile, plan, catalog, design)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = profile.clone();
    #[derive(Clone, Copy, PartialEq)]
    enum Cat {
        Vanished,
        Omm,
        Ut,
        Hang,
        Ed,
    }
    for (b, bench) in out.benchmarks.iter_mut().enumerate() {
        let applies = &ctx.applicable[b];
        for (i, c) in bench.counts.iter_mut().enumerate() {
            let ff = ffs[i];
            let tech = plan.per_ff.get(&ff.id).map(|t| catalog.per_ff(t)).transpose()?;
            let mut next = OutcomeCounts::default();
            for (cat, n) in
                [(Cat::Vanished, c.vanished), (Cat::Omm, c.omm), (Cat::Ut, c.ut), (Cat::Hang, c.hang), (Cat::Ed, c.ed)]
            {
                if n.fract() != 0.0 {
                    return Err(Error::InvalidProfile("stochastic mode needs integer counts".into()));
                }
                for _ in 0..n as u64 {
                    let mut k = cat;
                    for (group, to) in [(&ctx.correct, Cat::Vanished), (&ctx.detect, Cat::Ed)] {
                        for hl in group.iter().filter(|h| applies.contains(h.spec.name.as_str())) {
                            let p = match k {
                                Cat::Omm if hl.sdc.contains(&ff.id) => hl.spec.sdc.per_ff,
                                Cat::Ut | Cat::Hang if hl.due.contains(&ff.id) => hl.spec.due.per_ff,
                                _ => 0.0,
                            };
                            if p > 0.0 && rng.random_bool(p) {
                                k = to;
                            }
                        }
                    }
                    match tech {
                        Some(PerFf::Hardened(h)) if k != Cat::Vanished && !rng.random_bool(h.ser_multiplier) => {
                            k = Cat::Vanished
                        }
                        Some(PerFf::Detector(d))
                            if matches!(k, Cat::Omm | Cat::Ut | Cat::Hang) && rng.random_bool(d.detect_prob) =>
                        {
                            k = Cat::Ed
                        }
                        Some(PerFf::Parity(p))
                            if matches!(k, Cat::Omm | Cat::Ut | Cat::Hang) && rng.random_bool(p.detect_prob) =>
                        {
                            k = Cat::Ed
                        }
                        _ => {}
                    }
                    if k == Cat::Ed && ctx.recovery.is_some_and(|r| r.is_bounded() && r.recovers(ff)) {
                        k = Cat::Vanished;
                    }
                    match k {
                        Cat::Vanished => next.vanished += 1.0,
                        Cat::Omm => next.omm += 1.0,
                        Cat::Ut => next.ut += 1.0,
                        Cat::Hang => next.hang += 1.0,
                        Cat::Ed => next.ed += 1.0,
                    }
                }
            }
            *c = next;
        }
    }
    Ok(out)
}

fn ratio(before: f64, after: f64, gamma: f64, ceiling: f64) -> f64 {
    if after <= 0.0 {
        ceiling
    } else {
        (before / after / gamma).min(ceiling)
    }
}

/// `(before.omm / after.omm) / γ`.
pub fn sdc_improvement(before: &OutcomeCounts, after: &OutcomeCounts, gamma: f64, ceiling: f64) -> Result<f64> {
    if before.omm <= 0.0 {
        return Err(Error::NoBaselineErrors("SDC"));
    }
    Ok(ratio(before.omm, after.omm, gamma, ceiling))
}

/// `((before.ut + before.hang) / (after.ut + after.hang + after.ed)) / γ`.
pub fn due_improvement(before: &OutcomeCounts, after: &OutcomeCounts, gamma: f64, ceiling: f64) -> Result<f64> {
    let base = before.ut + before.hang;
    if base <= 0.0 {
        return Err(Error::NoBaselineErrors("DUE"));
    }
    Ok(ratio(base, after.due(), gamma, ceiling))
}

pub fn improvement(metric: Metric, before: &OutcomeCounts, after: &OutcomeCounts, gamma: f64) -> Result<f64> {
    match metric {
        Metric::Sdc => sdc_improvement(before, after, gamma, IMPROVEMENT_CEILING),
        Metric::Due => due_improvement(before, after, gamma, IMPROVEMENT_CEILING),
        Metric::Combined => {
            let base = before.harmful();
            if base <= 0.0 {
                return Err(Error::NoBaselineErrors("SDC+DUE"));
            }
            Ok(ratio(base, after.omm + after.due(), gamma, IMPROVEMENT_CEILING))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub area_pct: f64,
    pub power_pct: f64,
    pub energy_pct: f64,
    pub exec_time_impact_pct: f64,
    pub clock_impact_pct: f64,
}

/// Area, power and energy overhead of a plan as a percentage of the design.
pub fn cost_report(plan: &ProtectionPlan, design: &DesignModel, catalog: &TechniqueCatalog) -> Result<CostReport> {
    let idx = design.index();
    let (mut area, mut power) = (0.0, 0.0);
    for (id, tech) in &plan.per_ff {
        let ff = idx
            .get(id)
            .map(|&i| &design.flip_flops[i])
            .ok_or_else(|| Error::InvalidPlan(format!("{id} is not in the design")))?;
        match catalog.per_ff(tech)? {
            PerFf::Hardened(h) => {
                area += (h.area_mult - 1.0) * ff.area_weight;
                power += (h.power_mult - 1.0) * ff.power_weight;
            }
            PerFf::Detector(d) => {
                area += (d.area_mult - 1.0 + d.aux_area) * ff.area_weight;
                power += (d.power_mult - 1.0 + d.aux_power) * ff.power_weight;
            }
            PerFf::Parity(_) => {}
        }
    }
    let mut c = CostReport {
        area_pct: 100.0 * design.ff_area_fraction * area / design.total_area_weight(),
        power_pct: 100.0 * design.ff_power_fraction * power / design.total_power_weight(),
        ..CostReport::default()
    };
    let p = parity_cost(&plan.parity_groups, design, &catalog.parity);
    c.area_pct += p.area_pct;
    c.power_pct += p.power_pct;
    let mut exec = 1.0;
    for name in &plan.high_level {
        let h = catalog.high_level(name)?;
        c.area_pct += h.area_pct;
        c.power_pct += h.power_pct;
        exec *= 1.0 + h.exec_time_impact;
    }
    if let Some(r) = &plan.recovery {
        let r = catalog.recovery(r)?;
        c.area_pct += r.area_pct;
        c.power_pct += r.power_pct;
    }
    c.exec_time_impact_pct = 100.0 * (exec - 1.0);
    c.energy_pct = 100.0 * ((1.0 + c.power_pct / 100.0) * exec - 1.0);
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEvaluation {
    pub benchmark: String,
    pub before: OutcomeCounts,
    pub after: OutcomeCounts,
    pub sdc_improvement: Option<f64>,
    pub due_improvement: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub plan: String,
    pub protected_ffs: usize,
    pub gamma: f64,
    pub before: OutcomeCounts,
    pub after: OutcomeCounts,
    /// `None` when the baseline has no errors of that kind.
    pub sdc_improvement: Option<f64>,
    pub due_improvement: Option<f64>,
    pub cost: CostReport,
    pub per_benchmark: Vec<BenchmarkEvaluation>,
}

pub const REPORT_CSV_HEADER: [&str; 9] = [
    "plan_id",
    "area_pct",
    "power_pct",
    "energy_pct",
    "exec_time_pct",
    "gamma",
    "sdc_improvement",
    "due_improvement",
    "protected_ffs",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl EvaluationReport {
    pub fn improvement(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Sdc => self.sdc_improvement,
            Metric::Due => self.due_improvement,
            Metric::Combined => improvement(metric, &self.before, &self.after, self.gamma).ok(),
        }
    }

    pub fn csv_row(&self) -> [String; 9] {
        [
            self.plan.clone(),
            format!("{}", self.cost.area_pct),
            format!("{}", self.cost.power_pct),
            format!("{}", self.cost.energy_pct),
            format!("{}", self.cost.exec_time_impact_pct),
            format!("{}", self.gamma),
            opt(self.sdc_improvement),
            opt(self.due_improvement),
            self.protected_ffs.to_string(),
        ]
    }

    pub fn write_csv<W: Write>(reports: &[EvaluationReport], w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(REPORT_CSV_HEADER)?;
        for r in reports {
            out.write_record(r.csv_row())?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Applies a plan and reports improvements and costs.
pub fn evaluate(
    profile: &VulnerabilityProfile,
    plan: &ProtectionPlan,
    catalog: &TechniqueCatalog,
    design: &DesignModel,
) -> Result<EvaluationReport> {
    let after = apply_plan(profile, plan, catalog, design)?;
    let ctx = PlanContext::new(profile, plan, catalog, design)?;
    let g = ctx.gamma;
    let per_benchmark = profile
        .benchmarks
        .iter()
        .zip(&after.benchmarks)
        .map(|(b, a)| {
            let before: OutcomeCounts = b.counts.iter().copied().sum();
            let after: OutcomeCounts = a.counts.iter().copied().sum();
            BenchmarkEvaluation {
                benchmark: b.benchmark.clone(),
                before,
                after,
                sdc_improvement: sdc_improvement(&before, &after, g, IMPROVEMENT_CEILING).ok(),
                due_improvement: due_improvement(&before, &after, g, IMPROVEMENT_CEILING).ok(),
            }
        })
        .collect();
    let before = profile.totals();
    let after_totals = after.totals();
    Ok(EvaluationReport {
        plan: plan.name.clone(),
        protected_ffs: plan.protected_count(),
        gamma: g,
        before,
        after: after_totals,
        sdc_improvement: sdc_improvement(&before, &after_totals, g, IMPROVEMENT_CEILING).ok(),
        due_improvement: due_improvement(&before, &after_totals, g, IMPROVEMENT_CEILING).ok(),
        cost: cost_report(plan, design, catalog)?,
        per_benchmark,
    })
}

/// Per-FF aggregate counts under one fixed plan context; used by the
/// explorers for O(1) incremental updates.
pub fn per_ff_after(
    ctx: &PlanContext,
    profile: &VulnerabilityProfile,
    design: &DesignModel,
    tech: Option<PerFf>,
) -> Result<Vec<OutcomeCounts>> {
    let ffs = design_lookup(profile, design)?;
    let mut acc = vec![OutcomeCounts::default(); ffs.len()];
    for (b, bench) in profile.benchmarks.iter().enumerate() {
        for (i, c) in bench.counts.iter().enumerate() {
            acc[i] += ctx.transform(b, ffs[i], tech, *c);
        }
    }
    Ok(acc)
}

/// Index from FF id to its row in a profile.
pub fn profile_index(profile: &VulnerabilityProfile) -> HashMap<FfId, usize> {
    profile.ff_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{EDS, IR, LEAP_DICE, UNCONSTRAINED};
    use crate::model::{Position, Stage};
    use approx::assert_relative_eq;

    fn design(n: u32) -> DesignModel {
        DesignModel {
            name: "t".into(),
            flip_flops: (0..n)
                .map(|i| {
                    let stage = if i % 2 == 0 { Stage::Decode } else { Stage::Writeback };
                    FlipFlop::new(i, stage, Position::new(2.0 * i as f64, 0.0), 1.5)
                })
                .collect(),
            ff_area_fraction: 0.5,
            ff_power_fraction: 0.5,
            benchmarks: vec![],
        }
    }

    fn profile(rows: &[(f64, f64, f64, f64)]) -> VulnerabilityProfile {
        let mut p = VulnerabilityProfile::new((0..rows.len() as u32).map(FfId).collect());
        p.push_benchmark("b", rows.iter().map(|r| OutcomeCounts::new(r.0, r.1, r.2, r.3, 0.0)).collect()).unwrap();
        p
    }

    fn all(tech: &str, n: u32) -> ProtectionPlan {
        ProtectionPlan { per_ff: (0..n).map(|i| (FfId(i), tech.to_string())).collect(), ..Default::default() }
    }

    #[test]
    fn empty_plan_is_identity() {
        let p = profile(&[(10.0, 3.0, 2.0, 1.0), (5.0, 0.0, 4.0, 0.0)]);
        let d = design(2);
        let cat = TechniqueCatalog::default();
        assert_eq!(apply_plan(&p, &ProtectionPlan::empty(), &cat, &d).unwrap(), p);
        let r = evaluate(&p, &ProtectionPlan::empty(), &cat, &d).unwrap();
        assert_eq!(r.sdc_improvement, Some(1.0));
        assert_eq!(r.cost, CostReport::default());
    }

    #[test]
    fn full_leap_dice_gives_5000x() {
        let p = profile(&[(10.0, 3.0, 2.0, 1.0), (5.0, 7.0, 4.0, 2.0)]);
        let r = evaluate(&p, &all(LEAP_DICE, 2), &TechniqueCatalog::default(), &design(2)).unwrap();
        assert_relative_eq!(r.sdc_improvement.unwrap(), 5000.0, max_relative = 1e-9);
        assert_relative_eq!(r.due_improvement.unwrap(), 5000.0, max_relative = 1e-9);
    }

    #[test]
    fn detection_only_unconstrained() {
        let p = profile(&[(10.0, 3.0, 2.0, 1.0), (5.0, 7.0, 4.0, 2.0)]);
        let mut plan = all(EDS, 2);
        plan.recovery = Some(UNCONSTRAINED.into());
        let r = evaluate(&p, &plan, &TechniqueCatalog::default(), &design(2)).unwrap();
        assert_eq!(r.sdc_improvement, Some(IMPROVEMENT_CEILING));
        assert!(r.due_improvement.unwrap() <= 1.0);
    }

    #[test]
    fn bounded_recovery_rejects_slow_detectors() {
        let mut plan = ProtectionPlan { high_level: vec![catalog::EDDI.into()], ..Default::default() };
        plan.recovery = Some(IR.into());
        let err = plan.validate(&TechniqueCatalog::default(), &design(2)).unwrap_err();
        assert!(matches!(err, Error::InvalidPlan(_)), "{err}");
    }

    #[test]
    fn improvement_formulas() {
        let b = OutcomeCounts::new(0.0, 100.0, 0.0, 0.0, 0.0);
        assert_eq!(sdc_improvement(&b, &b, 1.0, 1e6).unwrap(), 1.0);
        let a = OutcomeCounts::new(98.0, 2.0, 0.0, 0.0, 0.0);
        assert_relative_eq!(sdc_improvement(&b, &a, 1.28, 1e6).unwrap(), 50.0 / 1.28);
        let b = OutcomeCounts::new(0.0, 0.0, 30.0, 20.0, 0.0);
        let a = OutcomeCounts::new(0.0, 0.0, 0.0, 0.0, 500.0);
        assert_relative_eq!(due_improvement(&b, &a, 1.0, 1e6).unwrap(), 0.1);
        let zero = OutcomeCounts::default();
        assert!(matches!(sdc_improvement(&zero, &zero, 1.0, 1e6), Err(Error::NoBaselineErrors(_))));
    }

    #[test]
    fn software_only_energy_equals_exec_time() {
        let plan = ProtectionPlan { high_level: vec![catalog::EDDI.into()], ..Default::default() };
        let c = cost_report(&plan, &design(2), &TechniqueCatalog::default()).unwrap();
        assert_relative_eq!(c.energy_pct, 110.0, max_relative = 1e-12);
        assert_eq!(c.clock_impact_pct, 0.0);
    }

    #[test]
    fn dfc_style_fractional_transform() {
        // Three SDC-vulnerable FFs; 0.6 coverage rounds to the top two.
        let p = profile(&[(0.0, 10.0, 0.0, 0.0), (0.0, 20.0, 0.0, 0.0), (0.0, 5.0, 0.0, 0.0)]);
        let mut cat = TechniqueCatalog::default();
        let dfc = cat.high_level.iter_mut().find(|h| h.name == DFC).unwrap();
        dfc.sdc = catalog::Coverage { ff_fraction: 0.6, per_ff: 0.3 };
        let plan = ProtectionPlan { high_level: vec![DFC.into()], ..Default::default() };
        let out = apply_plan(&p, &plan, &cat, &design(3)).unwrap();
        let c = &out.benchmarks[0].counts;
        assert_relative_eq!(c[0].omm, 7.0);
        assert_relative_eq!(c[0].ed, 3.0);
        assert_relative_eq!(c[1].omm, 14.0);
        assert_relative_eq!(c[2].omm, 5.0);
        assert_eq!(c[2].ed, 0.0);
    }

    #[test]
    fn stochastic_mode_tracks_expectation() {
        let p = profile(&[(100.0, 400.0, 200.0, 100.0), (50.0, 300.0, 100.0, 50.0)]);
        let mut plan = all(EDS, 2);
        plan.per_ff.insert(FfId(1), catalog::LHL.into());
        plan.recovery = Some(UNCONSTRAINED.into());
        let cat = TechniqueCatalog::default();
        let d = design(2);
        let exact = apply_plan(&p, &plan, &cat, &d).unwrap().totals();
        let mc = apply_plan_stochastic(&p, &plan, &cat, &d, 7).unwrap().totals();
        assert_eq!(mc.total(), exact.total());
        assert!((mc.omm - exact.omm).abs() < 40.0, "{mc:?} vs {exact:?}");
        assert!((mc.ed - exact.ed).abs() < 40.0);
    }
}
