use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{CoreKind, Mode, PerFf, TechniqueCatalog};
use crate::doc::{Document, RULES_SCHEMA};
use crate::error::{Error, Result};

pub const DEFAULT_RULES: &str = include_str!("../../data/rules.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreRules {
    pub core: CoreKind,
    /// Per-FF and high-level techniques whose nonempty subsets are explored.
    pub techniques: Vec<String>,
    /// Algorithm-level techniques, explored alone and on top of each subset.
    #[serde(default)]
    pub algorithm: Vec<String>,
    pub recoveries: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRequirement {
    pub recovery: String,
    pub techniques: Vec<String>,
}

/// A technique that, under bounded recovery, may only pair with `recoveries`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedOnly {
    pub technique: String,
    pub recoveries: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub cores: Vec<CoreRules>,
    #[serde(default)]
    pub mutually_exclusive: Vec<Vec<String>>,
    #[serde(default)]
    pub recovery_requires: Vec<RecoveryRequirement>,
    #[serde(default)]
    pub bounded_recovery_only: Vec<BoundedOnly>,
    #[serde(default)]
    pub recovery_needs_detection: bool,
    #[serde(default)]
    pub detection_latency_bound: bool,
    /// Published totals, compared against but never used to produce counts.
    #[serde(default)]
    pub published_totals: BTreeMap<String, usize>,
}

impl RuleSet {
    pub fn default_rules() -> Self {
        Self::from_json(DEFAULT_RULES).expect("bundled rule file parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc = Document::<RuleSet>::from_json(text, RULES_SCHEMA).map_err(|e| match e {
            Error::Json(j) => Error::Rules(j.to_string()),
            other => other,
        })?;
        Ok(doc.body)
    }

    pub fn to_document(&self) -> Document<RuleSet> {
        Document::new(RULES_SCHEMA, self.clone())
    }

    /// Checks every name against the catalog and the subset width.
    pub fn validate(&self, catalog: &TechniqueCatalog) -> Result<()> {
        let known = |n: &str| catalog.per_ff(n).is_ok() || catalog.high_level(n).is_ok();
        for (i, c) in self.cores.iter().enumerate() {
            if c.techniques.len() + c.algorithm.len() > 20 {
                return Err(Error::Rules(format!("cores[{i}]: too many techniques to enumerate")));
            }
            for t in c.techniques.iter().chain(&c.algorithm) {
                if !known(t) {
                    return Err(Error::Rules(format!("cores[{i}]: unknown technique `{t}`")));
                }
            }
            for r in &c.recoveries {
                catalog.recovery(r).map_err(|_| Error::Rules(format!("cores[{i}]: unknown recovery `{r}`")))?;
            }
        }
        for r in &self.recovery_requires {
            catalog
                .recovery(&r.recovery)
                .map_err(|_| Error::Rules(format!("recovery_requires: unknown recovery `{}`", r.recovery)))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinationDescriptor {
    pub core: CoreKind,
    /// Table row: `base`, `<algorithm> alone` or `<algorithm> + base`.
    pub row: String,
    pub techniques: Vec<String>,
    pub recovery: Option<String>,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl CombinationDescriptor {
    /// Unique key, e.g. `InO|LEAP-DICE+EDS|IR`.
    pub fn key(&self) -> String {
        format!("{:?}|{}|{}", self.core, self.techniques.join("+"), self.recovery.as_deref().unwrap_or("none"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCount {
    pub core: CoreKind,
    pub row: String,
    pub recovery: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    pub combinations: Vec<CombinationDescriptor>,
    pub rows: Vec<RowCount>,
    pub totals: BTreeMap<String, usize>,
    pub total: usize,
    /// `None` when the rule file lists no published totals.
    pub matches_published: Option<bool>,
}

impl Enumeration {
    pub fn valid(&self) -> impl Iterator<Item = &CombinationDescriptor> {
        self.combinations.iter().filter(|c| c.valid)
    }

    pub fn count(&self, core: CoreKind, row: &str, recovery: &str) -> usize {
        self.rows.iter().find(|r| r.core == core && r.row == row && r.recovery == recovery).map_or(0, |r| r.count)
    }
}

fn is_detection(catalog: &TechniqueCatalog, t: &str) -> bool {
    match catalog.per_ff(t) {
        Ok(PerFf::Hardened(_)) => false,
        Ok(_) => true,
        Err(_) => catalog.high_level(t).is_ok_and(|h| h.mode == Mode::Detect),
    }
}

fn latency(catalog: &TechniqueCatalog, t: &str) -> Option<u64> {
    match catalog.per_ff(t) {
        Ok(p) => p.detection_latency(),
        Err(_) => catalog.high_level(t).ok().and_then(|h| h.detection_latency),
    }
}

/// First violated rule, if any.
fn violation(rules: &RuleSet, catalog: &TechniqueCatalog, set: &[String], recovery: Option<&str>) -> Option<String> {
    let has = |t: &str| set.iter().any(|s| s == t);
    for group in &rules.mutually_exclusive {
        let present: Vec<&String> = group.iter().filter(|t| has(t)).collect();
        if present.len() > 1 {
            return Some(format!("{} and {} are mutually exclusive", present[0], present[1]));
        }
    }
    let rec = recovery?;
    let spec = catalog.recovery(rec).ok()?;
    if rules.recovery_needs_detection && !set.iter().any(|t| is_detection(catalog, t)) {
        return Some(format!("{rec} needs a detection technique"));
    }
    for req in rules.recovery_requires.iter().filter(|r| r.recovery == rec) {
        if let Some(missing) = req.techniques.iter().find(|t| !has(t)) {
            return Some(format!("{rec} requires {missing}"));
        }
    }
    if spec.is_bounded() {
        for b in &rules.bounded_recovery_only {
            if has(&b.technique) && !b.recoveries.iter().any(|r| r == rec) {
                return Some(format!("{} under bounded recovery requires {}", b.technique, b.recoveries.join(" or ")));
            }
        }
    }
    if rules.detection_latency_bound {
        for t in set {
            if let Some(l) = latency(catalog, t) {
                if !spec.accepts_latency(l) {
                    return Some(format!("{t} detection latency {l} exceeds {rec} bound"));
                }
            }
        }
    }
    None
}

/// All nonempty technique subsets per core, crossed with no recovery and each
/// listed recovery, classified against the rules.
pub fn enumerate_combinations(catalog: &TechniqueCatalog, rules: &RuleSet) -> Result<Enumeration> {
    rules.validate(catalog)?;
    let mut combos = Vec::new();
    for core in &rules.cores {
        let n = core.techniques.len();
        let mut shapes: Vec<(String, Vec<String>)> = Vec::new();
        let subsets = |extra: &[&String]| -> Vec<Vec<String>> {
            (1u32..(1 << n))
                .map(|mask| {
                    let mut s: Vec<String> =
                        (0..n).filter(|b| mask >> b & 1 == 1).map(|b| core.techniques[b].clone()).collect();
                    s.extend(extra.iter().map(|e| e.to_string()));
                    s
                })
                .collect()
        };
        shapes.extend(subsets(&[]).into_iter().map(|s| ("base".to_string(), s)));
        for a in &core.algorithm {
            shapes.push((format!("{a} alone"), vec![a.clone()]));
        }
        for a in &core.algorithm {
            shapes.extend(subsets(&[a]).into_iter().map(|s| (format!("{a} + base"), s)));
        }
        // Algorithm pairs are generated so that exclusivity rules are visible.
        for (i, a) in core.algorithm.iter().enumerate() {
            for b in &core.algorithm[i + 1..] {
                shapes.push((format!("{a} + {b}"), vec![a.clone(), b.clone()]));
            }
        }
        let recs: Vec<Option<&str>> =
            std::iter::once(None).chain(core.recoveries.iter().map(|r| Some(r.as_str()))).collect();
        let mut part: Vec<CombinationDescriptor> = shapes
            .par_iter()
            .flat_map_iter(|(row, set)| {
                recs.iter().map(move |rec| {
                    let reason = violation(rules, catalog, set, *rec);
                    CombinationDescriptor {
                        core: core.core,
                        row: row.clone(),
                        techniques: set.clone(),
                        recovery: rec.map(str::to_string),
                        valid: reason.is_none(),
                        reason,
                    }
                })
            })
            .collect();
        combos.append(&mut part);
    }

    let mut rows: Vec<RowCount> = Vec::new();
    let mut totals: BTreeMap<String, usize> = BTreeMap::new();
    for c in combos.iter().filter(|c| c.valid) {
        let rec = c.recovery.clone().unwrap_or_else(|| "none".into());
        match rows.iter_mut().find(|r| r.core == c.core && r.row == c.row && r.recovery == rec) {
            Some(r) => r.count += 1,
            None => rows.push(RowCount { core: c.core, row: c.row.clone(), recovery: rec, count: 1 }),
        }
        *totals.entry(format!("{:?}", c.core)).or_default() += 1;
    }
    let total = totals.values().sum();
    let matches_published = (!rules.published_totals.is_empty()).then(|| {
        rules.published_totals.iter().all(|(k, v)| {
            let got = if k == "total" { total } else { totals.get(k).copied().unwrap_or(0) };
            got == *v
        })
    });
    Ok(Enumeration { combinations: combos, rows, totals, total, matches_published })
}
