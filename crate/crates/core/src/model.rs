//! The design under protection and its vulnerability profile.
//!
//! A [`DesignModel`] lists every injectable flip-flop with the physical
//! attributes the planners need (stage, layout position, timing slack, cost
//! weights). A [`VulnerabilityProfile`] holds, for every flip-flop and
//! benchmark, how injected upsets resolved: vanished, output mismatch (OMM),
//! unexpected termination (UT), hang, or error detected (ED).

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FfId(pub u32);

impl fmt::Display for FfId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ff{}", self.0)
    }
}

/// Pipeline stage that consumes a flip-flop's value, in program order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Fetch,
    Decode,
    Execute,
    Memory,
    Exception,
    Writeback,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::Fetch, Stage::Decode, Stage::Execute, Stage::Memory, Stage::Exception, Stage::Writeback];

    /// Errors in stages before the memory-write boundary can be squashed by
    /// flushing uncommitted instructions.
    pub fn flush_recoverable(self) -> bool {
        self < Stage::Memory
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fetch" => Ok(Stage::Fetch),
            "decode" => Ok(Stage::Decode),
            "execute" => Ok(Stage::Execute),
            "memory" => Ok(Stage::Memory),
            "exception" => Ok(Stage::Exception),
            "writeback" => Ok(Stage::Writeback),
            other => Err(Error::InvalidDesign(format!("unknown stage `{other}`"))),
        }
    }
}

/// Layout coordinates in flip-flop-length units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

fn one() -> f64 {
    1.0
}

/// One injectable sequential element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipFlop {
    pub id: FfId,
    #[serde(default)]
    pub name: String,
    pub stage: Stage,
    pub flush_recoverable: bool,
    pub position: Position,
    /// Slack in units of one 32-bit XOR-tree delay.
    pub timing_slack: f64,
    pub area_weight: f64,
    pub power_weight: f64,
    /// Functional-unit tag used by locality grouping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    /// Relative upset susceptibility; uniform by default.
    #[serde(default = "one")]
    pub susceptibility: f64,
}

impl FlipFlop {
    pub fn new(id: u32, stage: Stage, position: Position, timing_slack: f64) -> Self {
        Self {
            id: FfId(id),
            name: String::new(),
            stage,
            flush_recoverable: stage.flush_recoverable(),
            position,
            timing_slack,
            area_weight: 1.0,
            power_weight: 1.0,
            unit: None,
            susceptibility: 1.0,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_weights(mut self, area: f64, power: f64) -> Self {
        self.area_weight = area;
        self.power_weight = power;
        self
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = Some(unit.into());
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDesign(format!("{}: {msg}", self.id)));
        if self.flush_recoverable != self.stage.flush_recoverable() {
            return bad(format!(
                "flush_recoverable must be {} for stage {:?}",
                self.stage.flush_recoverable(),
                self.stage
            ));
        }
        if !(self.position.x >= 0.0 && self.position.y >= 0.0) {
            return bad("position components must be nonnegative".into());
        }
        if !(self.timing_slack >= 0.0) {
            return bad("timing slack must be nonnegative".into());
        }
        if !(self.area_weight > 0.0 && self.power_weight > 0.0) {
            return bad("cost weights must be positive".into());
        }
        if !(self.susceptibility >= 0.0) {
            return bad("susceptibility must be nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub name: String,
    pub nominal_cycles: u64,
    /// Whether algorithm-based fault tolerance can be applied to this workload.
    #[serde(default)]
    pub abft_compatible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignModel {
    #[serde(default)]
    pub name: String,
    pub flip_flops: Vec<FlipFlop>,
    pub ff_area_fraction: f64,
    pub ff_power_fraction: f64,
    #[serde(default)]
    pub benchmarks: Vec<Benchmark>,
}

impl DesignModel {
    pub fn validate(&self) -> Result<()> {
        if self.flip_flops.is_empty() {
            return Err(Error::InvalidDesign("no flip-flops".into()));
        }
        for (label, frac) in
            [("ff_area_fraction", self.ff_area_fraction), ("ff_power_fraction", self.ff_power_fraction)]
        {
            if !(frac > 0.0 && frac <= 1.0) {
                return Err(Error::InvalidDesign(format!("{label} must be in (0, 1], got {frac}")));
            }
        }
        let mut ids = BTreeSet::new();
        let mut positions = BTreeSet::new();
        for ff in &self.flip_flops {
            ff.validate()?;
            if !ids.insert(ff.id) {
                return Err(Error::InvalidDesign(format!("duplicate id {}", ff.id)));
            }
            if !positions.insert((ff.position.x.to_bits(), ff.position.y.to_bits())) {
                return Err(Error::InvalidDesign(format!("{} shares its position with another flip-flop", ff.id)));
            }
        }
        for b in &self.benchmarks {
            if b.nominal_cycles == 0 {
                return Err(Error::InvalidDesign(format!("benchmark `{}` has zero nominal cycles", b.name)));
            }
        }
        Ok(())
    }

    pub fn flip_flop(&self, id: FfId) -> Option<&FlipFlop> {
        self.flip_flops.iter().find(|f| f.id == id)
    }

    pub fn index(&self) -> HashMap<FfId, usize> {
        self.flip_flops.iter().enumerate().map(|(i, f)| (f.id, i)).collect()
    }

    pub fn benchmark(&self, name: &str) -> Option<&Benchmark> {
        self.benchmarks.iter().find(|b| b.name == name)
    }

    pub fn total_area_weight(&self) -> f64 {
        self.flip_flops.iter().map(|f| f.area_weight).sum()
    }

    pub fn total_power_weight(&self) -> f64 {
        self.flip_flops.iter().map(|f| f.power_weight).sum()
    }
}

/// Outcome tallies for one flip-flop on one benchmark. Real-valued so that
/// protection transforms can carry expected counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub vanished: f64,
    pub omm: f64,
    pub ut: f64,
    pub hang: f64,
    pub ed: f64,
}

impl OutcomeCounts {
    pub fn new(vanished: f64, omm: f64, ut: f64, hang: f64, ed: f64) -> Self {
        Self { vanished, omm, ut, hang, ed }
    }

    pub fn total(&self) -> f64 {
        self.vanished + self.omm + self.ut + self.hang + self.ed
    }

    /// SDC-causing count.
    pub fn sdc(&self) -> f64 {
        self.omm
    }

    /// DUE-causing count including detected errors.
    pub fn due(&self) -> f64 {
        self.ut + self.hang + self.ed
    }

    /// Outcomes that are neither vanished nor detected.
    pub fn harmful(&self) -> f64 {
        self.omm + self.ut + self.hang
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.vanished * k, self.omm * k, self.ut * k, self.hang * k, self.ed * k)
    }

    pub fn is_nonnegative(&self) -> bool {
        [self.vanished, self.omm, self.ut, self.hang, self.ed].iter().all(|v| *v >= 0.0)
    }
}

impl Add for OutcomeCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(self.vanished + o.vanished, self.omm + o.omm, self.ut + o.ut, self.hang + o.hang, self.ed + o.ed)
    }
}

impl AddAssign for OutcomeCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for OutcomeCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Which outcomes a ranking or target refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Sdc,
    Due,
    #[serde(rename = "sdc+due")]
    Combined,
}

impl Metric {
    /// Raw vulnerability used for ranking: OMM for SDC, UT+Hang for DUE.
    pub fn vulnerability(self, c: &OutcomeCounts) -> f64 {
        match self {
            Metric::Sdc => c.omm,
            Metric::Due => c.ut + c.hang,
            Metric::Combined => c.omm + c.ut + c.hang,
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sdc" => Ok(Metric::Sdc),
            "due" => Ok(Metric::Due),
            "sdc+due" | "combined" | "joint" => Ok(Metric::Combined),
            other => Err(Error::UnknownMetric(other.to_string())),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Sdc => "sdc",
            Metric::Due => "due",
            Metric::Combined => "sdc+due",
        })
    }
}

/// Per-benchmark slice of a profile; `counts` is aligned with the profile's
/// `ff_ids`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCounts {
    pub benchmark: String,
    pub injection_total: f64,
    pub counts: Vec<OutcomeCounts>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VulnerabilityProfile {
    pub ff_ids: Vec<FfId>,
    pub benchmarks: Vec<BenchmarkCounts>,
}

impl VulnerabilityProfile {
    pub fn new(ff_ids: Vec<FfId>) -> Self {
        Self { ff_ids, benchmarks: Vec::new() }
    }

    pub fn push_benchmark(&mut self, benchmark: impl Into<String>, counts: Vec<OutcomeCounts>) -> Result<()> {
        if counts.len() != self.ff_ids.len() {
            return Err(Error::InvalidProfile(format!(
                "benchmark has {} entries for {} flip-flops",
                counts.len(),
                self.ff_ids.len()
            )));
        }
        let injection_total = counts.iter().map(OutcomeCounts::total).sum();
        self.benchmarks.push(BenchmarkCounts { benchmark: benchmark.into(), injection_total, counts });
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for id in &self.ff_ids {
            if !seen.insert(*id) {
                return Err(Error::InvalidProfile(format!("duplicate flip-flop {id}")));
            }
        }
        for b in &self.benchmarks {
            if b.counts.len() != self.ff_ids.len() {
                return Err(Error::InvalidProfile(format!("benchmark `{}` is misaligned", b.benchmark)));
            }
            if let Some(i) = b.counts.iter().position(|c| !c.is_nonnegative()) {
                return Err(Error::InvalidProfile(format!(
                    "negative count for {} on `{}`",
                    self.ff_ids[i], b.benchmark
                )));
            }
        }
        Ok(())
    }

    pub fn benchmark_names(&self) -> Vec<&str> {
        self.benchmarks.iter().map(|b| b.benchmark.as_str()).collect()
    }

    /// Per-flip-flop counts summed over all benchmarks.
    pub fn aggregate(&self) -> Vec<OutcomeCounts> {
        let mut acc = vec![OutcomeCounts::default(); self.ff_ids.len()];
        for b in &self.benchmarks {
            for (a, c) in acc.iter_mut().zip(&b.counts) {
                *a += *c;
            }
        }
        acc
    }

    /// Design-wide counts summed over flip-flops and benchmarks.
    pub fn totals(&self) -> OutcomeCounts {
        self.aggregate().into_iter().sum()
    }

    /// Restricts the profile to the named benchmarks, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let benchmarks = names
            .iter()
            .map(|n| {
                self.benchmarks
                    .iter()
                    .find(|b| b.benchmark == *n)
                    .cloned()
                    .ok_or_else(|| Error::InvalidProfile(format!("unknown benchmark `{n}`")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { ff_ids: self.ff_ids.clone(), benchmarks })
    }

    /// Scales every flip-flop's counts by its susceptibility weight.
    pub fn weighted_by(&self, design: &DesignModel) -> Result<Self> {
        let idx = design.index();
        let weights = self
            .ff_ids
            .iter()
            .map(|id| {
                idx.get(id)
                    .map(|&i| design.flip_flops[i].susceptibility)
                    .ok_or_else(|| Error::InvalidProfile(format!("{id} not in design")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = self.clone();
        for b in &mut out.benchmarks {
            for (c, w) in b.counts.iter_mut().zip(&weights) {
                *c = c.scaled(*w);
            }
            b.injection_total = b.counts.iter().map(OutcomeCounts::total).sum();
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["ff_id", "benchmark", "vanished", "omm", "ut", "hang", "ed"])?;
        for b in &self.benchmarks {
            for (id, c) in self.ff_ids.iter().zip(&b.counts) {
                wtr.write_record([
                    id.0.to_string(),
                    b.benchmark.clone(),
                    c.vanished.to_string(),
                    c.omm.to_string(),
                    c.ut.to_string(),
                    c.hang.to_string(),
                    c.ed.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the CSV form. Flip-flop and benchmark order follow first
    /// appearance; missing (ff, benchmark) rows count as zero.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            ff_id: u32,
            benchmark: String,
            vanished: f64,
            omm: f64,
            ut: f64,
            hang: f64,
            ed: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let mut ff_ids: Vec<FfId> = Vec::new();
        let mut ff_pos: HashMap<FfId, usize> = HashMap::new();
        let mut benches: Vec<(String, Vec<(usize, OutcomeCounts)>)> = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            let id = FfId(row.ff_id);
            let fi = *ff_pos.entry(id).or_insert_with(|| {
                ff_ids.push(id);
                ff_ids.len() - 1
            });
            let bi = match benches.iter().position(|(n, _)| *n == row.benchmark) {
                Some(i) => i,
                None => {
                    benches.push((row.benchmark.clone(), Vec::new()));
                    benches.len() - 1
                }
            };
            benches[bi].1.push((fi, OutcomeCounts::new(row.vanished, row.omm, row.ut, row.hang, row.ed)));
        }
        let mut profile = Self::new(ff_ids);
        for (name, rows) in benches {
            let mut counts = vec![OutcomeCounts::default(); profile.ff_ids.len()];
            for (fi, c) in rows {
                counts[fi] += c;
            }
            profile.push_benchmark(name, counts)?;
        }
        profile.validate()?;
        Ok(profile)
    }
}

/// Flip-flops whose upsets never produced OMM, UT or Hang on any benchmark.
pub fn always_vanish_set(profile: &VulnerabilityProfile) -> Result<BTreeSet<FfId>> {
    if profile.benchmarks.is_empty() || profile.ff_ids.is_empty() {
        return Err(Error::NoCampaignData);
    }
    Ok(profile
        .ff_ids
        .iter()
        .zip(profile.aggregate())
        .filter(|(_, c)| c.omm == 0.0 && c.ut == 0.0 && c.hang == 0.0)
        .map(|(id, _)| *id)
        .collect())
}

/// Flip-flops ordered by descending vulnerability summed over benchmarks.
/// Ties go to the cheaper flip-flop (area weight), then the lower id.
pub fn vulnerability_rank(profile: &VulnerabilityProfile, metric: Metric, design: Option<&DesignModel>) -> Vec<FfId> {
    let agg = profile.aggregate();
    let area: HashMap<FfId, f64> =
        design.map(|d| d.flip_flops.iter().map(|f| (f.id, f.area_weight)).collect()).unwrap_or_default();
    let mut order: Vec<(FfId, f64, f64)> = profile
        .ff_ids
        .iter()
        .zip(&agg)
        .map(|(id, c)| (*id, metric.vulnerability(c), area.get(id).copied().unwrap_or(1.0)))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.2.total_cmp(&b.2)).then_with(|| a.0.cmp(&b.0)));
    order.into_iter().map(|(id, _, _)| id).collect()
}
