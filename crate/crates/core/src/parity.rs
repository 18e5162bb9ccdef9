//! Parity group formation, minimum-spacing repair and XOR-tree cost.
//!
//! Grouping heuristics only decide membership order; [`plan_parity`] runs the
//! heuristic, repairs spacing and recomputes each group's pipelining flag.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::catalog::ParitySpec;
use crate::error::{Error, Result};
use crate::model::{DesignModel, FfId, FlipFlop, Position};

/// Minimum same-checker spacing, in flip-flop lengths.
pub const MIN_SPACING: f64 = 1.0;

/// Slack (in 32-bit XOR-tree delays) below which the predictor tree must be pipelined.
pub const PIPELINE_SLACK: f64 = 1.0;

const MAX_REPAIR_PASSES: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityGroup {
    pub members: Vec<FfId>,
    pub pipelined: bool,
    pub group_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "k", rename_all = "lowercase")]
pub enum Heuristic {
    Size(usize),
    Vulnerability(usize),
    Locality(usize),
    Timing(usize),
    Optimized,
}

impl std::fmt::Display for Heuristic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Heuristic::Size(k) => write!(f, "size({k})"),
            Heuristic::Vulnerability(k) => write!(f, "vulnerability({k})"),
            Heuristic::Locality(k) => write!(f, "locality({k})"),
            Heuristic::Timing(k) => write!(f, "timing({k})"),
            Heuristic::Optimized => write!(f, "optimized"),
        }
    }
}

impl std::str::FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "optimized" {
            return Ok(Heuristic::Optimized);
        }
        let (name, k) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("heuristic `{s}`: expected name:k or optimized")))?;
        let k: usize = k.parse().map_err(|_| Error::InvalidArgument(format!("bad group size in `{s}`")))?;
        match name {
            "size" => Ok(Heuristic::Size(k)),
            "vulnerability" => Ok(Heuristic::Vulnerability(k)),
            "locality" => Ok(Heuristic::Locality(k)),
            "timing" => Ok(Heuristic::Timing(k)),
            _ => Err(Error::InvalidArgument(format!("unknown heuristic `{name}`"))),
        }
    }
}

/// Serialized grouping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityGrouping {
    pub heuristic: String,
    pub groups: Vec<ParityGroup>,
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 || !k.is_power_of_two() {
        return Err(Error::GroupSizeNotPowerOfTwo(k));
    }
    Ok(())
}

fn needs_pipeline(ffs: &[&FlipFlop]) -> bool {
    ffs.iter().any(|f| f.timing_slack < PIPELINE_SLACK)
}

fn chunk(order: &[&FlipFlop], k: usize) -> Vec<ParityGroup> {
    order
        .chunks(k)
        .map(|c| ParityGroup { members: c.iter().map(|f| f.id).collect(), pipelined: needs_pipeline(c), group_size: k })
        .collect()
}

pub fn group_by_size(ffs: &[FlipFlop], k: usize) -> Result<Vec<ParityGroup>> {
    check_k(k)?;
    Ok(chunk(&ffs.iter().collect::<Vec<_>>(), k))
}

/// Consecutive chunks of the vulnerability rank. FFs missing from `rank`
/// trail in input order.
pub fn group_by_vulnerability(ffs: &[FlipFlop], rank: &[FfId], k: usize) -> Result<Vec<ParityGroup>> {
    check_k(k)?;
    let pos: HashMap<FfId, usize> = rank.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut order: Vec<(usize, &FlipFlop)> = ffs.iter().enumerate().collect();
    order.sort_by_key(|(i, f)| pos.get(&f.id).map_or((1, *i), |&r| (0, r)));
    Ok(chunk(&order.into_iter().map(|(_, f)| f).collect::<Vec<_>>(), k))
}

/// Clusters by functional-unit tag when present, else by 8x8 grid cell, then
/// by position inside the cluster.
pub fn group_by_locality(ffs: &[FlipFlop], k: usize) -> Result<Vec<ParityGroup>> {
    check_k(k)?;
    let key = |f: &FlipFlop| match &f.unit {
        Some(u) => (0, u.clone(), 0i64, 0i64),
        None => (1, String::new(), (f.position.y / 8.0).floor() as i64, (f.position.x / 8.0).floor() as i64),
    };
    let mut order: Vec<&FlipFlop> = ffs.iter().collect();
    order.sort_by(|a, b| {
        key(a)
            .cmp(&key(b))
            .then(a.position.y.total_cmp(&b.position.y))
            .then(a.position.x.total_cmp(&b.position.x))
            .then(a.id.cmp(&b.id))
    });
    Ok(chunk(&order, k))
}

/// Chunks by descending slack so pipelined members cluster together.
pub fn group_by_timing(ffs: &[FlipFlop], k: usize) -> Result<Vec<ParityGroup>> {
    check_k(k)?;
    let mut order: Vec<&FlipFlop> = ffs.iter().collect();
    order.sort_by(|a, b| b.timing_slack.total_cmp(&a.timing_slack).then(a.id.cmp(&b.id)));
    Ok(chunk(&order, k))
}

/// Slack ≥ 1 FFs in unpipelined groups of the spec's large size, the rest in
/// pipelined groups of the small size.
pub fn group_optimized(ffs: &[FlipFlop], spec: &ParitySpec) -> Vec<ParityGroup> {
    let (fast, slow): (Vec<&FlipFlop>, Vec<&FlipFlop>) = ffs.iter().partition(|f| f.timing_slack >= PIPELINE_SLACK);
    let mut groups = chunk(&fast, spec.unpipelined_group_size);
    groups.extend(chunk(&slow, spec.pipelined_group_size));
    groups
}

/// Runs a heuristic and repairs spacing.
pub fn plan_parity(
    ffs: &[FlipFlop],
    heuristic: Heuristic,
    rank: &[FfId],
    spec: &ParitySpec,
) -> Result<Vec<ParityGroup>> {
    let groups = match heuristic {
        Heuristic::Size(k) => group_by_size(ffs, k)?,
        Heuristic::Vulnerability(k) => group_by_vulnerability(ffs, rank, k)?,
        Heuristic::Locality(k) => group_by_locality(ffs, k)?,
        Heuristic::Timing(k) => group_by_timing(ffs, k)?,
        Heuristic::Optimized => group_optimized(ffs, spec),
    };
    enforce_min_spacing(groups, ffs)
}

struct Lookup<'a>(HashMap<FfId, &'a FlipFlop>);

impl<'a> Lookup<'a> {
    fn new(ffs: &'a [FlipFlop]) -> Self {
        Self(ffs.iter().map(|f| (f.id, f)).collect())
    }

    fn get(&self, id: FfId) -> Result<&'a FlipFlop> {
        self.0.get(&id).copied().ok_or_else(|| Error::InvalidArgument(format!("{id} has no position")))
    }

    fn pos(&self, id: FfId) -> Position {
        self.0[&id].position
    }

    fn slow(&self, id: FfId) -> bool {
        self.0[&id].timing_slack < PIPELINE_SLACK
    }

    /// Whether `id` keeps the minimum spacing to every member except `skip`.
    fn fits(&self, id: FfId, members: &[FfId], skip: FfId) -> bool {
        let p = self.pos(id);
        members.iter().all(|&m| m == skip || m == id || p.distance(&self.pos(m)) >= MIN_SPACING)
    }
}

fn violations(groups: &[ParityGroup], look: &Lookup) -> Vec<(usize, FfId, FfId)> {
    let mut out = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        for (i, &a) in group.members.iter().enumerate() {
            for &b in &group.members[i + 1..] {
                if look.pos(a).distance(&look.pos(b)) < MIN_SPACING {
                    out.push((g, a, b));
                }
            }
        }
    }
    out
}

/// Greedy pairwise swaps between groups until no two members of a group sit
/// closer than one flip-flop length. Group sizes are preserved; swaps that
/// keep both groups' pipelining unchanged are preferred.
pub fn enforce_min_spacing(mut groups: Vec<ParityGroup>, ffs: &[FlipFlop]) -> Result<Vec<ParityGroup>> {
    let look = Lookup::new(ffs);
    for g in &groups {
        for &m in &g.members {
            look.get(m)?;
        }
    }
    for _ in 0..MAX_REPAIR_PASSES {
        let bad = violations(&groups, &look);
        if bad.is_empty() {
            break;
        }
        let mut swapped = false;
        for (g, a, b) in bad {
            // An earlier swap this pass may have already separated the pair.
            if !groups[g].members.contains(&a) || !groups[g].members.contains(&b) {
                continue;
            }
            if look.pos(a).distance(&look.pos(b)) >= MIN_SPACING {
                continue;
            }
            if let Some((h, c)) = find_swap(&groups, g, b, &look) {
                let bi = groups[g].members.iter().position(|&m| m == b).unwrap();
                let ci = groups[h].members.iter().position(|&m| m == c).unwrap();
                groups[g].members[bi] = c;
                groups[h].members[ci] = b;
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    let bad = violations(&groups, &look);
    if !bad.is_empty() {
        return Err(Error::SpacingInfeasible { pairs: bad.into_iter().map(|(_, a, b)| (a.0, b.0)).collect() });
    }
    for g in &mut groups {
        g.pipelined = g.members.iter().any(|&m| look.slow(m));
    }
    Ok(groups)
}

fn find_swap(groups: &[ParityGroup], g: usize, b: FfId, look: &Lookup) -> Option<(usize, FfId)> {
    let mut fallback = None;
    for (h, other) in groups.iter().enumerate() {
        if h == g {
            continue;
        }
        for &c in &other.members {
            if look.fits(b, &other.members, c) && look.fits(c, &groups[g].members, b) {
                if look.slow(b) == look.slow(c) {
                    return Some((h, c));
                }
                fallback.get_or_insert((h, c));
            }
        }
    }
    fallback
}

/// First-fit packing that never violates spacing: each FF joins the first
/// group of its pipelining class with room and clearance, else opens one.
pub fn group_first_fit(ffs: &[FlipFlop], spec: &ParitySpec) -> Vec<ParityGroup> {
    let mut groups: Vec<(ParityGroup, Vec<Position>)> = Vec::new();
    for f in ffs {
        let slow = f.timing_slack < PIPELINE_SLACK;
        let k = if slow { spec.pipelined_group_size } else { spec.unpipelined_group_size };
        let slot = groups.iter_mut().find(|(g, pos)| {
            g.pipelined == slow && g.members.len() < k && pos.iter().all(|p| p.distance(&f.position) >= MIN_SPACING)
        });
        match slot {
            Some((g, pos)) => {
                g.members.push(f.id);
                pos.push(f.position);
            }
            None => {
                groups.push((ParityGroup { members: vec![f.id], pipelined: slow, group_size: k }, vec![f.position]))
            }
        }
    }
    groups.into_iter().map(|(g, _)| g).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParityCost {
    pub xor_units: f64,
    pub checker_units: f64,
    pub extra_ffs: f64,
    pub area_pct: f64,
    pub power_pct: f64,
}

/// Pipeline FFs a group of `s` members needs: one per fan-in chunk, plus
/// staging FFs for members beyond the threshold.
pub fn pipeline_ffs(s: usize, spec: &ParitySpec) -> usize {
    s.div_ceil(spec.pipeline_fanin) + s.saturating_sub(spec.staging_threshold)
}

/// Predictor plus checker XOR trees cost `2(s − 1)` gates per group.
pub fn parity_cost(groups: &[ParityGroup], design: &DesignModel, spec: &ParitySpec) -> ParityCost {
    let mut c = ParityCost::default();
    for g in groups.iter().filter(|g| !g.members.is_empty()) {
        let s = g.members.len();
        c.xor_units += 2.0 * (s as f64 - 1.0);
        c.checker_units += spec.checker_overhead_units;
        if g.pipelined {
            c.extra_ffs += pipeline_ffs(s, spec) as f64;
        }
    }
    if c.xor_units + c.checker_units + c.extra_ffs == 0.0 {
        return c;
    }
    let logic = c.xor_units + c.checker_units;
    c.area_pct = 100.0 * design.ff_area_fraction * (logic * spec.xor_area + c.extra_ffs) / design.total_area_weight();
    c.power_pct =
        100.0 * design.ff_power_fraction * (logic * spec.xor_power + c.extra_ffs) / design.total_power_weight();
    c
}

pub const SPACING_LABELS: [&str; 5] = [
    "< 1 flip-flop length",
    "1 - 2 flip-flop lengths",
    "2 - 3 flip-flop lengths",
    "3 - 4 flip-flop lengths",
    "> 4 flip-flop lengths",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingHistogram {
    pub buckets: [usize; 5],
    pub mean: f64,
}

impl SpacingHistogram {
    pub fn count(&self) -> usize {
        self.buckets.iter().sum()
    }

    pub fn fraction(&self, bucket: usize) -> f64 {
        self.buckets[bucket] as f64 / self.count() as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["distance", "count", "fraction"])?;
        for (i, label) in SPACING_LABELS.iter().enumerate() {
            out.write_record([label.to_string(), self.buckets[i].to_string(), format!("{:.6}", self.fraction(i))])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn spacing_bucket(d: f64) -> usize {
    (d.max(0.0).floor() as usize).min(4)
}

/// Nearest-neighbor spacing over all FFs, or over same-group neighbors when a
/// grouping is given (singleton groups have no neighbor and are skipped).
pub fn spacing_histogram(ffs: &[FlipFlop], grouping: Option<&[ParityGroup]>) -> Result<SpacingHistogram> {
    let pos: HashMap<FfId, Position> = ffs.iter().map(|f| (f.id, f.position)).collect();
    let sets: Vec<Vec<Position>> = match grouping {
        None => vec![ffs.iter().map(|f| f.position).collect()],
        Some(groups) => groups
            .iter()
            .map(|g| {
                g.members
                    .iter()
                    .map(|m| pos.get(m).copied().ok_or_else(|| Error::InvalidArgument(format!("{m} has no position"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?,
    };
    let mut buckets = [0usize; 5];
    let mut sum = 0.0;
    for set in sets.iter().filter(|s| s.len() >= 2) {
        for (i, p) in set.iter().enumerate() {
            let d = set
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| p.distance(q))
                .fold(f64::INFINITY, f64::min);
            buckets[spacing_bucket(d)] += 1;
            sum += d;
        }
    }
    let n: usize = buckets.iter().sum();
    if n < 2 {
        return Err(Error::InvalidArgument("spacing histogram needs at least 2 flip-flops".into()));
    }
    Ok(SpacingHistogram { buckets, mean: sum / n as f64 })
}
