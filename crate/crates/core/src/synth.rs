//! Synthetic designs and vulnerability profiles.
//!
//! Layouts are built from small collinear clusters (pairs and chains) placed
//! on a coarse grid, so each FF's nearest neighbor is inside its own cluster
//! and the nearest-neighbor histogram follows the requested bucket fractions.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Benchmark, DesignModel, FfId, FlipFlop, OutcomeCounts, Position, Stage, VulnerabilityProfile};

/// Cluster pitch; larger than any in-cluster extent plus the widest bucket.
const PITCH: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    InoLike,
    OooLike,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ino-like" | "ino" => Ok(Preset::InoLike),
            "ooo-like" | "ooo" => Ok(Preset::OooLike),
            _ => Err(Error::InvalidArgument(format!("unknown preset `{s}` (expected ino-like or ooo-like)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    pub name: String,
    pub ff_count: usize,
    /// Nearest-neighbor fractions for buckets <1, 1-2, 2-3, 3-4, >4.
    pub adjacency: [f64; 5],
    /// Relative weights over `Stage::ALL`.
    pub stage_weights: [f64; 6],
    /// Fraction of FFs with slack >= 1 (room for a 32-bit XOR tree).
    pub fast_fraction: f64,
    pub benchmarks: usize,
    /// The first `abft_benchmarks` benchmarks are tagged ABFT-compatible.
    pub abft_benchmarks: usize,
    pub ff_area_fraction: f64,
    pub ff_power_fraction: f64,
    pub seed: u64,
}

impl DesignParams {
    pub fn preset(preset: Preset, ff_count: usize, seed: u64) -> Self {
        match preset {
            Preset::InoLike => Self {
                name: "ino-like".into(),
                ff_count,
                adjacency: [0.652, 0.300, 0.037, 0.006, 0.005],
                stage_weights: [0.15, 0.2, 0.3, 0.15, 0.1, 0.1],
                fast_fraction: 0.6,
                benchmarks: 8,
                abft_benchmarks: 3,
                ff_area_fraction: 0.25,
                ff_power_fraction: 0.35,
                seed,
            },
            Preset::OooLike => Self {
                name: "ooo-like".into(),
                ff_count,
                adjacency: [0.422, 0.306, 0.184, 0.035, 0.053],
                stage_weights: [0.2, 0.2, 0.25, 0.15, 0.1, 0.1],
                fast_fraction: 0.45,
                benchmarks: 8,
                abft_benchmarks: 3,
                ff_area_fraction: 0.2,
                ff_power_fraction: 0.3,
                seed,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.ff_count < 2 {
            return bad(format!("ff_count must be at least 2, got {}", self.ff_count));
        }
        let sum: f64 = self.adjacency.iter().sum();
        if self.adjacency.iter().any(|f| !(*f >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            return bad(format!("adjacency fractions must be nonnegative and sum to 1, got {sum}"));
        }
        if self.stage_weights.iter().any(|w| !(*w >= 0.0)) || self.stage_weights.iter().sum::<f64>() <= 0.0 {
            return bad("stage weights must be nonnegative with a positive sum".into());
        }
        if !(0.0..=1.0).contains(&self.fast_fraction) {
            return bad(format!("fast_fraction must be in [0,1], got {}", self.fast_fraction));
        }
        if self.benchmarks == 0 || self.abft_benchmarks > self.benchmarks {
            return bad("need at least one benchmark and abft_benchmarks <= benchmarks".into());
        }
        Ok(())
    }
}

/// Largest-remainder rounding of `fractions × n`.
fn apportion(fractions: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut out: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut rest: Vec<usize> = (0..raw.len()).collect();
    rest.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let short = n - out.iter().sum::<usize>();
    for &i in rest.iter().take(short) {
        out[i] += 1;
    }
    out
}

fn spacing(rng: &mut ChaCha8Rng, bucket: usize) -> f64 {
    match bucket {
        0 => rng.random_range(0.3..0.95),
        4 => rng.random_range(4.2..6.0),
        b => b as f64 + rng.random_range(0.05..0.95),
    }
}

/// Collinear clusters as lists of gaps. Every FF in a cluster with gaps
/// `[g0, g1, ...]` sorted ascending has its nearest neighbor at the smaller of
/// its adjacent gaps.
fn clusters(counts: &[usize], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut tails: Vec<usize> = Vec::new();
    for (b, &c) in counts.iter().enumerate() {
        let mut c = c;
        if b > 0 && c % 2 == 1 {
            tails.push(b);
            c -= 1;
        }
        if b == 0 && c % 2 == 1 && c >= 3 {
            out.push(vec![spacing(rng, 0); 2]);
            c -= 3;
        }
        for _ in 0..c / 2 {
            let d = spacing(rng, b);
            out.push(vec![d]);
        }
        if b == 0 && c % 2 == 1 {
            tails.push(0);
        }
    }
    // A tail FF sits past the end of a cluster with a smaller gap.
    for b in tails {
        let host = out.iter_mut().filter(|g| g.len() == 1 && g[0] < b as f64).last();
        match host {
            Some(g) => g.push(spacing(rng, b)),
            None => out.push(vec![spacing(rng, b)]),
        }
    }
    out
}

/// Seeded synthetic design.
pub fn generate_design(params: &DesignParams) -> Result<DesignModel> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let counts = apportion(&params.adjacency, params.ff_count);
    let mut groups = clusters(&counts, &mut rng);
    groups.shuffle(&mut rng);
    let cols = (groups.len() as f64).sqrt().ceil().max(1.0) as usize;
    let mut positions: Vec<Position> = Vec::with_capacity(params.ff_count);
    for (k, gaps) in groups.iter().enumerate() {
        let (cx, cy) = ((k % cols) as f64 * PITCH, (k / cols) as f64 * PITCH);
        let vertical = rng.random_bool(0.5);
        let mut t = 0.0;
        for g in std::iter::once(0.0).chain(gaps.iter().copied()) {
            t += g;
            positions.push(if vertical { Position::new(cx, cy + t) } else { Position::new(cx + t, cy) });
        }
    }
    positions.truncate(params.ff_count);
    let wsum: f64 = params.stage_weights.iter().sum();
    let flip_flops = positions
        .into_iter()
        .enumerate()
        .map(|(i, pos)| {
            let mut u = rng.random_range(0.0..wsum);
            let mut stage = Stage::ALL[Stage::ALL.len() - 1];
            for (s, w) in Stage::ALL.iter().zip(params.stage_weights) {
                if u < w {
                    stage = *s;
                    break;
                }
                u -= w;
            }
            let slack = if rng.random_bool(params.fast_fraction) {
                rng.random_range(1.0..3.0)
            } else {
                rng.random_range(0.0..1.0)
            };
            FlipFlop::new(i as u32, stage, pos, slack).with_name(format!("ff{i}"))
        })
        .collect();
    let design = DesignModel {
        name: params.name.clone(),
        flip_flops,
        ff_area_fraction: params.ff_area_fraction,
        ff_power_fraction: params.ff_power_fraction,
        benchmarks: (0..params.benchmarks)
            .map(|b| Benchmark {
                name: format!("bench{b:02}"),
                nominal_cycles: 1000 + 250 * b as u64,
                abft_compatible: b < params.abft_benchmarks,
            })
            .collect(),
    };
    design.validate()?;
    Ok(design)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapParams {
    /// Injections per FF per benchmark.
    pub injections: u64,
    /// Size of each benchmark's hot slice as a fraction of the FFs.
    pub hot_fraction: f64,
    /// Share of each hot slice common to every benchmark.
    pub hot_overlap: f64,
    /// Always-vanish FFs planted at random.
    pub dead: usize,
    /// Probability a warm FF is silent in a given benchmark.
    pub tail_sparsity: f64,
    /// Harmful-outcome rate ranges per injection.
    pub shared_rate: (f64, f64),
    pub extra_rate: (f64, f64),
    pub warm_rate: (f64, f64),
    pub seed: u64,
}

impl OverlapParams {
    pub fn new(seed: u64) -> Self {
        Self {
            injections: 10_000,
            hot_fraction: 0.1,
            hot_overlap: 0.8,
            dead: 0,
            tail_sparsity: 0.05,
            shared_rate: (0.3, 0.5),
            extra_rate: (0.03, 0.06),
            warm_rate: (0.002, 0.012),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticProfile {
    pub profile: VulnerabilityProfile,
    pub dead: BTreeSet<FfId>,
    /// FFs in every benchmark's hot slice.
    pub shared_hot: BTreeSet<FfId>,
}

fn split_counts(rng: &mut ChaCha8Rng, injections: u64, rate: f64) -> OutcomeCounts {
    let harmful = (rate * injections as f64).round().min(injections as f64);
    let omm = (harmful * rng.random_range(0.4..0.8)).round();
    let ut = ((harmful - omm) * rng.random_range(0.5..0.9)).round();
    let hang = harmful - omm - ut;
    OutcomeCounts::new(injections as f64 - harmful, omm, ut, hang, 0.0)
}

/// Integer-count profile over `design.benchmarks` with a shared hot core,
/// benchmark-specific hot extras, noisy warm tails and planted dead FFs.
pub fn controlled_overlap_profile(design: &DesignModel, params: &OverlapParams) -> Result<SyntheticProfile> {
    let n = design.flip_flops.len();
    if params.dead >= n {
        return Err(Error::InvalidArgument(format!("cannot plant {} dead FFs in {n}", params.dead)));
    }
    if !(0.0..=1.0).contains(&params.hot_fraction) || !(0.0..=1.0).contains(&params.hot_overlap) {
        return Err(Error::InvalidArgument("hot fraction and overlap must be in [0,1]".into()));
    }
    for (lo, hi) in [params.shared_rate, params.extra_rate, params.warm_rate] {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidArgument(format!("rate range ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut ids: Vec<FfId> = design.flip_flops.iter().map(|f| f.id).collect();
    ids.shuffle(&mut rng);
    let dead: BTreeSet<FfId> = ids[..params.dead].iter().copied().collect();
    let live = &ids[params.dead..];
    let hot = ((params.hot_fraction * n as f64).round() as usize).min(live.len());
    let shared = ((params.hot_overlap * hot as f64).round() as usize).min(hot);
    let shared_hot: BTreeSet<FfId> = live[..shared].iter().copied().collect();
    let warm = &live[shared..];
    let base_warm: Vec<f64> = warm.iter().map(|_| rng.random_range(params.warm_rate.0..params.warm_rate.1)).collect();

    let order: Vec<FfId> = design.flip_flops.iter().map(|f| f.id).collect();
    let mut profile = VulnerabilityProfile::new(order.clone());
    for b in &design.benchmarks {
        let mut extra: Vec<usize> = (0..warm.len()).collect();
        extra.shuffle(&mut rng);
        let extra: BTreeSet<usize> = extra.into_iter().take(hot - shared).collect();
        let mut rate = std::collections::HashMap::new();
        for id in &shared_hot {
            rate.insert(*id, rng.random_range(params.shared_rate.0..params.shared_rate.1));
        }
        for (k, id) in warm.iter().enumerate() {
            let r = if extra.contains(&k) {
                rng.random_range(params.extra_rate.0..params.extra_rate.1)
            } else if rng.random_bool(params.tail_sparsity) {
                0.0
            } else {
                base_warm[k] * rng.random_range(0.5..1.5)
            };
            rate.insert(*id, r);
        }
        let counts = order
            .iter()
            .map(|id| split_counts(&mut rng, params.injections, rate.get(id).copied().unwrap_or(0.0)))
            .collect();
        profile.push_benchmark(b.name.clone(), counts)?;
    }
    Ok(SyntheticProfile { profile, dead, shared_hot })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::always_vanish_set;
    use crate::parity::spacing_histogram;

    #[test]
    fn apportion_sums() {
        assert_eq!(apportion(&[0.652, 0.3, 0.037, 0.006, 0.005], 1000), vec![652, 300, 37, 6, 5]);
        assert_eq!(apportion(&[0.5, 0.5], 3).iter().sum::<usize>(), 3);
    }

    #[test]
    fn presets_hit_adjacency() {
        for (preset, lt1) in [(Preset::InoLike, 0.652), (Preset::OooLike, 0.422)] {
            let d = generate_design(&DesignParams::preset(preset, 1000, 3)).unwrap();
            let h = spacing_histogram(&d.flip_flops, None).unwrap();
            assert!((h.fraction(0) - lt1).abs() <= 0.03, "{preset:?}: {}", h.fraction(0));
        }
    }

    #[test]
    fn minimal_design_is_valid() {
        for n in 2..12 {
            let d = generate_design(&DesignParams::preset(Preset::InoLike, n, 1)).unwrap();
            assert_eq!(d.flip_flops.len(), n);
        }
        assert!(generate_design(&DesignParams::preset(Preset::InoLike, 1, 1)).is_err());
    }

    #[test]
    fn same_seed_same_design() {
        let p = DesignParams::preset(Preset::OooLike, 200, 9);
        assert_eq!(generate_design(&p).unwrap(), generate_design(&p).unwrap());
    }

    #[test]
    fn dead_ffs_are_exactly_planted() {
        let d = generate_design(&DesignParams::preset(Preset::InoLike, 20, 5)).unwrap();
        let s = controlled_overlap_profile(&d, &OverlapParams { dead: 4, tail_sparsity: 0.0, ..OverlapParams::new(2) })
            .unwrap();
        assert_eq!(always_vanish_set(&s.profile).unwrap(), s.dead);
        assert_eq!(s.dead.len(), 4);
    }
}
