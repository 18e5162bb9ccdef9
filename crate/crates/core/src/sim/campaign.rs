//! Golden runs, single-bit injections and injection campaigns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::isa::ToyProgram;
use super::pipeline::{locate_bit, Machine, Step, Trap, FIELDS, TOTAL_BITS};
use crate::error::{Error, Result};
use crate::model::{FfId, OutcomeCounts, VulnerabilityProfile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Data memory size in 16-bit words.
    pub mem_words: usize,
    /// Cycle budget for the golden run.
    pub golden_cap: u64,
    /// Largest (bit, cycle) population an exhaustive campaign may visit.
    pub exhaustive_cap: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { mem_words: 256, golden_cap: 1_000_000, exhaustive_cap: 10_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenRun {
    pub output: Vec<u16>,
    pub nominal_cycles: u64,
}

/// One single-bit upset: flip `bit` after `cycle` cycles have completed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InjectionTarget {
    pub bit: usize,
    pub cycle: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Vanished,
    Omm,
    Ut,
    Hang,
}

impl OutcomeKind {
    pub const ALL: [OutcomeKind; 4] = [OutcomeKind::Vanished, OutcomeKind::Omm, OutcomeKind::Ut, OutcomeKind::Hang];

    fn tally(self, c: &mut OutcomeCounts) {
        match self {
            OutcomeKind::Vanished => c.vanished += 1.0,
            OutcomeKind::Omm => c.omm += 1.0,
            OutcomeKind::Ut => c.ut += 1.0,
            OutcomeKind::Hang => c.hang += 1.0,
        }
    }

    pub fn count_in(self, c: &OutcomeCounts) -> f64 {
        match self {
            OutcomeKind::Vanished => c.vanished,
            OutcomeKind::Omm => c.omm,
            OutcomeKind::Ut => c.ut,
            OutcomeKind::Hang => c.hang,
        }
    }
}

/// Where a faulty run departed from (or rejoined) the golden run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    /// Machine state matched the golden state again at this cycle.
    Reconverged {
        cycle: u64,
    },
    /// Halted normally with identical output.
    SameOutput,
    /// Halted normally; outputs first differ at this index.
    Output {
        first_mismatch: usize,
    },
    Trap(Trap),
    Timeout,
    /// The flip landed after the golden run had already halted.
    AfterCompletion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub kind: OutcomeKind,
    pub cycles: u64,
    pub divergence: Divergence,
}

/// Runs a program without faults until HALT commits.
pub fn run_golden(program: &ToyProgram, config: &SimConfig) -> Result<GoldenRun> {
    program.validate(config.mem_words)?;
    let mut m = Machine::reset(program, config.mem_words);
    while m.cycle < config.golden_cap {
        match m.step(program) {
            Step::Running => {}
            Step::Halted => return Ok(GoldenRun { output: m.output, nominal_cycles: m.cycle }),
            Step::Trapped(t) => {
                return Err(Error::InvalidProgram(format!("golden run traps at cycle {}: {t:?}", m.cycle)))
            }
        }
    }
    Err(Error::GoldenRunDiverges { cap: config.golden_cap })
}

/// Holds the golden trajectory of one program so that injections can start
/// from a snapshot and stop early once they rejoin it.
pub struct Injector<'a> {
    program: &'a ToyProgram,
    golden: GoldenRun,
    /// `snapshots[c]` is the state after `c` completed cycles.
    snapshots: Vec<Machine>,
}

impl<'a> Injector<'a> {
    pub fn new(program: &'a ToyProgram, config: &SimConfig) -> Result<Self> {
        let golden = run_golden(program, config)?;
        let mut m = Machine::reset(program, config.mem_words);
        let mut snapshots = Vec::with_capacity(golden.nominal_cycles as usize);
        while m.cycle < golden.nominal_cycles {
            snapshots.push(m.clone());
            m.step(program);
        }
        Ok(Self { program, golden, snapshots })
    }

    pub fn program(&self) -> &ToyProgram {
        self.program
    }

    pub fn golden(&self) -> &GoldenRun {
        &self.golden
    }

    pub fn bit_count(&self) -> usize {
        TOTAL_BITS
    }

    /// Injection cycles visited by campaigns: every cycle of the golden run.
    pub fn cycles(&self) -> u64 {
        self.golden.nominal_cycles
    }

    pub fn population(&self) -> u64 {
        TOTAL_BITS as u64 * self.cycles()
    }

    pub fn target_at(&self, index: u64) -> InjectionTarget {
        let bits = TOTAL_BITS as u64;
        InjectionTarget { bit: (index % bits) as usize, cycle: index / bits }
    }

    pub fn inject(&self, target: InjectionTarget) -> Result<Outcome> {
        let nominal = self.golden.nominal_cycles;
        let limit = 2 * nominal;
        if target.bit >= TOTAL_BITS || target.cycle >= limit {
            return Err(Error::TargetOutOfRange(format!(
                "bit {} of {TOTAL_BITS}, cycle {} of {limit}",
                target.bit, target.cycle
            )));
        }
        if target.cycle >= nominal {
            return Ok(Outcome {
                kind: OutcomeKind::Vanished,
                cycles: nominal,
                divergence: Divergence::AfterCompletion,
            });
        }
        let mut m = self.snapshots[target.cycle as usize].clone();
        m.flip(target.bit);
        loop {
            if let Some(g) = self.snapshots.get(m.cycle as usize) {
                if *g == m {
                    return Ok(Outcome {
                        kind: OutcomeKind::Vanished,
                        cycles: nominal,
                        divergence: Divergence::Reconverged { cycle: m.cycle },
                    });
                }
            }
            if m.cycle >= limit {
                return Ok(Outcome { kind: OutcomeKind::Hang, cycles: m.cycle, divergence: Divergence::Timeout });
            }
            match m.step(self.program) {
                Step::Running => {}
                Step::Halted => {
                    let golden = &self.golden.output;
                    let out = if m.output == *golden {
                        Outcome { kind: OutcomeKind::Vanished, cycles: m.cycle, divergence: Divergence::SameOutput }
                    } else {
                        let first = m
                            .output
                            .iter()
                            .zip(golden)
                            .position(|(a, b)| a != b)
                            .unwrap_or(m.output.len().min(golden.len()));
                        Outcome {
                            kind: OutcomeKind::Omm,
                            cycles: m.cycle,
                            divergence: Divergence::Output { first_mismatch: first },
                        }
                    };
                    return Ok(out);
                }
                Step::Trapped(t) => {
                    return Ok(Outcome { kind: OutcomeKind::Ut, cycles: m.cycle, divergence: Divergence::Trap(t) })
                }
            }
        }
    }

    /// Outcome of every (bit, cycle) pair, computed in parallel.
    pub fn outcome_table(&self, config: &SimConfig) -> Result<OutcomeTable> {
        let population = self.population();
        if population > config.exhaustive_cap {
            return Err(Error::ExhaustiveCapExceeded { pairs: population, cap: config.exhaustive_cap });
        }
        let kinds = (0..population)
            .into_par_iter()
            .map(|i| self.inject(self.target_at(i)).map(|o| o.kind))
            .collect::<Result<Vec<_>>>()?;
        Ok(OutcomeTable { program: self.program.name.clone(), bits: TOTAL_BITS, cycles: self.cycles(), kinds })
    }
}

/// Flattened outcomes of an exhaustive campaign, indexed by
/// `cycle * bits + bit`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeTable {
    pub program: String,
    pub bits: usize,
    pub cycles: u64,
    kinds: Vec<OutcomeKind>,
}

impl OutcomeTable {
    pub fn population(&self) -> u64 {
        self.kinds.len() as u64
    }

    pub fn kind(&self, index: u64) -> OutcomeKind {
        self.kinds[index as usize]
    }

    pub fn field_of(&self, index: u64) -> usize {
        locate_bit((index % self.bits as u64) as usize).expect("index within layout").0
    }

    pub fn profile(&self) -> VulnerabilityProfile {
        let mut counts = vec![OutcomeCounts::default(); FIELDS.len()];
        for (i, k) in self.kinds.iter().enumerate() {
            k.tally(&mut counts[self.field_of(i as u64)]);
        }
        profile_for(&self.program, counts)
    }

    /// Draws a sampled campaign by table lookup instead of re-simulation.
    pub fn sample(&self, n: u64, seed: u64, options: &SampleOptions) -> Result<CampaignEstimate> {
        estimate(&self.program, self.population(), n, seed, options, |i| (self.field_of(i), self.kind(i)))
    }
}

fn profile_for(program: &str, counts: Vec<OutcomeCounts>) -> VulnerabilityProfile {
    let mut p = VulnerabilityProfile::new((0..FIELDS.len() as u32).map(FfId).collect());
    p.push_benchmark(program, counts).expect("one entry per field");
    p
}

/// Classifies a single injection, running the golden trajectory first.
pub fn inject_one(program: &ToyProgram, target: InjectionTarget, config: &SimConfig) -> Result<Outcome> {
    Injector::new(program, config)?.inject(target)
}

pub fn exhaustive_campaign(program: &ToyProgram, config: &SimConfig) -> Result<VulnerabilityProfile> {
    let injector = Injector::new(program, config)?;
    Ok(injector.outcome_table(config)?.profile())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Uniform draws with replacement.
    Random,
    /// Visits population indices round-robin; with `n` equal to the
    /// population this is the exhaustive campaign.
    Stratified,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleOptions {
    pub mode: SampleMode,
    pub confidence: Confidence,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { mode: SampleMode::Random, confidence: Confidence::Level(0.95) }
    }
}

/// Normal-approximation interval for one outcome rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateInterval {
    pub outcome: OutcomeKind,
    pub count: u64,
    pub rate: f64,
    pub half_width: f64,
}

impl RateInterval {
    pub fn lower(&self) -> f64 {
        self.rate - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.rate + self.half_width
    }

    pub fn contains(&self, p: f64) -> bool {
        (p - self.rate).abs() <= self.half_width
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignEstimate {
    pub profile: VulnerabilityProfile,
    pub samples: u64,
    pub confidence: Confidence,
    pub intervals: Vec<RateInterval>,
}

impl CampaignEstimate {
    pub fn interval(&self, kind: OutcomeKind) -> &RateInterval {
        self.intervals.iter().find(|r| r.outcome == kind).expect("one interval per outcome")
    }
}

fn sample_indices(population: u64, n: u64, seed: u64, mode: SampleMode) -> Vec<u64> {
    match mode {
        SampleMode::Stratified => (0..n).map(|i| i % population).collect(),
        SampleMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.random_range(0..population)).collect()
        }
    }
}

fn estimate<F>(
    program: &str,
    population: u64,
    n: u64,
    seed: u64,
    options: &SampleOptions,
    classify: F,
) -> Result<CampaignEstimate>
where
    F: Fn(u64) -> (usize, OutcomeKind) + Sync,
{
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if population == 0 {
        return Err(Error::InvalidArgument("empty injection population".into()));
    }
    let z = options.confidence.z()?;
    let indices = sample_indices(population, n, seed, options.mode);
    let drawn: Vec<(usize, OutcomeKind)> = indices.par_iter().map(|&i| classify(i)).collect();
    let mut counts = vec![OutcomeCounts::default(); FIELDS.len()];
    for (f, k) in drawn {
        k.tally(&mut counts[f]);
    }
    let profile = profile_for(program, counts);
    let totals = profile.totals();
    let nf = n as f64;
    let intervals = OutcomeKind::ALL
        .iter()
        .map(|&k| {
            let count = k.count_in(&totals);
            let rate = count / nf;
            RateInterval { outcome: k, count: count as u64, rate, half_width: z * (rate * (1.0 - rate) / nf).sqrt() }
        })
        .collect();
    Ok(CampaignEstimate { profile, samples: n, confidence: options.confidence, intervals })
}

/// Samples `n` (bit, cycle) pairs and simulates each one.
pub fn sampled_campaign(
    program: &ToyProgram,
    n: u64,
    seed: u64,
    options: &SampleOptions,
    config: &SimConfig,
) -> Result<CampaignEstimate> {
    let injector = Injector::new(program, config)?;
    estimate(&program.name, injector.population(), n, seed, options, |i| {
        let t = injector.target_at(i);
        let kind = injector.inject(t).expect("sampled targets are in range").kind;
        (locate_bit(t.bit).expect("bit in range").0, kind)
    })
}

/// Confidence level for interval and sample-size computations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    /// Two-sided coverage probability, e.g. 0.95.
    Level(f64),
    /// Explicit critical value.
    Z(f64),
}

impl Confidence {
    /// Critical value. The conventional rounded values are used for 90%,
    /// 95% and 99%; other levels use the exact normal quantile.
    pub fn z(&self) -> Result<f64> {
        match *self {
            Confidence::Z(z) if z > 0.0 && z.is_finite() => Ok(z),
            Confidence::Z(z) => Err(Error::InvalidArgument(format!("z must be positive, got {z}"))),
            Confidence::Level(c) if (c - 0.90).abs() < 1e-12 => Ok(1.645),
            Confidence::Level(c) if (c - 0.95).abs() < 1e-12 => Ok(1.96),
            Confidence::Level(c) if (c - 0.99).abs() < 1e-12 => Ok(2.576),
            Confidence::Level(c) if c > 0.0 && c < 1.0 => {
                let normal = Normal::new(0.0, 1.0).expect("standard normal");
                Ok(normal.inverse_cdf(0.5 + c / 2.0))
            }
            Confidence::Level(c) => Err(Error::InvalidArgument(format!("confidence must be in (0, 1), got {c}"))),
        }
    }
}

impl std::str::FromStr for Confidence {
    type Err = Error;

    /// Accepts `95%`, `0.95` or `z=1.96`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::InvalidArgument(format!("bad confidence `{s}`"));
        if let Some(z) = t.strip_prefix("z=") {
            return Ok(Confidence::Z(z.parse().map_err(|_| bad())?));
        }
        let level = match t.strip_suffix('%') {
            Some(pct) => pct.parse::<f64>().map_err(|_| bad())? / 100.0,
            None => t.parse::<f64>().map_err(|_| bad())?,
        };
        let c = Confidence::Level(level);
        c.z()?;
        Ok(c)
    }
}

/// Injections needed so a proportion near `p` is estimated within `margin`
/// at the given confidence: `ceil(z^2 p (1 - p) / margin^2)`.
pub fn required_sample_size(margin: f64, confidence: Confidence, p: f64) -> Result<u64> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidArgument(format!("margin must be in (0, 1), got {margin}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("p must be in (0, 1), got {p}")));
    }
    let z = confidence.z()?;
    let n = z * z * p * (1.0 - p) / (margin * margin);
    // 1.96^2 * 0.25 / 1e-6 evaluates a hair above 960400 in binary floating
    // point; snap values within rounding noise of an integer.
    let nearest = n.round();
    let n = if (n - nearest).abs() <= 1e-9 * n.max(1.0) { nearest } else { n.ceil() };
    Ok(n as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::isa::assemble;

    #[test]
    fn sample_size_closed_form() {
        let c95 = Confidence::Level(0.95);
        assert_eq!(required_sample_size(0.001, c95, 0.5).unwrap(), 960_400);
        assert_eq!(required_sample_size(0.5, c95, 0.5).unwrap(), 4);
        let at_half = required_sample_size(0.01, c95, 0.5).unwrap();
        for p in [0.1, 0.3, 0.49, 0.51, 0.9] {
            assert!(required_sample_size(0.01, c95, p).unwrap() <= at_half);
        }
    }

    #[test]
    fn sample_size_rejects_out_of_range() {
        let c = Confidence::Level(0.95);
        assert!(required_sample_size(0.0, c, 0.5).is_err());
        assert!(required_sample_size(1.0, c, 0.5).is_err());
        assert!(required_sample_size(0.01, c, 0.0).is_err());
        assert!(required_sample_size(0.01, Confidence::Level(1.5), 0.5).is_err());
        assert!(required_sample_size(0.01, Confidence::Z(-1.0), 0.5).is_err());
    }

    #[test]
    fn confidence_parsing() {
        assert_eq!("95%".parse::<Confidence>().unwrap().z().unwrap(), 1.96);
        assert_eq!("0.99".parse::<Confidence>().unwrap().z().unwrap(), 2.576);
        assert_eq!("z=3".parse::<Confidence>().unwrap().z().unwrap(), 3.0);
        let z80 = "80%".parse::<Confidence>().unwrap().z().unwrap();
        assert!((z80 - 1.281_551_6).abs() < 1e-6);
        assert!("high".parse::<Confidence>().is_err());
    }

    #[test]
    fn halt_only_program_has_empty_output() {
        let p = assemble("HALT").unwrap();
        let g = run_golden(&p, &SimConfig::default()).unwrap();
        assert!(g.output.is_empty());
        assert_eq!(g.nominal_cycles, 5);
    }

    #[test]
    fn infinite_loop_golden_run_diverges() {
        let p = assemble("top: JMP top").unwrap();
        let cfg = SimConfig { golden_cap: 500, ..SimConfig::default() };
        assert!(matches!(run_golden(&p, &cfg), Err(Error::GoldenRunDiverges { cap: 500 })));
    }

    #[test]
    fn out_of_range_target_is_rejected() {
        let p = assemble("HALT").unwrap();
        let inj = Injector::new(&p, &SimConfig::default()).unwrap();
        assert!(inj.inject(InjectionTarget { bit: TOTAL_BITS, cycle: 0 }).is_err());
        assert!(inj.inject(InjectionTarget { bit: 0, cycle: 10 }).is_err());
        assert_eq!(inj.inject(InjectionTarget { bit: 0, cycle: 7 }).unwrap().divergence, Divergence::AfterCompletion);
    }

    #[test]
    fn zero_samples_rejected() {
        let p = assemble("HALT").unwrap();
        assert!(sampled_campaign(&p, 0, 1, &SampleOptions::default(), &SimConfig::default()).is_err());
    }
}
