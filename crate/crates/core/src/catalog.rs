//! Parameterized resilience and recovery technique catalog.
//!
//! Every default value carries a provenance note. Values marked `inferred`
//! are back-derived from published aggregate numbers (improvement factors or
//! γ) because the underlying parameter was never stated directly.

use serde::{Deserialize, Serialize};

use crate::doc::{Document, CATALOG_SCHEMA};
use crate::error::{Error, Result};
use crate::model::FlipFlop;

/// Susceptibility correction for added flip-flops and longer execution.
///
/// `γ = (1 + ff_count_delta) × (1 + exec_time_impact)`.
pub fn gamma(ff_count_delta: f64, exec_time_impact: f64) -> Result<f64> {
    if !(ff_count_delta >= 0.0) || !(exec_time_impact >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma deltas must be nonnegative (got {ff_count_delta}, {exec_time_impact})"
        )));
    }
    Ok((1.0 + ff_count_delta) * (1.0 + exec_time_impact))
}

/// Two-decimal presentation rounding; computation always uses full precision.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Circuit,
    Logic,
    Architecture,
    Software,
    Algorithm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Detect,
    Correct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoreKind {
    InO,
    OoO,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardenedCellSpec {
    pub name: String,
    /// Residual soft-error rate relative to the baseline cell.
    pub ser_multiplier: f64,
    pub area_mult: f64,
    pub power_mult: f64,
    pub delay_mult: f64,
    pub energy_mult: f64,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorCellSpec {
    pub name: String,
    pub detect_prob: f64,
    pub area_mult: f64,
    pub power_mult: f64,
    pub delay_mult: f64,
    pub energy_mult: f64,
    /// Per-FF adders for error-signal routing and hold-fix delay buffers.
    pub aux_area: f64,
    pub aux_power: f64,
    pub detection_latency: u64,
    pub provenance: String,
}

/// XOR-tree parity cost parameters. Gate costs are in baseline-FF units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParitySpec {
    pub name: String,
    pub detect_prob: f64,
    pub detection_latency: u64,
    pub unpipelined_group_size: usize,
    pub pipelined_group_size: usize,
    pub xor_area: f64,
    pub xor_power: f64,
    /// Error-flag aggregation logic per group, in XOR-gate units.
    pub checker_overhead_units: f64,
    /// Inputs reduced per pipeline stage; one pipeline FF per chunk.
    pub pipeline_fanin: usize,
    /// Members beyond this count must be staged through extra FFs.
    pub staging_threshold: usize,
    pub provenance: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Fraction of the vulnerable FFs the technique touches.
    pub ff_fraction: f64,
    /// Fraction of a touched FF's errors that are detected or corrected.
    pub per_ff: f64,
}

impl Coverage {
    pub fn overall(&self) -> f64 {
        self.ff_fraction * self.per_ff
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Applicability {
    All,
    /// Only benchmarks tagged as ABFT-compatible.
    AbftCompatible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HighLevelTechniqueSpec {
    pub name: String,
    pub layer: Layer,
    pub mode: Mode,
    pub sdc: Coverage,
    pub due: Coverage,
    pub exec_time_impact: f64,
    pub ff_count_delta: f64,
    /// `None` for correct-mode techniques.
    pub detection_latency: Option<u64>,
    pub false_positive_rate: f64,
    pub area_pct: f64,
    pub power_pct: f64,
    pub applicability: Applicability,
    pub cores: Vec<CoreKind>,
    pub provenance: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recoverable {
    /// Every pipeline FF.
    AllPipeline,
    /// Only FFs ahead of the memory-write (or reorder buffer) boundary.
    FlushRecoverable,
    /// Handled outside the core; nothing is recovered in hardware.
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverySpec {
    pub name: String,
    pub area_pct: f64,
    pub power_pct: f64,
    pub energy_pct: f64,
    pub recovery_latency: u64,
    pub recoverable: Recoverable,
    pub ff_count_delta: f64,
    /// `None` means no latency bound (unconstrained).
    pub max_detection_latency: Option<u64>,
    pub cores: Vec<CoreKind>,
    pub provenance: String,
}

impl RecoverySpec {
    pub fn is_bounded(&self) -> bool {
        self.recoverable != Recoverable::External
    }

    pub fn recovers(&self, ff: &FlipFlop) -> bool {
        match self.recoverable {
            Recoverable::AllPipeline => true,
            Recoverable::FlushRecoverable => ff.flush_recoverable,
            Recoverable::External => false,
        }
    }

    pub fn accepts_latency(&self, latency: u64) -> bool {
        self.max_detection_latency.is_none_or(|max| latency <= max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechniqueCatalog {
    pub hardened: Vec<HardenedCellSpec>,
    pub detectors: Vec<DetectorCellSpec>,
    pub parity: ParitySpec,
    pub high_level: Vec<HighLevelTechniqueSpec>,
    pub recovery: Vec<RecoverySpec>,
}

/// A per-FF technique resolved against the catalog.
#[derive(Clone, Copy, Debug)]
pub enum PerFf<'a> {
    Hardened(&'a HardenedCellSpec),
    Detector(&'a DetectorCellSpec),
    Parity(&'a ParitySpec),
}

impl PerFf<'_> {
    pub fn name(&self) -> &str {
        match self {
            PerFf::Hardened(h) => &h.name,
            PerFf::Detector(d) => &d.name,
            PerFf::Parity(p) => &p.name,
        }
    }

    /// Detection latency, or `None` for correcting cells.
    pub fn detection_latency(&self) -> Option<u64> {
        match self {
            PerFf::Hardened(_) => None,
            PerFf::Detector(d) => Some(d.detection_latency),
            PerFf::Parity(p) => Some(p.detection_latency),
        }
    }
}

pub const LEAP_DICE: &str = "LEAP-DICE";
pub const LHL: &str = "LHL";
pub const EDS: &str = "EDS";
pub const PARITY: &str = "parity";
pub const DFC: &str = "DFC";
pub const MONITOR_CORE: &str = "monitor-core";
pub const ASSERTIONS: &str = "assertions";
pub const CFCSS: &str = "CFCSS";
pub const EDDI: &str = "EDDI";
pub const ABFT_CORRECTION: &str = "ABFT-correction";
pub const ABFT_DETECTION: &str = "ABFT-detection";
pub const IR: &str = "IR";
pub const EIR: &str = "EIR";
pub const FLUSH: &str = "flush";
pub const ROB: &str = "RoB";
pub const UNCONSTRAINED: &str = "unconstrained";

impl TechniqueCatalog {
    pub fn hardened(&self, name: &str) -> Result<&HardenedCellSpec> {
        self.hardened.iter().find(|h| h.name == name).ok_or_else(|| Error::UnknownTechnique(name.into()))
    }

    pub fn detector(&self, name: &str) -> Result<&DetectorCellSpec> {
        self.detectors.iter().find(|d| d.name == name).ok_or_else(|| Error::UnknownTechnique(name.into()))
    }

    pub fn high_level(&self, name: &str) -> Result<&HighLevelTechniqueSpec> {
        self.high_level.iter().find(|h| h.name == name).ok_or_else(|| Error::UnknownTechnique(name.into()))
    }

    pub fn recovery(&self, name: &str) -> Result<&RecoverySpec> {
        self.recovery.iter().find(|r| r.name == name).ok_or_else(|| Error::UnknownTechnique(name.into()))
    }

    pub fn per_ff(&self, name: &str) -> Result<PerFf<'_>> {
        if name == self.parity.name {
            return Ok(PerFf::Parity(&self.parity));
        }
        if let Some(h) = self.hardened.iter().find(|h| h.name == name) {
            return Ok(PerFf::Hardened(h));
        }
        if let Some(d) = self.detectors.iter().find(|d| d.name == name) {
            return Ok(PerFf::Detector(d));
        }
        Err(Error::UnknownTechnique(name.into()))
    }

    /// Detection latency of any named detecting technique.
    pub fn detection_latency(&self, name: &str) -> Result<Option<u64>> {
        if let Ok(t) = self.per_ff(name) {
            return Ok(t.detection_latency());
        }
        Ok(self.high_level(name)?.detection_latency)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::BTreeSet::new();
        let mut unique = |path: String, name: &str| -> Result<()> {
            if !names.insert(name.to_string()) {
                return Err(catalog_err(path, format!("duplicate technique name {name:?}")));
            }
            Ok(())
        };
        for (i, h) in self.hardened.iter().enumerate() {
            let p = format!("hardened[{i}]");
            unique(format!("{p}.name"), &h.name)?;
            unit_interval(&format!("{p}.ser_multiplier"), h.ser_multiplier)?;
            positive(&format!("{p}.area_mult"), h.area_mult)?;
            positive(&format!("{p}.power_mult"), h.power_mult)?;
            positive(&format!("{p}.delay_mult"), h.delay_mult)?;
            positive(&format!("{p}.energy_mult"), h.energy_mult)?;
            energy_sanity(&p, h.power_mult, h.delay_mult, h.energy_mult)?;
        }
        for (i, d) in self.detectors.iter().enumerate() {
            let p = format!("detectors[{i}]");
            unique(format!("{p}.name"), &d.name)?;
            unit_interval(&format!("{p}.detect_prob"), d.detect_prob)?;
            positive(&format!("{p}.area_mult"), d.area_mult)?;
            positive(&format!("{p}.power_mult"), d.power_mult)?;
            positive(&format!("{p}.delay_mult"), d.delay_mult)?;
            positive(&format!("{p}.energy_mult"), d.energy_mult)?;
            nonneg(&format!("{p}.aux_area"), d.aux_area)?;
            nonneg(&format!("{p}.aux_power"), d.aux_power)?;
            energy_sanity(&p, d.power_mult, d.delay_mult, d.energy_mult)?;
        }
        let p = &self.parity;
        unique("parity.name".into(), &p.name)?;
        unit_interval("parity.detect_prob", p.detect_prob)?;
        for (field, k) in [
            ("unpipelined_group_size", p.unpipelined_group_size),
            ("pipelined_group_size", p.pipelined_group_size),
            ("pipeline_fanin", p.pipeline_fanin),
        ] {
            if k == 0 || !k.is_power_of_two() {
                return Err(catalog_err(format!("parity.{field}"), format!("{k} is not a power of two")));
            }
        }
        nonneg("parity.xor_area", p.xor_area)?;
        nonneg("parity.xor_power", p.xor_power)?;
        nonneg("parity.checker_overhead_units", p.checker_overhead_units)?;
        for (i, h) in self.high_level.iter().enumerate() {
            let p = format!("high_level[{i}]");
            unique(format!("{p}.name"), &h.name)?;
            unit_interval(&format!("{p}.sdc.ff_fraction"), h.sdc.ff_fraction)?;
            unit_interval(&format!("{p}.sdc.per_ff"), h.sdc.per_ff)?;
            unit_interval(&format!("{p}.due.ff_fraction"), h.due.ff_fraction)?;
            unit_interval(&format!("{p}.due.per_ff"), h.due.per_ff)?;
            unit_interval(&format!("{p}.false_positive_rate"), h.false_positive_rate)?;
            nonneg(&format!("{p}.exec_time_impact"), h.exec_time_impact)?;
            nonneg(&format!("{p}.ff_count_delta"), h.ff_count_delta)?;
            nonneg(&format!("{p}.area_pct"), h.area_pct)?;
            nonneg(&format!("{p}.power_pct"), h.power_pct)?;
            match (h.mode, h.detection_latency) {
                (Mode::Detect, None) => {
                    return Err(catalog_err(format!("{p}.detection_latency"), "detect-mode technique needs a latency"))
                }
                (Mode::Correct, Some(_)) => {
                    return Err(catalog_err(
                        format!("{p}.detection_latency"),
                        "correct-mode technique removes errors and takes no latency",
                    ))
                }
                _ => {}
            }
        }
        for (i, r) in self.recovery.iter().enumerate() {
            let p = format!("recovery[{i}]");
            unique(format!("{p}.name"), &r.name)?;
            nonneg(&format!("{p}.area_pct"), r.area_pct)?;
            nonneg(&format!("{p}.power_pct"), r.power_pct)?;
            nonneg(&format!("{p}.energy_pct"), r.energy_pct)?;
            nonneg(&format!("{p}.ff_count_delta"), r.ff_count_delta)?;
            if r.recoverable == Recoverable::External
                && (r.area_pct != 0.0 || r.power_pct != 0.0 || r.max_detection_latency.is_some())
            {
                return Err(catalog_err(p, "external recovery carries no hardware cost and no latency bound"));
            }
        }
        Ok(())
    }

    pub fn to_document(&self) -> Document<TechniqueCatalog> {
        Document::new(CATALOG_SCHEMA, self.clone())
    }
}

/// Parses and validates a catalog document.
pub fn load_catalog(text: &str) -> Result<TechniqueCatalog> {
    let doc = Document::<TechniqueCatalog>::from_json(text, CATALOG_SCHEMA)?;
    doc.body.validate()?;
    Ok(doc.body)
}

fn catalog_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Catalog { path: path.into(), message: message.into() }
}

fn unit_interval(path: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(catalog_err(path, format!("{v} outside [0, 1]")))
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(catalog_err(path, format!("{v} must be positive")))
    }
}

fn nonneg(path: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(catalog_err(path, format!("{v} must be nonnegative")))
    }
}

fn energy_sanity(path: &str, power: f64, delay: f64, energy: f64) -> Result<()> {
    let expect = power * delay;
    if (energy - expect).abs() > 0.1 * expect {
        return Err(catalog_err(
            format!("{path}.energy_mult"),
            format!("{energy} differs from power x delay = {expect:.3} by more than 10%"),
        ));
    }
    Ok(())
}

fn hardened(name: &str, ser: f64, area: f64, power: f64, delay: f64, energy: f64) -> HardenedCellSpec {
    HardenedCellSpec {
        name: name.into(),
        ser_multiplier: ser,
        area_mult: area,
        power_mult: power,
        delay_mult: delay,
        energy_mult: energy,
        provenance: "published: resilient flip-flop characterization".into(),
    }
}

impl Default for TechniqueCatalog {
    fn default() -> Self {
        let ino = vec![CoreKind::InO];
        let both = vec![CoreKind::InO, CoreKind::OoO];
        let cov = |ff_fraction, per_ff| Coverage { ff_fraction, per_ff };
        TechniqueCatalog {
            hardened: vec![
                hardened(LHL, 0.25, 1.2, 1.1, 1.2, 1.3),
                hardened(LEAP_DICE, 2e-4, 2.0, 1.8, 1.0, 1.8),
                hardened("LEAP-ctrl-economy", 1.0, 3.1, 1.2, 1.0, 1.2),
                hardened("LEAP-ctrl-resilient", 2e-4, 3.1, 2.2, 1.0, 2.2),
            ],
            detectors: vec![DetectorCellSpec {
                name: EDS.into(),
                detect_prob: 1.0,
                area_mult: 1.5,
                power_mult: 1.4,
                delay_mult: 1.0,
                energy_mult: 1.4,
                aux_area: 0.3,
                aux_power: 0.3,
                detection_latency: 1,
                provenance: "published: cell multipliers and 1-cycle latency; assumed: +0.3 area/power \
                             per FF for error-signal routing and delay buffers (magnitude unpublished)"
                    .into(),
            }],
            parity: ParitySpec {
                name: PARITY.into(),
                detect_prob: 1.0,
                detection_latency: 1,
                unpipelined_group_size: 32,
                pipelined_group_size: 16,
                xor_area: 0.3,
                xor_power: 0.3,
                checker_overhead_units: 4.0,
                pipeline_fanin: 16,
                staging_threshold: 16,
                provenance: "published: 32-bit unpipelined / 16-bit pipelined group sizes and 1-cycle \
                             latency; assumed: gate-level cost constants"
                    .into(),
            },
            high_level: vec![
                HighLevelTechniqueSpec {
                    name: DFC.into(),
                    layer: Layer::Architecture,
                    mode: Mode::Detect,
                    sdc: cov(0.57, 0.30),
                    due: cov(0.68, 0.30),
                    exec_time_impact: 0.062,
                    ff_count_delta: 0.20,
                    detection_latency: Some(15),
                    false_positive_rate: 0.0,
                    area_pct: 3.0,
                    power_pct: 1.0,
                    applicability: Applicability::All,
                    cores: both.clone(),
                    provenance: "published: in-order coverage, costs, latency and deltas".into(),
                },
                HighLevelTechniqueSpec {
                    name: MONITOR_CORE.into(),
                    layer: Layer::Architecture,
                    mode: Mode::Detect,
                    sdc: cov(1.0, 0.962),
                    due: cov(1.0, 0.952),
                    exec_time_impact: 0.0,
                    ff_count_delta: 0.38,
                    detection_latency: Some(128),
                    false_positive_rate: 0.0,
                    area_pct: 9.0,
                    power_pct: 16.3,
                    applicability: Applicability::All,
                    cores: vec![CoreKind::OoO],
                    provenance: "published: costs, latency, ff delta; inferred: coverage from 19x SDC / \
                                 15x DUE at gamma 1.38"
                        .into(),
                },
                HighLevelTechniqueSpec {
                    name: ASSERTIONS.into(),
                    layer: Layer::Software,
                    mode: Mode::Detect,
                    sdc: cov(0.6, 0.71),
                    due: cov(0.5, 0.2),
                    exec_time_impact: 0.156,
                    ff_count_delta: 0.0,
                    detection_latency: Some(9_300_000),
                    false_positive_rate: 3e-5,
                    area_pct: 0.0,
                    power_pct: 0.0,
                    applicability: Applicability::All,
                    cores: ino.clone(),
                    provenance: "published: exec impact, latency, false-positive rate; inferred: coverage \
                                 from 1.5x SDC at gamma 1.16"
                        .into(),
                },
                HighLevelTechniqueSpec {
                    name: CFCSS.into(),
                    layer: Layer::Software,
                    mode: Mode::Detect,
                    sdc: cov(0.55, 0.61),
                    due: cov(0.66, 0.14),
                    exec_time_impact: 0.406,
                    ff_count_delta: 0.0,
                    detection_latency: Some(6_200_000),
                    false_positive_rate: 0.0,
                    area_pct: 0.0,
                    power_pct: 0.0,
                    applicability: Applicability::All,
                    cores: ino.clone(),
                    provenance: "published: coverage, exec impact, latency".into(),
                },
                HighLevelTechniqueSpec {
                    name: EDDI.into(),
                    layer: Layer::Software,
                    mode: Mode::Detect,
                    sdc: cov(1.0, 0.987),
                    due: cov(1.0, 0.198),
                    exec_time_impact: 1.10,
                    ff_count_delta: 0.0,
                    detection_latency: Some(287_000),
                    false_positive_rate: 0.0,
                    area_pct: 0.0,
                    power_pct: 0.0,
                    applicability: Applicability::All,
                    cores: ino,
                    provenance: "published: store-readback variant detection rates, exec impact, latency".into(),
                },
                HighLevelTechniqueSpec {
                    name: ABFT_CORRECTION.into(),
                    layer: Layer::Algorithm,
                    mode: Mode::Correct,
                    sdc: cov(1.0, 0.77),
                    due: cov(1.0, 0.175),
                    exec_time_impact: 0.014,
                    ff_count_delta: 0.0,
                    detection_latency: None,
                    false_positive_rate: 0.0,
                    area_pct: 0.0,
                    power_pct: 0.0,
                    applicability: Applicability::AbftCompatible,
                    cores: both.clone(),
                    provenance: "published: exec impact; inferred: coverage from 4.3x SDC / 1.2x DUE at \
                                 gamma 1.01"
                        .into(),
                },
                HighLevelTechniqueSpec {
                    name: ABFT_DETECTION.into(),
                    layer: Layer::Algorithm,
                    mode: Mode::Detect,
                    sdc: cov(1.0, 0.77),
                    due: cov(1.0, 0.2),
                    exec_time_impact: 0.24,
                    ff_count_delta: 0.0,
                    detection_latency: Some(9_600_000),
                    false_positive_rate: 0.0,
                    area_pct: 0.0,
                    power_pct: 0.0,
                    applicability: Applicability::AbftCompatible,
                    cores: both.clone(),
                    provenance: "published: exec impact, latency; inferred: coverage from 3.5x SDC at \
                                 gamma 1.24"
                        .into(),
                },
            ],
            recovery: vec![
                RecoverySpec {
                    name: IR.into(),
                    area_pct: 16.0,
                    power_pct: 21.0,
                    energy_pct: 21.0,
                    recovery_latency: 47,
                    recoverable: Recoverable::AllPipeline,
                    ff_count_delta: 0.4,
                    max_detection_latency: Some(1000),
                    cores: both.clone(),
                    provenance: "published: in-order costs and latency; inferred: ff delta from gamma 1.4; \
                                 assumed: 1000-cycle detection bound"
                        .into(),
                },
                RecoverySpec {
                    name: EIR.into(),
                    area_pct: 34.0,
                    power_pct: 32.0,
                    energy_pct: 32.0,
                    recovery_latency: 47,
                    recoverable: Recoverable::AllPipeline,
                    ff_count_delta: 0.19,
                    max_detection_latency: Some(1000),
                    cores: both.clone(),
                    provenance: "published: in-order costs and latency; inferred: ff delta from DFC+EIR \
                                 gamma 1.48; assumed: 1000-cycle detection bound"
                        .into(),
                },
                RecoverySpec {
                    name: FLUSH.into(),
                    area_pct: 0.6,
                    power_pct: 0.9,
                    energy_pct: 1.8,
                    recovery_latency: 7,
                    recoverable: Recoverable::FlushRecoverable,
                    ff_count_delta: 0.0,
                    max_detection_latency: Some(5),
                    cores: vec![CoreKind::InO],
                    provenance: "published: in-order costs and latency; assumed: zero ff delta, bound = \
                                 5-stage pipeline depth"
                        .into(),
                },
                RecoverySpec {
                    name: ROB.into(),
                    area_pct: 0.01,
                    power_pct: 0.01,
                    energy_pct: 0.01,
                    recovery_latency: 64,
                    recoverable: Recoverable::FlushRecoverable,
                    ff_count_delta: 0.0,
                    max_detection_latency: Some(128),
                    cores: vec![CoreKind::OoO],
                    provenance: "published: out-of-order costs and latency; assumed: zero ff delta, bound = \
                                 128-entry instruction window"
                        .into(),
                },
                RecoverySpec {
                    name: UNCONSTRAINED.into(),
                    area_pct: 0.0,
                    power_pct: 0.0,
                    energy_pct: 0.0,
                    recovery_latency: 0,
                    recoverable: Recoverable::External,
                    ff_count_delta: 0.0,
                    max_detection_latency: None,
                    cores: both,
                    provenance: "published: errors recovered externally once detected".into(),
                },
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_examples() {
        assert!((gamma(0.20, 0.062).unwrap() - 1.2744).abs() < 1e-12);
        assert_eq!(gamma(0.38, 0.0).unwrap(), 1.38);
        assert_eq!(round2(gamma(0.0, 0.406).unwrap()), 1.41);
        assert_eq!(gamma(0.0, 0.0).unwrap(), 1.0);
        assert!(gamma(-0.1, 0.0).is_err());
        assert!(gamma(0.0, f64::NAN).is_err());
    }

    #[test]
    fn default_catalog_shape() {
        let c = TechniqueCatalog::default();
        c.validate().unwrap();
        assert_eq!(c.hardened.len(), 4);
        assert_eq!(c.detectors.len(), 1);
        assert_eq!(c.high_level.len(), 7);
        assert_eq!(c.recovery.len(), 5);
        assert!(c.hardened.iter().all(|h| !h.provenance.is_empty()));
    }

    #[test]
    fn bad_detect_prob_names_the_field() {
        let mut c = TechniqueCatalog::default();
        c.detectors[0].detect_prob = 1.3;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("detectors[0].detect_prob"), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let c = TechniqueCatalog::default();
        let text = c.to_document().to_json().unwrap();
        assert_eq!(load_catalog(&text).unwrap(), c);
    }

    #[test]
    fn lookup_by_kind() {
        let c = TechniqueCatalog::default();
        assert!(matches!(c.per_ff(LEAP_DICE).unwrap(), PerFf::Hardened(_)));
        assert!(matches!(c.per_ff(EDS).unwrap(), PerFf::Detector(_)));
        assert!(matches!(c.per_ff(PARITY).unwrap(), PerFf::Parity(_)));
        assert!(c.per_ff(DFC).is_err());
        assert_eq!(c.detection_latency(DFC).unwrap(), Some(15));
        assert_eq!(c.detection_latency(LEAP_DICE).unwrap(), None);
    }
}
