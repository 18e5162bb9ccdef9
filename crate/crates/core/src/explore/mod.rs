//! Protection-plan search: Heuristic 1, greedy selective protection, joint
//! and top-down targeting, combination enumeration and Pareto extraction.

pub mod enumerate;
pub mod heuristic;
pub mod pareto;
pub mod selective;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{EDS, FLUSH, IR, LEAP_DICE, LHL, PARITY, ROB, UNCONSTRAINED};
use crate::error::{Error, Result};
use crate::model::Metric;

pub use enumerate::{enumerate_combinations, CombinationDescriptor, Enumeration, RowCount, RuleSet};
pub use heuristic::heuristic1_assign;
pub use pareto::{bound_region, pareto_front, ParetoPoint};
pub use selective::{compose_top_down, joint_protect, optimal_protect, selective_protect, Selection, SelectiveOptions};

/// Required improvement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Finite(f64),
    /// Protect every vulnerable flip-flop.
    Max,
}

impl Factor {
    pub fn met_by(&self, achieved: f64) -> bool {
        match self {
            Factor::Finite(f) => achieved >= *f,
            Factor::Max => false,
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Finite(x) => write!(f, "{x}"),
            Factor::Max => f.write_str("max"),
        }
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("max") {
            return Ok(Factor::Max);
        }
        let x: f64 = s
            .trim_end_matches(['x', 'X'])
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad improvement factor `{s}`")))?;
        if !(x >= 1.0) {
            return Err(Error::InvalidArgument(format!("improvement factor must be >= 1, got {x}")));
        }
        Ok(Factor::Finite(x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMetric {
    Sdc,
    Due,
    /// Both SDC and DUE must reach the factor.
    Joint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub metric: TargetMetric,
    pub factor: Factor,
}

impl Target {
    pub fn sdc(f: f64) -> Self {
        Self { metric: TargetMetric::Sdc, factor: Factor::Finite(f) }
    }

    pub fn due(f: f64) -> Self {
        Self { metric: TargetMetric::Due, factor: Factor::Finite(f) }
    }
}

/// `sdc:50`, `due:max`, `joint:5`.
impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (m, f) =
            s.split_once(':').ok_or_else(|| Error::InvalidArgument(format!("target `{s}`: expected metric:factor")))?;
        let metric = match m.to_ascii_lowercase().as_str() {
            "joint" | "sdc+due" => TargetMetric::Joint,
            other => match other.parse::<Metric>()? {
                Metric::Sdc => TargetMetric::Sdc,
                Metric::Due => TargetMetric::Due,
                Metric::Combined => TargetMetric::Joint,
            },
        };
        Ok(Target { metric, factor: f.parse()? })
    }
}

/// How each selected flip-flop is protected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Strategy {
    /// A hardened cell; needs no recovery.
    Harden { cell: String },
    /// A detector (EDS or parity) paired with a recovery choice.
    Detect { technique: String, recovery: Option<String> },
    /// LEAP-DICE or parity per flip-flop, chosen by Heuristic 1.
    Heuristic1 { recovery: Option<String> },
}

impl Strategy {
    pub fn leap_dice() -> Self {
        Strategy::Harden { cell: LEAP_DICE.into() }
    }

    pub fn recovery(&self) -> Option<&str> {
        match self {
            Strategy::Harden { .. } => None,
            Strategy::Detect { recovery, .. } | Strategy::Heuristic1 { recovery } => recovery.as_deref(),
        }
    }

    pub fn detection_only(&self) -> bool {
        matches!(self, Strategy::Detect { .. })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rec = |r: &Option<String>| r.as_ref().map(|r| format!("+{r}")).unwrap_or_default();
        match self {
            Strategy::Harden { cell } => f.write_str(cell),
            Strategy::Detect { technique, recovery } => write!(f, "{technique}{}", rec(recovery)),
            Strategy::Heuristic1 { recovery } => write!(f, "h1{}", rec(recovery)),
        }
    }
}

/// `LEAP-DICE`, `LHL`, `EDS+IR`, `parity+unconstrained`, `h1+flush`, `h1`.
impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rec) = match s.split_once('+') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let recovery = rec
            .map(|r| match r.to_ascii_lowercase().as_str() {
                "ir" => Ok(IR.to_string()),
                "eir" => Ok(crate::catalog::EIR.to_string()),
                "flush" => Ok(FLUSH.to_string()),
                "rob" => Ok(ROB.to_string()),
                "unconstrained" => Ok(UNCONSTRAINED.to_string()),
                _ => Err(Error::InvalidArgument(format!("unknown recovery `{r}`"))),
            })
            .transpose()?;
        match head.to_ascii_lowercase().as_str() {
            "leap-dice" | "harden" if recovery.is_none() => Ok(Strategy::leap_dice()),
            "lhl" if recovery.is_none() => Ok(Strategy::Harden { cell: LHL.into() }),
            "eds" => Ok(Strategy::Detect { technique: EDS.into(), recovery }),
            "parity" => Ok(Strategy::Detect { technique: PARITY.into(), recovery }),
            "h1" | "heuristic1" => Ok(Strategy::Heuristic1 { recovery }),
            _ => Err(Error::InvalidArgument(format!("unknown strategy `{s}`"))),
        }
    }
}
