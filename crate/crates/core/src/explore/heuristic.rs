use crate::catalog::{RecoverySpec, LEAP_DICE, PARITY};
use crate::model::FlipFlop;
use crate::parity::PIPELINE_SLACK;

/// LEAP-DICE where recovery cannot reach the flip-flop, parity where the
/// XOR tree fits in the slack, LEAP-DICE otherwise.
///
/// The harden check is false under no recovery or unconstrained recovery,
/// since there is nothing to flush.
pub fn heuristic1_assign(ff: &FlipFlop, recovery: Option<&RecoverySpec>) -> &'static str {
    let harden = recovery.is_some_and(|r| r.is_bounded() && !r.recovers(ff));
    if harden {
        return LEAP_DICE;
    }
    if ff.timing_slack >= PIPELINE_SLACK {
        return PARITY;
    }
    LEAP_DICE
}
