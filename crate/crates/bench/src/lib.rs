//! Shared fixtures for the criterion benches.

use resilex_core::synth::{controlled_overlap_profile, generate_design, DesignParams, OverlapParams, Preset};
use resilex_core::{DesignModel, VulnerabilityProfile};

/// An ino-like design with a controlled-overlap profile.
pub fn fixture(ff_count: usize, seed: u64) -> (DesignModel, VulnerabilityProfile) {
    let d = generate_design(&DesignParams::preset(Preset::InoLike, ff_count, seed)).expect("preset design");
    let p = controlled_overlap_profile(&d, &OverlapParams { dead: ff_count / 20, ..OverlapParams::new(seed) })
        .expect("overlap profile")
        .profile;
    (d, p)
}
