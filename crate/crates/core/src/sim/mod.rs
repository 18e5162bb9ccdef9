//! Toy pipelined processor used as the fault-injection target.

pub mod campaign;
pub mod isa;
pub mod pipeline;

use crate::error::Result;
use crate::model::{Benchmark, DesignModel, FfId, FlipFlop, Position};

pub use campaign::{
    exhaustive_campaign, inject_one, required_sample_size, run_golden, sampled_campaign, CampaignEstimate, Confidence,
    Divergence, GoldenRun, InjectionTarget, Injector, Outcome, OutcomeKind, OutcomeTable, RateInterval, SampleMode,
    SampleOptions, SimConfig,
};
pub use isa::{assemble, ToyProgram};
pub use pipeline::{Machine, FIELDS, TOTAL_BITS};

const SOURCES: [(&str, &str); 8] = [
    ("sum10", include_str!("../../programs/sum10.s")),
    ("fib", include_str!("../../programs/fib.s")),
    ("checksum", include_str!("../../programs/checksum.s")),
    ("reverse", include_str!("../../programs/reverse.s")),
    ("dot", include_str!("../../programs/dot.s")),
    ("sort", include_str!("../../programs/sort.s")),
    ("gcd", include_str!("../../programs/gcd.s")),
    ("conv", include_str!("../../programs/conv.s")),
];

/// Names of the bundled benchmark programs.
pub fn builtin_names() -> Vec<&'static str> {
    SOURCES.iter().map(|(n, _)| *n).collect()
}

pub fn builtin(name: &str) -> Option<ToyProgram> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, src)| assemble(src).expect("bundled programs assemble"))
}

pub fn builtins() -> Vec<ToyProgram> {
    SOURCES.iter().map(|(_, src)| assemble(src).expect("bundled programs assemble")).collect()
}

/// Per-field timing slack in XOR-tree delay units. Control fields sit on the
/// critical decode/forwarding paths; address and immediate fields have room.
const SLACK: [f64; 20] =
    [1.5, 0.4, 2.5, 0.6, 0.3, 3.0, 0.5, 1.2, 0.8, 0.9, 1.8, 0.5, 0.7, 1.4, 0.6, 1.6, 0.9, 1.1, 2.0, 1.3];

/// Design model of the toy core: one flip-flop per pipeline field, weighted
/// by bit width, laid out one row per pipeline register.
pub fn pipeline_design(benchmarks: Vec<Benchmark>) -> DesignModel {
    let mut row = 0usize;
    let mut x = 0.0;
    let mut last_latch = "";
    let flip_flops = FIELDS
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let latch = f.name.split('.').next().unwrap_or("");
            if latch != last_latch {
                if !last_latch.is_empty() {
                    row += 1;
                }
                x = 0.0;
                last_latch = latch;
            }
            let ff = FlipFlop::new(i as u32, f.stage, Position::new(x, 2.0 * row as f64), SLACK[i])
                .with_name(f.name)
                .with_weights(f.width as f64, f.width as f64)
                .with_unit(latch);
            x += f.width as f64;
            debug_assert_eq!(ff.id, FfId(i as u32));
            ff
        })
        .collect();
    DesignModel { name: "toy-pipeline".into(), flip_flops, ff_area_fraction: 0.25, ff_power_fraction: 0.35, benchmarks }
}

/// Design model plus benchmark descriptors for the bundled programs.
pub fn builtin_design(config: &SimConfig) -> Result<DesignModel> {
    let benchmarks = builtins()
        .iter()
        .map(|p| {
            run_golden(p, config).map(|g| Benchmark {
                name: p.name.clone(),
                nominal_cycles: g.nominal_cycles,
                abft_compatible: p.abft_compatible,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pipeline_design(benchmarks))
}
