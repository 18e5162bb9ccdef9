use resilex_core::sim::pipeline::{field_base, field_index};
use resilex_core::sim::{
    assemble, builtin, exhaustive_campaign, run_golden, Divergence, InjectionTarget, Injector, Machine, OutcomeKind,
    SampleMode, SampleOptions, SimConfig, ToyProgram, TOTAL_BITS,
};

fn golden(name: &str) -> Vec<u16> {
    run_golden(&builtin(name).unwrap(), &SimConfig::default()).unwrap().output
}

#[test]
fn builtin_outputs() {
    assert_eq!(golden("sum10"), [55]);
    assert_eq!(golden("fib"), [0, 1, 1, 2, 3, 5, 8, 13, 21, 34]);
    assert_eq!(golden("gcd"), [21]);
    assert_eq!(golden("sort"), [1, 4, 5, 7, 9]);
    assert_eq!(golden("reverse"), [6, 5, 4, 3, 2, 1]);
    assert_eq!(golden("dot"), [2 * 5 + 3 + 3 + 4 * 2]);
    let sig = [4u16, 8, 15, 16, 23, 42, 7, 1];
    let conv: Vec<u16> = sig.windows(3).map(|w| w.iter().sum()).collect();
    assert_eq!(golden("conv"), conv);
    let data = [3u16, 141, 59, 26, 535, 89, 79, 323];
    assert_eq!(golden("checksum"), [data.iter().sum::<u16>(), data.iter().fold(0, |a, b| a ^ b)]);
}

/// First completed-cycle count at which `pred` holds.
fn cycle_when(p: &ToyProgram, pred: impl Fn(&Machine) -> bool) -> u64 {
    let mut m = Machine::reset(p, SimConfig::default().mem_words);
    for _ in 0..1000 {
        if pred(&m) {
            return m.cycle;
        }
        m.step(p);
    }
    panic!("state never reached");
}

fn field(name: &str) -> usize {
    field_index(name).unwrap()
}

fn in_id_ex(opcode: u32) -> impl Fn(&Machine) -> bool {
    move |m| m.field_value(field("ID/EX.valid")) == 1 && m.field_value(field("ID/EX.opcode")) == opcode
}

fn in_if_id(opcode: u32) -> impl Fn(&Machine) -> bool {
    move |m| m.field_value(field("IF/ID.valid")) == 1 && m.field_value(field("IF/ID.instr")) >> 28 == opcode
}

#[test]
fn immediate_flip_changes_output() {
    let p = assemble(".name tiny\nLOADI r1, 5\nOUT r1\nHALT\n").unwrap();
    let inj = Injector::new(&p, &SimConfig::default()).unwrap();
    assert_eq!(inj.golden().output, [5]);
    let cycle = cycle_when(&p, in_id_ex(0x1));
    let out = inj.inject(InjectionTarget { bit: field_base(field("ID/EX.imm")), cycle }).unwrap();
    assert_eq!(out.kind, OutcomeKind::Omm);
    assert_eq!(out.divergence, Divergence::Output { first_mismatch: 0 });
}

#[test]
fn corrupted_opcode_and_address_trap() {
    let p = assemble(".name ld\n.data 10 7\nLOADI r1, 10\nLOAD r2, 0(r1)\nOUT r2\nHALT\n").unwrap();
    let inj = Injector::new(&p, &SimConfig::default()).unwrap();
    assert_eq!(inj.golden().output, [7]);
    // LOAD is 0x7; setting bit 31 makes 0xF, the undefined opcode.
    let c = cycle_when(&p, in_if_id(0x7));
    let out = inj.inject(InjectionTarget { bit: field_base(field("IF/ID.instr")) + 31, cycle: c }).unwrap();
    assert_eq!(out.kind, OutcomeKind::Ut);
    // Bit 15 of the offset pushes the address past the 256-word memory.
    let c = cycle_when(&p, in_id_ex(0x7));
    let out = inj.inject(InjectionTarget { bit: field_base(field("ID/EX.imm")) + 15, cycle: c }).unwrap();
    assert_eq!(out.kind, OutcomeKind::Ut);
    assert!(matches!(out.divergence, Divergence::Trap(_)));
}

#[test]
fn runaway_loop_bound_hangs() {
    let p = builtin("sum10").unwrap();
    let inj = Injector::new(&p, &SimConfig::default()).unwrap();
    // LOADI r3, 11 with bit 15 set: the counter must climb to 0x800B.
    let c = cycle_when(&p, |m| in_id_ex(0x1)(m) && m.field_value(field("ID/EX.imm")) == 11);
    let out = inj.inject(InjectionTarget { bit: field_base(field("ID/EX.imm")) + 15, cycle: c }).unwrap();
    assert_eq!(out.kind, OutcomeKind::Hang);
    assert_eq!(out.divergence, Divergence::Timeout);
    assert_eq!(out.cycles, 2 * inj.golden().nominal_cycles);
}

#[test]
fn unused_immediate_and_late_flips_vanish() {
    let p = builtin("sum10").unwrap();
    let inj = Injector::new(&p, &SimConfig::default()).unwrap();
    // ADD reads rs2, never the immediate.
    let c = cycle_when(&p, in_id_ex(0x2));
    let out = inj.inject(InjectionTarget { bit: field_base(field("ID/EX.imm")) + 3, cycle: c }).unwrap();
    assert_eq!(out.kind, OutcomeKind::Vanished);
    let n = inj.golden().nominal_cycles;
    let out = inj.inject(InjectionTarget { bit: 0, cycle: n }).unwrap();
    assert_eq!(out.divergence, Divergence::AfterCompletion);
    assert!(inj.inject(InjectionTarget { bit: TOTAL_BITS, cycle: 0 }).is_err());
}

#[test]
fn stratified_full_population_equals_exhaustive() {
    let cfg = SimConfig::default();
    let p = builtin("sum10").unwrap();
    let inj = Injector::new(&p, &cfg).unwrap();
    assert!(inj.cycles() <= 200);
    let exhaustive = exhaustive_campaign(&p, &cfg).unwrap();
    let table = inj.outcome_table(&cfg).unwrap();
    let opts = SampleOptions { mode: SampleMode::Stratified, ..SampleOptions::default() };
    let sampled = table.sample(table.population(), 0, &opts).unwrap();
    assert_eq!(sampled.profile, exhaustive);
    let direct = resilex_core::sim::sampled_campaign(&p, inj.population(), 0, &opts, &cfg).unwrap();
    assert_eq!(direct.profile, exhaustive);
    let t = exhaustive.totals();
    assert_eq!(t.vanished + t.omm + t.ut + t.hang, inj.population() as f64);
    assert_eq!(t.ed, 0.0);
}
