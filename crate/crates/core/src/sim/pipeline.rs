//! Five-stage in-order pipeline (IF, ID, EX, MEM, WB) with interlocks and
//! predict-not-taken branches resolved in EX.
//!
//! The injectable state is the program counter plus the four pipeline
//! registers. Each multi-bit field is one flip-flop; bits are addressed by a
//! global index that concatenates the fields in [`FIELDS`] order, LSB first
//! within a field.
//!
//! | #  | field          | bits | stage     |
//! |----|----------------|------|-----------|
//! | 0  | PC.pc          | 8    | fetch     |
//! | 1  | IF/ID.valid    | 1    | decode    |
//! | 2  | IF/ID.pc       | 8    | decode    |
//! | 3  | IF/ID.instr    | 32   | decode    |
//! | 4  | ID/EX.valid    | 1    | execute   |
//! | 5  | ID/EX.pc       | 8    | execute   |
//! | 6  | ID/EX.opcode   | 4    | execute   |
//! | 7  | ID/EX.rd       | 4    | execute   |
//! | 8  | ID/EX.a        | 16   | execute   |
//! | 9  | ID/EX.b        | 16   | execute   |
//! | 10 | ID/EX.imm      | 16   | execute   |
//! | 11 | EX/MEM.valid   | 1    | memory    |
//! | 12 | EX/MEM.opcode  | 4    | memory    |
//! | 13 | EX/MEM.rd      | 4    | memory    |
//! | 14 | EX/MEM.alu     | 16   | memory    |
//! | 15 | EX/MEM.data    | 16   | memory    |
//! | 16 | MEM/WB.valid   | 1    | writeback |
//! | 17 | MEM/WB.opcode  | 4    | writeback |
//! | 18 | MEM/WB.rd      | 4    | writeback |
//! | 19 | MEM/WB.value   | 16   | writeback |
//!
//! Within one cycle WB commits first (register write, OUT append, HALT),
//! so ID reads the freshly written register file. Stores update memory in
//! MEM. ID stalls while an instruction in EX or MEM will write one of its
//! source registers.

use serde::{Deserialize, Serialize};

use super::isa::{Fields, Opcode, ToyProgram, NUM_REGS, UNDEFINED_WORD};
use crate::model::Stage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: &'static str,
    pub width: u32,
    pub stage: Stage,
}

const fn field(name: &'static str, width: u32, stage: Stage) -> Field {
    Field { name, width, stage }
}

pub const FIELDS: [Field; 20] = [
    field("PC.pc", 8, Stage::Fetch),
    field("IF/ID.valid", 1, Stage::Decode),
    field("IF/ID.pc", 8, Stage::Decode),
    field("IF/ID.instr", 32, Stage::Decode),
    field("ID/EX.valid", 1, Stage::Execute),
    field("ID/EX.pc", 8, Stage::Execute),
    field("ID/EX.opcode", 4, Stage::Execute),
    field("ID/EX.rd", 4, Stage::Execute),
    field("ID/EX.a", 16, Stage::Execute),
    field("ID/EX.b", 16, Stage::Execute),
    field("ID/EX.imm", 16, Stage::Execute),
    field("EX/MEM.valid", 1, Stage::Memory),
    field("EX/MEM.opcode", 4, Stage::Memory),
    field("EX/MEM.rd", 4, Stage::Memory),
    field("EX/MEM.alu", 16, Stage::Memory),
    field("EX/MEM.data", 16, Stage::Memory),
    field("MEM/WB.valid", 1, Stage::Writeback),
    field("MEM/WB.opcode", 4, Stage::Writeback),
    field("MEM/WB.rd", 4, Stage::Writeback),
    field("MEM/WB.value", 16, Stage::Writeback),
];

/// Total injectable bits for the layout in [`FIELDS`].
pub const TOTAL_BITS: usize = {
    let mut sum = 0;
    let mut i = 0;
    while i < FIELDS.len() {
        sum += FIELDS[i].width as usize;
        i += 1;
    }
    sum
};

/// Maps a global bit index to (field index, bit within field).
pub fn locate_bit(bit: usize) -> Option<(usize, u32)> {
    let mut base = 0usize;
    for (i, f) in FIELDS.iter().enumerate() {
        let w = f.width as usize;
        if bit < base + w {
            return Some((i, (bit - base) as u32));
        }
        base += w;
    }
    None
}

/// First global bit index of a field.
pub fn field_base(field: usize) -> usize {
    FIELDS[..field].iter().map(|f| f.width as usize).sum()
}

pub fn field_index(name: &str) -> Option<usize> {
    FIELDS.iter().position(|f| f.name == name)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IfId {
    pub valid: bool,
    pub pc: u8,
    pub instr: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IdEx {
    pub valid: bool,
    pub pc: u8,
    pub opcode: u8,
    pub rd: u8,
    pub a: u16,
    pub b: u16,
    pub imm: u16,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExMem {
    pub valid: bool,
    pub opcode: u8,
    pub rd: u8,
    pub alu: u16,
    pub data: u16,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MemWb {
    pub valid: bool,
    pub opcode: u8,
    pub rd: u8,
    pub value: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trap {
    InvalidOpcode { stage: Stage },
    MemoryOutOfRange { addr: u16 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Running,
    Halted,
    Trapped(Trap),
}

/// Complete machine state. Field order puts the cheap-to-compare latches
/// before memory so equality checks fail fast.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Machine {
    pub pc: u8,
    pub if_id: IfId,
    pub id_ex: IdEx,
    pub ex_mem: ExMem,
    pub mem_wb: MemWb,
    pub regs: [u16; NUM_REGS],
    pub cycle: u64,
    pub output: Vec<u16>,
    pub mem: Vec<u16>,
}

impl Machine {
    pub fn reset(program: &ToyProgram, mem_words: usize) -> Self {
        let mut mem = vec![0u16; mem_words];
        for &(a, v) in &program.data {
            if let Some(slot) = mem.get_mut(a as usize) {
                *slot = v;
            }
        }
        Self {
            pc: program.entry,
            if_id: IfId::default(),
            id_ex: IdEx::default(),
            ex_mem: ExMem::default(),
            mem_wb: MemWb::default(),
            regs: [0; NUM_REGS],
            cycle: 0,
            output: Vec::new(),
            mem,
        }
    }

    pub fn field_value(&self, field: usize) -> u32 {
        match field {
            0 => self.pc as u32,
            1 => self.if_id.valid as u32,
            2 => self.if_id.pc as u32,
            3 => self.if_id.instr,
            4 => self.id_ex.valid as u32,
            5 => self.id_ex.pc as u32,
            6 => self.id_ex.opcode as u32,
            7 => self.id_ex.rd as u32,
            8 => self.id_ex.a as u32,
            9 => self.id_ex.b as u32,
            10 => self.id_ex.imm as u32,
            11 => self.ex_mem.valid as u32,
            12 => self.ex_mem.opcode as u32,
            13 => self.ex_mem.rd as u32,
            14 => self.ex_mem.alu as u32,
            15 => self.ex_mem.data as u32,
            16 => self.mem_wb.valid as u32,
            17 => self.mem_wb.opcode as u32,
            18 => self.mem_wb.rd as u32,
            19 => self.mem_wb.value as u32,
            _ => panic!("field index {field} out of range"),
        }
    }

    pub fn set_field(&mut self, field: usize, v: u32) {
        match field {
            0 => self.pc = v as u8,
            1 => self.if_id.valid = v & 1 == 1,
            2 => self.if_id.pc = v as u8,
            3 => self.if_id.instr = v,
            4 => self.id_ex.valid = v & 1 == 1,
            5 => self.id_ex.pc = v as u8,
            6 => self.id_ex.opcode = (v & 0xF) as u8,
            7 => self.id_ex.rd = (v & 0xF) as u8,
            8 => self.id_ex.a = v as u16,
            9 => self.id_ex.b = v as u16,
            10 => self.id_ex.imm = v as u16,
            11 => self.ex_mem.valid = v & 1 == 1,
            12 => self.ex_mem.opcode = (v & 0xF) as u8,
            13 => self.ex_mem.rd = (v & 0xF) as u8,
            14 => self.ex_mem.alu = v as u16,
            15 => self.ex_mem.data = v as u16,
            16 => self.mem_wb.valid = v & 1 == 1,
            17 => self.mem_wb.opcode = (v & 0xF) as u8,
            18 => self.mem_wb.rd = (v & 0xF) as u8,
            19 => self.mem_wb.value = v as u16,
            _ => panic!("field index {field} out of range"),
        }
    }

    /// Inverts one bit of the injectable state. Returns false when the index
    /// is out of range.
    pub fn flip(&mut self, bit: usize) -> bool {
        match locate_bit(bit) {
            Some((f, b)) => {
                let v = self.field_value(f) ^ (1 << b);
                self.set_field(f, v);
                true
            }
            None => false,
        }
    }

    /// Advances one clock cycle.
    pub fn step(&mut self, program: &ToyProgram) -> Step {
        self.cycle += 1;

        // WB
        let wb = self.mem_wb;
        if wb.valid {
            match Opcode::decode(wb.opcode as u32) {
                None => return Step::Trapped(Trap::InvalidOpcode { stage: Stage::Writeback }),
                Some(Opcode::Halt) => return Step::Halted,
                Some(Opcode::Out) => self.output.push(wb.value),
                Some(op) if op.writes_rd() => self.regs[wb.rd as usize] = wb.value,
                Some(_) => {}
            }
        }

        // MEM
        let em = self.ex_mem;
        let next_mem_wb = if em.valid {
            let value = match Opcode::decode(em.opcode as u32) {
                None => return Step::Trapped(Trap::InvalidOpcode { stage: Stage::Memory }),
                Some(Opcode::Load) => match self.mem.get(em.alu as usize) {
                    Some(v) => *v,
                    None => return Step::Trapped(Trap::MemoryOutOfRange { addr: em.alu }),
                },
                Some(Opcode::Store) => match self.mem.get_mut(em.alu as usize) {
                    Some(slot) => {
                        *slot = em.data;
                        0
                    }
                    None => return Step::Trapped(Trap::MemoryOutOfRange { addr: em.alu }),
                },
                Some(_) => em.alu,
            };
            MemWb { valid: true, opcode: em.opcode, rd: em.rd, value }
        } else {
            MemWb::default()
        };

        // EX
        let ie = self.id_ex;
        let mut redirect: Option<u8> = None;
        let next_ex_mem = if ie.valid {
            let Some(op) = Opcode::decode(ie.opcode as u32) else {
                return Step::Trapped(Trap::InvalidOpcode { stage: Stage::Execute });
            };
            let (a, b, imm) = (ie.a, ie.b, ie.imm);
            let mut data = 0;
            let alu = match op {
                Opcode::Loadi => imm,
                Opcode::Add => a.wrapping_add(b),
                Opcode::Sub => a.wrapping_sub(b),
                Opcode::And => a & b,
                Opcode::Xor => a ^ b,
                Opcode::Slt => (a < b) as u16,
                Opcode::Addi | Opcode::Load => a.wrapping_add(imm),
                Opcode::Store => {
                    data = b;
                    a.wrapping_add(imm)
                }
                Opcode::Beq => {
                    if a == b {
                        redirect = Some(imm as u8);
                    }
                    0
                }
                Opcode::Bne => {
                    if a != b {
                        redirect = Some(imm as u8);
                    }
                    0
                }
                Opcode::Jmp => {
                    redirect = Some(imm as u8);
                    0
                }
                Opcode::Out => a,
                Opcode::Nop | Opcode::Halt => 0,
            };
            ExMem { valid: true, opcode: ie.opcode, rd: ie.rd, alu, data }
        } else {
            ExMem::default()
        };

        // ID
        let fd = self.if_id;
        let mut stall = false;
        let next_id_ex = if redirect.is_some() || !fd.valid {
            IdEx::default()
        } else {
            let f = Fields::of(fd.instr);
            let Some(op) = Opcode::decode(f.opcode) else {
                return Step::Trapped(Trap::InvalidOpcode { stage: Stage::Decode });
            };
            let pending_write = |valid: bool, opcode: u8, rd: u8, src: u32| {
                valid && rd as u32 == src && Opcode::decode(opcode as u32).is_some_and(Opcode::writes_rd)
            };
            let hazard = |src: u32| {
                pending_write(ie.valid, ie.opcode, ie.rd, src) || pending_write(em.valid, em.opcode, em.rd, src)
            };
            stall = (op.reads_rs1() && hazard(f.rs1)) || (op.reads_rs2() && hazard(f.rs2));
            if stall {
                IdEx::default()
            } else {
                IdEx {
                    valid: true,
                    pc: fd.pc,
                    opcode: f.opcode as u8,
                    rd: f.rd as u8,
                    a: self.regs[f.rs1 as usize],
                    b: self.regs[f.rs2 as usize],
                    imm: f.imm,
                }
            }
        };

        // IF
        let is_halt = |valid: bool, opcode: u8| valid && opcode as u32 == Opcode::Halt.bits();
        let halting = is_halt(next_id_ex.valid, next_id_ex.opcode)
            || is_halt(next_ex_mem.valid, next_ex_mem.opcode)
            || is_halt(next_mem_wb.valid, next_mem_wb.opcode);
        let (next_if_id, next_pc) = if let Some(target) = redirect {
            (IfId::default(), target)
        } else if stall {
            (fd, self.pc)
        } else if halting {
            (IfId::default(), self.pc)
        } else {
            let instr = program.code.get(self.pc as usize).copied().unwrap_or(UNDEFINED_WORD);
            (IfId { valid: true, pc: self.pc, instr }, self.pc.wrapping_add(1))
        };

        self.pc = next_pc;
        self.if_id = next_if_id;
        self.id_ex = next_id_ex;
        self.ex_mem = next_ex_mem;
        self.mem_wb = next_mem_wb;
        Step::Running
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_totals() {
        assert_eq!(TOTAL_BITS, 180);
        assert_eq!(locate_bit(0), Some((0, 0)));
        assert_eq!(locate_bit(8), Some((1, 0)));
        assert_eq!(locate_bit(179), Some((19, 15)));
        assert_eq!(locate_bit(180), None);
        assert_eq!(field_base(19), 164);
    }

    #[test]
    fn field_set_get_round_trip() {
        let p = crate::sim::isa::assemble("HALT").unwrap();
        let mut m = Machine::reset(&p, 16);
        for (i, f) in FIELDS.iter().enumerate() {
            let v = if f.width == 32 { 0xDEAD_BEEF } else { (1u32 << f.width) - 1 };
            m.set_field(i, v);
            assert_eq!(m.field_value(i), v, "{}", f.name);
        }
    }

    #[test]
    fn flip_is_an_involution() {
        let p = crate::sim::isa::assemble("HALT").unwrap();
        let m0 = Machine::reset(&p, 16);
        for bit in 0..TOTAL_BITS {
            let mut m = m0.clone();
            assert!(m.flip(bit));
            assert_ne!(m, m0);
            m.flip(bit);
            assert_eq!(m, m0);
        }
    }
}
