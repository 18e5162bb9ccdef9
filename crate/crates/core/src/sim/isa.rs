//! Instruction set and assembler for the toy in-order core.
//!
//! Every instruction is one 32-bit word:
//!
//! | bits    | field  |
//! |---------|--------|
//! | 31..28  | opcode |
//! | 27..24  | rd     |
//! | 23..20  | rs1    |
//! | 19..16  | rs2    |
//! | 15..0   | imm    |
//!
//! | opcode | mnemonic | semantics                          |
//! |--------|----------|------------------------------------|
//! | 0x0    | NOP      |                                    |
//! | 0x1    | LOADI    | rd = imm                           |
//! | 0x2    | ADD      | rd = rs1 + rs2                     |
//! | 0x3    | SUB      | rd = rs1 - rs2                     |
//! | 0x4    | AND      | rd = rs1 & rs2                     |
//! | 0x5    | XOR      | rd = rs1 ^ rs2                     |
//! | 0x6    | ADDI     | rd = rs1 + imm                     |
//! | 0x7    | LOAD     | rd = mem[rs1 + imm]                |
//! | 0x8    | STORE    | mem[rs1 + imm] = rs2               |
//! | 0x9    | BEQ      | if rs1 == rs2 goto imm             |
//! | 0xA    | BNE      | if rs1 != rs2 goto imm             |
//! | 0xB    | JMP      | goto imm                           |
//! | 0xC    | OUT      | append rs1 to the output buffer    |
//! | 0xD    | HALT     | stop once committed                |
//! | 0xE    | SLT      | rd = (rs1 < rs2) as unsigned       |
//! | 0xF    | —        | undefined, traps                   |
//!
//! Data words are 16 bits and arithmetic wraps. Branch targets are absolute
//! instruction indices. The all-zero word is a NOP, so pipeline bubbles
//! decode harmlessly.
//!
//! Assembly grammar, one statement per line, `;` or `#` starts a comment:
//!
//! ```text
//! line      := [label ":"] [statement]
//! statement := mnemonic operand ("," operand)*
//!            | ".data" addr value*        ; initial data-memory words
//!            | ".entry" label|number      ; first instruction fetched
//!            | ".name" identifier
//!            | ".abft"                    ; mark as ABFT-compatible workload
//! operand   := "r"0..15 | number | label | number "(" "r"n ")"
//! number    := decimal | "-"decimal | "0x"hex
//! ```

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Opcode {
    Nop,
    Loadi,
    Add,
    Sub,
    And,
    Xor,
    Addi,
    Load,
    Store,
    Beq,
    Bne,
    Jmp,
    Out,
    Halt,
    Slt,
}

/// Word fetched from outside the program image. Its opcode is undefined.
pub const UNDEFINED_WORD: u32 = 0xF000_0000;

pub const NUM_REGS: usize = 16;

impl Opcode {
    pub fn decode(bits: u32) -> Option<Opcode> {
        use Opcode::*;
        Some(match bits & 0xF {
            0x0 => Nop,
            0x1 => Loadi,
            0x2 => Add,
            0x3 => Sub,
            0x4 => And,
            0x5 => Xor,
            0x6 => Addi,
            0x7 => Load,
            0x8 => Store,
            0x9 => Beq,
            0xA => Bne,
            0xB => Jmp,
            0xC => Out,
            0xD => Halt,
            0xE => Slt,
            _ => return None,
        })
    }

    pub fn bits(self) -> u32 {
        use Opcode::*;
        match self {
            Nop => 0x0,
            Loadi => 0x1,
            Add => 0x2,
            Sub => 0x3,
            And => 0x4,
            Xor => 0x5,
            Addi => 0x6,
            Load => 0x7,
            Store => 0x8,
            Beq => 0x9,
            Bne => 0xA,
            Jmp => 0xB,
            Out => 0xC,
            Halt => 0xD,
            Slt => 0xE,
        }
    }

    pub fn mnemonic(self) -> &'static str {
        use Opcode::*;
        match self {
            Nop => "NOP",
            Loadi => "LOADI",
            Add => "ADD",
            Sub => "SUB",
            And => "AND",
            Xor => "XOR",
            Addi => "ADDI",
            Load => "LOAD",
            Store => "STORE",
            Beq => "BEQ",
            Bne => "BNE",
            Jmp => "JMP",
            Out => "OUT",
            Halt => "HALT",
            Slt => "SLT",
        }
    }

    fn from_mnemonic(s: &str) -> Option<Opcode> {
        use Opcode::*;
        Some(match s.to_ascii_uppercase().as_str() {
            "NOP" => Nop,
            "LOADI" => Loadi,
            "ADD" => Add,
            "SUB" => Sub,
            "AND" => And,
            "XOR" => Xor,
            "ADDI" => Addi,
            "LOAD" => Load,
            "STORE" => Store,
            "BEQ" => Beq,
            "BNE" => Bne,
            "JMP" => Jmp,
            "OUT" => Out,
            "HALT" => Halt,
            "SLT" => Slt,
            _ => return None,
        })
    }

    pub fn writes_rd(self) -> bool {
        use Opcode::*;
        matches!(self, Loadi | Add | Sub | And | Xor | Addi | Load | Slt)
    }

    pub fn reads_rs1(self) -> bool {
        use Opcode::*;
        matches!(self, Add | Sub | And | Xor | Addi | Load | Store | Beq | Bne | Out | Slt)
    }

    pub fn reads_rs2(self) -> bool {
        use Opcode::*;
        matches!(self, Add | Sub | And | Xor | Store | Beq | Bne | Slt)
    }
}

/// Field view of an instruction word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fields {
    pub opcode: u32,
    pub rd: u32,
    pub rs1: u32,
    pub rs2: u32,
    pub imm: u16,
}

impl Fields {
    pub fn of(word: u32) -> Self {
        Self {
            opcode: word >> 28,
            rd: (word >> 24) & 0xF,
            rs1: (word >> 20) & 0xF,
            rs2: (word >> 16) & 0xF,
            imm: (word & 0xFFFF) as u16,
        }
    }
}

pub fn encode(op: Opcode, rd: u32, rs1: u32, rs2: u32, imm: u16) -> u32 {
    (op.bits() << 28) | ((rd & 0xF) << 24) | ((rs1 & 0xF) << 20) | ((rs2 & 0xF) << 16) | imm as u32
}

/// An assembled program plus its initial data-memory image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyProgram {
    pub name: String,
    pub code: Vec<u32>,
    /// (address, value) pairs written into data memory before reset.
    pub data: Vec<(u16, u16)>,
    pub entry: u8,
    pub abft_compatible: bool,
}

/// Maximum program length; the PC register is 8 bits wide.
pub const MAX_PROGRAM_LEN: usize = 256;

impl ToyProgram {
    pub fn validate(&self, mem_words: usize) -> Result<()> {
        if self.code.is_empty() {
            return Err(Error::InvalidProgram("empty program".into()));
        }
        if self.code.len() > MAX_PROGRAM_LEN {
            return Err(Error::InvalidProgram(format!(
                "{} instructions exceed the {MAX_PROGRAM_LEN}-entry instruction memory",
                self.code.len()
            )));
        }
        if self.entry as usize >= self.code.len() {
            return Err(Error::InvalidProgram("entry point outside program".into()));
        }
        if let Some((a, _)) = self.data.iter().find(|(a, _)| *a as usize >= mem_words) {
            return Err(Error::InvalidProgram(format!("data word at {a} outside {mem_words}-word memory")));
        }
        Ok(())
    }

    pub fn disassemble(&self) -> String {
        let mut out = String::new();
        for (i, w) in self.code.iter().enumerate() {
            out.push_str(&format!("{i:3}: {}\n", Disasm(*w)));
        }
        out
    }
}

struct Disasm(u32);

impl fmt::Display for Disasm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = Fields::of(self.0);
        let Some(op) = Opcode::decode(x.opcode) else {
            return write!(f, ".word {:#010x}", self.0);
        };
        let m = op.mnemonic();
        use Opcode::*;
        match op {
            Nop | Halt => write!(f, "{m}"),
            Loadi => write!(f, "{m} r{}, {}", x.rd, x.imm as i16),
            Add | Sub | And | Xor | Slt => write!(f, "{m} r{}, r{}, r{}", x.rd, x.rs1, x.rs2),
            Addi => write!(f, "{m} r{}, r{}, {}", x.rd, x.rs1, x.imm as i16),
            Load => write!(f, "{m} r{}, {}(r{})", x.rd, x.imm as i16, x.rs1),
            Store => write!(f, "{m} r{}, {}(r{})", x.rs2, x.imm as i16, x.rs1),
            Beq | Bne => write!(f, "{m} r{}, r{}, {}", x.rs1, x.rs2, x.imm),
            Jmp => write!(f, "{m} {}", x.imm),
            Out => write!(f, "{m} r{}", x.rs1),
        }
    }
}

fn parse_number(tok: &str) -> Option<i64> {
    let t = tok.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let v = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        body.parse::<i64>().ok()?
    };
    Some(if neg { -v } else { v })
}

fn imm16(v: i64, line: usize) -> Result<u16> {
    if !(-(1 << 15)..(1 << 16)).contains(&v) {
        return Err(Error::Assembly { line, message: format!("immediate {v} does not fit in 16 bits") });
    }
    Ok(v as u16)
}

fn parse_reg(tok: &str, line: usize) -> Result<u32> {
    let t = tok.trim();
    let n = t
        .strip_prefix('r')
        .or_else(|| t.strip_prefix('R'))
        .and_then(|n| n.parse::<u32>().ok())
        .filter(|n| (*n as usize) < NUM_REGS);
    n.ok_or_else(|| Error::Assembly { line, message: format!("expected register r0..r15, got `{t}`") })
}

/// `imm(rN)` memory operand.
fn parse_mem(tok: &str, line: usize) -> Result<(u32, u16)> {
    let t = tok.trim();
    let err = || Error::Assembly { line, message: format!("expected `imm(rN)`, got `{t}`") };
    let open = t.find('(').ok_or_else(err)?;
    let close = t.strip_suffix(')').ok_or_else(err)?;
    let off = if open == 0 { 0 } else { parse_number(&t[..open]).ok_or_else(err)? };
    let reg = parse_reg(&close[open + 1..], line)?;
    Ok((reg, imm16(off, line)?))
}

enum Pending {
    Done(u32),
    Branch { op: Opcode, rs1: u32, rs2: u32, target: String, line: usize },
}

/// Assembles source text into a program.
pub fn assemble(source: &str) -> Result<ToyProgram> {
    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut pending: Vec<Pending> = Vec::new();
    let mut data = Vec::new();
    let mut entry: Option<(String, usize)> = None;
    let mut name = String::from("program");
    let mut abft = false;

    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let text = raw.split([';', '#']).next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let mut rest = text;
        if let Some(colon) = rest.find(':') {
            let label = rest[..colon].trim();
            if label.is_empty() || !label.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(Error::Assembly { line, message: format!("bad label `{label}`") });
            }
            if labels.insert(label.to_string(), pending.len()).is_some() {
                return Err(Error::Assembly { line, message: format!("duplicate label `{label}`") });
            }
            rest = rest[colon + 1..].trim();
            if rest.is_empty() {
                continue;
            }
        }
        let (head, tail) = match rest.split_once(char::is_whitespace) {
            Some((h, t)) => (h, t.trim()),
            None => (rest, ""),
        };
        if let Some(directive) = head.strip_prefix('.') {
            match directive {
                "data" => {
                    let mut words = tail.split_whitespace();
                    let addr = words
                        .next()
                        .and_then(parse_number)
                        .filter(|a| (0..=u16::MAX as i64).contains(a))
                        .ok_or(Error::Assembly { line, message: "`.data` needs an address".into() })?;
                    for (k, w) in words.enumerate() {
                        let v =
                            parse_number(w).ok_or(Error::Assembly { line, message: format!("bad data word `{w}`") })?;
                        let a = addr + k as i64;
                        if a > u16::MAX as i64 {
                            return Err(Error::Assembly { line, message: "data address overflow".into() });
                        }
                        data.push((a as u16, imm16(v, line)?));
                    }
                }
                "entry" => entry = Some((tail.to_string(), line)),
                "name" => name = tail.to_string(),
                "abft" => abft = true,
                other => return Err(Error::Assembly { line, message: format!("unknown directive `.{other}`") }),
            }
            continue;
        }
        let op = Opcode::from_mnemonic(head)
            .ok_or_else(|| Error::Assembly { line, message: format!("unknown mnemonic `{head}`") })?;
        let ops: Vec<&str> = if tail.is_empty() { Vec::new() } else { tail.split(',').map(str::trim).collect() };
        let want = |n: usize| -> Result<()> {
            if ops.len() != n {
                Err(Error::Assembly {
                    line,
                    message: format!("{} takes {n} operand(s), got {}", op.mnemonic(), ops.len()),
                })
            } else {
                Ok(())
            }
        };
        use Opcode::*;
        let item = match op {
            Nop | Halt => {
                want(0)?;
                Pending::Done(encode(op, 0, 0, 0, 0))
            }
            Loadi => {
                want(2)?;
                let rd = parse_reg(ops[0], line)?;
                let v = parse_number(ops[1])
                    .ok_or_else(|| Error::Assembly { line, message: format!("bad immediate `{}`", ops[1]) })?;
                Pending::Done(encode(op, rd, 0, 0, imm16(v, line)?))
            }
            Add | Sub | And | Xor | Slt => {
                want(3)?;
                Pending::Done(encode(
                    op,
                    parse_reg(ops[0], line)?,
                    parse_reg(ops[1], line)?,
                    parse_reg(ops[2], line)?,
                    0,
                ))
            }
            Addi => {
                want(3)?;
                let v = parse_number(ops[2])
                    .ok_or_else(|| Error::Assembly { line, message: format!("bad immediate `{}`", ops[2]) })?;
                Pending::Done(encode(op, parse_reg(ops[0], line)?, parse_reg(ops[1], line)?, 0, imm16(v, line)?))
            }
            Load => {
                want(2)?;
                let (base, off) = parse_mem(ops[1], line)?;
                Pending::Done(encode(op, parse_reg(ops[0], line)?, base, 0, off))
            }
            Store => {
                want(2)?;
                let (base, off) = parse_mem(ops[1], line)?;
                Pending::Done(encode(op, 0, base, parse_reg(ops[0], line)?, off))
            }
            Beq | Bne => {
                want(3)?;
                Pending::Branch {
                    op,
                    rs1: parse_reg(ops[0], line)?,
                    rs2: parse_reg(ops[1], line)?,
                    target: ops[2].to_string(),
                    line,
                }
            }
            Jmp => {
                want(1)?;
                Pending::Branch { op, rs1: 0, rs2: 0, target: ops[0].to_string(), line }
            }
            Out => {
                want(1)?;
                Pending::Done(encode(op, 0, parse_reg(ops[0], line)?, 0, 0))
            }
        };
        pending.push(item);
    }

    let len = pending.len();
    let resolve = |target: &str, line: usize| -> Result<usize> {
        let t = labels.get(target).copied().or_else(|| parse_number(target).map(|v| v as usize));
        match t {
            Some(t) if t < len => Ok(t),
            _ => Err(Error::Assembly { line, message: format!("unresolved branch target `{target}`") }),
        }
    };
    let code = pending
        .iter()
        .map(|p| match p {
            Pending::Done(w) => Ok(*w),
            Pending::Branch { op, rs1, rs2, target, line } => {
                Ok(encode(*op, 0, *rs1, *rs2, resolve(target, *line)? as u16))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let entry = match entry {
        Some((t, line)) => resolve(&t, line)? as u8,
        None => 0,
    };
    let program = ToyProgram { name, code, data, entry, abft_compatible: abft };
    if program.code.is_empty() {
        return Err(Error::InvalidProgram("empty program".into()));
    }
    if program.code.len() > MAX_PROGRAM_LEN {
        return Err(Error::InvalidProgram(format!("program longer than {MAX_PROGRAM_LEN} instructions")));
    }
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_documented_fields() {
        let w = encode(Opcode::Add, 3, 1, 2, 0);
        assert_eq!(w, 0x2312_0000);
        let f = Fields::of(w);
        assert_eq!((f.opcode, f.rd, f.rs1, f.rs2, f.imm), (2, 3, 1, 2, 0));
    }

    #[test]
    fn zero_word_is_nop_and_f_is_undefined() {
        assert_eq!(Opcode::decode(0), Some(Opcode::Nop));
        assert_eq!(Opcode::decode(Fields::of(UNDEFINED_WORD).opcode), None);
    }

    #[test]
    fn opcode_bits_round_trip() {
        for b in 0..15 {
            assert_eq!(Opcode::decode(b).unwrap().bits(), b);
        }
    }

    #[test]
    fn assembles_labels_memory_operands_and_directives() {
        let p = assemble(
            ".name demo\n.abft\n.data 4 7 -1\nstart: LOADI r1, 5\n LOAD r2, 4(r0)\n STORE r2, -2(r1) ; c\n BNE r1, r2, start\n OUT r1\n HALT\n",
        )
        .unwrap();
        assert_eq!(p.name, "demo");
        assert!(p.abft_compatible);
        assert_eq!(p.data, vec![(4, 7), (5, 0xFFFF)]);
        assert_eq!(p.code.len(), 6);
        assert_eq!(p.code[2], encode(Opcode::Store, 0, 1, 2, 0xFFFE));
        assert_eq!(Fields::of(p.code[3]).imm, 0);
    }

    #[test]
    fn rejects_unknown_mnemonic_and_bad_register() {
        assert!(matches!(assemble("MUL r1, r2, r3"), Err(Error::Assembly { line: 1, .. })));
        assert!(matches!(assemble("NOP\nLOADI r16, 1"), Err(Error::Assembly { line: 2, .. })));
        assert!(matches!(assemble("JMP nowhere"), Err(Error::Assembly { .. })));
    }

    #[test]
    fn disassembly_mentions_every_instruction() {
        let p = assemble("LOADI r1, 5\nOUT r1\nHALT").unwrap();
        let text = p.disassemble();
        assert!(text.contains("LOADI r1, 5") && text.contains("OUT r1") && text.contains("HALT"));
    }
}
