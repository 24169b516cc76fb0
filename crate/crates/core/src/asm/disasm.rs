use std::fmt::Write;

use crate::isa::{decode, Format, Instruction, Kind};

/// Renders a word as assembly; words that do not decode become `.word`.
///
/// Branch and jump offsets are printed relative to the instruction, which is
/// also how the assembler reads a numeric target.
pub fn disassemble(word: u32) -> String {
    match decode(word) {
        Ok(instr) => format_instruction(&instr),
        Err(_) => format!(".word 0x{word:08x}"),
    }
}

pub fn format_instruction(i: &Instruction) -> String {
    let m = i.kind.mnemonic();
    let mut s = String::new();
    let _ = match i.kind {
        Kind::Ecall | Kind::Ebreak => write!(s, "{m}"),
        Kind::Csrrw | Kind::Csrrs => write!(s, "{m} x{}, 0x{:x}, x{}", i.rd, i.imm, i.rs1),
        Kind::Jalr => write!(s, "{m} x{}, {}(x{})", i.rd, i.imm, i.rs1),
        k if k.is_load() || k == Kind::Ldtcheck => {
            write!(s, "{m} x{}, {}(x{})", i.rd, i.imm, i.rs1)
        }
        _ => match i.format() {
            Format::R => write!(s, "{m} x{}, x{}, x{}", i.rd, i.rs1, i.rs2),
            Format::I => write!(s, "{m} x{}, x{}, {}", i.rd, i.rs1, i.imm),
            Format::S => write!(s, "{m} x{}, {}(x{})", i.rs2, i.imm, i.rs1),
            Format::B => write!(s, "{m} x{}, x{}, {}", i.rs1, i.rs2, i.imm),
            Format::U => write!(s, "{m} x{}, 0x{:x}", i.rd, (i.imm as u32) >> 12),
            Format::J => write!(s, "{m} x{}, {}", i.rd, i.imm),
        },
    };
    s
}
