use crate::isa::{Format, Instruction, Kind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("{field} register index {value} is out of range")]
    Register { field: &'static str, value: u8 },
    #[error("{kind} immediate {value} outside [{min}, {max}]")]
    Immediate {
        kind: Kind,
        value: i64,
        min: i64,
        max: i64,
    },
    #[error("{kind} offset {value} is not a multiple of 2")]
    OddOffset { kind: Kind, value: i32 },
    #[error("{kind} immediate {value:#x} has nonzero low 12 bits")]
    UnalignedUpper { kind: Kind, value: i32 },
    #[error("{kind} does not use the {field} field")]
    UnusedField { kind: Kind, field: &'static str },
}

/// Inclusive bounds of the immediate operand for `kind`.
pub fn imm_bounds(kind: Kind) -> (i64, i64) {
    if kind.is_shift_imm() {
        return (0, 31);
    }
    if kind.is_csr() {
        return (0, 0xfff);
    }
    if kind.has_no_operands() {
        return (0, 0);
    }
    match kind.format() {
        Format::R => (0, 0),
        Format::I | Format::S => (-2048, 2047),
        Format::B => (-4096, 4094),
        Format::J => (-(1 << 20), (1 << 20) - 2),
        Format::U => (i32::MIN as i64, i32::MAX as i64),
    }
}

fn check_reg(field: &'static str, value: u8) -> Result<u32, EncodeError> {
    if value < 32 {
        Ok(value as u32)
    } else {
        Err(EncodeError::Register { field, value })
    }
}

fn unused(kind: Kind, field: &'static str, value: u8) -> Result<(), EncodeError> {
    if value == 0 {
        Ok(())
    } else {
        Err(EncodeError::UnusedField { kind, field })
    }
}

/// Encodes an instruction. Fields the format does not use must be zero.
pub fn encode(instr: &Instruction) -> Result<u32, EncodeError> {
    let kind = instr.kind;
    let rd = check_reg("rd", instr.rd)?;
    let rs1 = check_reg("rs1", instr.rs1)?;
    let rs2 = check_reg("rs2", instr.rs2)?;
    let imm = instr.imm;
    let (min, max) = imm_bounds(kind);
    if (imm as i64) < min || (imm as i64) > max {
        return Err(EncodeError::Immediate {
            kind,
            value: imm as i64,
            min,
            max,
        });
    }

    let opcode = kind.opcode();
    let f3 = kind.funct3() << 12;
    let f7 = kind.funct7() << 25;
    let u = imm as u32;

    let word = match kind.format() {
        Format::R => {
            if imm != 0 {
                return Err(EncodeError::UnusedField { kind, field: "imm" });
            }
            f7 | (rs2 << 20) | (rs1 << 15) | f3 | (rd << 7) | opcode
        }
        Format::I => {
            unused(kind, "rs2", instr.rs2)?;
            if kind.has_no_operands() {
                unused(kind, "rd", instr.rd)?;
                unused(kind, "rs1", instr.rs1)?;
                match kind {
                    Kind::Ebreak => 0x0010_0073,
                    _ => 0x0000_0073,
                }
            } else if kind.is_shift_imm() {
                f7 | (u << 20) | (rs1 << 15) | f3 | (rd << 7) | opcode
            } else {
                ((u & 0xfff) << 20) | (rs1 << 15) | f3 | (rd << 7) | opcode
            }
        }
        Format::S => {
            unused(kind, "rd", instr.rd)?;
            ((u >> 5 & 0x7f) << 25) | (rs2 << 20) | (rs1 << 15) | f3 | ((u & 0x1f) << 7) | opcode
        }
        Format::B => {
            unused(kind, "rd", instr.rd)?;
            if imm % 2 != 0 {
                return Err(EncodeError::OddOffset { kind, value: imm });
            }
            ((u >> 12 & 1) << 31)
                | ((u >> 5 & 0x3f) << 25)
                | (rs2 << 20)
                | (rs1 << 15)
                | f3
                | ((u >> 1 & 0xf) << 8)
                | ((u >> 11 & 1) << 7)
                | opcode
        }
        Format::U => {
            unused(kind, "rs1", instr.rs1)?;
            unused(kind, "rs2", instr.rs2)?;
            if u & 0xfff != 0 {
                return Err(EncodeError::UnalignedUpper { kind, value: imm });
            }
            u | (rd << 7) | opcode
        }
        Format::J => {
            unused(kind, "rs1", instr.rs1)?;
            unused(kind, "rs2", instr.rs2)?;
            if imm % 2 != 0 {
                return Err(EncodeError::OddOffset { kind, value: imm });
            }
            ((u >> 20 & 1) << 31)
                | ((u >> 1 & 0x3ff) << 21)
                | ((u >> 11 & 1) << 20)
                | ((u >> 12 & 0xff) << 12)
                | (rd << 7)
                | opcode
        }
    };
    Ok(word)
}
