//! Instruction model and decoder for the supported RV32I subset plus the two
//! tag-checking memory instructions.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const OPCODE_LUI: u32 = 0b0110111;
pub const OPCODE_AUIPC: u32 = 0b0010111;
pub const OPCODE_JAL: u32 = 0b1101111;
pub const OPCODE_JALR: u32 = 0b1100111;
pub const OPCODE_BRANCH: u32 = 0b1100011;
pub const OPCODE_LOAD: u32 = 0b0000011;
pub const OPCODE_STORE: u32 = 0b0100011;
pub const OPCODE_OP_IMM: u32 = 0b0010011;
pub const OPCODE_OP: u32 = 0b0110011;
pub const OPCODE_SYSTEM: u32 = 0b1110011;
/// custom-0: `ldtcheck rd, imm(rs1)`.
pub const OPCODE_CUSTOM0: u32 = 0b0001011;
/// custom-1: `sdtcheck rs2, imm(rs1)`.
pub const OPCODE_CUSTOM1: u32 = 0b0101011;

/// Word-width funct3 shared by LW/SW and the tag-checking pair.
pub const FUNCT3_TAGCHECK: u32 = 0b010;

/// Instruction encoding formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    R,
    I,
    S,
    B,
    U,
    J,
}

/// Mnemonic of a supported instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Lui,
    Auipc,
    Jal,
    Jalr,
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
    Lb,
    Lh,
    Lw,
    Lbu,
    Lhu,
    Sb,
    Sh,
    Sw,
    Addi,
    Slti,
    Sltiu,
    Xori,
    Ori,
    Andi,
    Slli,
    Srli,
    Srai,
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
    Ecall,
    Ebreak,
    Csrrw,
    Csrrs,
    Ldtcheck,
    Sdtcheck,
}

impl Kind {
    pub const ALL: [Kind; 43] = [
        Kind::Lui,
        Kind::Auipc,
        Kind::Jal,
        Kind::Jalr,
        Kind::Beq,
        Kind::Bne,
        Kind::Blt,
        Kind::Bge,
        Kind::Bltu,
        Kind::Bgeu,
        Kind::Lb,
        Kind::Lh,
        Kind::Lw,
        Kind::Lbu,
        Kind::Lhu,
        Kind::Sb,
        Kind::Sh,
        Kind::Sw,
        Kind::Addi,
        Kind::Slti,
        Kind::Sltiu,
        Kind::Xori,
        Kind::Ori,
        Kind::Andi,
        Kind::Slli,
        Kind::Srli,
        Kind::Srai,
        Kind::Add,
        Kind::Sub,
        Kind::Sll,
        Kind::Slt,
        Kind::Sltu,
        Kind::Xor,
        Kind::Srl,
        Kind::Sra,
        Kind::Or,
        Kind::And,
        Kind::Ecall,
        Kind::Ebreak,
        Kind::Csrrw,
        Kind::Csrrs,
        Kind::Ldtcheck,
        Kind::Sdtcheck,
    ];

    pub fn mnemonic(self) -> &'static str {
        use Kind::*;
        match self {
            Lui => "lui",
            Auipc => "auipc",
            Jal => "jal",
            Jalr => "jalr",
            Beq => "beq",
            Bne => "bne",
            Blt => "blt",
            Bge => "bge",
            Bltu => "bltu",
            Bgeu => "bgeu",
            Lb => "lb",
            Lh => "lh",
            Lw => "lw",
            Lbu => "lbu",
            Lhu => "lhu",
            Sb => "sb",
            Sh => "sh",
            Sw => "sw",
            Addi => "addi",
            Slti => "slti",
            Sltiu => "sltiu",
            Xori => "xori",
            Ori => "ori",
            Andi => "andi",
            Slli => "slli",
            Srli => "srli",
            Srai => "srai",
            Add => "add",
            Sub => "sub",
            Sll => "sll",
            Slt => "slt",
            Sltu => "sltu",
            Xor => "xor",
            Srl => "srl",
            Sra => "sra",
            Or => "or",
            And => "and",
            Ecall => "ecall",
            Ebreak => "ebreak",
            Csrrw => "csrrw",
            Csrrs => "csrrs",
            Ldtcheck => "ldtcheck",
            Sdtcheck => "sdtcheck",
        }
    }

    pub fn from_mnemonic(name: &str) -> Option<Kind> {
        Kind::ALL.iter().copied().find(|k| k.mnemonic() == name)
    }

    pub fn format(self) -> Format {
        use Kind::*;
        match self {
            Lui | Auipc => Format::U,
            Jal => Format::J,
            Beq | Bne | Blt | Bge | Bltu | Bgeu => Format::B,
            Sb | Sh | Sw | Sdtcheck => Format::S,
            Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And => Format::R,
            Jalr | Lb | Lh | Lw | Lbu | Lhu | Addi | Slti | Sltiu | Xori | Ori | Andi | Slli
            | Srli | Srai | Ecall | Ebreak | Csrrw | Csrrs | Ldtcheck => Format::I,
        }
    }

    pub fn opcode(self) -> u32 {
        use Kind::*;
        match self {
            Lui => OPCODE_LUI,
            Auipc => OPCODE_AUIPC,
            Jal => OPCODE_JAL,
            Jalr => OPCODE_JALR,
            Beq | Bne | Blt | Bge | Bltu | Bgeu => OPCODE_BRANCH,
            Lb | Lh | Lw | Lbu | Lhu => OPCODE_LOAD,
            Sb | Sh | Sw => OPCODE_STORE,
            Addi | Slti | Sltiu | Xori | Ori | Andi | Slli | Srli | Srai => OPCODE_OP_IMM,
            Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And => OPCODE_OP,
            Ecall | Ebreak | Csrrw | Csrrs => OPCODE_SYSTEM,
            Ldtcheck => OPCODE_CUSTOM0,
            Sdtcheck => OPCODE_CUSTOM1,
        }
    }

    pub fn funct3(self) -> u32 {
        use Kind::*;
        match self {
            Lui | Auipc | Jal => 0,
            Jalr => 0b000,
            Beq => 0b000,
            Bne => 0b001,
            Blt => 0b100,
            Bge => 0b101,
            Bltu => 0b110,
            Bgeu => 0b111,
            Lb | Sb => 0b000,
            Lh | Sh => 0b001,
            Lw | Sw => 0b010,
            Lbu => 0b100,
            Lhu => 0b101,
            Addi | Add | Sub => 0b000,
            Slli | Sll => 0b001,
            Slti | Slt => 0b010,
            Sltiu | Sltu => 0b011,
            Xori | Xor => 0b100,
            Srli | Srai | Srl | Sra => 0b101,
            Ori | Or => 0b110,
            Andi | And => 0b111,
            Ecall | Ebreak => 0b000,
            Csrrw => 0b001,
            Csrrs => 0b010,
            Ldtcheck | Sdtcheck => FUNCT3_TAGCHECK,
        }
    }

    pub fn funct7(self) -> u32 {
        match self {
            Kind::Sub | Kind::Sra | Kind::Srai => 0b0100000,
            _ => 0,
        }
    }

    pub fn is_load(self) -> bool {
        matches!(self, Kind::Lb | Kind::Lh | Kind::Lw | Kind::Lbu | Kind::Lhu)
    }

    pub fn is_store(self) -> bool {
        matches!(self, Kind::Sb | Kind::Sh | Kind::Sw)
    }

    pub fn is_branch(self) -> bool {
        self.format() == Format::B
    }

    /// Shift-immediate instructions carry a 5-bit shamt instead of a signed immediate.
    pub fn is_shift_imm(self) -> bool {
        matches!(self, Kind::Slli | Kind::Srli | Kind::Srai)
    }

    pub fn is_csr(self) -> bool {
        matches!(self, Kind::Csrrw | Kind::Csrrs)
    }

    /// Instructions whose every operand field is fixed at zero.
    pub fn has_no_operands(self) -> bool {
        matches!(self, Kind::Ecall | Kind::Ebreak)
    }

    /// Access width in bytes for memory instructions.
    pub fn access_width(self) -> Option<u32> {
        use Kind::*;
        match self {
            Lb | Lbu | Sb => Some(1),
            Lh | Lhu | Sh => Some(2),
            Lw | Sw | Ldtcheck | Sdtcheck => Some(4),
            _ => None,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// A decoded instruction.
///
/// Fields not used by the instruction's format are zero, so a decoded
/// instruction compares equal to the one that was encoded. `imm` holds the
/// sign-extended immediate, except for shifts (the 5-bit shamt), CSR
/// instructions (the 12-bit CSR address, zero-extended) and U-type (the
/// upper 20 bits in place, low 12 bits zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub kind: Kind,
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
    pub imm: i32,
}

impl Instruction {
    pub fn r(kind: Kind, rd: u8, rs1: u8, rs2: u8) -> Self {
        Instruction {
            kind,
            rd,
            rs1,
            rs2,
            imm: 0,
        }
    }

    pub fn i(kind: Kind, rd: u8, rs1: u8, imm: i32) -> Self {
        Instruction {
            kind,
            rd,
            rs1,
            rs2: 0,
            imm,
        }
    }

    pub fn s(kind: Kind, rs1: u8, rs2: u8, imm: i32) -> Self {
        Instruction {
            kind,
            rd: 0,
            rs1,
            rs2,
            imm,
        }
    }

    pub fn b(kind: Kind, rs1: u8, rs2: u8, imm: i32) -> Self {
        Instruction {
            kind,
            rd: 0,
            rs1,
            rs2,
            imm,
        }
    }

    pub fn u(kind: Kind, rd: u8, imm: i32) -> Self {
        Instruction {
            kind,
            rd,
            rs1: 0,
            rs2: 0,
            imm,
        }
    }

    pub fn j(kind: Kind, rd: u8, imm: i32) -> Self {
        Instruction {
            kind,
            rd,
            rs1: 0,
            rs2: 0,
            imm,
        }
    }

    pub fn nop() -> Self {
        Instruction::i(Kind::Addi, 0, 0, 0)
    }

    pub fn opcode(&self) -> u32 {
        self.kind.opcode()
    }

    pub fn funct3(&self) -> u32 {
        self.kind.funct3()
    }

    pub fn funct7(&self) -> u32 {
        self.kind.funct7()
    }

    pub fn format(&self) -> Format {
        self.kind.format()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("illegal instruction 0x{0:08x}")]
pub struct IllegalInstruction(pub u32);

fn bits(word: u32, hi: u32, lo: u32) -> u32 {
    (word >> lo) & ((1 << (hi - lo + 1)) - 1)
}

fn sign_extend(value: u32, width: u32) -> i32 {
    let shift = 32 - width;
    ((value << shift) as i32) >> shift
}

pub(crate) fn imm_i(word: u32) -> i32 {
    (word as i32) >> 20
}

pub(crate) fn imm_s(word: u32) -> i32 {
    sign_extend((bits(word, 31, 25) << 5) | bits(word, 11, 7), 12)
}

pub(crate) fn imm_b(word: u32) -> i32 {
    let raw = (bits(word, 31, 31) << 12)
        | (bits(word, 7, 7) << 11)
        | (bits(word, 30, 25) << 5)
        | (bits(word, 11, 8) << 1);
    sign_extend(raw, 13)
}

pub(crate) fn imm_u(word: u32) -> i32 {
    (word & 0xffff_f000) as i32
}

pub(crate) fn imm_j(word: u32) -> i32 {
    let raw = (bits(word, 31, 31) << 20)
        | (bits(word, 19, 12) << 12)
        | (bits(word, 20, 20) << 11)
        | (bits(word, 30, 21) << 1);
    sign_extend(raw, 21)
}

/// Decodes one 32-bit instruction word.
pub fn decode(word: u32) -> Result<Instruction, IllegalInstruction> {
    use Kind::*;

    let illegal = IllegalInstruction(word);
    let opcode = bits(word, 6, 0);
    let rd = bits(word, 11, 7) as u8;
    let funct3 = bits(word, 14, 12);
    let rs1 = bits(word, 19, 15) as u8;
    let rs2 = bits(word, 24, 20) as u8;
    let funct7 = bits(word, 31, 25);

    let instr = match opcode {
        OPCODE_LUI => Instruction::u(Lui, rd, imm_u(word)),
        OPCODE_AUIPC => Instruction::u(Auipc, rd, imm_u(word)),
        OPCODE_JAL => Instruction::j(Jal, rd, imm_j(word)),
        OPCODE_JALR if funct3 == 0 => Instruction::i(Jalr, rd, rs1, imm_i(word)),
        OPCODE_BRANCH => {
            let kind = match funct3 {
                0b000 => Beq,
                0b001 => Bne,
                0b100 => Blt,
                0b101 => Bge,
                0b110 => Bltu,
                0b111 => Bgeu,
                _ => return Err(illegal),
            };
            Instruction::b(kind, rs1, rs2, imm_b(word))
        }
        OPCODE_LOAD => {
            let kind = match funct3 {
                0b000 => Lb,
                0b001 => Lh,
                0b010 => Lw,
                0b100 => Lbu,
                0b101 => Lhu,
                _ => return Err(illegal),
            };
            Instruction::i(kind, rd, rs1, imm_i(word))
        }
        OPCODE_STORE => {
            let kind = match funct3 {
                0b000 => Sb,
                0b001 => Sh,
                0b010 => Sw,
                _ => return Err(illegal),
            };
            Instruction::s(kind, rs1, rs2, imm_s(word))
        }
        OPCODE_OP_IMM => match funct3 {
            0b001 | 0b101 => {
                let kind = match (funct3, funct7) {
                    (0b001, 0) => Slli,
                    (0b101, 0) => Srli,
                    (0b101, 0b0100000) => Srai,
                    _ => return Err(illegal),
                };
                Instruction::i(kind, rd, rs1, rs2 as i32)
            }
            _ => {
                let kind = match funct3 {
                    0b000 => Addi,
                    0b010 => Slti,
                    0b011 => Sltiu,
                    0b100 => Xori,
                    0b110 => Ori,
                    _ => Andi,
                };
                Instruction::i(kind, rd, rs1, imm_i(word))
            }
        },
        OPCODE_OP => {
            let kind = match (funct7, funct3) {
                (0, 0b000) => Add,
                (0b0100000, 0b000) => Sub,
                (0, 0b001) => Sll,
                (0, 0b010) => Slt,
                (0, 0b011) => Sltu,
                (0, 0b100) => Xor,
                (0, 0b101) => Srl,
                (0b0100000, 0b101) => Sra,
                (0, 0b110) => Or,
                (0, 0b111) => And,
                _ => return Err(illegal),
            };
            Instruction::r(kind, rd, rs1, rs2)
        }
        OPCODE_SYSTEM => match (word, funct3) {
            (0x0000_0073, _) => Instruction::i(Ecall, 0, 0, 0),
            (0x0010_0073, _) => Instruction::i(Ebreak, 0, 0, 0),
            (_, 0b001) => Instruction::i(Csrrw, rd, rs1, bits(word, 31, 20) as i32),
            (_, 0b010) => Instruction::i(Csrrs, rd, rs1, bits(word, 31, 20) as i32),
            _ => return Err(illegal),
        },
        OPCODE_CUSTOM0 if funct3 == FUNCT3_TAGCHECK => {
            Instruction::i(Ldtcheck, rd, rs1, imm_i(word))
        }
        OPCODE_CUSTOM1 if funct3 == FUNCT3_TAGCHECK => {
            Instruction::s(Sdtcheck, rs1, rs2, imm_s(word))
        }
        _ => return Err(illegal),
    };
    Ok(instr)
}
