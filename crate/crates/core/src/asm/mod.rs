//! Two-pass assembler for the supported subset.
//!
//! Syntax, one statement per line:
//!
//! ```text
//! label:                     # labels may share a line with a statement
//!     addi a0, zero, 1
//!     sdtcheck ra, 12(sp)
//!     beq t0, t1, done       # branch/jump targets: label or relative offset
//!     .word 0x12345678       # or a label
//!     .ascii "hi\n"
//!     .space 16
//! ```
//!
//! Pseudo-instructions: `nop`, `li rd, imm` (12-bit immediates), `j target`
//! and `ret`. Instructions following byte data are padded up to the next
//! word boundary.

mod disasm;
mod encode;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use disasm::{disassemble, format_instruction};
pub use encode::{encode, imm_bounds, EncodeError};

use crate::isa::{Format, Instruction, Kind, CSR_TAGADDR, CSR_TAGSTATUS};

/// One encoded statement in the listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListingLine {
    pub addr: u32,
    pub word: u32,
    pub source: String,
}

/// An assembled program: flat image loaded at address 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub image: Vec<u8>,
    pub symbols: BTreeMap<String, u32>,
    pub listing: Vec<ListingLine>,
}

impl Program {
    pub fn symbol(&self, name: &str) -> Option<u32> {
        self.symbols.get(name).copied()
    }

    /// Listing text: address, word and source per encoded statement.
    pub fn listing_text(&self) -> String {
        let mut out = String::new();
        for l in &self.listing {
            out.push_str(&format!("{:08x}  {:08x}  {}\n", l.addr, l.word, l.source));
        }
        out
    }

    pub fn symbols_json(&self) -> String {
        serde_json::to_string_pretty(&self.symbols).expect("symbol map serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AsmErrorKind {
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("immediate {value} out of range [{min}, {max}]")]
    ImmediateOutOfRange { value: i64, min: i64, max: i64 },
    #[error("target offset {0} is not a multiple of 2")]
    MisalignedTarget(i64),
    #[error("unknown register `{0}`")]
    BadRegister(String),
    #[error("{0}")]
    Syntax(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.kind)
    }
}

fn syntax(msg: impl Into<String>) -> AsmErrorKind {
    AsmErrorKind::Syntax(msg.into())
}

const ABI_NAMES: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4",
    "a5", "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4",
    "t5", "t6",
];

pub fn parse_register(name: &str) -> Option<u8> {
    if let Some(n) = name.strip_prefix('x') {
        if let Ok(i) = n.parse::<u8>() {
            if i < 32 && (n == "0" || !n.starts_with('0')) {
                return Some(i);
            }
        }
    }
    if name == "fp" {
        return Some(8);
    }
    ABI_NAMES.iter().position(|&a| a == name).map(|i| i as u8)
}

fn parse_int(text: &str) -> Option<i64> {
    let t = text.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let value = if let Some(h) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(h, 16).ok()?
    } else if let Some(b) = body.strip_prefix("0b") {
        i64::from_str_radix(b, 2).ok()?
    } else if !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit()) {
        body.parse().ok()?
    } else {
        return None;
    };
    Some(if neg { -value } else { value })
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Drops a trailing `#` comment, ignoring `#` inside string literals.
fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_str => escaped = true,
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_string(lit: &str) -> Result<Vec<u8>, AsmErrorKind> {
    let inner = lit
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .ok_or_else(|| syntax("expected a quoted string"))?;
    let mut out = Vec::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            let mut buf = [0; 4];
            out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            continue;
        }
        match chars.next() {
            Some('n') => out.push(b'\n'),
            Some('t') => out.push(b'\t'),
            Some('0') => out.push(0),
            Some('\\') => out.push(b'\\'),
            Some('"') => out.push(b'"'),
            Some('x') => {
                let hex: String = chars.by_ref().take(2).collect();
                let b = u8::from_str_radix(&hex, 16)
                    .map_err(|_| syntax(format!("bad escape \\x{hex}")))?;
                out.push(b);
            }
            other => return Err(syntax(format!("bad escape {other:?}"))),
        }
    }
    Ok(out)
}

#[derive(Debug)]
enum Stmt {
    Instr {
        mnemonic: String,
        operands: Vec<String>,
    },
    Word(String),
    Bytes(Vec<u8>),
}

#[derive(Debug)]
struct Item {
    line: usize,
    addr: u32,
    source: String,
    stmt: Stmt,
}

fn split_operands(rest: &str) -> Vec<String> {
    if rest.trim().is_empty() {
        return Vec::new();
    }
    rest.split(',').map(|s| s.trim().to_string()).collect()
}

/// Assembles source text into a flat image.
pub fn assemble(source: &str) -> Result<Program, AsmError> {
    let mut symbols = BTreeMap::new();
    let mut items = Vec::new();
    let mut addr: u32 = 0;

    // Pass 1: lay out statements and collect labels.
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let err = |kind| AsmError { line, kind };
        let mut text = strip_comment(raw).trim();

        while let Some(colon) = text.find(':') {
            let label = text[..colon].trim();
            if !is_identifier(label) || text[..colon].contains('"') {
                break;
            }
            if symbols.insert(label.to_string(), addr).is_some() {
                return Err(err(AsmErrorKind::DuplicateLabel(label.to_string())));
            }
            text = text[colon + 1..].trim();
        }
        if text.is_empty() {
            continue;
        }

        let (head, rest) = match text.find(char::is_whitespace) {
            Some(i) => (&text[..i], text[i..].trim()),
            None => (text, ""),
        };
        let stmt = match head {
            ".word" => Stmt::Word(rest.to_string()),
            ".ascii" => Stmt::Bytes(parse_string(rest).map_err(err)?),
            ".asciz" => {
                let mut b = parse_string(rest).map_err(err)?;
                b.push(0);
                Stmt::Bytes(b)
            }
            ".space" => {
                let n = parse_int(rest)
                    .filter(|&n| (0..=1 << 24).contains(&n))
                    .ok_or_else(|| err(syntax(format!("bad .space size `{rest}`"))))?;
                Stmt::Bytes(vec![0; n as usize])
            }
            d if d.starts_with('.') => {
                return Err(err(syntax(format!("unknown directive `{d}`"))));
            }
            m => Stmt::Instr {
                mnemonic: m.to_ascii_lowercase(),
                operands: split_operands(rest),
            },
        };
        let size = match &stmt {
            Stmt::Bytes(b) => b.len() as u32,
            Stmt::Instr { .. } | Stmt::Word(_) => {
                // pad to a word boundary; labels on this line follow the statement
                let aligned = (addr + 3) & !3;
                if aligned != addr {
                    for v in symbols.values_mut() {
                        if *v == addr {
                            *v = aligned;
                        }
                    }
                    items.push(Item {
                        line,
                        addr,
                        source: String::new(),
                        stmt: Stmt::Bytes(vec![0; (aligned - addr) as usize]),
                    });
                    addr = aligned;
                }
                4
            }
        };
        items.push(Item {
            line,
            addr,
            source: text.to_string(),
            stmt,
        });
        addr = addr
            .checked_add(size)
            .ok_or_else(|| err(syntax("program exceeds the address space")))?;
    }

    // Pass 2: encode.
    let mut image = Vec::with_capacity(addr as usize);
    let mut listing = Vec::new();
    for item in items {
        let err = |kind| AsmError {
            line: item.line,
            kind,
        };
        let word = match &item.stmt {
            Stmt::Bytes(b) => {
                image.extend_from_slice(b);
                continue;
            }
            Stmt::Word(v) => match parse_int(v) {
                Some(n) if (i32::MIN as i64..=u32::MAX as i64).contains(&n) => n as u32,
                Some(n) => {
                    return Err(err(AsmErrorKind::ImmediateOutOfRange {
                        value: n,
                        min: i32::MIN as i64,
                        max: u32::MAX as i64,
                    }))
                }
                None if is_identifier(v) => *symbols
                    .get(v.as_str())
                    .ok_or_else(|| err(AsmErrorKind::UndefinedLabel(v.clone())))?,
                None => return Err(err(syntax(format!("bad .word value `{v}`")))),
            },
            Stmt::Instr { mnemonic, operands } => {
                let instr =
                    parse_instruction(mnemonic, operands, item.addr, &symbols).map_err(err)?;
                encode(&instr).map_err(|e| err(encode_error(e)))?
            }
        };
        image.extend_from_slice(&word.to_le_bytes());
        listing.push(ListingLine {
            addr: item.addr,
            word,
            source: item.source,
        });
    }

    Ok(Program {
        image,
        symbols,
        listing,
    })
}

fn encode_error(e: EncodeError) -> AsmErrorKind {
    match e {
        EncodeError::Immediate {
            value, min, max, ..
        } => AsmErrorKind::ImmediateOutOfRange { value, min, max },
        EncodeError::OddOffset { value, .. } => AsmErrorKind::MisalignedTarget(value as i64),
        other => syntax(other.to_string()),
    }
}

fn reg(op: &str) -> Result<u8, AsmErrorKind> {
    parse_register(op).ok_or_else(|| AsmErrorKind::BadRegister(op.to_string()))
}

fn imm_in(value: i64, kind: Kind) -> Result<i32, AsmErrorKind> {
    let (min, max) = imm_bounds(kind);
    if value < min || value > max {
        return Err(AsmErrorKind::ImmediateOutOfRange { value, min, max });
    }
    Ok(value as i32)
}

fn immediate(op: &str) -> Result<i64, AsmErrorKind> {
    parse_int(op).ok_or_else(|| syntax(format!("expected an immediate, found `{op}`")))
}

/// `imm(reg)` or `(reg)`.
fn mem_operand(op: &str) -> Result<(i64, u8), AsmErrorKind> {
    let open = op
        .find('(')
        .ok_or_else(|| syntax(format!("expected imm(reg), found `{op}`")))?;
    let close = op
        .rfind(')')
        .filter(|&c| c > open && op[c + 1..].trim().is_empty())
        .ok_or_else(|| syntax(format!("expected imm(reg), found `{op}`")))?;
    let off = op[..open].trim();
    let off = if off.is_empty() { 0 } else { immediate(off)? };
    Ok((off, reg(op[open + 1..close].trim())?))
}

/// A label resolves to its pc-relative offset; a number is taken as the offset.
fn target(op: &str, pc: u32, symbols: &BTreeMap<String, u32>) -> Result<i64, AsmErrorKind> {
    if let Some(n) = parse_int(op) {
        return Ok(n);
    }
    if is_identifier(op) {
        let addr = symbols
            .get(op)
            .ok_or_else(|| AsmErrorKind::UndefinedLabel(op.to_string()))?;
        return Ok(*addr as i64 - pc as i64);
    }
    Err(syntax(format!("bad target `{op}`")))
}

fn csr(op: &str) -> Result<i64, AsmErrorKind> {
    match op {
        "tagstatus" => Ok(CSR_TAGSTATUS as i64),
        "tagaddr" => Ok(CSR_TAGADDR as i64),
        _ => immediate(op),
    }
}

fn expect(ops: &[String], n: usize, mnemonic: &str) -> Result<(), AsmErrorKind> {
    if ops.len() == n {
        Ok(())
    } else {
        Err(syntax(format!(
            "`{mnemonic}` takes {n} operand(s), found {}",
            ops.len()
        )))
    }
}

fn parse_instruction(
    mnemonic: &str,
    ops: &[String],
    pc: u32,
    symbols: &BTreeMap<String, u32>,
) -> Result<Instruction, AsmErrorKind> {
    match mnemonic {
        "nop" => {
            expect(ops, 0, mnemonic)?;
            return Ok(Instruction::nop());
        }
        "li" => {
            expect(ops, 2, mnemonic)?;
            let imm = imm_in(immediate(&ops[1])?, Kind::Addi)?;
            return Ok(Instruction::i(Kind::Addi, reg(&ops[0])?, 0, imm));
        }
        "j" => {
            expect(ops, 1, mnemonic)?;
            let off = target(&ops[0], pc, symbols)?;
            return Ok(Instruction::j(Kind::Jal, 0, branch_offset(off, Kind::Jal)?));
        }
        "ret" => {
            expect(ops, 0, mnemonic)?;
            return Ok(Instruction::i(Kind::Jalr, 0, 1, 0));
        }
        _ => {}
    }

    let kind = Kind::from_mnemonic(mnemonic)
        .ok_or_else(|| AsmErrorKind::UnknownMnemonic(mnemonic.to_string()))?;
    if kind.has_no_operands() {
        expect(ops, 0, mnemonic)?;
        return Ok(Instruction::i(kind, 0, 0, 0));
    }
    if kind.is_csr() {
        expect(ops, 3, mnemonic)?;
        let addr = imm_in(csr(&ops[1])?, kind)?;
        return Ok(Instruction::i(kind, reg(&ops[0])?, reg(&ops[2])?, addr));
    }
    if kind.is_load() || kind == Kind::Ldtcheck || kind == Kind::Jalr {
        // jalr also accepts `jalr rd, rs1, imm`
        if kind == Kind::Jalr && ops.len() == 3 {
            let imm = imm_in(immediate(&ops[2])?, kind)?;
            return Ok(Instruction::i(kind, reg(&ops[0])?, reg(&ops[1])?, imm));
        }
        expect(ops, 2, mnemonic)?;
        let (off, base) = mem_operand(&ops[1])?;
        return Ok(Instruction::i(
            kind,
            reg(&ops[0])?,
            base,
            imm_in(off, kind)?,
        ));
    }

    match kind.format() {
        Format::R => {
            expect(ops, 3, mnemonic)?;
            Ok(Instruction::r(
                kind,
                reg(&ops[0])?,
                reg(&ops[1])?,
                reg(&ops[2])?,
            ))
        }
        Format::I => {
            expect(ops, 3, mnemonic)?;
            let imm = imm_in(immediate(&ops[2])?, kind)?;
            Ok(Instruction::i(kind, reg(&ops[0])?, reg(&ops[1])?, imm))
        }
        Format::S => {
            expect(ops, 2, mnemonic)?;
            let (off, base) = mem_operand(&ops[1])?;
            Ok(Instruction::s(
                kind,
                base,
                reg(&ops[0])?,
                imm_in(off, kind)?,
            ))
        }
        Format::B => {
            expect(ops, 3, mnemonic)?;
            let off = target(&ops[2], pc, symbols)?;
            Ok(Instruction::b(
                kind,
                reg(&ops[0])?,
                reg(&ops[1])?,
                branch_offset(off, kind)?,
            ))
        }
        Format::U => {
            expect(ops, 2, mnemonic)?;
            let value = immediate(&ops[1])?;
            if !(0..=0xfffff).contains(&value) {
                return Err(AsmErrorKind::ImmediateOutOfRange {
                    value,
                    min: 0,
                    max: 0xfffff,
                });
            }
            Ok(Instruction::u(
                kind,
                reg(&ops[0])?,
                (value << 12) as u32 as i32,
            ))
        }
        Format::J => {
            let (rd, t) = match ops.len() {
                1 => (1, &ops[0]),
                2 => (reg(&ops[0])?, &ops[1]),
                n => return Err(syntax(format!("`jal` takes 1 or 2 operands, found {n}"))),
            };
            let off = target(t, pc, symbols)?;
            Ok(Instruction::j(kind, rd, branch_offset(off, kind)?))
        }
    }
}

fn branch_offset(off: i64, kind: Kind) -> Result<i32, AsmErrorKind> {
    let imm = imm_in(off, kind)?;
    if imm % 2 != 0 {
        return Err(AsmErrorKind::MisalignedTarget(off));
    }
    Ok(imm)
}
