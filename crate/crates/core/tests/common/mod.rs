#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use taintriv::asm::encode;
use taintriv::asm::imm_bounds;
use taintriv::dift::{PolicyConfig, TaintSource};
use taintriv::glift::{simulate_ift, vector_from_index, GateType, NetId, Netlist, TruthTable};
use taintriv::isa::{Format, Instruction, Kind, Machine, Status};

/// Any well-formed instruction of `kind`, fields drawn at random.
pub fn random_of_kind(rng: &mut impl Rng, kind: Kind) -> Instruction {
    let (lo, hi) = imm_bounds(kind);
    let mut imm = rng.gen_range(lo..=hi) as i32;
    match kind.format() {
        Format::B | Format::J => imm &= !1,
        Format::U => imm &= !0xfff,
        _ => {}
    }
    let rd = rng.gen_range(0..32);
    let rs1 = rng.gen_range(0..32);
    let rs2 = rng.gen_range(0..32);
    if kind.has_no_operands() {
        return Instruction::i(kind, 0, 0, 0);
    }
    match kind.format() {
        Format::R => Instruction::r(kind, rd, rs1, rs2),
        Format::I => Instruction::i(kind, rd, rs1, imm),
        Format::S => Instruction::s(kind, rs1, rs2, imm),
        Format::B => Instruction::b(kind, rs1, rs2, imm),
        Format::U => Instruction::u(kind, rd, imm),
        Format::J => Instruction::j(kind, rd, imm),
    }
}

pub fn random_instruction(rng: &mut impl Rng) -> Instruction {
    let kind = *Kind::ALL.choose(rng).unwrap();
    random_of_kind(rng, kind)
}

pub fn image_of(prog: &[Instruction]) -> Vec<u8> {
    prog.iter()
        .flat_map(|i| {
            encode(i)
                .expect("generated instruction encodes")
                .to_le_bytes()
        })
        .collect()
}

/// Data region of the straight-line programs; `x1` holds its base.
pub const DATA: u32 = 0x1000;
pub const DATA_WORDS: u32 = 16;
/// The taint source: the first word of the data region.
pub const SOURCE: u32 = DATA;
pub const MEM: usize = 0x2000;

const ALU: [Kind; 21] = [
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
    Kind::Addi,
    Kind::Slti,
    Kind::Sltiu,
    Kind::Xori,
    Kind::Ori,
    Kind::Andi,
    Kind::Slli,
    Kind::Srli,
    Kind::Srai,
    Kind::Lui,
    Kind::Auipc,
];
const LOADS: [Kind; 6] = [
    Kind::Lb,
    Kind::Lh,
    Kind::Lw,
    Kind::Lbu,
    Kind::Lhu,
    Kind::Ldtcheck,
];
const STORES: [Kind; 4] = [Kind::Sb, Kind::Sh, Kind::Sw, Kind::Sdtcheck];

fn data_offset(rng: &mut impl Rng, kind: Kind) -> i32 {
    let width = kind.access_width().unwrap();
    // half of all accesses land in the source word
    let words = if rng.gen_bool(0.5) { 1 } else { DATA_WORDS };
    (rng.gen_range(0..words * 4 / width) * width) as i32
}

/// A random straight-line program: a prelude that points `x1` at the data
/// region and seeds a few registers, `len` random ALU/load/store
/// instructions that never write `x1`, then a halting `ecall`.
pub fn straight_line(rng: &mut impl Rng, len: usize) -> Vec<Instruction> {
    let mut prog = vec![Instruction::u(Kind::Lui, 1, DATA as i32)];
    for rd in 5..10 {
        prog.push(Instruction::i(
            Kind::Addi,
            rd,
            0,
            rng.gen_range(-2048..2048),
        ));
    }
    let pick_rd = |rng: &mut dyn rand::RngCore| loop {
        let r = rng.gen_range(0..32u8);
        if r != 1 {
            return r;
        }
    };
    for _ in 0..len {
        let roll = rng.gen_range(0..10);
        let instr = if roll < 6 {
            let kind = *ALU.choose(rng).unwrap();
            let mut i = random_of_kind(rng, kind);
            i.rd = pick_rd(rng);
            i
        } else if roll < 8 {
            let kind = *LOADS.choose(rng).unwrap();
            Instruction::i(kind, pick_rd(rng), 1, data_offset(rng, kind))
        } else {
            let kind = *STORES.choose(rng).unwrap();
            Instruction::s(kind, 1, rng.gen_range(0..32), data_offset(rng, kind))
        };
        prog.push(instr);
    }
    prog.push(Instruction::i(Kind::Addi, 17, 0, 93));
    prog.push(Instruction::i(Kind::Ecall, 0, 0, 0));
    prog
}

pub fn source_policy() -> PolicyConfig {
    PolicyConfig {
        taint_sources: vec![TaintSource::AddressRange {
            lo: SOURCE,
            hi: SOURCE + 4,
        }],
        ..PolicyConfig::default()
    }
}

pub struct Outcome {
    pub status: Status,
    pub regs: [u32; 32],
    pub tags: u32,
    pub mem: Vec<u8>,
}

/// Runs `prog` with the source word preset to `source`.
pub fn run_with_source(prog: &[Instruction], policy: &PolicyConfig, source: u32) -> Outcome {
    let mut m = Machine::new(&image_of(prog), MEM, policy.clone(), Vec::new()).unwrap();
    m.cpu.store(SOURCE, 4, source).unwrap();
    let run = m.run(10_000, false);
    let tags = (0..32u8)
        .filter(|&r| m.tags.reg(r))
        .fold(0, |acc, r| acc | 1 << r);
    Outcome {
        status: run.status,
        regs: run.regs,
        tags,
        mem: m.cpu.mem().to_vec(),
    }
}

/// Every register whose final value depends on the source word must end
/// up tagged. Returns the offending registers.
pub fn dift_false_negatives(prog: &[Instruction], values: &[u32]) -> Vec<u8> {
    let policy = source_policy();
    let runs: Vec<Outcome> = values
        .iter()
        .map(|&v| run_with_source(prog, &policy, v))
        .collect();
    let mut missed = Vec::new();
    for r in 0..32u8 {
        let differs = runs
            .iter()
            .any(|o| o.regs[r as usize] != runs[0].regs[r as usize]);
        if differs && runs.iter().any(|o| o.tags >> r & 1 == 0) {
            missed.push(r);
        }
    }
    missed
}

/// A random acyclic netlist: `inputs` primary inputs and `gates` gates of
/// every combinational type, wide gates up to four inputs. Every gate that
/// drives nothing becomes an output.
pub fn random_netlist(rng: &mut impl Rng, inputs: usize, gates: usize) -> Netlist {
    let mut names: Vec<String> = (0..inputs).map(|i| format!("i{i}")).collect();
    let mut defs: Vec<(String, GateType, Vec<String>)> = Vec::new();
    let mut used = vec![false; inputs + gates];
    for g in 0..gates {
        let kind = *GateType::COMBINATIONAL.choose(rng).unwrap();
        let arity = if kind.is_unary() {
            1
        } else {
            rng.gen_range(2..=4)
        };
        let ins: Vec<String> = (0..arity)
            .map(|_| {
                let k = rng.gen_range(0..names.len());
                used[k] = true;
                names[k].clone()
            })
            .collect();
        let out = format!("g{g}");
        names.push(out.clone());
        defs.push((out, kind, ins));
    }
    let outputs: Vec<&str> = (inputs..inputs + gates)
        .filter(|&k| !used[k])
        .map(|k| names[k].as_str())
        .collect();
    let input_refs: Vec<&str> = names[..inputs].iter().map(String::as_str).collect();
    let ins: Vec<Vec<&str>> = defs
        .iter()
        .map(|(_, _, i)| i.iter().map(String::as_str).collect())
        .collect();
    let gate_refs: Vec<(&str, GateType, &[&str])> = defs
        .iter()
        .zip(&ins)
        .map(|((o, k, _), i)| (o.as_str(), *k, i.as_slice()))
        .collect();
    Netlist::build("random", &input_refs, &outputs, &gate_refs).expect("generated netlist is valid")
}

/// Counts (vector, output) pairs where the oracle sees influence but the
/// shadow logic reports no taint. Enumerates every input vector.
pub fn glift_false_negatives(netlist: &Netlist, tainted_positions: &[usize]) -> usize {
    let width = netlist.inputs().len();
    let table = TruthTable::new(netlist).unwrap();
    let taints: Vec<bool> = (0..width).map(|k| tainted_positions.contains(&k)).collect();
    let mut missed = 0;
    for base in 0..1u64 << width {
        let tv = simulate_ift(netlist, &vector_from_index(base, width), &taints).unwrap();
        let influenced = table.influence(base, tainted_positions);
        for (k, &o) in table.outputs().iter().enumerate() {
            if influenced[k] && !tv.taint(o) {
                missed += 1;
            }
        }
    }
    missed
}

/// One-gate netlist `o = kind(i0, ..)`.
pub fn single_gate(kind: GateType, arity: usize) -> Netlist {
    let names: Vec<String> = (0..arity).map(|i| format!("i{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Netlist::build(kind.name(), &refs, &["o"], &[("o", kind, &refs)]).unwrap()
}

pub fn output(netlist: &Netlist) -> NetId {
    netlist.outputs()[0]
}
