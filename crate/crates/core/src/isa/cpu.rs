use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::instr::{decode, Instruction, Kind};
use crate::asm::disassemble;
use crate::dift::{
    self, mark_tainted_region, Fault, HostInput, PolicyConfig, RegionError, TagEvent, TagState,
};

pub const DEFAULT_MEM_SIZE: usize = 1 << 20;

/// Tag exception status; bit 0 is set when `ldtcheck` finds a tainted word.
pub const CSR_TAGSTATUS: u16 = 0x800;
/// Address of the most recent tag mismatch.
pub const CSR_TAGADDR: u16 = 0x801;

pub const REG_RA: u8 = 1;
pub const REG_SP: u8 = 2;
pub const REG_A0: u8 = 10;
pub const REG_A1: u8 = 11;
pub const REG_A7: u8 = 17;

/// `ecall` service number (in a7) for the untrusted host read. Any other
/// service number halts with exit code a0.
pub const SYS_READ: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrapCause {
    IllegalInstruction,
    MisalignedAccess,
    /// Data access outside the memory image.
    AccessFault,
    /// Fetch outside the loaded program or from a misaligned pc.
    InstrFault,
    TagMismatch,
    EnvBreak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trap {
    pub cause: TrapCause,
    pub addr: u32,
}

impl Trap {
    pub fn new(cause: TrapCause, addr: u32) -> Self {
        Trap { cause, addr }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Status {
    Running,
    HaltedOk { code: u32 },
    Trapped(Trap),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoadError {
    #[error("image of {image} bytes does not fit in {mem} bytes of memory")]
    ImageTooLarge { image: usize, mem: usize },
    #[error("memory size {0} is not a multiple of 4 or exceeds 4 GiB")]
    BadMemSize(usize),
    #[error(transparent)]
    Region(#[from] RegionError),
}

/// Architectural state of a single RV32I hart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpuState {
    pub pc: u32,
    regs: [u32; 32],
    mem: Vec<u8>,
    text_end: u32,
    csrs: BTreeMap<u16, u32>,
    pub status: Status,
}

impl CpuState {
    /// Loads `image` at address 0 into a zeroed memory of `mem_size` bytes.
    /// The pc starts at 0 and sp at the top of memory. Instructions may only
    /// be fetched from the loaded image.
    pub fn new(image: &[u8], mem_size: usize) -> Result<Self, LoadError> {
        if mem_size % 4 != 0 || mem_size as u64 > u32::MAX as u64 + 1 {
            return Err(LoadError::BadMemSize(mem_size));
        }
        if image.len() > mem_size {
            return Err(LoadError::ImageTooLarge {
                image: image.len(),
                mem: mem_size,
            });
        }
        let mut mem = vec![0; mem_size];
        mem[..image.len()].copy_from_slice(image);
        let mut regs = [0; 32];
        regs[REG_SP as usize] = mem_size as u32;
        Ok(CpuState {
            pc: 0,
            regs,
            mem,
            text_end: image.len() as u32,
            csrs: BTreeMap::new(),
            status: Status::Running,
        })
    }

    pub fn reg(&self, reg: u8) -> u32 {
        self.regs[reg as usize]
    }

    pub fn regs(&self) -> &[u32; 32] {
        &self.regs
    }

    pub fn set_reg(&mut self, reg: u8, value: u32) {
        if reg != 0 {
            self.regs[reg as usize] = value;
        }
    }

    pub fn mem(&self) -> &[u8] {
        &self.mem
    }

    pub fn mem_size(&self) -> usize {
        self.mem.len()
    }

    pub fn text_end(&self) -> u32 {
        self.text_end
    }

    pub fn is_running(&self) -> bool {
        self.status == Status::Running
    }

    pub fn read_csr(&self, csr: u16) -> u32 {
        self.csrs.get(&csr).copied().unwrap_or(0)
    }

    pub fn write_csr(&mut self, csr: u16, value: u32) {
        self.csrs.insert(csr, value);
    }

    pub fn csrs(&self) -> &BTreeMap<u16, u32> {
        &self.csrs
    }

    fn check(&self, addr: u32, width: u32) -> Result<usize, Trap> {
        if addr % width != 0 {
            return Err(Trap::new(TrapCause::MisalignedAccess, addr));
        }
        if addr as u64 + width as u64 > self.mem.len() as u64 {
            return Err(Trap::new(TrapCause::AccessFault, addr));
        }
        Ok(addr as usize)
    }

    /// Little-endian, zero-extended load of 1, 2 or 4 bytes.
    pub fn load(&self, addr: u32, width: u32) -> Result<u32, Trap> {
        let at = self.check(addr, width)?;
        let mut buf = [0u8; 4];
        buf[..width as usize].copy_from_slice(&self.mem[at..at + width as usize]);
        Ok(u32::from_le_bytes(buf))
    }

    pub fn store(&mut self, addr: u32, width: u32, value: u32) -> Result<(), Trap> {
        let at = self.check(addr, width)?;
        self.mem[at..at + width as usize].copy_from_slice(&value.to_le_bytes()[..width as usize]);
        Ok(())
    }

    pub fn write_bytes(&mut self, addr: u32, bytes: &[u8]) -> Result<(), Trap> {
        let at = addr as usize;
        if at + bytes.len() > self.mem.len() {
            return Err(Trap::new(TrapCause::AccessFault, addr));
        }
        self.mem[at..at + bytes.len()].copy_from_slice(bytes);
        Ok(())
    }

    fn fetch(&self) -> Result<u32, Trap> {
        if self.pc % 4 != 0 || self.pc as u64 + 4 > self.text_end as u64 {
            return Err(Trap::new(TrapCause::InstrFault, self.pc));
        }
        self.load(self.pc, 4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegWrite {
    pub reg: u8,
    pub value: u32,
    pub tag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemWrite {
    pub addr: u32,
    pub len: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemTagWrite {
    pub addr: u32,
    pub tag: bool,
}

/// Everything one step did, in trace form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: u64,
    pub pc: u32,
    pub word: u32,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg_write: Option<RegWrite>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mem_write: Option<MemWrite>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mem_tags: Vec<MemTagWrite>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tag_events: Vec<TagEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap: Option<Trap>,
}

fn alu(kind: Kind, a: u32, b: u32) -> u32 {
    use Kind::*;
    let shamt = b & 31;
    match kind {
        Add | Addi => a.wrapping_add(b),
        Sub => a.wrapping_sub(b),
        Sll | Slli => a << shamt,
        Slt | Slti => ((a as i32) < (b as i32)) as u32,
        Sltu | Sltiu => (a < b) as u32,
        Xor | Xori => a ^ b,
        Srl | Srli => a >> shamt,
        Sra | Srai => ((a as i32) >> shamt) as u32,
        Or | Ori => a | b,
        And | Andi => a & b,
        _ => unreachable!("{kind} is not an ALU op"),
    }
}

fn branch_taken(kind: Kind, a: u32, b: u32) -> bool {
    match kind {
        Kind::Beq => a == b,
        Kind::Bne => a != b,
        Kind::Blt => (a as i32) < (b as i32),
        Kind::Bge => (a as i32) >= (b as i32),
        Kind::Bltu => a < b,
        Kind::Bgeu => a >= b,
        _ => unreachable!("{kind} is not a branch"),
    }
}

fn sign_extend_load(kind: Kind, raw: u32) -> u32 {
    match kind {
        Kind::Lb => raw as u8 as i8 as i32 as u32,
        Kind::Lh => raw as u16 as i16 as i32 as u32,
        _ => raw,
    }
}

/// Executes one instruction. Returns `None` when the hart is not running.
///
/// Faults never escape: they move the hart to `Status::Trapped` with the pc
/// left at the faulting instruction.
pub fn step(
    cpu: &mut CpuState,
    tags: &mut TagState,
    policy: &PolicyConfig,
    input: &mut HostInput,
    step_index: u64,
) -> Option<TraceEvent> {
    if !cpu.is_running() {
        return None;
    }
    let pc = cpu.pc;
    let mut event = TraceEvent {
        step: step_index,
        pc,
        word: 0,
        text: String::new(),
        reg_write: None,
        mem_write: None,
        mem_tags: Vec::new(),
        tag_events: Vec::new(),
        trap: None,
    };

    let word = match cpu.fetch() {
        Ok(w) => w,
        Err(trap) => return Some(trap_out(cpu, event, trap.into())),
    };
    event.word = word;
    event.text = disassemble(word);
    let instr = match decode(word) {
        Ok(i) => i,
        Err(_) => {
            let trap = Trap::new(TrapCause::IllegalInstruction, pc);
            return Some(trap_out(cpu, event, trap.into()));
        }
    };

    match execute(&instr, pc, cpu, tags, policy, input, &mut event) {
        Ok(next_pc) => {
            if cpu.is_running() {
                cpu.pc = next_pc;
            }
            Some(event)
        }
        Err(fault) => Some(trap_out(cpu, event, fault)),
    }
}

fn trap_out(cpu: &mut CpuState, mut event: TraceEvent, fault: Fault) -> TraceEvent {
    cpu.status = Status::Trapped(fault.trap);
    event.trap = Some(fault.trap);
    event.tag_events.extend(fault.event);
    event
}

fn execute(
    instr: &Instruction,
    pc: u32,
    cpu: &mut CpuState,
    tags: &mut TagState,
    policy: &PolicyConfig,
    input: &mut HostInput,
    event: &mut TraceEvent,
) -> Result<u32, Fault> {
    use Kind::*;

    let rs1 = cpu.reg(instr.rs1);
    let rs2 = cpu.reg(instr.rs2);
    let imm = instr.imm as u32;
    let next = pc.wrapping_add(4);

    let write_rd = |cpu: &mut CpuState, tags: &TagState, event: &mut TraceEvent, value: u32| {
        if instr.rd != 0 {
            cpu.set_reg(instr.rd, value);
            event.reg_write = Some(RegWrite {
                reg: instr.rd,
                value,
                tag: tags.reg(instr.rd),
            });
        }
    };

    match instr.kind {
        Ldtcheck => {
            let access = dift::exec_ldtcheck(instr, pc, cpu, tags, policy)?;
            write_rd(cpu, tags, event, access.value);
            event.tag_events.extend(access.events);
            return Ok(next);
        }
        Sdtcheck => {
            let access = dift::exec_sdtcheck(instr, pc, cpu, tags, policy)?;
            event.mem_write = Some(MemWrite {
                addr: access.addr,
                len: 4,
            });
            if policy.ift_enabled {
                event.mem_tags.push(MemTagWrite {
                    addr: access.addr,
                    tag: tags.mem_tag(access.addr),
                });
            }
            event.tag_events.extend(access.events);
            return Ok(next);
        }
        _ => {}
    }

    // Tag effects are computed against the pre-execution state and committed
    // only once the instruction retires.
    let delta = dift::propagate_tags(instr, pc, cpu, tags, policy)?;

    let mut next_pc = next;
    let mut rd_value = None;
    match instr.kind {
        Lui => rd_value = Some(imm),
        Auipc => rd_value = Some(pc.wrapping_add(imm)),
        Jal => {
            rd_value = Some(next);
            next_pc = pc.wrapping_add(imm);
        }
        Jalr => {
            rd_value = Some(next);
            next_pc = rs1.wrapping_add(imm) & !1;
        }
        Beq | Bne | Blt | Bge | Bltu | Bgeu => {
            if branch_taken(instr.kind, rs1, rs2) {
                next_pc = pc.wrapping_add(imm);
            }
        }
        Lb | Lh | Lw | Lbu | Lhu => {
            let addr = rs1.wrapping_add(imm);
            let width = instr.kind.access_width().unwrap();
            rd_value = Some(sign_extend_load(instr.kind, cpu.load(addr, width)?));
        }
        Sb | Sh | Sw => {
            let addr = rs1.wrapping_add(imm);
            let width = instr.kind.access_width().unwrap();
            cpu.store(addr, width, rs2)?;
            event.mem_write = Some(MemWrite { addr, len: width });
        }
        Addi | Slti | Sltiu | Xori | Ori | Andi | Slli | Srli | Srai => {
            rd_value = Some(alu(instr.kind, rs1, imm));
        }
        Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And => {
            rd_value = Some(alu(instr.kind, rs1, rs2));
        }
        Csrrw | Csrrs => {
            let csr = instr.imm as u16;
            let old = cpu.read_csr(csr);
            match instr.kind {
                Csrrw => cpu.write_csr(csr, rs1),
                _ if instr.rs1 != 0 => cpu.write_csr(csr, old | rs1),
                _ => {}
            }
            rd_value = Some(old);
        }
        Ecall => {
            if cpu.reg(REG_A7) == SYS_READ {
                let buf = cpu.reg(REG_A0);
                let len = cpu.reg(REG_A1);
                let read = dift::host_read_tainted(
                    cpu,
                    tags,
                    pc,
                    buf,
                    len,
                    input,
                    policy.taints_host_reads(),
                )?;
                event.mem_write = Some(MemWrite {
                    addr: buf,
                    len: read.count,
                });
                event
                    .mem_tags
                    .extend(read.events.iter().map(|e| MemTagWrite {
                        addr: e.addr,
                        tag: true,
                    }));
                event.tag_events.extend(read.events);
                event.reg_write = Some(RegWrite {
                    reg: REG_A0,
                    value: read.count,
                    tag: false,
                });
            } else {
                cpu.status = Status::HaltedOk {
                    code: cpu.reg(REG_A0),
                };
            }
        }
        Ebreak => return Err(Trap::new(TrapCause::EnvBreak, pc).into()),
        Ldtcheck | Sdtcheck => unreachable!(),
    }

    tags.apply(&delta);
    if let Some((addr, tag)) = delta.mem {
        event.mem_tags.push(MemTagWrite { addr, tag });
    }
    event.tag_events.extend(delta.events);
    if let Some(value) = rd_value {
        write_rd(cpu, tags, event, value);
    }
    Ok(next_pc)
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunEnd {
    Halted,
    Trapped,
    StepLimit,
}

/// Outcome of [`Machine::run`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiftRun {
    pub end: RunEnd,
    pub status: Status,
    pub steps: u64,
    pub final_pc: u32,
    pub regs: [u32; 32],
    pub tainted_regs: Vec<u8>,
    pub tainted_words: Vec<u32>,
    pub protected_words: Vec<u32>,
    pub events: Vec<TagEvent>,
    pub trace: Vec<TraceEvent>,
}

impl DiftRun {
    pub fn mismatch_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == dift::TagEventKind::Mismatch)
            .count()
    }

    pub fn trap(&self) -> Option<Trap> {
        match self.status {
            Status::Trapped(t) => Some(t),
            _ => None,
        }
    }
}

/// A simulator instance: hart, tags, policy and the scripted input channel.
#[derive(Debug, Clone)]
pub struct Machine {
    pub cpu: CpuState,
    pub tags: TagState,
    pub policy: PolicyConfig,
    pub input: HostInput,
    initial_events: Vec<TagEvent>,
    steps: u64,
}

impl Machine {
    /// Builds a machine and taints the policy's configured address ranges.
    pub fn new(
        image: &[u8],
        mem_size: usize,
        policy: PolicyConfig,
        input: impl Into<Vec<u8>>,
    ) -> Result<Self, LoadError> {
        let cpu = CpuState::new(image, mem_size)?;
        let mut tags = TagState::new();
        let mut initial_events = Vec::new();
        if policy.ift_enabled {
            for (lo, hi) in policy.ranges() {
                initial_events.extend(mark_tainted_region(&mut tags, lo, hi, mem_size)?);
            }
        }
        Ok(Machine {
            cpu,
            tags,
            policy,
            input: HostInput::new(input),
            initial_events,
            steps: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self) -> Option<TraceEvent> {
        let event = step(
            &mut self.cpu,
            &mut self.tags,
            &self.policy,
            &mut self.input,
            self.steps,
        )?;
        self.steps += 1;
        Some(event)
    }

    /// Steps until the hart halts or traps, or `max_steps` more steps ran.
    pub fn run(&mut self, max_steps: u64, keep_trace: bool) -> DiftRun {
        assert!(max_steps > 0, "max_steps must be positive");
        let mut events = std::mem::take(&mut self.initial_events);
        let mut trace = Vec::new();
        for _ in 0..max_steps {
            let Some(ev) = self.step() else { break };
            events.extend(ev.tag_events.iter().cloned());
            if keep_trace {
                trace.push(ev);
            }
            if !self.cpu.is_running() {
                break;
            }
        }
        let end = match self.cpu.status {
            Status::Running => RunEnd::StepLimit,
            Status::HaltedOk { .. } => RunEnd::Halted,
            Status::Trapped(_) => RunEnd::Trapped,
        };
        DiftRun {
            end,
            status: self.cpu.status,
            steps: self.steps,
            final_pc: self.cpu.pc,
            regs: *self.cpu.regs(),
            tainted_regs: self.tags.tainted_regs().collect(),
            tainted_words: self.tags.tainted_words().collect(),
            protected_words: self.tags.protected_set().iter().copied().collect(),
            events,
            trace,
        }
    }
}

/// Runs a machine to completion and summarizes it as a report.
pub fn run(machine: &mut Machine, max_steps: u64) -> crate::report::AnalysisReport {
    crate::report::AnalysisReport::from_dift(&machine.run(max_steps, false))
}
