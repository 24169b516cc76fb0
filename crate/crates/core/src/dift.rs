//! Word-granular 1-bit tag tracking over registers and memory.
//!
//! Tags are initialized from untrusted sources (the host read service and
//! configured address ranges), propagated by a fixed rule table on every
//! standard instruction, and checked by `ldtcheck`. `sdtcheck` stores a word
//! and records its tag, marking the slot as protected.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::isa::{CpuState, Instruction, Kind, Trap, TrapCause, CSR_TAGADDR, CSR_TAGSTATUS};

/// Register and memory tags. Absent memory words carry tag 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagState {
    reg_tags: u32,
    tainted: BTreeSet<u32>,
    protected: BTreeSet<u32>,
}

pub fn word_of(addr: u32) -> u32 {
    addr & !3
}

impl TagState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reg(&self, reg: u8) -> bool {
        self.reg_tags & (1 << reg) != 0
    }

    /// Writes to x0 are dropped.
    pub fn set_reg(&mut self, reg: u8, tag: bool) {
        if reg == 0 {
            return;
        }
        if tag {
            self.reg_tags |= 1 << reg;
        } else {
            self.reg_tags &= !(1 << reg);
        }
    }

    pub fn mem_tag(&self, addr: u32) -> bool {
        self.tainted.contains(&word_of(addr))
    }

    pub fn set_mem_tag(&mut self, addr: u32, tag: bool) {
        let word = word_of(addr);
        if tag {
            self.tainted.insert(word);
        } else {
            self.tainted.remove(&word);
        }
    }

    pub fn is_protected(&self, addr: u32) -> bool {
        self.protected.contains(&word_of(addr))
    }

    pub fn protected_set(&self) -> &BTreeSet<u32> {
        &self.protected
    }

    pub fn tainted_words(&self) -> impl Iterator<Item = u32> + '_ {
        self.tainted.iter().copied()
    }

    pub fn tainted_word_count(&self) -> usize {
        self.tainted.len()
    }

    pub fn tainted_regs(&self) -> impl Iterator<Item = u8> + '_ {
        (0..32u8).filter(move |&r| self.reg(r))
    }

    pub fn apply(&mut self, delta: &TagDelta) {
        if let Some((reg, tag)) = delta.reg {
            self.set_reg(reg, tag);
        }
        if let Some((addr, tag)) = delta.mem {
            self.set_mem_tag(addr, tag);
        }
    }
}

/// Where untrusted data enters the machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaintSource {
    /// Bytes delivered by the host read service.
    EcallRead,
    /// Words in `[lo, hi)` start out tainted.
    AddressRange { lo: u32, hi: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub taint_sources: Vec<TaintSource>,
    pub trap_on_tainted_jump_target: bool,
    pub warn_on_tainted_branch: bool,
    pub ift_enabled: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            taint_sources: vec![TaintSource::EcallRead],
            trap_on_tainted_jump_target: true,
            warn_on_tainted_branch: false,
            ift_enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("malformed policy: {0}")]
    Parse(String),
    #[error("taint range [{lo:#x}, {hi:#x}) is not word-aligned")]
    Unaligned { lo: u32, hi: u32 },
    #[error("taint range [{lo:#x}, {hi:#x}) is inverted")]
    Inverted { lo: u32, hi: u32 },
    #[error("taint ranges [{0:#x}, ..) and [{1:#x}, ..) overlap")]
    Overlap(u32, u32),
}

impl PolicyConfig {
    /// The policy with every tracking feature switched off.
    pub fn disabled() -> Self {
        PolicyConfig {
            ift_enabled: false,
            ..PolicyConfig::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PolicyError> {
        let policy: PolicyConfig =
            toml::from_str(text).map_err(|e| PolicyError::Parse(e.to_string()))?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn taints_host_reads(&self) -> bool {
        self.ift_enabled && self.taint_sources.contains(&TaintSource::EcallRead)
    }

    pub fn ranges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.taint_sources.iter().filter_map(|s| match *s {
            TaintSource::AddressRange { lo, hi } => Some((lo, hi)),
            TaintSource::EcallRead => None,
        })
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let mut ranges: Vec<(u32, u32)> = self.ranges().collect();
        for &(lo, hi) in &ranges {
            if lo % 4 != 0 || hi % 4 != 0 {
                return Err(PolicyError::Unaligned { lo, hi });
            }
            if lo > hi {
                return Err(PolicyError::Inverted { lo, hi });
            }
        }
        ranges.sort_unstable();
        for pair in ranges.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(PolicyError::Overlap(pair[0].0, pair[1].0));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagEventKind {
    SourceMarked,
    Propagated,
    ProtectedStore,
    Mismatch,
    TaintedBranchWarn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagEvent {
    pub kind: TagEventKind,
    pub pc: u32,
    pub addr: u32,
    pub tag: bool,
    /// Destination register, for register propagation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg: Option<u8>,
}

impl TagEvent {
    fn mem(kind: TagEventKind, pc: u32, addr: u32, tag: bool) -> Self {
        TagEvent {
            kind,
            pc,
            addr,
            tag,
            reg: None,
        }
    }

    fn reg(pc: u32, reg: u8) -> Self {
        TagEvent {
            kind: TagEventKind::Propagated,
            pc,
            addr: 0,
            tag: true,
            reg: Some(reg),
        }
    }
}

/// Tag writes produced by one instruction, applied only if it retires.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagDelta {
    pub reg: Option<(u8, bool)>,
    pub mem: Option<(u32, bool)>,
    pub events: Vec<TagEvent>,
}

/// A fault raised while executing tag logic. Policy violations carry the
/// `Mismatch` event that explains them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault {
    pub trap: Trap,
    pub event: Option<TagEvent>,
}

impl From<Trap> for Fault {
    fn from(trap: Trap) -> Self {
        Fault { trap, event: None }
    }
}

fn effective_addr(cpu: &CpuState, instr: &Instruction) -> u32 {
    cpu.reg(instr.rs1).wrapping_add(instr.imm as u32)
}

/// Computes the tag effects of a standard instruction executing at `pc`
/// against the pre-execution machine state.
pub fn propagate_tags(
    instr: &Instruction,
    pc: u32,
    cpu: &CpuState,
    tags: &TagState,
    policy: &PolicyConfig,
) -> Result<TagDelta, Fault> {
    use Kind::*;

    debug_assert!(!matches!(instr.kind, Ldtcheck | Sdtcheck));
    let mut delta = TagDelta::default();
    if !policy.ift_enabled {
        return Ok(delta);
    }

    let t1 = tags.reg(instr.rs1);
    let t2 = tags.reg(instr.rs2);
    let set_rd = |delta: &mut TagDelta, tag: bool| {
        if instr.rd == 0 {
            return;
        }
        delta.reg = Some((instr.rd, tag));
        if tag {
            delta.events.push(TagEvent::reg(pc, instr.rd));
        }
    };

    match instr.kind {
        Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And => set_rd(&mut delta, t1 || t2),
        Addi | Slti | Sltiu | Xori | Ori | Andi | Slli | Srli | Srai => set_rd(&mut delta, t1),
        Lui | Auipc => set_rd(&mut delta, false),
        Lb | Lh | Lw | Lbu | Lhu => {
            let addr = effective_addr(cpu, instr);
            set_rd(&mut delta, tags.mem_tag(addr) || t1);
        }
        Sb | Sh | Sw => {
            let addr = word_of(effective_addr(cpu, instr));
            // A partial store leaves the other bytes of the word in place.
            let tag = if instr.kind == Sw {
                t2
            } else {
                t2 || tags.mem_tag(addr)
            };
            delta.mem = Some((addr, tag));
            if tag {
                delta
                    .events
                    .push(TagEvent::mem(TagEventKind::Propagated, pc, addr, true));
            }
        }
        Jal => set_rd(&mut delta, false),
        Jalr => {
            if t1 && policy.trap_on_tainted_jump_target {
                let target = effective_addr(cpu, instr) & !1;
                return Err(Fault {
                    trap: Trap::new(TrapCause::TagMismatch, target),
                    event: Some(TagEvent::mem(TagEventKind::Mismatch, pc, target, true)),
                });
            }
            set_rd(&mut delta, false);
        }
        Beq | Bne | Blt | Bge | Bltu | Bgeu => {
            if policy.warn_on_tainted_branch && (t1 || t2) {
                delta
                    .events
                    .push(TagEvent::mem(TagEventKind::TaintedBranchWarn, pc, 0, true));
            }
        }
        Csrrw | Csrrs => set_rd(&mut delta, false),
        Ecall | Ebreak | Ldtcheck | Sdtcheck => {}
    }
    Ok(delta)
}

/// What a checked access touched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Access {
    pub addr: u32,
    pub value: u32,
    pub events: Vec<TagEvent>,
}

/// `sdtcheck rs2, imm(rs1)`: store the word and record its tag.
pub fn exec_sdtcheck(
    instr: &Instruction,
    pc: u32,
    cpu: &mut CpuState,
    tags: &mut TagState,
    policy: &PolicyConfig,
) -> Result<Access, Fault> {
    debug_assert_eq!(instr.kind, Kind::Sdtcheck);
    let addr = effective_addr(cpu, instr);
    let value = cpu.reg(instr.rs2);
    cpu.store(addr, 4, value)?;

    let mut events = Vec::new();
    if policy.ift_enabled {
        let tag = tags.reg(instr.rs2);
        tags.set_mem_tag(addr, tag);
        tags.protected.insert(addr);
        events.push(TagEvent::mem(TagEventKind::ProtectedStore, pc, addr, tag));
    }
    Ok(Access {
        addr,
        value,
        events,
    })
}

/// `ldtcheck rd, imm(rs1)`: load the word unless its tag is set.
///
/// A set tag raises `TagMismatch`, latches the tag CSRs and leaves `rd`
/// untouched. A successful load clears `rd`'s tag.
pub fn exec_ldtcheck(
    instr: &Instruction,
    pc: u32,
    cpu: &mut CpuState,
    tags: &mut TagState,
    policy: &PolicyConfig,
) -> Result<Access, Fault> {
    debug_assert_eq!(instr.kind, Kind::Ldtcheck);
    let addr = effective_addr(cpu, instr);
    let value = cpu.load(addr, 4)?;

    if policy.ift_enabled && tags.mem_tag(addr) {
        let status = cpu.read_csr(CSR_TAGSTATUS);
        cpu.write_csr(CSR_TAGSTATUS, status | 1);
        cpu.write_csr(CSR_TAGADDR, addr);
        return Err(Fault {
            trap: Trap::new(TrapCause::TagMismatch, addr),
            event: Some(TagEvent::mem(TagEventKind::Mismatch, pc, addr, true)),
        });
    }
    cpu.set_reg(instr.rd, value);
    if policy.ift_enabled {
        tags.set_reg(instr.rd, false);
    }
    Ok(Access {
        addr,
        value,
        events: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegionError {
    #[error("region [{lo:#x}, {hi:#x}) is not word-aligned")]
    Unaligned { lo: u32, hi: u32 },
    #[error("region [{lo:#x}, {hi:#x}) is inverted")]
    Inverted { lo: u32, hi: u32 },
    #[error("region [{lo:#x}, {hi:#x}) exceeds the {size}-byte memory image")]
    OutOfRange { lo: u32, hi: u32, size: usize },
}

/// Taints every word in `[lo, hi)`.
pub fn mark_tainted_region(
    tags: &mut TagState,
    lo: u32,
    hi: u32,
    mem_size: usize,
) -> Result<Vec<TagEvent>, RegionError> {
    if lo % 4 != 0 || hi % 4 != 0 {
        return Err(RegionError::Unaligned { lo, hi });
    }
    if lo > hi {
        return Err(RegionError::Inverted { lo, hi });
    }
    if hi as usize > mem_size {
        return Err(RegionError::OutOfRange {
            lo,
            hi,
            size: mem_size,
        });
    }
    let events = (lo..hi)
        .step_by(4)
        .map(|addr| {
            tags.set_mem_tag(addr, true);
            TagEvent::mem(TagEventKind::SourceMarked, 0, addr, true)
        })
        .collect();
    Ok(events)
}

/// Scripted bytes for the host read service, consumed front to back.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HostInput {
    data: Vec<u8>,
    pos: usize,
}

impl HostInput {
    pub fn new(data: impl Into<Vec<u8>>) -> Self {
        HostInput {
            data: data.into(),
            pos: 0,
        }
    }

    pub fn remaining(&self) -> &[u8] {
        &self.data[self.pos..]
    }

    fn take(&mut self, max: usize) -> &[u8] {
        let n = max.min(self.data.len() - self.pos);
        let start = self.pos;
        self.pos += n;
        &self.data[start..start + n]
    }
}

/// Result of one host read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostRead {
    pub count: u32,
    pub events: Vec<TagEvent>,
}

/// The untrusted input channel: copies up to `len` scripted bytes to `buf`,
/// taints every touched word when `taint` is set, and returns the byte count
/// in `a0` with a clear tag.
pub fn host_read_tainted(
    cpu: &mut CpuState,
    tags: &mut TagState,
    pc: u32,
    buf: u32,
    len: u32,
    input: &mut HostInput,
    taint: bool,
) -> Result<HostRead, Trap> {
    if buf as u64 + len as u64 > cpu.mem_size() as u64 {
        return Err(Trap::new(TrapCause::AccessFault, buf));
    }
    let bytes = input.take(len as usize);
    let count = bytes.len() as u32;
    cpu.write_bytes(buf, bytes)?;

    let mut events = Vec::new();
    if taint && count > 0 {
        let first = word_of(buf);
        let last = word_of(buf + count - 1);
        for addr in (first..=last).step_by(4) {
            tags.set_mem_tag(addr, true);
            events.push(TagEvent::mem(TagEventKind::SourceMarked, pc, addr, true));
        }
    }
    cpu.set_reg(crate::isa::REG_A0, count);
    tags.set_reg(crate::isa::REG_A0, false);
    Ok(HostRead { count, events })
}
