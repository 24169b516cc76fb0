//! RV32I execution substrate: decoder, hart state and the step loop.

mod cpu;
mod instr;

pub use cpu::{
    run, step, CpuState, DiftRun, LoadError, Machine, MemTagWrite, MemWrite, RegWrite, RunEnd,
    Status, TraceEvent, Trap, TrapCause, CSR_TAGADDR, CSR_TAGSTATUS, DEFAULT_MEM_SIZE, REG_A0,
    REG_A1, REG_A7, REG_RA, REG_SP, SYS_READ,
};
pub use instr::{
    decode, Format, IllegalInstruction, Instruction, Kind, FUNCT3_TAGCHECK, OPCODE_CUSTOM0,
    OPCODE_CUSTOM1,
};
