//! Integrated coarse- and fine-grained information flow tracking.
//!
//! - [`isa`]: an RV32I hart with per-register and per-word tags, plus the
//!   `ldtcheck`/`sdtcheck` tag-checked load and store.
//! - [`dift`]: tag sources, propagation rules and checks.
//! - [`asm`]: a small assembler and disassembler for the supported subset.
//! - [`glift`]: gate-level shadow logic over `.bench` netlists.
//! - [`report`]: the JSON report both engines produce.
//! - [`scenarios`]: bundled attack programs and benchmark circuits.

pub mod asm;
pub mod dift;
pub mod glift;
pub mod isa;
pub mod report;
pub mod scenarios;

pub use report::{AnalysisReport, ReportStatus};
