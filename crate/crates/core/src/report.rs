//! The JSON report shared by both engines.

use serde::{Deserialize, Serialize};

use crate::dift::{TagEvent, TagEventKind};
use crate::glift::{FlowAnalysis, FlowViolation};
use crate::isa::{DiftRun, RunEnd, Status, TrapCause};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Dift,
    Glift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportStatus {
    Clean,
    /// A tag check failed or a labeled input reached an observed output.
    Violation,
    /// The program stopped on a trap unrelated to tags.
    Trap,
    StepLimit,
}

impl ReportStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            ReportStatus::Clean => 0,
            ReportStatus::Violation => 10,
            ReportStatus::Trap => 11,
            ReportStatus::StepLimit => 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReportEvent {
    Tag(TagEvent),
    Flow(FlowViolation),
}

impl ReportEvent {
    pub fn is_violation(&self) -> bool {
        match self {
            ReportEvent::Tag(e) => e.kind == TagEventKind::Mismatch,
            ReportEvent::Flow(_) => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Summary {
    /// Instructions retired, or vectors evaluated for a netlist.
    pub steps: u64,
    pub tainted_words: usize,
    pub violations: usize,
    pub untrusted_gates: usize,
}

/// Final machine state of a simulator run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiftDetails {
    pub end: RunEnd,
    pub outcome: Status,
    pub final_pc: u32,
    pub tainted_regs: Vec<u8>,
    pub tainted_words: Vec<u32>,
    pub protected_words: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool_version: String,
    pub mode: Mode,
    pub status: ReportStatus,
    pub events: Vec<ReportEvent>,
    pub summary: Summary,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub dift: Option<DiftDetails>,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub glift: Option<FlowAnalysis>,
}

impl AnalysisReport {
    pub fn from_dift(run: &DiftRun) -> Self {
        let violations = run.mismatch_count();
        let status = match run.status {
            _ if violations > 0 => ReportStatus::Violation,
            Status::Trapped(t) if t.cause == TrapCause::TagMismatch => ReportStatus::Violation,
            Status::Trapped(_) => ReportStatus::Trap,
            Status::Running => ReportStatus::StepLimit,
            Status::HaltedOk { .. } => ReportStatus::Clean,
        };
        AnalysisReport {
            tool_version: TOOL_VERSION.to_string(),
            mode: Mode::Dift,
            status,
            events: run.events.iter().cloned().map(ReportEvent::Tag).collect(),
            summary: Summary {
                steps: run.steps,
                tainted_words: run.tainted_words.len(),
                violations,
                untrusted_gates: 0,
            },
            dift: Some(DiftDetails {
                end: run.end,
                outcome: run.status,
                final_pc: run.final_pc,
                tainted_regs: run.tainted_regs.clone(),
                tainted_words: run.tainted_words.clone(),
                protected_words: run.protected_words.clone(),
            }),
            glift: None,
        }
    }

    pub fn from_glift(analysis: FlowAnalysis) -> Self {
        let status = if analysis.is_clean() {
            ReportStatus::Clean
        } else {
            ReportStatus::Violation
        };
        AnalysisReport {
            tool_version: TOOL_VERSION.to_string(),
            mode: Mode::Glift,
            status,
            events: analysis
                .violations
                .iter()
                .cloned()
                .map(ReportEvent::Flow)
                .collect(),
            summary: Summary {
                steps: analysis.vectors_evaluated as u64,
                tainted_words: 0,
                violations: analysis.violations.len(),
                untrusted_gates: analysis.untrusted_gates.len(),
            },
            dift: None,
            glift: Some(analysis),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// The status of a simulator run, if this is one.
    pub fn outcome(&self) -> Option<Status> {
        self.dift.as_ref().map(|d| d.outcome)
    }

    pub fn final_pc(&self) -> Option<u32> {
        self.dift.as_ref().map(|d| d.final_pc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::encode;
    use crate::dift::PolicyConfig;
    use crate::glift::{check_flow_policy, parse_bench, FlowKind, FlowPolicy, VectorSet};
    use crate::isa::{Instruction, Kind, Machine};

    fn image(prog: &[Instruction]) -> Vec<u8> {
        prog.iter()
            .flat_map(|i| encode(i).unwrap().to_le_bytes())
            .collect()
    }

    #[test]
    fn clean_halt_round_trips() {
        let img = image(&[
            Instruction::i(Kind::Addi, 10, 0, 0),
            Instruction::nop(),
            Instruction::i(Kind::Ecall, 0, 0, 0),
        ]);
        let mut m = Machine::new(&img, 4096, PolicyConfig::default(), Vec::new()).unwrap();
        let r = crate::isa::run(&mut m, 100);
        assert_eq!(r.status, ReportStatus::Clean);
        assert_eq!(r.outcome(), Some(Status::HaltedOk { code: 0 }));
        assert_eq!(r.exit_code(), 0);
        assert_eq!(AnalysisReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn step_limit_and_trap() {
        let spin = image(&[Instruction::j(Kind::Jal, 0, 0)]);
        let mut m = Machine::new(&spin, 4096, PolicyConfig::default(), Vec::new()).unwrap();
        let r = crate::isa::run(&mut m, 10);
        assert_eq!((r.status, r.exit_code()), (ReportStatus::StepLimit, 12));

        let mut m = Machine::new(&[0xff; 4], 4096, PolicyConfig::default(), Vec::new()).unwrap();
        let r = crate::isa::run(&mut m, 10);
        assert_eq!((r.status, r.exit_code()), (ReportStatus::Trap, 11));
        assert!(r.events.iter().all(|e| !e.is_violation()));
        assert_eq!(AnalysisReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn glift_round_trips() {
        let text = "INPUT(a)\nINPUT(T)\no = AND(a, T)\nOUTPUT(o)";
        let n = parse_bench("g", text).unwrap();
        let p = FlowPolicy::new(&n, FlowKind::Integrity, &["T"], &[]).unwrap();
        let r =
            AnalysisReport::from_glift(check_flow_policy(&n, &p, &VectorSet::Exhaustive).unwrap());
        assert_eq!(r.status, ReportStatus::Violation);
        assert_eq!(r.summary.violations, 1);
        assert_eq!(r.events.len(), 1);
        let json = r.to_json();
        assert!(json.contains("\"first_untrusted_gate\""));
        assert_eq!(AnalysisReport::from_json(&json).unwrap(), r);
    }
}
