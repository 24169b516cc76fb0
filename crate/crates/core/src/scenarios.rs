//! Bundled attack scenarios and benchmark netlists.

use std::fmt;
use std::str::FromStr;

use crate::asm::{assemble, Program};
use crate::dift::PolicyConfig;
use crate::glift::{check_flow_policy, parse_bench, FlowKind, FlowPolicy, Netlist, VectorSet};
use crate::isa::{Machine, Status, TrapCause, DEFAULT_MEM_SIZE};
use crate::report::AnalysisReport;

pub const OVERFLOW_S: &str = include_str!("../scenarios/overflow.s");
pub const RETADDR_S: &str = include_str!("../scenarios/retaddr.s");
pub const TROJAN_BENCH: &str = include_str!("../scenarios/trojan.bench");
pub const C432_BENCH: &str = include_str!("../scenarios/c432.bench");
pub const S27_BENCH: &str = include_str!("../scenarios/s27.bench");

/// Step budget for the bundled programs.
pub const DEMO_MAX_STEPS: u64 = 10_000;

/// Input that fits the 8-byte buffer.
pub const BENIGN_INPUT: &[u8] = b"hey\n";

pub fn overflow_program() -> Program {
    assemble(OVERFLOW_S).expect("bundled overflow.s assembles")
}

pub fn retaddr_program() -> Program {
    assemble(RETADDR_S).expect("bundled retaddr.s assembles")
}

pub fn trojan_netlist() -> Netlist {
    parse_bench("trojan", TROJAN_BENCH).expect("bundled trojan.bench parses")
}

pub fn c432_netlist() -> Netlist {
    parse_bench("c432", C432_BENCH).expect("bundled c432.bench parses")
}

pub fn s27_netlist() -> Netlist {
    parse_bench("s27", S27_BENCH).expect("bundled s27.bench parses")
}

/// 40 bytes: `target` repeated, little-endian, which overwrites the saved
/// return address of both stack scenarios.
pub fn smash_payload(target: u32) -> Vec<u8> {
    target.to_le_bytes().repeat(10)
}

/// Runs an assembled program with IFT on or off under the default policy.
pub fn run_program(program: &Program, ift: bool, input: &[u8]) -> AnalysisReport {
    let policy = if ift {
        PolicyConfig::default()
    } else {
        PolicyConfig::disabled()
    };
    let mut m = Machine::new(&program.image, DEFAULT_MEM_SIZE, policy, input)
        .expect("bundled program fits in memory");
    crate::isa::run(&mut m, DEMO_MAX_STEPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Demo {
    Overflow,
    Retaddr,
    Trojan,
}

impl Demo {
    pub const ALL: [Demo; 3] = [Demo::Overflow, Demo::Retaddr, Demo::Trojan];

    pub fn name(self) -> &'static str {
        match self {
            Demo::Overflow => "overflow",
            Demo::Retaddr => "retaddr",
            Demo::Trojan => "trojan",
        }
    }
}

impl fmt::Display for Demo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Demo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Demo::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown demo `{s}`, expected overflow, retaddr or trojan"))
    }
}

/// A scenario run twice: unprotected (or untainted) and protected.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoOutcome {
    pub demo: Demo,
    pub baseline: AnalysisReport,
    pub protected: AnalysisReport,
    pub verdict: String,
}

fn trap_text(report: &AnalysisReport) -> String {
    match report.outcome() {
        Some(Status::Trapped(t)) => format!(
            "{:?} at pc {:#x}",
            t.cause,
            report.final_pc().unwrap_or_default()
        ),
        Some(Status::HaltedOk { code }) => format!("halted with code {code}"),
        _ => "no verdict".to_string(),
    }
}

pub fn run_demo(demo: Demo) -> DemoOutcome {
    match demo {
        Demo::Overflow => {
            let program = overflow_program();
            let attacker = program.symbol("attacker").expect("attacker label");
            let payload = smash_payload(attacker);
            let baseline = run_program(&program, false, &payload);
            let protected = run_program(&program, true, &payload);
            let reached = baseline.final_pc() == Some(attacker);
            let verdict = format!(
                "without IFT: return address overwritten{}; with IFT: {}",
                if reached {
                    format!(", control reached attacker at {attacker:#x}")
                } else {
                    String::new()
                },
                trap_text(&protected)
            );
            DemoOutcome {
                demo,
                baseline,
                protected,
                verdict,
            }
        }
        Demo::Retaddr => {
            let program = retaddr_program();
            let malicious = program.symbol("malicious").expect("malicious label");
            let payload = smash_payload(malicious);
            let baseline = run_program(&program, false, &payload);
            let protected = run_program(&program, true, &payload);
            let trapped = matches!(
                protected.outcome(),
                Some(Status::Trapped(t)) if t.cause == TrapCause::TagMismatch
            );
            let verdict = format!(
                "without IFT: ret jumped to malicious at {malicious:#x}; with IFT: {}",
                if trapped {
                    format!(
                        "tainted indirect-jump target trapped, {}",
                        trap_text(&protected)
                    )
                } else {
                    trap_text(&protected)
                }
            );
            DemoOutcome {
                demo,
                baseline,
                protected,
                verdict,
            }
        }
        Demo::Trojan => {
            let netlist = trojan_netlist();
            let clean = FlowPolicy::new(&netlist, FlowKind::Integrity, &[], &[]).unwrap();
            let tainted = FlowPolicy::new(&netlist, FlowKind::Integrity, &["T"], &[]).unwrap();
            let baseline = AnalysisReport::from_glift(
                check_flow_policy(&netlist, &clean, &VectorSet::Exhaustive).unwrap(),
            );
            let analysis = check_flow_policy(&netlist, &tainted, &VectorSet::Exhaustive).unwrap();
            let verdict = match &analysis.first_untrusted_gate {
                Some(g) if !analysis.is_clean() => format!(
                    "trigger influences output on {} of {} vectors: detected at {} ({})",
                    analysis.violations.len(),
                    analysis.vectors_evaluated,
                    g.gate_type,
                    g.net
                ),
                _ => "trigger never reaches the output".to_string(),
            };
            DemoOutcome {
                demo,
                baseline,
                protected: AnalysisReport::from_glift(analysis),
                verdict,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::ReportStatus;

    #[test]
    fn bundled_files_load() {
        overflow_program();
        retaddr_program();
        assert_eq!(trojan_netlist().inputs().len(), 5);
        assert_eq!(c432_netlist().gate_count(), 160);
        assert_eq!(s27_netlist().dffs().len(), 3);
    }

    #[test]
    fn benign_input_is_clean() {
        let r = run_program(&overflow_program(), true, BENIGN_INPUT);
        assert_eq!(r.status, ReportStatus::Clean);
        assert_eq!(r.summary.violations, 0);
    }

    #[test]
    fn demos() {
        let o = run_demo(Demo::Overflow);
        assert_eq!(o.baseline.status, ReportStatus::Clean);
        assert_eq!(o.protected.status, ReportStatus::Violation);
        assert!(o.verdict.contains("TagMismatch"), "{}", o.verdict);

        let r = run_demo(Demo::Retaddr);
        assert_eq!(r.protected.exit_code(), 10);

        let t = run_demo(Demo::Trojan);
        assert_eq!(t.baseline.status, ReportStatus::Clean);
        assert!(t.verdict.contains("detected at NAND"), "{}", t.verdict);
    }

    #[test]
    fn demo_names() {
        for d in Demo::ALL {
            assert_eq!(d.name().parse::<Demo>(), Ok(d));
        }
        assert!("nope".parse::<Demo>().is_err());
    }
}
