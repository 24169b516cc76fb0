//! Gate-level information flow tracking over `.bench` netlists.

mod cone;
mod netlist;
mod oracle;
mod policy;
mod shadow;
mod sim;

pub use cone::{extract_cone, extract_cone_with_cuts};
pub use netlist::{parse_bench, Gate, GateType, NetId, Netlist, NetlistError};
pub use oracle::{
    evaluate, gate_value, oracle_influence, vector_from_index, OracleError, TruthTable,
    MAX_ENUMERATED,
};
pub use policy::{
    check_flow_policy, untrusted_type_counts, FlowAnalysis, FlowError, FlowKind, FlowPolicy,
    FlowViolation, NetlistSummary, PolicySummary, UntrustedGate, VectorSet,
};
pub use shadow::{and2, gate_taint, or2, xor2, ArityError, Signal};
pub use sim::{simulate_ift, simulate_ift_with_state, step_sequential, SimError, TaintVector};
