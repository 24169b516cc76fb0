//! Brute-force ground truth for taint: an output is influenced by a set of
//! inputs iff some reassignment of just those inputs changes its value.
//!
//! Uses plain boolean simulation only, never the shadow logic.

use super::netlist::GateType;
use super::netlist::{NetId, Netlist, NetlistError};

/// Largest tainted set the oracle will enumerate.
pub const MAX_ENUMERATED: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("{0} tainted inputs exceed the enumeration bound of {MAX_ENUMERATED}")]
    TooManyInputs(usize),
    #[error("expected {expected} input values, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("`{0}` is not a primary input")]
    NotAnInput(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// Plain boolean function of a gate, without taint.
pub fn gate_value(kind: GateType, values: &[bool]) -> bool {
    match kind {
        GateType::And => values.iter().all(|&v| v),
        GateType::Nand => !values.iter().all(|&v| v),
        GateType::Or => values.iter().any(|&v| v),
        GateType::Nor => !values.iter().any(|&v| v),
        GateType::Xor => values.iter().fold(false, |acc, &v| acc ^ v),
        GateType::Xnor => !values.iter().fold(false, |acc, &v| acc ^ v),
        GateType::Buf | GateType::Dff => values[0],
        GateType::Not => !values[0],
    }
}

/// Boolean value of every net for one input vector; DFFs hold 0.
pub fn evaluate(netlist: &Netlist, input_values: &[bool]) -> Vec<bool> {
    let mut values = vec![false; netlist.net_count()];
    for (&net, &v) in netlist.inputs().iter().zip(input_values) {
        values[net.index()] = v;
    }
    let mut scratch = Vec::new();
    for &gi in netlist.topo_order() {
        let gate = &netlist.gates()[gi];
        scratch.clear();
        scratch.extend(gate.inputs.iter().map(|n| values[n.index()]));
        values[gate.output.index()] = gate_value(gate.kind, &scratch);
    }
    values
}

fn positions(netlist: &Netlist, tainted: &[NetId]) -> Result<Vec<usize>, OracleError> {
    if tainted.len() > MAX_ENUMERATED {
        return Err(OracleError::TooManyInputs(tainted.len()));
    }
    tainted
        .iter()
        .map(|&n| {
            netlist
                .input_position(n)
                .ok_or_else(|| OracleError::NotAnInput(netlist.net_name(n).to_string()))
        })
        .collect()
}

/// Whether reassigning `tainted` (other inputs fixed at `input_values`) can
/// change `output`.
pub fn oracle_influence(
    netlist: &Netlist,
    output: NetId,
    input_values: &[bool],
    tainted: &[NetId],
) -> Result<bool, OracleError> {
    if input_values.len() != netlist.inputs().len() {
        return Err(OracleError::InputCount {
            expected: netlist.inputs().len(),
            got: input_values.len(),
        });
    }
    let pos = positions(netlist, tainted)?;
    let mut vector = input_values.to_vec();
    let mut first = None;
    for assignment in 0u32..(1 << pos.len()) {
        for (bit, &p) in pos.iter().enumerate() {
            vector[p] = assignment >> bit & 1 != 0;
        }
        let v = evaluate(netlist, &vector)[output.index()];
        match first {
            None => first = Some(v),
            Some(f) if f != v => return Ok(true),
            Some(_) => {}
        }
    }
    Ok(false)
}

/// Precomputed truth table of every output, for sweeping many vectors over
/// a netlist with few inputs.
#[derive(Debug, Clone)]
pub struct TruthTable {
    inputs: usize,
    outputs: Vec<NetId>,
    /// rows[vector index][output position]
    rows: Vec<Vec<bool>>,
}

/// Vector index `i` assigns input `k` the value of bit `k` of `i`.
pub fn vector_from_index(index: u64, width: usize) -> Vec<bool> {
    (0..width).map(|k| index >> k & 1 != 0).collect()
}

impl TruthTable {
    pub fn new(netlist: &Netlist) -> Result<Self, OracleError> {
        let n = netlist.inputs().len();
        if n > MAX_ENUMERATED {
            return Err(OracleError::TooManyInputs(n));
        }
        let outputs = netlist.outputs().to_vec();
        let rows = (0..1u64 << n)
            .map(|i| {
                let values = evaluate(netlist, &vector_from_index(i, n));
                outputs.iter().map(|o| values[o.index()]).collect()
            })
            .collect();
        Ok(TruthTable {
            inputs: n,
            outputs,
            rows,
        })
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    /// Influence of the inputs at `tainted_positions` on each output, at
    /// vector index `base`.
    pub fn influence(&self, base: u64, tainted_positions: &[usize]) -> Vec<bool> {
        let mask: u64 = tainted_positions.iter().map(|&p| 1u64 << p).sum();
        let fixed = base & !mask;
        let reference = &self.rows[fixed as usize];
        let mut out = vec![false; self.outputs.len()];
        // enumerate every subset of the mask
        let mut sub = mask;
        loop {
            let row = &self.rows[(fixed | sub) as usize];
            for (o, flag) in out.iter_mut().enumerate() {
                *flag |= row[o] != reference[o];
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & mask;
        }
        out
    }

    pub fn width(&self) -> usize {
        self.inputs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glift::netlist::parse_bench;

    #[test]
    fn not_chain_preserves_influence() {
        let text = "INPUT(a)\nn1 = NOT(a)\nn2 = NOT(n1)\nn3 = NOT(n2)\nn4 = NOT(n3)\nn5 = NOT(n4)\nOUTPUT(n5)";
        let n = parse_bench("chain", text).unwrap();
        let a = n.net("a").unwrap();
        let out = n.net("n5").unwrap();
        for v in [false, true] {
            assert!(oracle_influence(&n, out, &[v], &[a]).unwrap());
        }
    }

    #[test]
    fn and_with_trusted_zero() {
        let n = Netlist::build(
            "and",
            &["a", "b"],
            &["o"],
            &[("o", GateType::And, &["a", "b"])],
        )
        .unwrap();
        let (b, o) = (n.net("b").unwrap(), n.net("o").unwrap());
        assert!(!oracle_influence(&n, o, &[false, true], &[b]).unwrap());
        assert!(oracle_influence(&n, o, &[true, false], &[b]).unwrap());
    }

    #[test]
    fn bounds_and_errors() {
        let names: Vec<String> = (0..21).map(|i| format!("i{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let n = Netlist::build("wide", &refs, &["o"], &[("o", GateType::Xor, &refs)]).unwrap();
        let all: Vec<NetId> = n.inputs().to_vec();
        let o = n.net("o").unwrap();
        assert_eq!(
            oracle_influence(&n, o, &[false; 21], &all),
            Err(OracleError::TooManyInputs(21))
        );
        assert!(matches!(
            oracle_influence(&n, o, &[false; 3], &all[..1]),
            Err(OracleError::InputCount { .. })
        ));
        assert!(matches!(
            oracle_influence(&n, o, &[false; 21], &[o]),
            Err(OracleError::NotAnInput(_))
        ));
        assert!(matches!(
            TruthTable::new(&n),
            Err(OracleError::TooManyInputs(21))
        ));
    }

    #[test]
    fn truth_table_agrees_with_direct_enumeration() {
        let text = "INPUT(a)\nINPUT(b)\nINPUT(c)\nx = AND(a, b)\no = OR(x, c)\np = XOR(a, c)\nOUTPUT(o)\nOUTPUT(p)";
        let n = parse_bench("t", text).unwrap();
        let tt = TruthTable::new(&n).unwrap();
        for base in 0..8u64 {
            for mask in 0..8u32 {
                let pos: Vec<usize> = (0..3).filter(|&k| mask >> k & 1 != 0).collect();
                let nets: Vec<NetId> = pos.iter().map(|&p| n.inputs()[p]).collect();
                let fast = tt.influence(base, &pos);
                for (k, &o) in n.outputs().iter().enumerate() {
                    let slow = oracle_influence(&n, o, &vector_from_index(base, 3), &nets).unwrap();
                    assert_eq!(fast[k], slow);
                }
            }
        }
    }
}
