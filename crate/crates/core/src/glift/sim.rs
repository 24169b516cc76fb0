use super::netlist::{NetId, Netlist};
use super::shadow::{eval_signals, Signal};

/// Value and taint of every net after one evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaintVector {
    values: Vec<bool>,
    taints: Vec<bool>,
}

impl TaintVector {
    pub fn value(&self, net: NetId) -> bool {
        self.values[net.index()]
    }

    pub fn taint(&self, net: NetId) -> bool {
        self.taints[net.index()]
    }

    pub fn signal(&self, net: NetId) -> Signal {
        (self.value(net), self.taint(net))
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn taints(&self) -> &[bool] {
        &self.taints
    }

    pub fn tainted_nets(&self) -> impl Iterator<Item = NetId> + '_ {
        self.taints
            .iter()
            .enumerate()
            .filter(|(_, &t)| t)
            .map(|(i, _)| NetId(i as u32))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("expected {expected} input values and taints, got {values} and {taints}")]
    InputCount {
        expected: usize,
        values: usize,
        taints: usize,
    },
    #[error("expected state for {expected} flip-flops, got {got}")]
    StateArity { expected: usize, got: usize },
}

/// Evaluates the shadow logic for one input vector. Flip-flops hold
/// (0, untainted).
pub fn simulate_ift(
    netlist: &Netlist,
    input_values: &[bool],
    input_taints: &[bool],
) -> Result<TaintVector, SimError> {
    let reset = vec![(false, false); netlist.dffs().len()];
    simulate_ift_with_state(netlist, &reset, input_values, input_taints)
}

/// Evaluates the shadow logic with the given flip-flop outputs, in
/// [`Netlist::dffs`] order.
pub fn simulate_ift_with_state(
    netlist: &Netlist,
    state: &[Signal],
    input_values: &[bool],
    input_taints: &[bool],
) -> Result<TaintVector, SimError> {
    let expected = netlist.inputs().len();
    if input_values.len() != expected || input_taints.len() != expected {
        return Err(SimError::InputCount {
            expected,
            values: input_values.len(),
            taints: input_taints.len(),
        });
    }
    if state.len() != netlist.dffs().len() {
        return Err(SimError::StateArity {
            expected: netlist.dffs().len(),
            got: state.len(),
        });
    }

    let n = netlist.net_count();
    let mut values = vec![false; n];
    let mut taints = vec![false; n];
    for (k, &net) in netlist.inputs().iter().enumerate() {
        values[net.index()] = input_values[k];
        taints[net.index()] = input_taints[k];
    }
    for (&gi, &(v, t)) in netlist.dffs().iter().zip(state) {
        let q = netlist.gates()[gi].output.index();
        values[q] = v;
        taints[q] = t;
    }

    let mut scratch: Vec<Signal> = Vec::new();
    for &gi in netlist.topo_order() {
        let gate = &netlist.gates()[gi];
        scratch.clear();
        scratch.extend(
            gate.inputs
                .iter()
                .map(|i| (values[i.index()], taints[i.index()])),
        );
        let (v, t) = eval_signals(gate.kind, &scratch);
        values[gate.output.index()] = v;
        taints[gate.output.index()] = t;
    }
    Ok(TaintVector { values, taints })
}

/// One clock cycle: evaluates the logic from `state`, then latches each
/// flip-flop's data input (value and taint) as the next state.
pub fn step_sequential(
    netlist: &Netlist,
    state: &[Signal],
    input_values: &[bool],
    input_taints: &[bool],
) -> Result<(Vec<Signal>, TaintVector), SimError> {
    let tv = simulate_ift_with_state(netlist, state, input_values, input_taints)?;
    let next = netlist
        .dffs()
        .iter()
        .map(|&gi| tv.signal(netlist.gates()[gi].inputs[0]))
        .collect();
    Ok((next, tv))
}
