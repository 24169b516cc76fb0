use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::netlist::{GateType, NetId, Netlist, NetlistError};
use super::oracle::{vector_from_index, MAX_ENUMERATED};
use super::sim::simulate_ift;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    /// Labeled inputs are untrusted and must not reach observed outputs.
    Integrity,
    /// Labeled inputs are secret and must not reach observed outputs.
    Confidentiality,
}

impl std::str::FromStr for FlowKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "integrity" => Ok(FlowKind::Integrity),
            "confidentiality" => Ok(FlowKind::Confidentiality),
            other => Err(format!(
                "unknown policy `{other}`, expected integrity or confidentiality"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowPolicy {
    pub kind: FlowKind,
    pub labeled_inputs: Vec<NetId>,
    pub observed_outputs: Vec<NetId>,
}

impl FlowPolicy {
    /// Resolves net names. An empty `observed` list watches every primary
    /// output.
    pub fn new(
        netlist: &Netlist,
        kind: FlowKind,
        labeled: &[&str],
        observed: &[&str],
    ) -> Result<Self, FlowError> {
        let mut labeled_inputs = Vec::new();
        for name in labeled {
            let net = netlist.require_net(name)?;
            if netlist.input_position(net).is_none() {
                return Err(FlowError::NotAnInput(name.to_string()));
            }
            if !labeled_inputs.contains(&net) {
                labeled_inputs.push(net);
            }
        }
        let observed_outputs = if observed.is_empty() {
            netlist.outputs().to_vec()
        } else {
            observed
                .iter()
                .map(|n| netlist.require_net(n))
                .collect::<Result<_, _>>()?
        };
        Ok(FlowPolicy {
            kind,
            labeled_inputs,
            observed_outputs,
        })
    }
}

/// Input vectors to evaluate. Each vector holds one bit per primary input,
/// in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VectorSet {
    /// Every assignment of the unlabeled inputs; labeled inputs are held
    /// at 0. Vector `i` gives the `k`-th unlabeled input bit `k` of `i`.
    Exhaustive,
    Random {
        count: usize,
        seed: u64,
    },
    Explicit(Vec<Vec<bool>>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FlowError {
    #[error(
        "exhaustive enumeration over {0} unlabeled inputs exceeds the bound of {MAX_ENUMERATED}; \
         use random:N:SEED or a vector file, or extract a smaller cone first"
    )]
    ExhaustiveBound(usize),
    #[error("no input vectors to evaluate")]
    EmptyVectors,
    #[error("vector {index} has {got} bits, expected {expected}")]
    VectorWidth {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("`{0}` is not a primary input")]
    NotAnInput(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetlistSummary {
    pub name: String,
    pub inputs: usize,
    pub outputs: usize,
    pub gates: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub kind: FlowKind,
    pub labeled_inputs: Vec<String>,
    pub observed_outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowViolation {
    pub vector_index: usize,
    /// Input bits in declaration order, first input leftmost.
    pub vector: String,
    pub tainted_outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UntrustedGate {
    pub net: String,
    pub gate_type: GateType,
    pub level: u32,
}

/// Outcome of [`check_flow_policy`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowAnalysis {
    pub netlist: NetlistSummary,
    pub policy: PolicySummary,
    pub vectors_evaluated: usize,
    pub violations: Vec<FlowViolation>,
    /// Ordered by logic level, then evaluation order.
    pub untrusted_gates: Vec<UntrustedGate>,
    pub first_untrusted_gate: Option<UntrustedGate>,
}

impl FlowAnalysis {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn expand_vectors(
    netlist: &Netlist,
    policy: &FlowPolicy,
    vectors: &VectorSet,
) -> Result<Vec<Vec<bool>>, FlowError> {
    let width = netlist.inputs().len();
    let out = match vectors {
        VectorSet::Exhaustive => {
            let free: Vec<usize> = (0..width)
                .filter(|&k| !policy.labeled_inputs.contains(&netlist.inputs()[k]))
                .collect();
            if free.len() > MAX_ENUMERATED {
                return Err(FlowError::ExhaustiveBound(free.len()));
            }
            (0..1u64 << free.len())
                .map(|i| {
                    let mut v = vec![false; width];
                    for (bit, value) in vector_from_index(i, free.len()).into_iter().enumerate() {
                        v[free[bit]] = value;
                    }
                    v
                })
                .collect()
        }
        VectorSet::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*count)
                .map(|_| (0..width).map(|_| rng.gen::<bool>()).collect())
                .collect()
        }
        VectorSet::Explicit(list) => {
            for (index, v) in list.iter().enumerate() {
                if v.len() != width {
                    return Err(FlowError::VectorWidth {
                        index,
                        expected: width,
                        got: v.len(),
                    });
                }
            }
            list.clone()
        }
    };
    if out.is_empty() {
        return Err(FlowError::EmptyVectors);
    }
    Ok(out)
}

/// Taints the policy's labeled inputs, simulates every vector and collects
/// the vectors whose observed outputs are tainted, plus every gate that was
/// tainted under some vector.
pub fn check_flow_policy(
    netlist: &Netlist,
    policy: &FlowPolicy,
    vectors: &VectorSet,
) -> Result<FlowAnalysis, FlowError> {
    let list = expand_vectors(netlist, policy, vectors)?;
    let taints: Vec<bool> = netlist
        .inputs()
        .iter()
        .map(|i| policy.labeled_inputs.contains(i))
        .collect();
    let comb = netlist.topo_order();

    let results: Vec<(Vec<NetId>, Vec<bool>)> = list
        .par_iter()
        .map(|v| {
            let tv = simulate_ift(netlist, v, &taints).expect("vector width checked");
            let outs = policy
                .observed_outputs
                .iter()
                .copied()
                .filter(|&o| tv.taint(o))
                .collect();
            let gates = comb
                .iter()
                .map(|&g| tv.taint(netlist.gates()[g].output))
                .collect();
            (outs, gates)
        })
        .collect();

    let mut violations = Vec::new();
    let mut hit = vec![false; comb.len()];
    for (index, (outs, gates)) in results.into_iter().enumerate() {
        for (h, g) in hit.iter_mut().zip(gates) {
            *h |= g;
        }
        if !outs.is_empty() {
            violations.push(FlowViolation {
                vector_index: index,
                vector: list[index]
                    .iter()
                    .map(|&b| if b { '1' } else { '0' })
                    .collect(),
                tainted_outputs: outs
                    .into_iter()
                    .map(|o| netlist.net_name(o).to_string())
                    .collect(),
            });
        }
    }

    let mut untrusted: Vec<(u32, usize, usize)> = comb
        .iter()
        .enumerate()
        .filter(|&(pos, _)| hit[pos])
        .map(|(pos, &g)| (netlist.level(netlist.gates()[g].output), pos, g))
        .collect();
    untrusted.sort();
    let untrusted_gates: Vec<UntrustedGate> = untrusted
        .into_iter()
        .map(|(level, _, g)| {
            let gate = &netlist.gates()[g];
            UntrustedGate {
                net: netlist.net_name(gate.output).to_string(),
                gate_type: gate.kind,
                level,
            }
        })
        .collect();

    let names = |nets: &[NetId]| -> Vec<String> {
        nets.iter()
            .map(|&n| netlist.net_name(n).to_string())
            .collect()
    };
    Ok(FlowAnalysis {
        netlist: NetlistSummary {
            name: netlist.name().to_string(),
            inputs: netlist.inputs().len(),
            outputs: netlist.outputs().len(),
            gates: netlist.gate_count(),
        },
        policy: PolicySummary {
            kind: policy.kind,
            labeled_inputs: names(&policy.labeled_inputs),
            observed_outputs: names(&policy.observed_outputs),
        },
        vectors_evaluated: list.len(),
        violations,
        first_untrusted_gate: untrusted_gates.first().cloned(),
        untrusted_gates,
    })
}

/// Per gate type, how many untrusted gates of that type were found.
pub fn untrusted_type_counts(analysis: &FlowAnalysis) -> BTreeMap<GateType, usize> {
    let mut counts = BTreeMap::new();
    for g in &analysis.untrusted_gates {
        *counts.entry(g.gate_type).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glift::netlist::parse_bench;

    const TROJAN: &str = "INPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(d)\nINPUT(T)\n\
        o1 = OR(a, b)\no2 = OR(c, d)\nx = XOR(o1, o2)\nout = NAND(x, T)\nOUTPUT(out)";

    #[test]
    fn unlabeled_policy_is_clean() {
        let n = parse_bench("trojan", TROJAN).unwrap();
        let p = FlowPolicy::new(&n, FlowKind::Integrity, &[], &[]).unwrap();
        let a = check_flow_policy(&n, &p, &VectorSet::Exhaustive).unwrap();
        assert_eq!(a.vectors_evaluated, 32);
        assert!(a.is_clean());
        assert!(a.untrusted_gates.is_empty());
        assert_eq!(a.first_untrusted_gate, None);
    }

    #[test]
    fn trigger_reaches_output_through_nand() {
        let n = parse_bench("trojan", TROJAN).unwrap();
        let p = FlowPolicy::new(&n, FlowKind::Integrity, &["T"], &["out"]).unwrap();
        let a = check_flow_policy(&n, &p, &VectorSet::Exhaustive).unwrap();
        assert_eq!(a.vectors_evaluated, 16);
        for v in &a.violations {
            let bits: Vec<bool> = vector_from_index(v.vector_index as u64, 4);
            assert!((bits[0] || bits[1]) != (bits[2] || bits[3]));
        }
        assert_eq!(a.first_untrusted_gate.unwrap().gate_type, GateType::Nand);
    }

    #[test]
    fn random_vectors_are_seeded() {
        let n = parse_bench("trojan", TROJAN).unwrap();
        let p = FlowPolicy::new(&n, FlowKind::Integrity, &["T"], &[]).unwrap();
        let set = VectorSet::Random { count: 50, seed: 7 };
        let a = check_flow_policy(&n, &p, &set).unwrap();
        let b = check_flow_policy(&n, &p, &set).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.vectors_evaluated, 50);
    }

    #[test]
    fn errors() {
        let n = parse_bench("trojan", TROJAN).unwrap();
        let p = FlowPolicy::new(&n, FlowKind::Integrity, &["T"], &[]).unwrap();
        assert_eq!(
            check_flow_policy(&n, &p, &VectorSet::Explicit(vec![])),
            Err(FlowError::EmptyVectors)
        );
        assert!(matches!(
            check_flow_policy(&n, &p, &VectorSet::Explicit(vec![vec![true]])),
            Err(FlowError::VectorWidth { index: 0, .. })
        ));
        assert_eq!(
            FlowPolicy::new(&n, FlowKind::Integrity, &["out"], &[]),
            Err(FlowError::NotAnInput("out".into()))
        );
        assert!(matches!(
            FlowPolicy::new(&n, FlowKind::Integrity, &["zz"], &[]),
            Err(FlowError::Netlist(NetlistError::UnknownNet(_)))
        ));
    }

    #[test]
    fn exhaustive_bound() {
        let names: Vec<String> = (0..21).map(|i| format!("i{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let n = Netlist::build("wide", &refs, &["o"], &[("o", GateType::Or, &refs)]).unwrap();
        let p = FlowPolicy::new(&n, FlowKind::Confidentiality, &[], &[]).unwrap();
        assert_eq!(
            check_flow_policy(&n, &p, &VectorSet::Exhaustive),
            Err(FlowError::ExhaustiveBound(21))
        );
        let p = FlowPolicy::new(&n, FlowKind::Confidentiality, &["i0"], &[]).unwrap();
        assert!(check_flow_policy(&n, &p, &VectorSet::Exhaustive).is_ok());
    }
}
