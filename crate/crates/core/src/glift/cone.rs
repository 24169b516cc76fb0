//! Cone-of-influence extraction for selecting security-critical submodules.

use std::collections::BTreeSet;

use super::netlist::{Builder, NetId, Netlist, NetlistError};

/// Transitive fan-in of `targets` as a standalone netlist.
///
/// The walk stops at primary inputs and flip-flop outputs, which become the
/// submodule's inputs. The targets become its outputs.
pub fn extract_cone(netlist: &Netlist, targets: &[&str]) -> Result<Netlist, NetlistError> {
    extract_cone_with_cuts(netlist, targets, &[])
}

/// Like [`extract_cone`], but also cuts the walk at each net in `cuts`,
/// turning it into a submodule input.
pub fn extract_cone_with_cuts(
    netlist: &Netlist,
    targets: &[&str],
    cuts: &[&str],
) -> Result<Netlist, NetlistError> {
    let targets: Vec<NetId> = targets
        .iter()
        .map(|t| netlist.require_net(t))
        .collect::<Result<_, _>>()?;
    let cuts: BTreeSet<NetId> = cuts
        .iter()
        .map(|c| netlist.require_net(c))
        .collect::<Result<_, _>>()?;

    let mut boundary = BTreeSet::new();
    let mut gates = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut stack = targets.clone();
    while let Some(net) = stack.pop() {
        if !seen.insert(net) {
            continue;
        }
        let gate = match netlist.driver_index(net) {
            Some(g) if !cuts.contains(&net) => g,
            _ => {
                boundary.insert(net);
                continue;
            }
        };
        if netlist.gates()[gate].kind == super::GateType::Dff {
            boundary.insert(net);
            continue;
        }
        gates.insert(gate);
        stack.extend(netlist.gates()[gate].inputs.iter().copied());
    }

    // Primary inputs keep their order; other cut nets follow by net index.
    let mut inputs: Vec<NetId> = netlist
        .inputs()
        .iter()
        .copied()
        .filter(|i| boundary.contains(i))
        .collect();
    let cut: Vec<NetId> = boundary
        .iter()
        .copied()
        .filter(|&n| netlist.input_position(n).is_none())
        .collect();
    inputs.extend(cut);

    let mut b = Builder::default();
    for &i in &inputs {
        b.input(netlist.net_name(i), 0)?;
    }
    for &t in &targets {
        b.output(netlist.net_name(t));
    }
    for &gi in &gates {
        let g = &netlist.gates()[gi];
        let ins = g
            .inputs
            .iter()
            .map(|&n| netlist.net_name(n).to_string())
            .collect();
        b.gate(netlist.net_name(g.output), g.kind, ins, 0)?;
    }
    b.finish(format!("{}_cone", netlist.name()))
}
