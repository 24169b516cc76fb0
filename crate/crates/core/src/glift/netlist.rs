use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Index of a net within its netlist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NetId(pub u32);

impl NetId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateType {
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
    Dff,
}

impl GateType {
    pub const COMBINATIONAL: [GateType; 8] = [
        GateType::And,
        GateType::Or,
        GateType::Nand,
        GateType::Nor,
        GateType::Xor,
        GateType::Xnor,
        GateType::Not,
        GateType::Buf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateType::And => "AND",
            GateType::Or => "OR",
            GateType::Nand => "NAND",
            GateType::Nor => "NOR",
            GateType::Xor => "XOR",
            GateType::Xnor => "XNOR",
            GateType::Not => "NOT",
            GateType::Buf => "BUF",
            GateType::Dff => "DFF",
        }
    }

    pub fn is_unary(self) -> bool {
        matches!(self, GateType::Not | GateType::Buf | GateType::Dff)
    }

    pub fn arity_ok(self, n: usize) -> bool {
        if self.is_unary() {
            n == 1
        } else {
            n >= 2
        }
    }
}

impl fmt::Display for GateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "AND" => GateType::And,
            "OR" => GateType::Or,
            "NAND" => GateType::Nand,
            "NOR" => GateType::Nor,
            "XOR" => GateType::Xor,
            "XNOR" => GateType::Xnor,
            "NOT" | "INV" => GateType::Not,
            "BUF" | "BUFF" => GateType::Buf,
            "DFF" => GateType::Dff,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub output: NetId,
    pub kind: GateType,
    pub inputs: Vec<NetId>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetlistError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown gate type `{kind}` driving `{net}`")]
    UnknownGateType {
        line: usize,
        net: String,
        kind: String,
    },
    #[error("line {line}: {kind} gate `{net}` has {arity} input(s)")]
    Arity {
        line: usize,
        net: String,
        kind: GateType,
        arity: usize,
    },
    #[error("net `{0}` has more than one driver")]
    MultipleDrivers(String),
    #[error("net `{0}` is used but never driven")]
    UndrivenNet(String),
    #[error("combinational cycle through `{0}`")]
    CombinationalCycle(String),
    #[error("unknown net `{0}`")]
    UnknownNet(String),
}

/// A gate-level netlist. Immutable once built.
///
/// DFF outputs behave as pseudo-inputs of the combinational logic, so
/// `topo_order` lists combinational gates only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    name: String,
    net_names: Vec<String>,
    index: HashMap<String, NetId>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    gates: Vec<Gate>,
    driver: Vec<Option<usize>>,
    topo_order: Vec<usize>,
    dffs: Vec<usize>,
    levels: Vec<u32>,
}

impl Netlist {
    /// Validates and indexes a netlist given by net names.
    pub fn build(
        name: impl Into<String>,
        inputs: &[&str],
        outputs: &[&str],
        gates: &[(&str, GateType, &[&str])],
    ) -> Result<Self, NetlistError> {
        let mut b = Builder::default();
        for i in inputs {
            b.input(i, 0)?;
        }
        for o in outputs {
            b.output(o);
        }
        for (out, kind, ins) in gates {
            b.gate(out, *kind, ins.iter().map(|s| s.to_string()).collect(), 0)?;
        }
        b.finish(name.into())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn net_count(&self) -> usize {
        self.net_names.len()
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.net_names[id.index()]
    }

    pub fn net(&self, name: &str) -> Option<NetId> {
        self.index.get(name).copied()
    }

    pub fn require_net(&self, name: &str) -> Result<NetId, NetlistError> {
        self.net(name)
            .ok_or_else(|| NetlistError::UnknownNet(name.to_string()))
    }

    pub fn inputs(&self) -> &[NetId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    /// Combinational gates in evaluation order.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo_order
    }

    /// Gate indices of the flip-flops, in file order.
    pub fn dffs(&self) -> &[usize] {
        &self.dffs
    }

    pub fn driver(&self, net: NetId) -> Option<&Gate> {
        self.driver[net.index()].map(|g| &self.gates[g])
    }

    pub fn driver_index(&self, net: NetId) -> Option<usize> {
        self.driver[net.index()]
    }

    /// Logic depth: 0 for primary inputs and DFF outputs.
    pub fn level(&self, net: NetId) -> u32 {
        self.levels[net.index()]
    }

    pub fn input_position(&self, net: NetId) -> Option<usize> {
        self.inputs.iter().position(|&i| i == net)
    }

    pub fn is_sequential(&self) -> bool {
        !self.dffs.is_empty()
    }

    pub fn gate_type_counts(&self) -> std::collections::BTreeMap<GateType, usize> {
        let mut counts = std::collections::BTreeMap::new();
        for g in &self.gates {
            *counts.entry(g.kind).or_insert(0) += 1;
        }
        counts
    }

    /// Serializes back to `.bench` text.
    pub fn to_bench(&self) -> String {
        let mut out = format!("# {}\n", self.name);
        for &i in &self.inputs {
            out.push_str(&format!("INPUT({})\n", self.net_name(i)));
        }
        for &o in &self.outputs {
            out.push_str(&format!("OUTPUT({})\n", self.net_name(o)));
        }
        for g in &self.gates {
            let ins: Vec<&str> = g.inputs.iter().map(|&n| self.net_name(n)).collect();
            out.push_str(&format!(
                "{} = {}({})\n",
                self.net_name(g.output),
                g.kind,
                ins.join(", ")
            ));
        }
        out
    }
}

#[derive(Default)]
pub(crate) struct Builder {
    net_names: Vec<String>,
    index: HashMap<String, NetId>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    gates: Vec<Gate>,
    driven: HashSet<NetId>,
}

impl Builder {
    fn intern(&mut self, name: &str) -> NetId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = NetId(self.net_names.len() as u32);
        self.net_names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    fn drive(&mut self, id: NetId) -> Result<(), NetlistError> {
        if !self.driven.insert(id) {
            return Err(NetlistError::MultipleDrivers(
                self.net_names[id.index()].clone(),
            ));
        }
        Ok(())
    }

    pub(crate) fn input(&mut self, name: &str, _line: usize) -> Result<(), NetlistError> {
        let id = self.intern(name);
        self.drive(id)?;
        self.inputs.push(id);
        Ok(())
    }

    pub(crate) fn output(&mut self, name: &str) {
        let id = self.intern(name);
        if !self.outputs.contains(&id) {
            self.outputs.push(id);
        }
    }

    pub(crate) fn gate(
        &mut self,
        out: &str,
        kind: GateType,
        ins: Vec<String>,
        line: usize,
    ) -> Result<(), NetlistError> {
        if !kind.arity_ok(ins.len()) {
            return Err(NetlistError::Arity {
                line,
                net: out.to_string(),
                kind,
                arity: ins.len(),
            });
        }
        let output = self.intern(out);
        self.drive(output)?;
        let inputs = ins.iter().map(|n| self.intern(n)).collect();
        self.gates.push(Gate {
            output,
            kind,
            inputs,
        });
        Ok(())
    }

    pub(crate) fn finish(self, name: String) -> Result<Netlist, NetlistError> {
        let n = self.net_names.len();
        for id in 0..n {
            if !self.driven.contains(&NetId(id as u32)) {
                return Err(NetlistError::UndrivenNet(self.net_names[id].clone()));
            }
        }
        let mut driver = vec![None; n];
        for (gi, g) in self.gates.iter().enumerate() {
            driver[g.output.index()] = Some(gi);
        }
        let dffs: Vec<usize> = (0..self.gates.len())
            .filter(|&g| self.gates[g].kind == GateType::Dff)
            .collect();

        // Kahn's algorithm over combinational gates; lowest gate index first
        // among ready gates keeps the order deterministic.
        let is_source = |net: NetId| match driver[net.index()] {
            None => true,
            Some(g) => self.gates[g].kind == GateType::Dff,
        };
        let mut pending = vec![0usize; self.gates.len()];
        let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (gi, g) in self.gates.iter().enumerate() {
            if g.kind == GateType::Dff {
                continue;
            }
            for &i in &g.inputs {
                if !is_source(i) {
                    pending[gi] += 1;
                    fanout[i.index()].push(gi);
                }
            }
        }
        let mut ready: std::collections::BTreeSet<usize> = (0..self.gates.len())
            .filter(|&g| self.gates[g].kind != GateType::Dff && pending[g] == 0)
            .collect();
        let mut topo = Vec::with_capacity(self.gates.len() - dffs.len());
        let mut levels = vec![0u32; n];
        while let Some(g) = ready.pop_first() {
            let gate = &self.gates[g];
            levels[gate.output.index()] = 1 + gate
                .inputs
                .iter()
                .map(|i| levels[i.index()])
                .max()
                .unwrap_or(0);
            topo.push(g);
            for &succ in &fanout[gate.output.index()] {
                pending[succ] -= 1;
                if pending[succ] == 0 {
                    ready.insert(succ);
                }
            }
        }
        if topo.len() + dffs.len() != self.gates.len() {
            let stuck = (0..self.gates.len())
                .find(|&g| self.gates[g].kind != GateType::Dff && pending[g] > 0)
                .expect("a gate is left on a cycle");
            return Err(NetlistError::CombinationalCycle(
                self.net_names[self.gates[stuck].output.index()].clone(),
            ));
        }

        Ok(Netlist {
            name,
            net_names: self.net_names,
            index: self.index,
            inputs: self.inputs,
            outputs: self.outputs,
            gates: self.gates,
            driver,
            topo_order: topo,
            dffs,
            levels,
        })
    }
}

fn call_args(text: &str, line: usize) -> Result<(&str, Vec<String>), NetlistError> {
    let bad = || NetlistError::Syntax {
        line,
        msg: format!("expected NAME(args), found `{text}`"),
    };
    let open = text.find('(').ok_or_else(bad)?;
    let inner = text[open + 1..]
        .trim_end()
        .strip_suffix(')')
        .ok_or_else(bad)?;
    let args: Vec<String> = inner
        .split(',')
        .map(|a| a.trim().to_string())
        .filter(|a| !a.is_empty())
        .collect();
    if args
        .iter()
        .any(|a| a.contains(|c: char| c.is_whitespace() || "()=".contains(c)))
    {
        return Err(bad());
    }
    Ok((text[..open].trim(), args))
}

/// Parses ISCAS-85/89 `.bench` text.
pub fn parse_bench(name: &str, text: &str) -> Result<Netlist, NetlistError> {
    let mut b = Builder::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stmt = raw.split('#').next().unwrap_or("").trim();
        if stmt.is_empty() {
            continue;
        }
        if let Some(eq) = stmt.find('=') {
            let out = stmt[..eq].trim();
            if out.is_empty() || out.contains(char::is_whitespace) {
                return Err(NetlistError::Syntax {
                    line,
                    msg: format!("bad net name `{out}`"),
                });
            }
            let (kind, args) = call_args(stmt[eq + 1..].trim(), line)?;
            let kind: GateType = kind.parse().map_err(|_| NetlistError::UnknownGateType {
                line,
                net: out.to_string(),
                kind: kind.to_string(),
            })?;
            b.gate(out, kind, args, line)?;
        } else {
            let (head, args) = call_args(stmt, line)?;
            if args.len() != 1 {
                return Err(NetlistError::Syntax {
                    line,
                    msg: format!("{head} takes one net"),
                });
            }
            match head.to_ascii_uppercase().as_str() {
                "INPUT" => b.input(&args[0], line)?,
                "OUTPUT" => b.output(&args[0]),
                _ => {
                    return Err(NetlistError::Syntax {
                        line,
                        msg: format!("unknown statement `{head}`"),
                    })
                }
            }
        }
    }
    b.finish(name.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_inverter() {
        let n = parse_bench("inv", "INPUT(a)\no = NOT(a)\nOUTPUT(o)\n").unwrap();
        assert_eq!(
            (n.inputs().len(), n.outputs().len(), n.gate_count()),
            (1, 1, 1)
        );
        assert_eq!(n.level(n.net("o").unwrap()), 1);
    }

    #[test]
    fn multiple_drivers() {
        let text = "INPUT(a)\nINPUT(b)\nz = AND(a, b)\nz = OR(a, b)\nOUTPUT(z)";
        assert_eq!(
            parse_bench("m", text),
            Err(NetlistError::MultipleDrivers("z".into()))
        );
        assert_eq!(
            parse_bench("m", "INPUT(a)\na = NOT(a)"),
            Err(NetlistError::MultipleDrivers("a".into()))
        );
    }

    #[test]
    fn undriven_and_unknown() {
        assert_eq!(
            parse_bench("u", "INPUT(a)\no = AND(a, ghost)\nOUTPUT(o)"),
            Err(NetlistError::UndrivenNet("ghost".into()))
        );
        assert!(matches!(
            parse_bench("u", "INPUT(a)\no = MUX(a, a)"),
            Err(NetlistError::UnknownGateType { net, .. }) if net == "o"
        ));
        assert!(matches!(
            parse_bench("u", "INPUT(a)\no = NOT(a, a)"),
            Err(NetlistError::Arity { arity: 2, .. })
        ));
        assert!(matches!(
            parse_bench("u", "INPUT(a)\no = AND(a)"),
            Err(NetlistError::Arity { arity: 1, .. })
        ));
        assert!(matches!(
            parse_bench("u", "INPUT a"),
            Err(NetlistError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn cycles_only_through_dffs() {
        let comb = "INPUT(a)\nx = AND(a, y)\ny = NOT(x)\nOUTPUT(y)";
        assert!(matches!(
            parse_bench("c", comb),
            Err(NetlistError::CombinationalCycle(_))
        ));
        let seq = "INPUT(a)\nq = DFF(d)\nd = XOR(a, q)\nOUTPUT(q)";
        let n = parse_bench("s", seq).unwrap();
        assert_eq!(n.dffs().len(), 1);
        assert_eq!(n.topo_order().len(), 1);
        assert_eq!(n.level(n.net("q").unwrap()), 0);
    }

    #[test]
    fn bench_round_trip() {
        let text = "INPUT(a)\nINPUT(b)\nOUTPUT(o)\nt = NAND(a, b)\no = BUFF(t)\n";
        let n = parse_bench("rt", text).unwrap();
        let again = parse_bench("rt", &n.to_bench()).unwrap();
        assert_eq!(n, again);
    }

    #[test]
    fn topo_order_respects_dependencies() {
        let text = "INPUT(a)\nOUTPUT(o)\no = NOT(m)\nm = BUF(a)\n";
        let n = parse_bench("t", text).unwrap();
        assert_eq!(n.topo_order(), &[1, 0]);
    }
}
