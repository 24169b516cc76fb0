//! Shadow logic for the basic gates.
//!
//! Each two-input form is the precise influence rule for that gate: the
//! output is tainted exactly when flipping the tainted inputs (untainted
//! ones held at their values) can flip the output. Wider gates are folded
//! as balanced trees of two-input gates; inversion never changes taint.

use super::netlist::GateType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("{kind} gate given {values} value(s) and {taints} taint(s)")]
pub struct ArityError {
    pub kind: GateType,
    pub values: usize,
    pub taints: usize,
}

/// (value, taint) of one wire.
pub type Signal = (bool, bool);

/// Two-input AND shadow: a tainted input matters only while the other input
/// is 1 or is itself tainted.
pub fn and2((a, at): Signal, (b, bt): Signal) -> Signal {
    (a && b, (at && b) || (bt && a) || (at && bt))
}

/// Two-input OR shadow: a tainted input matters only while the other input
/// is 0 or is itself tainted.
pub fn or2((a, at): Signal, (b, bt): Signal) -> Signal {
    (a || b, (at && !b) || (bt && !a) || (at && bt))
}

/// Two-input XOR shadow: every input always reaches the output.
pub fn xor2((a, at): Signal, (b, bt): Signal) -> Signal {
    (a ^ b, at || bt)
}

fn fold(signals: &[Signal], op: fn(Signal, Signal) -> Signal) -> Signal {
    match signals {
        [s] => *s,
        _ => {
            let (l, r) = signals.split_at(signals.len() / 2);
            op(fold(l, op), fold(r, op))
        }
    }
}

fn invert((v, t): Signal) -> Signal {
    (!v, t)
}

/// Output value and taint of a gate.
pub fn gate_taint(kind: GateType, values: &[bool], taints: &[bool]) -> Result<Signal, ArityError> {
    if values.len() != taints.len() || !kind.arity_ok(values.len()) {
        return Err(ArityError {
            kind,
            values: values.len(),
            taints: taints.len(),
        });
    }
    let signals: Vec<Signal> = values.iter().copied().zip(taints.iter().copied()).collect();
    Ok(eval_signals(kind, &signals))
}

/// Same as [`gate_taint`] on pre-zipped signals; the caller guarantees arity.
pub(crate) fn eval_signals(kind: GateType, signals: &[Signal]) -> Signal {
    match kind {
        GateType::And => fold(signals, and2),
        GateType::Nand => invert(fold(signals, and2)),
        GateType::Or => fold(signals, or2),
        GateType::Nor => invert(fold(signals, or2)),
        GateType::Xor => fold(signals, xor2),
        GateType::Xnor => invert(fold(signals, xor2)),
        GateType::Buf | GateType::Dff => signals[0],
        GateType::Not => invert(signals[0]),
    }
}
