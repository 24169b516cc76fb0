mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use taintriv::asm::encode;
use taintriv::dift::PolicyConfig;
use taintriv::glift::{
    check_flow_policy, gate_taint, oracle_influence, vector_from_index, FlowKind, FlowPolicy,
    GateType, NetId, VectorSet,
};
use taintriv::isa::{
    decode, Format, Instruction, Kind, Machine, Status, TrapCause, DEFAULT_MEM_SIZE,
};
use taintriv::report::ReportStatus;
use taintriv::scenarios::{
    c432_netlist, overflow_program, run_demo, run_program, smash_payload, trojan_netlist, Demo,
    BENIGN_INPUT, DEMO_MAX_STEPS,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c432_structure() -> Check {
    let n = c432_netlist();
    let got = (n.inputs().len(), n.outputs().len(), n.gate_count());
    ensure(got == (36, 7, 160), || format!("got {got:?}"))?;
    Ok("36 inputs, 7 outputs, 160 gates".into())
}

fn per_gate_precision() -> Check {
    let mut cases = 0;
    for kind in GateType::COMBINATIONAL {
        let arity = if kind.is_unary() { 1 } else { 2 };
        let n = single_gate(kind, arity);
        for values in 0..1u64 << arity {
            for taints in 0..1u64 << arity {
                let v = vector_from_index(values, arity);
                let t = vector_from_index(taints, arity);
                let tainted: Vec<NetId> = (0..arity)
                    .filter(|&k| t[k])
                    .map(|k| n.inputs()[k])
                    .collect();
                let expected = oracle_influence(&n, output(&n), &v, &tainted).unwrap();
                let got = gate_taint(kind, &v, &t).unwrap().1;
                ensure(got == expected, || {
                    format!("{kind} v={v:?} t={t:?}: {got} != {expected}")
                })?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} cases over 8 gate types"))
}

fn compositional_soundness() -> Check {
    let mut vectors = 0u64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = rng.gen_range(1..=10);
        let gates = rng.gen_range(1..=50);
        let n = random_netlist(&mut rng, inputs, gates);
        let mut tainted: Vec<usize> = (0..inputs).filter(|_| rng.gen_bool(0.4)).collect();
        if tainted.is_empty() {
            tainted.push(rng.gen_range(0..inputs));
        }
        let missed = glift_false_negatives(&n, &tainted);
        ensure(missed == 0, || {
            format!("seed {seed}: {missed} false negatives")
        })?;
        vectors += 1 << inputs;
    }
    Ok(format!(
        "100 netlists, {vectors} vectors, 0 false negatives"
    ))
}

fn trojan_detection() -> Check {
    let n = trojan_netlist();
    let out = n.net("out").unwrap();
    let t = n.net("T").unwrap();
    let oracle: Vec<usize> = (0..16)
        .filter(|&i| {
            let mut v = vector_from_index(i as u64, 4);
            v.push(false);
            oracle_influence(&n, out, &v, &[t]).unwrap()
        })
        .collect();
    let xor_stage: Vec<usize> = (0..16)
        .filter(|&i| {
            let v = vector_from_index(i as u64, 4);
            (v[0] || v[1]) != (v[2] || v[3])
        })
        .collect();
    ensure(oracle == xor_stage, || {
        format!("oracle {oracle:?} vs XOR stage {xor_stage:?}")
    })?;

    let policy = FlowPolicy::new(&n, FlowKind::Integrity, &["T"], &["out"]).unwrap();
    let a = check_flow_policy(&n, &policy, &VectorSet::Exhaustive).unwrap();
    let flagged: Vec<usize> = a.violations.iter().map(|v| v.vector_index).collect();
    ensure(flagged == oracle, || {
        format!("flagged {flagged:?}, oracle {oracle:?}")
    })?;
    let first = a.first_untrusted_gate.ok_or("no untrusted gate")?;
    ensure(first.gate_type == GateType::Nand, || {
        format!("first untrusted gate {first:?}")
    })?;
    Ok(format!(
        "{} of 16 vectors, equal to the oracle set; first untrusted gate {} ({})",
        flagged.len(),
        first.net,
        first.gate_type
    ))
}

fn overflow_end_to_end() -> Check {
    let program = overflow_program();
    let attacker = program.symbol("attacker").unwrap();
    let payload = smash_payload(attacker);

    let off = run_program(&program, false, &payload);
    ensure(off.final_pc() == Some(attacker), || {
        format!(
            "IFT off ended at {:?}, expected {attacker:#x}",
            off.final_pc()
        )
    })?;

    let epilogue = program
        .listing
        .iter()
        .find(|l| l.source.trim_start().starts_with("ldtcheck"))
        .map(|l| l.addr)
        .ok_or("no ldtcheck in listing")?;
    let mut m = Machine::new(
        &program.image,
        DEFAULT_MEM_SIZE,
        PolicyConfig::default(),
        payload,
    )
    .unwrap();
    let run = m.run(DEMO_MAX_STEPS, true);
    let Status::Trapped(trap) = run.status else {
        return Err(format!("IFT on: {:?}", run.status));
    };
    ensure(
        trap.cause == TrapCause::TagMismatch && run.final_pc == epilogue,
        || {
            format!(
                "IFT on: {trap:?} at {:#x}, epilogue at {epilogue:#x}",
                run.final_pc
            )
        },
    )?;
    ensure(run.trace.iter().all(|e| e.pc != attacker), || {
        "reached the planted address".into()
    })?;
    let code = run_program(&program, true, &smash_payload(attacker)).exit_code();
    ensure(code == 10, || format!("exit code {code}"))?;
    Ok(format!(
        "IFT off: final pc {attacker:#x}; IFT on: TagMismatch at {epilogue:#x}, exit {code}"
    ))
}

fn benign_input() -> Check {
    let r = run_program(&overflow_program(), true, BENIGN_INPUT);
    ensure(
        r.status == ReportStatus::Clean && r.summary.violations == 0,
        || format!("{:?} with {} violations", r.outcome(), r.summary.violations),
    )?;
    Ok(format!("{:?}, 0 mismatches", r.outcome().unwrap()))
}

fn dift_soundness() -> Check {
    let mut dependent = 0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prog = straight_line(&mut rng, 20);
        let values = [0, u32::MAX, rng.gen(), rng.gen()];
        let missed = dift_false_negatives(&prog, &values);
        ensure(missed.is_empty(), || {
            format!("seed {seed}: untagged dependent regs {missed:?}")
        })?;
        let a = run_with_source(&prog, &source_policy(), values[0]);
        let b = run_with_source(&prog, &source_policy(), values[1]);
        if a.regs != b.regs {
            dependent += 1;
        }
    }
    Ok(format!(
        "200 programs ({dependent} with source-dependent registers), 0 false negatives"
    ))
}

fn sweep(kind: Kind) -> Result<u64, String> {
    let mut checked = 0;
    let mut check = |i: Instruction| -> Result<(), String> {
        let word = encode(&i).map_err(|e| format!("{i:?}: {e}"))?;
        let back = decode(word).map_err(|e| format!("{word:#010x}: {e}"))?;
        checked += 1;
        ensure(back == i, || format!("{i:?} -> {word:#010x} -> {back:?}"))
    };
    let (lo, hi) = taintriv::asm::imm_bounds(kind);
    if kind.has_no_operands() {
        check(Instruction::i(kind, 0, 0, 0))?;
        return Ok(checked);
    }
    for a in 0..32u8 {
        for b in 0..32u8 {
            match kind.format() {
                Format::R => {
                    for c in 0..32u8 {
                        check(Instruction::r(kind, a, b, c))?;
                    }
                }
                Format::I => check(Instruction::i(kind, a, b, hi as i32))?,
                Format::S => check(Instruction::s(kind, a, b, lo as i32))?,
                Format::B => check(Instruction::b(kind, a, b, -2))?,
                Format::U | Format::J => {}
            }
        }
    }
    match kind.format() {
        Format::I | Format::S => {
            for imm in lo..=hi {
                let i = match kind.format() {
                    Format::I => Instruction::i(kind, 31, 1, imm as i32),
                    _ => Instruction::s(kind, 1, 31, imm as i32),
                };
                check(i)?;
            }
        }
        Format::B => {
            for imm in (lo..=hi).step_by(2) {
                check(Instruction::b(kind, 3, 30, imm as i32))?;
            }
        }
        Format::U => {
            for upper in 0..1i64 << 20 {
                check(Instruction::u(
                    kind,
                    (upper % 32) as u8,
                    (upper << 12) as i32,
                ))?;
            }
        }
        Format::J => {
            for imm in (lo..=hi).step_by(2) {
                check(Instruction::j(kind, (imm & 31) as u8, imm as i32))?;
            }
        }
        Format::R => {}
    }
    Ok(checked)
}

fn encode_decode_round_trip() -> Check {
    let mut total = 0;
    for kind in Kind::ALL {
        total += sweep(kind)?;
    }
    Ok(format!(
        "{total} instructions over {} kinds, including ldtcheck/sdtcheck",
        Kind::ALL.len()
    ))
}

fn demo_determinism() -> Check {
    for demo in Demo::ALL {
        let a = run_demo(demo);
        let b = run_demo(demo);
        for (x, y) in [(&a.baseline, &b.baseline), (&a.protected, &b.protected)] {
            ensure(x.to_json() == y.to_json(), || {
                format!("{demo} reports differ")
            })?;
        }
        ensure(a.verdict == b.verdict, || format!("{demo} verdicts differ"))?;
    }
    Ok("overflow, retaddr and trojan reports byte-identical".into())
}

fn main() -> ExitCode {
    let checks: [Criterion; 9] = [
        ("c432 structure", c432_structure),
        ("per-gate GLIFT precision", per_gate_precision),
        ("compositional soundness", compositional_soundness),
        ("trojan detection", trojan_detection),
        ("buffer overflow end to end", overflow_end_to_end),
        ("benign input", benign_input),
        ("DIFT explicit-flow soundness", dift_soundness),
        ("encoder/decoder round trip", encode_decode_round_trip),
        ("demo determinism", demo_determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let result = check();
        let ms = start.elapsed().as_millis();
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} ({ms} ms)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} ({ms} ms)");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        checks.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
