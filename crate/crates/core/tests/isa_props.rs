mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use taintriv::asm::{assemble, disassemble, encode, format_instruction};
use taintriv::dift::PolicyConfig;
use taintriv::isa::{decode, run, Instruction, Kind, Machine};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn decode_inverts_encode(seed in any::<u64>()) {
        let i = random_instruction(&mut rng(seed));
        let word = encode(&i).unwrap();
        prop_assert_eq!(decode(word).unwrap(), i);
    }

    #[test]
    fn disassembly_reassembles_to_the_same_word(seed in any::<u64>()) {
        let i = random_instruction(&mut rng(seed));
        let word = encode(&i).unwrap();
        let text = format_instruction(&i);
        prop_assert_eq!(&disassemble(word), &text);
        let program = assemble(&text).unwrap();
        prop_assert_eq!(program.image, word.to_le_bytes().to_vec());
    }

    #[test]
    fn x0_stays_zero_and_untagged(seed in any::<u64>()) {
        let mut r = rng(seed);
        let prog: Vec<Instruction> = (0..32).map(|_| random_instruction(&mut r)).collect();
        let mut m = Machine::new(&image_of(&prog), MEM, PolicyConfig::default(), vec![0xaa; 64]).unwrap();
        for _ in 0..64 {
            if m.step().is_none() {
                break;
            }
            prop_assert_eq!(m.cpu.reg(0), 0);
            prop_assert!(!m.tags.reg(0));
        }
    }

    #[test]
    fn steps_only_write_memory_named_in_the_trace(seed in any::<u64>()) {
        let mut r = rng(seed);
        let prog = straight_line(&mut r, 24);
        let mut m = Machine::new(&image_of(&prog), MEM, source_policy(), Vec::new()).unwrap();
        loop {
            let before = m.cpu.mem().to_vec();
            let Some(ev) = m.step() else { break };
            let after = m.cpu.mem();
            let allowed = ev.mem_write.map(|w| (w.addr as usize, (w.addr + w.len) as usize));
            for (addr, (a, b)) in before.iter().zip(after).enumerate() {
                if a != b {
                    prop_assert!(
                        allowed.is_some_and(|(lo, hi)| (lo..hi).contains(&addr)),
                        "step {} wrote {:#x} outside its trace event", ev.step, addr
                    );
                }
            }
        }
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>()) {
        let prog = straight_line(&mut rng(seed), 20);
        let report = || {
            let mut m = Machine::new(&image_of(&prog), MEM, source_policy(), Vec::new()).unwrap();
            run(&mut m, 1000).to_json()
        };
        prop_assert_eq!(report(), report());
    }

    #[test]
    fn disabled_tracking_makes_tag_checks_plain(seed in any::<u64>()) {
        let prog = straight_line(&mut rng(seed), 20);
        let plain: Vec<Instruction> = prog
            .iter()
            .map(|i| match i.kind {
                Kind::Ldtcheck => Instruction { kind: Kind::Lw, ..*i },
                Kind::Sdtcheck => Instruction { kind: Kind::Sw, ..*i },
                _ => *i,
            })
            .collect();
        let off = PolicyConfig::disabled();
        let a = run_with_source(&prog, &off, 0xdead_beef);
        let b = run_with_source(&plain, &off, 0xdead_beef);
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.regs, b.regs);
        let code = prog.len() * 4;
        prop_assert!(a.mem[code..] == b.mem[code..]);
        prop_assert_eq!(a.tags, 0);
    }
}
