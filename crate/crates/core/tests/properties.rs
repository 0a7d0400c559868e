mod common;

use common::*;
use impulse_core::energy::{default_table, edp_sweep, SweepTemplate};
use impulse_core::isa::{InstrKind, Instruction, MacroExecutor, NeuronKind, NeuronModel};
use impulse_core::macro_core::layout::V_ROW_MASK;
use impulse_core::macro_core::{MacroConfig, Parity, RowAddr, V_ROWS, W_ROWS};
use impulse_core::mapper::{map_network, pack_w_image, LayerSpec};
use impulse_core::runtime::{run_inference, SpikeTrain};
use proptest::prelude::*;

fn v_val() -> impl Strategy<Value = i16> {
    -1024i16..=1023
}

fn slots() -> impl Strategy<Value = [i16; 6]> {
    prop::array::uniform6(v_val())
}

fn weights12() -> impl Strategy<Value = Vec<i32>> {
    prop::collection::vec(-32i32..=31, 12)
}

fn load_w(ex: &mut MacroExecutor, row: usize, w: &[i32]) {
    let image = pack_w_image(&[w.to_vec()]).unwrap();
    ex.state_mut()
        .write_row(RowAddr::W(row), image.0[0])
        .unwrap();
}

fn parity() -> impl Strategy<Value = Parity> {
    prop_oneof![Just(Parity::Odd), Just(Parity::Even)]
}

/// A V row index of the given alignment.
fn aligned(row: usize, p: Parity) -> usize {
    (row & !1) + p.index()
}

#[derive(Debug, Clone)]
enum Op {
    W2V {
        w: usize,
        p: Parity,
        src: usize,
        dst: usize,
    },
    V2V {
        p: Parity,
        a: usize,
        b: usize,
        dst: usize,
        cond: bool,
    },
    Check {
        p: Parity,
        a: usize,
        b: usize,
    },
    Reset {
        p: Parity,
        src: usize,
        dst: usize,
    },
    Load {
        row: usize,
        vals: [i16; 6],
    },
}

fn op() -> impl Strategy<Value = Op> {
    let r = || 0..V_ROWS;
    prop_oneof![
        (0..4usize, parity(), r(), r()).prop_map(|(w, p, src, dst)| Op::W2V {
            w,
            p,
            src: aligned(src, p),
            dst: aligned(dst, p)
        }),
        (parity(), r(), r(), r(), any::<bool>()).prop_map(|(p, a, b, dst, cond)| Op::V2V {
            p,
            a: aligned(a, p),
            b: aligned(b, p),
            dst: aligned(dst, p),
            cond
        }),
        (parity(), r(), r()).prop_map(|(p, a, b)| Op::Check {
            p,
            a: aligned(a, p),
            b: aligned(b, p)
        }),
        (parity(), r(), r()).prop_map(|(p, src, dst)| Op::Reset {
            p,
            src: aligned(src, p),
            dst: aligned(dst, p)
        }),
        (r(), slots()).prop_map(|(row, vals)| Op::Load { row, vals }),
    ]
}

fn to_instr(op: &Op) -> Option<Instruction> {
    Some(match *op {
        Op::W2V { w, p, src, dst } => Instruction::acc_w2v(w, p, src, dst),
        Op::V2V { p, a, b, dst, cond } => Instruction::acc_v2v(p, a, b, dst, cond),
        Op::Check { p, a, b } => Instruction::spike_check(p, a, b),
        Op::Reset { p, src, dst } => Instruction::reset_v(p, src, dst),
        Op::Load { .. } => return None,
    })
}

fn seeded(ws: &[Vec<i32>]) -> MacroExecutor {
    let mut ex = MacroExecutor::new(MacroConfig::default());
    for (r, w) in ws.iter().enumerate() {
        load_w(&mut ex, r, w);
    }
    ex
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn holes_stay_zero(ws in prop::collection::vec(weights12(), 4), ops in prop::collection::vec(op(), 1..60)) {
        let mut ex = seeded(&ws);
        for op in &ops {
            match (op, to_instr(op)) {
                (Op::Load { row, vals }, _) => ex.state_mut().set_slot_values(*row, vals).unwrap(),
                (_, Some(i)) => { ex.exec(&i).unwrap(); }
                _ => unreachable!(),
            }
            prop_assert!(ex.state().holes_clear());
        }
    }

    #[test]
    fn trace_is_deterministic(ws in prop::collection::vec(weights12(), 4), ops in prop::collection::vec(op(), 1..40)) {
        let run = || {
            let mut ex = seeded(&ws);
            for op in &ops {
                match (op, to_instr(op)) {
                    (Op::Load { row, vals }, _) => ex.state_mut().set_slot_values(*row, vals).unwrap(),
                    (_, Some(i)) => { ex.exec(&i).unwrap(); }
                    _ => unreachable!(),
                }
            }
            let rows: Vec<u128> = (0..V_ROWS).map(|r| ex.state().read_row(RowAddr::V(r)).unwrap()).collect();
            (ex.take_trace(), rows)
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn slots_do_not_interact(w in weights12(), v in slots(), other_w in weights12(), other_v in slots(), j in 0..6usize, p in parity()) {
        let row = pot_row(p);
        let result = |w: &[i32], v: &[i16; 6]| {
            let mut ex = seeded(&[w.to_vec()]);
            ex.state_mut().set_slot_values(row, v).unwrap();
            ex.exec(&Instruction::acc_w2v(0, p, row, row)).unwrap();
            ex.state().slot_values(row).unwrap()[j]
        };
        // keep slot j's operands, scramble everything else
        let g = 2 * j + p.index();
        let mut w2 = other_w.clone();
        w2[g] = w[g];
        let mut v2 = other_v;
        v2[j] = v[j];
        let expected = wrap11(i32::from(v[j]) + w[g]) as i16;
        prop_assert_eq!(result(&w, &v), expected);
        prop_assert_eq!(result(&w2, &v2), expected);
    }

    #[test]
    fn negated_weights_undo(w in prop::collection::vec(-31i32..=31, 12), v in slots(), p in parity()) {
        let neg: Vec<i32> = w.iter().map(|x| -x).collect();
        let mut ex = seeded(&[w, neg]);
        let row = pot_row(p);
        ex.state_mut().set_slot_values(row, &v).unwrap();
        ex.exec(&Instruction::acc_w2v(0, p, row, row)).unwrap();
        ex.exec(&Instruction::acc_w2v(1, p, row, row)).unwrap();
        prop_assert_eq!(ex.state().slot_values(row).unwrap(), v);
    }

    #[test]
    fn accumulation_commutes(a in weights12(), b in weights12(), v in slots(), p in parity()) {
        let run = |first: usize| {
            let mut ex = seeded(&[a.clone(), b.clone()]);
            let row = pot_row(p);
            ex.state_mut().set_slot_values(row, &v).unwrap();
            ex.exec(&Instruction::acc_w2v(first, p, row, row)).unwrap();
            ex.exec(&Instruction::acc_w2v(1 - first, p, row, row)).unwrap();
            ex.state().read_row(RowAddr::V(row)).unwrap()
        };
        prop_assert_eq!(run(0), run(1));
    }

    #[test]
    fn conditional_write_touches_only_spiking_slots(pot in slots(), theta in 1i16..=200, p in parity(), junk in any::<u128>()) {
        let mut ex = MacroExecutor::new(MacroConfig::default());
        let row = pot_row(p);
        let thr = p.index();
        ex.state_mut().set_slot_values(thr, &[-theta; 6]).unwrap();
        ex.state_mut().set_slot_values(row, &pot).unwrap();
        // unrelated rows carry arbitrary data
        let other = 10 + p.index();
        let holes = impulse_core::macro_core::layout::hole_mask(p);
        ex.state_mut().write_row(RowAddr::V(other), junk & V_ROW_MASK & !holes).unwrap();
        let before = ex.state().read_row(RowAddr::V(row)).unwrap();
        let other_before = ex.state().read_row(RowAddr::V(other)).unwrap();
        let mask = ex.exec(&Instruction::spike_check(p, row, thr)).unwrap().spike_mask.unwrap();
        ex.exec(&Instruction::acc_v2v(p, row, thr, row, true)).unwrap();
        let after = ex.state().read_row(RowAddr::V(row)).unwrap();
        for s in impulse_core::macro_core::SlotLayout::all(p) {
            let m = s.column_mask();
            if mask[s.slot_index] {
                prop_assert_eq!(s.decode(after), wrap11(i32::from(pot[s.slot_index]) - i32::from(theta)) as i16);
            } else {
                prop_assert_eq!(after & m, before & m);
            }
        }
        prop_assert_eq!(ex.state().read_row(RowAddr::V(other)).unwrap(), other_before);
    }

    #[test]
    fn trace_length_matches_spike_count(in_dim in 1usize..=W_ROWS, k_frac in 0.0f64..=1.0, kind_i in 0usize..3, theta in 1i16..100) {
        let kind = KINDS[kind_i];
        let layer = LayerSpec::fc(NeuronModel::new(kind, theta).with_leak(1), &vec![vec![1; 12]; in_dim]).unwrap();
        let k = (k_frac * in_dim as f64).round() as usize;
        let input = SpikeTrain::from_input(vec![(0..in_dim).map(|i| i < k).collect(); 3]);
        let res = run_inference(&map_network(&[layer]).unwrap(), &input, &[], MacroConfig::default()).unwrap();
        let per_update = match kind { NeuronKind::Lif => 6, _ => 4 };
        for t in 0..3 {
            let events: Vec<_> = res.trace.iter().filter(|e| e.t == t).collect();
            let w2v = events.iter().filter(|e| e.event.kind == InstrKind::AccW2V).count();
            prop_assert_eq!(w2v, 2 * k);
            prop_assert_eq!(events.len(), 2 * k + per_update);
        }
    }

    #[test]
    fn sparser_inputs_cost_less(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let pts = edp_sweep(&SweepTemplate::default(), &[a, b], &default_table()).unwrap();
        let (ka, kb) = (pts[0].spiking_inputs, pts[1].spiking_inputs);
        if ka > kb {
            prop_assert!(pts[0].edp_pj_ns > pts[1].edp_pj_ns);
        } else if ka == kb {
            prop_assert_eq!(pts[0].edp_pj_ns, pts[1].edp_pj_ns);
        }
    }
}

#[test]
fn holes_stay_zero_in_strict_mode_through_neuron_updates() {
    use impulse_core::isa::{neuron_update, ReservedRows, VContext};
    let mut ex = MacroExecutor::new(MacroConfig {
        strict: true,
        saturate: false,
    });
    let reserved = ReservedRows::default();
    let model = NeuronModel::new(NeuronKind::Rmp, 7);
    model
        .reserved_values(12)
        .install(ex.state_mut(), &reserved)
        .unwrap();
    load_w(&mut ex, 0, &[31; 12]);
    let ctx = VContext {
        odd_row: 6,
        even_row: 7,
    };
    for _ in 0..50 {
        for p in Parity::BOTH {
            ex.exec(&Instruction::acc_w2v(0, p, ctx.row(p), ctx.row(p)))
                .unwrap();
        }
        neuron_update(&mut ex, NeuronKind::Rmp, ctx, &reserved).unwrap();
        assert!(ex.state().holes_clear());
    }
}
