//! Exhaustive adder and comparator checks runnable from a release binary.

use crate::isa::{Instruction, MacroExecutor};
use crate::macro_core::{
    MacroConfig, Parity, RowAddr, SLOTS_PER_CYCLE, V_MAX, V_MIN, W_MAX, W_MIN,
};
use crate::mapper::pack_w_image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepResult {
    pub checked: u64,
    pub mismatches: u64,
}

impl SweepResult {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.mismatches == 0
    }
}

fn wrap(x: i32) -> i32 {
    (x - V_MIN).rem_euclid(1 << 11) + V_MIN
}

fn run_chunks(
    ex: &mut MacroExecutor,
    row: usize,
    mut step: impl FnMut(&mut MacroExecutor, &[i16; SLOTS_PER_CYCLE]) -> [i32; SLOTS_PER_CYCLE],
    expect: impl Fn(i16) -> Option<i32>,
    out: &mut SweepResult,
) {
    let vs: Vec<i16> = (V_MIN..=V_MAX).map(|v| v as i16).collect();
    for chunk in vs.chunks(SLOTS_PER_CYCLE) {
        let mut vals = [0i16; SLOTS_PER_CYCLE];
        vals[..chunk.len()].copy_from_slice(chunk);
        ex.state_mut()
            .set_slot_values(row, &vals)
            .expect("row in range");
        let got = step(ex, &vals);
        for (j, &v) in chunk.iter().enumerate() {
            if let Some(want) = expect(v) {
                out.checked += 1;
                out.mismatches += u64::from(got[j] != want);
            }
        }
    }
    ex.take_trace();
}

/// AccW2V against `(V + w) mod 2^11` for every (V, w) pair, on both parities.
pub fn adder_exhaustive() -> SweepResult {
    let mut ex = MacroExecutor::new(MacroConfig::default());
    let mut out = SweepResult {
        checked: 0,
        mismatches: 0,
    };
    for w in W_MIN..=W_MAX {
        let image = pack_w_image(&[vec![w; 12]]).expect("weight in range");
        ex.state_mut()
            .write_row(RowAddr::W(0), image.0[0])
            .expect("row in range");
        for p in Parity::BOTH {
            let row = 6 + p.index();
            let step = |ex: &mut MacroExecutor, _: &[i16; SLOTS_PER_CYCLE]| {
                ex.exec(&Instruction::acc_w2v(0, p, row, row))
                    .expect("valid instruction");
                ex.state()
                    .slot_values(row)
                    .expect("row in range")
                    .map(i32::from)
            };
            run_chunks(
                &mut ex,
                row,
                step,
                |v| Some(wrap(i32::from(v) + w)),
                &mut out,
            );
        }
    }
    out
}

/// SpikeCheck against `V >= theta` for V over the full range and theta in
/// 1..=512, skipping pairs whose difference does not fit in 11 bits.
pub fn comparator_exhaustive() -> SweepResult {
    let mut ex = MacroExecutor::new(MacroConfig::default());
    let mut out = SweepResult {
        checked: 0,
        mismatches: 0,
    };
    for theta in 1..=512i16 {
        for p in Parity::BOTH {
            let (row, thr) = (6 + p.index(), p.index());
            ex.state_mut()
                .set_slot_values(thr, &[-theta; SLOTS_PER_CYCLE])
                .expect("row in range");
            let step = |ex: &mut MacroExecutor, _: &[i16; SLOTS_PER_CYCLE]| {
                let mask = ex
                    .exec(&Instruction::spike_check(p, row, thr))
                    .expect("valid instruction")
                    .spike_mask
                    .expect("spike check reports a mask");
                mask.map(i32::from)
            };
            let expect = |v: i16| {
                (i32::from(v) - i32::from(theta) >= V_MIN).then_some(i32::from(v >= theta))
            };
            run_chunks(&mut ex, row, step, expect, &mut out);
        }
    }
    out
}
