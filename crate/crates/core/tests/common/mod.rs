#![allow(dead_code)]

use impulse_core::isa::{Instruction, MacroExecutor, NeuronKind, NeuronModel};
use impulse_core::macro_core::{
    MacroConfig, Parity, RowAddr, SLOTS_PER_CYCLE, V_MAX, V_MIN, W_MAX, W_MIN,
};
use impulse_core::mapper::{map_network, pack_w_image, LayerShape, LayerSpec};
use impulse_core::oracle::{compare, ref_run, Comparison, RefNetwork};
use impulse_core::runtime::{run_inference, SpikeTrain};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const KINDS: [NeuronKind; 3] = [NeuronKind::If, NeuronKind::Lif, NeuronKind::Rmp];

pub fn wrap11(x: i32) -> i32 {
    (x + 1024).rem_euclid(2048) - 1024
}

/// Potential row for each alignment: 6 is odd-aligned, 7 even-aligned.
pub fn pot_row(p: Parity) -> usize {
    6 + p.index()
}

/// Runs AccW2V for every (V, w) pair on both parities and returns
/// (pairs checked, mismatches).
pub fn adder_sweep() -> (u64, u64) {
    let mut ex = MacroExecutor::new(MacroConfig::default());
    let vs: Vec<i16> = (V_MIN..=V_MAX).map(|v| v as i16).collect();
    let (mut checked, mut bad) = (0u64, 0u64);
    for w in W_MIN..=W_MAX {
        let image = pack_w_image(&[vec![w; 12]]).expect("weight in range");
        ex.state_mut().write_row(RowAddr::W(0), image.0[0]).unwrap();
        for p in Parity::BOTH {
            let row = pot_row(p);
            for chunk in vs.chunks(SLOTS_PER_CYCLE) {
                let mut vals = [0i16; SLOTS_PER_CYCLE];
                vals[..chunk.len()].copy_from_slice(chunk);
                ex.state_mut().set_slot_values(row, &vals).unwrap();
                ex.exec(&Instruction::acc_w2v(0, p, row, row)).unwrap();
                let got = ex.state().slot_values(row).unwrap();
                for (j, &v) in chunk.iter().enumerate() {
                    checked += 1;
                    if i32::from(got[j]) != wrap11(i32::from(v) + w) {
                        bad += 1;
                    }
                }
            }
            ex.take_trace();
        }
    }
    (checked, bad)
}

/// SpikeCheck over V in the full range and theta in 1..=512.
/// Returns (pairs compared where V - theta fits, mismatches).
pub fn comparator_sweep(config: MacroConfig) -> (u64, u64) {
    let mut ex = MacroExecutor::new(config);
    let (mut checked, mut bad) = (0u64, 0u64);
    let vs: Vec<i16> = (V_MIN..=V_MAX).map(|v| v as i16).collect();
    for theta in 1..=512i16 {
        for p in Parity::BOTH {
            // rows 0 / 1 share the alignment of potential rows 6 / 7
            let thr = p.index();
            ex.state_mut()
                .set_slot_values(thr, &[-theta; SLOTS_PER_CYCLE])
                .unwrap();
            let row = pot_row(p);
            for chunk in vs.chunks(SLOTS_PER_CYCLE) {
                let mut vals = [0i16; SLOTS_PER_CYCLE];
                vals[..chunk.len()].copy_from_slice(chunk);
                ex.state_mut().set_slot_values(row, &vals).unwrap();
                let mask = ex
                    .exec(&Instruction::spike_check(p, row, thr))
                    .unwrap()
                    .spike_mask
                    .unwrap();
                for (j, &v) in chunk.iter().enumerate() {
                    let diff = i32::from(v) - i32::from(theta);
                    if !config.saturate && diff < V_MIN {
                        continue;
                    }
                    checked += 1;
                    if mask[j] != (v >= theta) {
                        bad += 1;
                    }
                }
            }
            ex.take_trace();
        }
    }
    (checked, bad)
}

pub fn random_model(rng: &mut ChaCha8Rng, kind: NeuronKind) -> NeuronModel {
    let theta = if rng.gen_bool(0.8) {
        rng.gen_range(1..=96)
    } else {
        rng.gen_range(1..=1023)
    };
    let mut m = NeuronModel::new(kind, theta);
    if kind == NeuronKind::Lif {
        m = m.with_leak(rng.gen_range(0..=12));
    }
    if kind != NeuronKind::Rmp && rng.gen_bool(0.5) {
        m = m.with_reset(rng.gen_range(-24..=24));
    }
    m
}

pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<i32> {
    (0..n).map(|_| rng.gen_range(W_MIN..=W_MAX)).collect()
}

pub fn random_fc(
    rng: &mut ChaCha8Rng,
    model: NeuronModel,
    in_dim: usize,
    out_dim: usize,
) -> LayerSpec {
    let w = random_weights(rng, in_dim * out_dim);
    let rows: Vec<Vec<i32>> = w.chunks(out_dim).map(<[i32]>::to_vec).collect();
    LayerSpec::fc(model, &rows).unwrap()
}

pub fn random_train(
    rng: &mut ChaCha8Rng,
    width: usize,
    timesteps: usize,
    sparsity: f64,
) -> SpikeTrain {
    SpikeTrain::from_input(
        (0..timesteps)
            .map(|_| (0..width).map(|_| rng.gen_bool(1.0 - sparsity)).collect())
            .collect(),
    )
}

pub struct Case {
    pub layers: Vec<LayerSpec>,
    pub input: SpikeTrain,
}

/// Fan-in up to 128, up to 24 outputs, sometimes a second FC layer.
pub fn random_case(
    rng: &mut ChaCha8Rng,
    kind: NeuronKind,
    sparsity: f64,
    timesteps: usize,
) -> Case {
    let in_dim = rng.gen_range(1..=128);
    let out_dim = rng.gen_range(1..=24);
    let model = random_model(rng, kind);
    let mut layers = vec![random_fc(rng, model, in_dim, out_dim)];
    if rng.gen_bool(0.25) {
        let m2 = random_model(rng, kind);
        let o2 = rng.gen_range(1..=24);
        layers.push(random_fc(rng, m2, out_dim, o2));
    }
    let input = random_train(rng, in_dim, timesteps, sparsity);
    Case { layers, input }
}

pub fn random_conv(rng: &mut ChaCha8Rng, kind: NeuronKind) -> LayerSpec {
    let k = rng.gen_range(1..=3);
    let in_channels = rng.gen_range(1..=(128 / (k * k)).min(6));
    let shape = LayerShape::Conv {
        in_channels,
        in_h: rng.gen_range(k..=6),
        in_w: rng.gen_range(k..=6),
        kernel_h: k,
        kernel_w: k,
        out_channels: rng.gen_range(1..=16),
        stride: rng.gen_range(1..=2),
        padding: rng.gen_range(0..=1),
    };
    let model = random_model(rng, kind);
    let n = shape.weight_count();
    LayerSpec::conv(shape, model, random_weights(rng, n)).unwrap()
}

/// Simulator against oracle on one network.
pub fn check(layers: &[LayerSpec], input: &SpikeTrain, config: MacroConfig) -> Comparison {
    let mapping = map_network(layers).expect("maps");
    let sim = run_inference(&mapping, input, &[], config).expect("runs");
    let mut net = RefNetwork::new(layers, config.saturate).expect("oracle builds");
    let reference = ref_run(&mut net, input).expect("oracle runs");
    compare(&sim.spikes, &sim.final_v, &reference).expect("same shapes")
}
