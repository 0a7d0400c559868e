mod common;

use common::*;
use impulse_core::isa::{NeuronKind, NeuronModel};
use impulse_core::macro_core::MacroConfig;
use impulse_core::oracle::Comparison;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WRAP: MacroConfig = MacroConfig {
    strict: false,
    saturate: false,
};
const STRICT: MacroConfig = MacroConfig {
    strict: true,
    saturate: false,
};
const SAT: MacroConfig = MacroConfig {
    strict: false,
    saturate: true,
};

#[test]
fn random_fc_networks_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..120 {
        let kind = KINDS[i % 3];
        let s = [0.5, 0.85, 0.95][(i / 3) % 3];
        let case = random_case(&mut rng, kind, s, 10);
        let config = [WRAP, STRICT, SAT][(i / 9) % 3];
        assert_eq!(
            check(&case.layers, &case.input, config),
            Comparison::Equal,
            "case {i}"
        );
    }
}

#[test]
fn dense_input_overflows_identically() {
    // every input spikes with a large positive weight so potentials wrap
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in KINDS {
        let model = NeuronModel::new(kind, 1023).with_leak(0);
        let layer = impulse_core::mapper::LayerSpec::fc(model, &vec![vec![31; 12]; 128]).unwrap();
        let input = random_train(&mut rng, 128, 4, 0.0);
        assert_eq!(
            check(std::slice::from_ref(&layer), &input, WRAP),
            Comparison::Equal
        );
        assert_eq!(check(&[layer], &input, SAT), Comparison::Equal);
    }
}

#[test]
fn input_tiled_layers_match_when_wrapping() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..12 {
        let kind = KINDS[i % 3];
        let model = random_model(&mut rng, kind);
        let in_dim = rng.gen_range(129..=300);
        let out_dim = rng.gen_range(1..=20);
        let layer = random_fc(&mut rng, model, in_dim, out_dim);
        let input = random_train(&mut rng, in_dim, 6, 0.7);
        assert_eq!(
            check(&[layer], &input, [WRAP, STRICT][i % 2]),
            Comparison::Equal,
            "case {i}"
        );
    }
}

#[test]
fn conv_layers_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..24 {
        let layer = random_conv(&mut rng, KINDS[i % 3]);
        let width = layer.shape.in_width();
        let input = random_train(&mut rng, width, 5, 0.6);
        let config = [WRAP, STRICT, SAT][i % 3];
        assert_eq!(
            check(&[layer], &input, config),
            Comparison::Equal,
            "case {i}"
        );
    }
}

#[test]
fn conv_then_fc_matches() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let conv = random_conv(&mut rng, NeuronKind::Rmp);
    let width = conv.shape.out_width();
    let model = random_model(&mut rng, NeuronKind::If);
    let fc = random_fc(&mut rng, model, width, 10);
    let input = random_train(&mut rng, conv.shape.in_width(), 8, 0.5);
    assert_eq!(check(&[conv, fc], &input, WRAP), Comparison::Equal);
}
