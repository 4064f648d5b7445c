mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unictc::labelset::LanguageMask;
use unictc::matrix::Matrix;
use unictc::model::{Model, ModelConfig, Variant};

use common::model_gradient_check;

fn random_input(frames: usize, dim: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_vec(frames, dim, (0..frames * dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Every variant, including multi-task heads and per-layer indicator
/// concatenation, backpropagates correctly end to end.
#[test]
fn every_variant_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for variant in Variant::ALL {
        let languages = if variant == Variant::Monolingual { 1 } else { 2 };
        let dims = if variant == Variant::MultiTaskHeads { vec![4, 5] } else { vec![6] };
        let mut config = ModelConfig::new(variant, 3, languages, dims.clone()).with_size(2, 3, 3);
        if variant == Variant::MultiTaskHeads {
            config.mtl_branch_depth = 1;
        }
        let model = Model::new(config).unwrap();
        // larger weights than the default initialization exercise the nonlinearities
        let mut params = model.init_params(variant as u64).unwrap();
        for (_, t) in params.tensors_mut() {
            for v in t.data_mut() {
                *v *= 10.0;
            }
        }
        let language = variant.uses_language().then_some(languages - 1);
        let k = model.output_dim(language);
        let mask = if variant == Variant::MultiTaskHeads {
            LanguageMask::all_ones(k)
        } else {
            let mut bits = vec![true; k];
            bits[k - 1] = false;
            LanguageMask::from_bits(bits, 0).unwrap()
        };
        let input = random_input(5, 3, &mut rng);
        let (err, at, checked) = model_gradient_check(&model, &params, &input, language, &mask, &[1, 2, 2]);
        assert!(checked == params.num_values());
        assert!(err <= 1e-4, "{variant}: relative error {err:e} at {at}");
    }
}

#[test]
fn gate_only_variants_differ_from_full_gate() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let input = random_input(4, 3, &mut rng);
    let mut outputs = Vec::new();
    for variant in [Variant::UniversalGated, Variant::GateHOnly, Variant::GateDOnly] {
        let model = Model::new(ModelConfig::new(variant, 3, 2, vec![6]).with_size(1, 3, 3)).unwrap();
        let params = model.init_params(5).unwrap();
        outputs.push(model.forward(&params, &input, Some(0)).unwrap().0);
    }
    assert_ne!(outputs[0], outputs[1]);
    assert_ne!(outputs[0], outputs[2]);
}
