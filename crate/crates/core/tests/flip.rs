use hourglass_core::autograd::Graph;
use hourglass_core::eval::predict_with_flip;
use hourglass_core::model::{apply_batchnorm_updates, Mode, ModelConfig, StackedModelParams};
use hourglass_core::synth::SkeletonSpec;
use hourglass_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn flip_averaged_prediction_commutes_with_mirroring() {
    let cfg = ModelConfig {
        num_stacks: 2,
        num_features: 16,
        num_joints: 14,
        input_resolution: 32,
        output_resolution: 8,
        ..ModelConfig::default()
    };
    let mut model = StackedModelParams::<f32>::init(&cfg, 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let warmup = Tensor::from_fn([4, 3, 32, 32], |_| rng.random_range(0.0..1.0f32));
    let mut g = Graph::new();
    let x = g.constant(warmup);
    let out = model.forward(&mut g, x, Mode::Train, false).unwrap();
    apply_batchnorm_updates(&mut model.store, &out.batchnorm_updates);

    let perm = SkeletonSpec::person().layout().flip_permutation().unwrap();
    let images = Tensor::from_fn([3, 3, 32, 32], |_| rng.random_range(0.0..1.0f32));
    let direct = predict_with_flip(&model, &images, &perm).unwrap();
    let mirrored = predict_with_flip(&model, &images.flip_horizontal(), &perm).unwrap();
    let back = mirrored.flip_horizontal().permute_channels(&perm).unwrap();
    assert_eq!(direct.shape(), back.shape());
    for (a, b) in direct.data().iter().zip(back.data()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
