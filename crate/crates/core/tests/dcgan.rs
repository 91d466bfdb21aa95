use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rollgan::dcgan::{
    images_to_tensor, load_checkpoint, sample, save_checkpoint, train, Gan, GanArchitecture, GanConfig, InitSpec,
    ShapeMismatch, Tensor, TrainError, TrainState,
};
use rollgan::pianoroll::{decode_image, PianoRollImage};
use rollgan::preprocess::Mode;

fn small() -> GanArchitecture {
    GanArchitecture::new(8, vec![16, 8, 8, 4], vec![4, 8, 8, 16]).unwrap()
}

fn latents(n: usize, dim: usize, seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_vec([n, dim, 1, 1], (0..n * dim).map(|_| rng.sample(StandardNormal)).collect())
}

fn dataset(n: usize, seed: u64) -> Vec<PianoRollImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| PianoRollImage::from_raw((0..64 * 64 * 3).map(|_| if rng.random_bool(0.1) { 255 } else { 0 }).collect()).unwrap())
        .collect()
}

fn config(iterations: u64) -> GanConfig {
    GanConfig { arch: small(), batch_size: 4, total_iterations: iterations, seed: 5, checkpoint_every: 0, ..GanConfig::default() }
}

fn no_checkpoints(_: &TrainState) -> Result<String, String> {
    Ok(String::new())
}

#[test]
fn forward_shapes_and_ranges() {
    let gan: Gan<f32> = Gan::init(&small(), &InitSpec::default(), 1);
    for n in [1, 3] {
        let out = gan.gen_forward(latents(n, 8, n as u64)).unwrap();
        assert_eq!(out.shape(), [n, 3, 64, 64]);
        assert!(out.data().iter().all(|x| (-1.0..=1.0).contains(x)));
        let p = gan.disc_forward(out).unwrap();
        assert_eq!(p.len(), n);
        assert!(p.iter().all(|&p| p > 0.0 && p < 1.0));
    }
    assert!(matches!(gan.disc_forward(Tensor::zeros([2, 3, 32, 32])), Err(ShapeMismatch::Input { .. })));
    assert!(gan.gen_forward(latents(1, 7, 0)).is_err());
}

#[test]
fn init_is_seeded_and_zeroes_batch_norm_biases() {
    let a: Gan<f32> = Gan::init(&small(), &InitSpec::default(), 9);
    assert_eq!(a, Gan::init(&small(), &InitSpec::default(), 9));
    assert_ne!(a, Gan::init(&small(), &InitSpec::default(), 10));
    for net in [&a.generator, &a.discriminator] {
        for p in net.params().iter().filter(|p| p.name.ends_with(".bias")) {
            assert!(p.value.iter().all(|&b| b == 0.0), "{}", p.name);
        }
    }
}

#[test]
fn untrained_discriminator_is_undecided() {
    let gan: Gan<f32> = Gan::init(&GanArchitecture::default(), &InitSpec::default(), 2);
    let images = images_to_tensor(&dataset(8, 2));
    let p = gan.disc_forward(images).unwrap();
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    assert!((mean - 0.5).abs() < 0.2, "mean probability {mean}");
}

#[test]
fn first_discriminator_loss_is_near_two_ln_two() {
    let mut state = TrainState::new(GanConfig::default());
    let losses = state.train_step(images_to_tensor(&dataset(64, 3))).unwrap();
    assert!((0.8..=2.0).contains(&losses.d_loss), "d_loss {}", losses.d_loss);
    assert!(losses.g_loss.is_finite());
}

#[test]
fn empty_inputs_are_rejected() {
    let mut state = TrainState::new(config(1));
    assert!(matches!(state.train_step(Tensor::zeros([0, 3, 64, 64])), Err(TrainError::EmptyBatch)));
    assert!(matches!(train(config(1), &[], no_checkpoints), Err(TrainError::EmptyDataset)));
}

#[test]
fn a_step_changes_every_parameter_tensor() {
    let mut state = TrainState::new(config(1));
    let before = state.gan.clone();
    state.train_step(images_to_tensor(&dataset(4, 4))).unwrap();
    for (new, old) in [(&state.gan.generator, &before.generator), (&state.gan.discriminator, &before.discriminator)] {
        for (p, q) in new.params().iter().zip(old.params()) {
            assert_ne!(p.value, q.value, "{} unchanged", p.name);
        }
    }
}

#[test]
fn zero_iterations_gives_one_checkpoint() {
    let mut seen = Vec::new();
    let (_, report) = train(config(0), &dataset(2, 0), |s| {
        seen.push(s.iteration);
        Ok(format!("ckpt-{}", s.iteration))
    })
    .unwrap();
    assert!(report.d_loss.is_empty() && report.g_loss.is_empty());
    assert_eq!(report.checkpoints, vec![(0, "ckpt-0".to_string())]);
    assert_eq!(seen, [0]);
}

#[test]
fn checkpoints_follow_the_period() {
    let cfg = GanConfig { checkpoint_every: 3, ..config(7) };
    let (_, report) = train(cfg, &dataset(5, 0), |s| Ok(s.iteration.to_string())).unwrap();
    assert_eq!(report.checkpoints.iter().map(|c| c.0).collect::<Vec<_>>(), [3, 6, 7]);
    assert_eq!(report.d_loss.len(), 7);
    let csv = report.to_csv();
    assert!(csv.starts_with("iteration,d_loss,g_loss\n1,"));
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn training_is_reproducible_and_resumable() {
    let data = dataset(10, 1);
    let (full, a) = train(config(12), &data, no_checkpoints).unwrap();
    let (_, b) = train(config(12), &data, no_checkpoints).unwrap();
    assert_eq!(a.d_loss, b.d_loss);
    assert_eq!(a.g_loss, b.g_loss);

    let (half, first) = train(config(5), &data, no_checkpoints).unwrap();
    let mut resumed = load_checkpoint(&save_checkpoint(&half), Some(&small())).unwrap();
    let second = resumed.run(&data, 7, no_checkpoints).unwrap();
    assert_eq!([first.g_loss, second.g_loss].concat(), a.g_loss);
    assert_eq!([first.d_loss, second.d_loss].concat(), a.d_loss);
    resumed.config.total_iterations = full.config.total_iterations;
    assert_eq!(resumed, full);
}

#[test]
fn saved_generator_is_bit_exact() {
    let (state, _) = train(config(3), &dataset(4, 2), no_checkpoints).unwrap();
    let loaded = load_checkpoint(&save_checkpoint(&state), None).unwrap();
    let z = latents(3, 8, 11);
    let a = state.gan.gen_forward(z.clone()).unwrap();
    let b = loaded.gan.gen_forward(z).unwrap();
    assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn samples_are_seeded_and_decodable() {
    let gan: Gan<f32> = Gan::init(&small(), &InitSpec::default(), 4);
    let a = sample(&gan, 3, 8).unwrap();
    assert_eq!(a, sample(&gan, 3, 8).unwrap());
    assert_ne!(a, sample(&gan, 3, 9).unwrap());
    assert_eq!(decode_image(&sample(&gan, 1, 0).unwrap()[0], Mode::Binary).len(), 192);
    assert!(sample(&gan, 0, 0).is_err());
}
