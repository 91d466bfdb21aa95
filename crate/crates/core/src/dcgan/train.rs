use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::model::{bce_with_logits, Gan, GanArchitecture, InitSpec, IMAGE_CHANNELS};
use super::network::ShapeMismatch;
use super::optim::{Adam, AdamConfig};
use super::tensor::Tensor;
use crate::pianoroll::{PianoRollImage, IMAGE_SIZE};
use crate::preprocess::Mode;

/// Stream of the training RNG; initialization uses stream 0 of the same seed.
const TRAIN_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GanConfig {
    pub arch: GanArchitecture,
    pub init: InitSpec,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub total_iterations: u64,
    pub seed: u64,
    /// Codec the dataset was built with; recorded in checkpoints.
    pub mode: Mode,
    /// Checkpoint period in iterations; 0 writes only the final one.
    pub checkpoint_every: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            arch: GanArchitecture::default(),
            init: InitSpec::default(),
            adam: AdamConfig::default(),
            batch_size: 64,
            total_iterations: 50_000,
            seed: 0,
            mode: Mode::Binary,
            checkpoint_every: 1_000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch size must be at least 1")]
    ZeroBatchSize,
    #[error("architecture generates {arch}x{arch} images, dataset images are {IMAGE_SIZE}x{IMAGE_SIZE}")]
    ImageSize { arch: usize },
    #[error("non-finite loss at iteration {iteration}: d_loss={d_loss}, g_loss={g_loss}")]
    NonFiniteLoss { iteration: u64, d_loss: f64, g_loss: f64 },
    #[error(transparent)]
    Shape(#[from] ShapeMismatch),
    #[error("checkpoint at iteration {iteration} failed: {message}")]
    Checkpoint { iteration: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub d_loss: f64,
    pub g_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Iteration count before the first step of this run.
    pub start_iteration: u64,
    pub d_loss: Vec<f64>,
    pub g_loss: Vec<f64>,
    /// `(iteration, reference)` for each checkpoint written.
    pub checkpoints: Vec<(u64, String)>,
    pub elapsed: Duration,
}

impl TrainReport {
    /// `iteration,d_loss,g_loss` rows, numbered from 1 after `start_iteration`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,d_loss,g_loss\n");
        for (i, (d, g)) in self.d_loss.iter().zip(&self.g_loss).enumerate() {
            out.push_str(&format!("{},{d},{g}\n", self.start_iteration + i as u64 + 1));
        }
        out
    }
}

/// Everything needed to continue training bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub config: GanConfig,
    pub gan: Gan<f32>,
    pub opt_g: Adam<f32>,
    pub opt_d: Adam<f32>,
    pub iteration: u64,
    pub(crate) rng: ChaCha8Rng,
    /// Current epoch's permutation of dataset indices and the next position in it.
    pub(crate) order: Vec<u32>,
    pub(crate) cursor: usize,
}

impl TrainState {
    pub fn new(config: GanConfig) -> Self {
        let gan = Gan::init(&config.arch, &config.init, config.seed);
        let opt_g = Adam::new(config.adam, gan.generator.params());
        let opt_d = Adam::new(config.adam, gan.discriminator.params());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(TRAIN_STREAM);
        TrainState { config, gan, opt_g, opt_d, iteration: 0, rng, order: Vec::new(), cursor: 0 }
    }

    /// Standard-normal latents of shape `(n, latent, 1, 1)` from the training RNG.
    fn latents(&mut self, n: usize) -> Tensor<f32> {
        let latent = self.config.arch.latent_dim;
        let data = (0..n * latent).map(|_| self.rng.sample::<f32, _>(StandardNormal)).collect();
        Tensor::from_vec([n, latent, 1, 1], data)
    }

    /// One discriminator update on a real and a generated batch, then one
    /// generator update against the updated discriminator.
    pub fn train_step(&mut self, real: Tensor<f32>) -> Result<StepLosses, TrainError> {
        if real.batch() == 0 {
            return Err(TrainError::EmptyBatch);
        }
        let z = self.latents(real.batch());
        let Gan { generator: g, discriminator: d, .. } = &mut self.gan;

        d.zero_grad();
        let (out, tape) = d.forward_train(real)?;
        d.update_running_stats(&tape);
        let (loss_real, grad) = bce_with_logits(out.data(), 1.0);
        d.backward(tape, Tensor::from_vec(out.shape(), grad), true, false);

        let (fake, g_tape) = g.forward_train(z)?;
        g.update_running_stats(&g_tape);

        let (out, tape) = d.forward_train(fake.clone())?;
        d.update_running_stats(&tape);
        let (loss_fake, grad) = bce_with_logits(out.data(), 0.0);
        d.backward(tape, Tensor::from_vec(out.shape(), grad), true, false);
        let d_loss = loss_real + loss_fake;
        if !d_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { iteration: self.iteration + 1, d_loss, g_loss: f64::NAN });
        }
        self.opt_d.update(d.params_mut());

        g.zero_grad();
        let (out, tape) = d.forward_train(fake)?;
        d.update_running_stats(&tape);
        let (g_loss, grad) = bce_with_logits(out.data(), 1.0);
        if !g_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { iteration: self.iteration + 1, d_loss, g_loss });
        }
        let dx = d.backward(tape, Tensor::from_vec(out.shape(), grad), false, true).expect("input gradient requested");
        g.backward(g_tape, dx, true, false);
        self.opt_g.update(g.params_mut());

        self.iteration += 1;
        Ok(StepLosses { d_loss, g_loss })
    }

    /// Indices of the next batch. Each epoch is a fresh seeded permutation;
    /// a tail shorter than the batch is skipped.
    fn next_batch(&mut self, len: usize) -> Vec<usize> {
        let size = self.config.batch_size.min(len);
        if self.order.len() != len || self.cursor + size > len {
            self.order = (0..len as u32).collect();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let batch = self.order[self.cursor..self.cursor + size].iter().map(|&i| i as usize).collect();
        self.cursor += size;
        batch
    }

    /// Runs `steps` more iterations, checkpointing through `on_checkpoint`
    /// every `checkpoint_every` iterations and once at the end.
    pub fn run<F>(&mut self, dataset: &[PianoRollImage], steps: u64, mut on_checkpoint: F) -> Result<TrainReport, TrainError>
    where
        F: FnMut(&TrainState) -> Result<String, String>,
    {
        if dataset.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        if self.config.batch_size == 0 {
            return Err(TrainError::ZeroBatchSize);
        }
        if self.config.arch.image_size() != IMAGE_SIZE {
            return Err(TrainError::ImageSize { arch: self.config.arch.image_size() });
        }
        let started = Instant::now();
        let mut report = TrainReport {
            start_iteration: self.iteration,
            d_loss: Vec::with_capacity(steps as usize),
            g_loss: Vec::with_capacity(steps as usize),
            checkpoints: Vec::new(),
            elapsed: Duration::ZERO,
        };
        let mut checkpoint = |state: &TrainState, report: &mut TrainReport| -> Result<(), TrainError> {
            let reference = on_checkpoint(state)
                .map_err(|message| TrainError::Checkpoint { iteration: state.iteration, message })?;
            report.checkpoints.push((state.iteration, reference));
            Ok(())
        };
        for _ in 0..steps {
            let indices = self.next_batch(dataset.len());
            let batch = images_to_tensor(indices.iter().map(|&i| &dataset[i]));
            let losses = self.train_step(batch)?;
            report.d_loss.push(losses.d_loss);
            report.g_loss.push(losses.g_loss);
            log::debug!("iteration {}: d_loss {:.4} g_loss {:.4}", self.iteration, losses.d_loss, losses.g_loss);
            let every = self.config.checkpoint_every;
            if every > 0 && self.iteration % every == 0 {
                checkpoint(self, &mut report)?;
            }
        }
        if report.checkpoints.last().map(|c| c.0) != Some(self.iteration) {
            checkpoint(self, &mut report)?;
        }
        report.elapsed = started.elapsed();
        Ok(report)
    }
}

/// Trains a fresh model for `config.total_iterations` steps.
pub fn train<F>(config: GanConfig, dataset: &[PianoRollImage], on_checkpoint: F) -> Result<(TrainState, TrainReport), TrainError>
where
    F: FnMut(&TrainState) -> Result<String, String>,
{
    let steps = config.total_iterations;
    let mut state = TrainState::new(config);
    let report = state.run(dataset, steps, on_checkpoint)?;
    Ok((state, report))
}

/// Pixels scaled from 0..=255 to [-1, 1], as a `(n, 3, 64, 64)` tensor.
pub fn images_to_tensor<'a>(images: impl IntoIterator<Item = &'a PianoRollImage>) -> Tensor<f32> {
    let plane = IMAGE_SIZE * IMAGE_SIZE;
    let mut data = Vec::new();
    let mut n = 0;
    for image in images {
        let raw = image.as_raw();
        let start = data.len();
        data.resize(start + IMAGE_CHANNELS * plane, 0.0);
        for (i, px) in raw.chunks_exact(IMAGE_CHANNELS).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                data[start + c * plane + i] = f32::from(v) / 127.5 - 1.0;
            }
        }
        n += 1;
    }
    Tensor::from_vec([n, IMAGE_CHANNELS, IMAGE_SIZE, IMAGE_SIZE], data)
}

/// Inverse of [`images_to_tensor`] with `round_half_up((x + 1) · 127.5)`, clamped.
pub fn tensor_to_images(t: &Tensor<f32>) -> Vec<PianoRollImage> {
    assert_eq!(t.shape()[1..], [IMAGE_CHANNELS, IMAGE_SIZE, IMAGE_SIZE], "not a batch of 64x64 RGB images");
    let plane = IMAGE_SIZE * IMAGE_SIZE;
    (0..t.batch())
        .map(|n| {
            let s = t.sample(n);
            let pixels = (0..plane)
                .flat_map(|i| (0..IMAGE_CHANNELS).map(move |c| s[c * plane + i]))
                .map(|x| ((f64::from(x) + 1.0) * 127.5 + 0.5).floor().clamp(0.0, 255.0) as u8)
                .collect();
            PianoRollImage::from_raw(pixels).expect("size checked")
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum SampleError {
    #[error("number of samples must be at least 1")]
    ZeroSamples,
    #[error("architecture generates {0}x{0} images, piano rolls are {IMAGE_SIZE}x{IMAGE_SIZE}")]
    ImageSize(usize),
}

/// Draws `n` latents from a standard normal seeded by `seed` and decodes
/// them with the generator in inference mode.
pub fn sample(gan: &Gan<f32>, n: usize, seed: u64) -> Result<Vec<PianoRollImage>, SampleError> {
    if n == 0 {
        return Err(SampleError::ZeroSamples);
    }
    let arch = gan.architecture();
    if arch.image_size() != IMAGE_SIZE {
        return Err(SampleError::ImageSize(arch.image_size()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f32> = (0..n * arch.latent_dim).map(|_| rng.sample(StandardNormal)).collect();
    let out = gan.gen_forward(Tensor::from_vec([n, arch.latent_dim, 1, 1], z)).expect("latent shape matches");
    Ok(tensor_to_images(&out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_scaling_round_trips() {
        let raw: Vec<u8> = (0..IMAGE_SIZE * IMAGE_SIZE * 3).map(|i| (i * 7 % 256) as u8).collect();
        let img = PianoRollImage::from_raw(raw).unwrap();
        let t = images_to_tensor([&img]);
        assert_eq!(t.shape(), [1, 3, 64, 64]);
        assert_eq!(t.data()[0], -1.0);
        assert_eq!(tensor_to_images(&t), vec![img]);
    }

    #[test]
    fn batches_cover_each_epoch() {
        let mut state = TrainState::new(tiny(GanConfig { batch_size: 3, ..GanConfig::default() }));
        let mut seen: Vec<usize> = (0..3).flat_map(|_| state.next_batch(10)).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 9);
        assert_eq!(state.next_batch(2).len(), 2);
    }

    fn tiny(config: GanConfig) -> GanConfig {
        GanConfig { arch: GanArchitecture::new(4, vec![4], vec![4]).unwrap(), ..config }
    }

    #[test]
    fn empty_inputs_rejected() {
        let mut state = TrainState::new(tiny(GanConfig::default()));
        assert!(matches!(state.train_step(Tensor::zeros([0, 3, 8, 8])), Err(TrainError::EmptyBatch)));
        assert!(matches!(state.run(&[], 1, |_| Ok(String::new())), Err(TrainError::EmptyDataset)));
    }
}
