use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::network::{ConvSpec, Layer, Network, ShapeMismatch};
use super::tensor::{Scalar, Tensor};

pub const IMAGE_CHANNELS: usize = 3;
const KERNEL: usize = 4;

/// Channel chains of both networks.
///
/// The generator starts with a 4×4 stride-1 transposed convolution from the
/// latent vector and doubles the resolution with each further layer; the
/// discriminator mirrors it. Both therefore need `len` layers for a
/// `4·2^len` image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GanArchitecture {
    pub latent_dim: usize,
    pub gen_channels: Vec<usize>,
    pub disc_channels: Vec<usize>,
}

impl Default for GanArchitecture {
    fn default() -> Self {
        GanArchitecture { latent_dim: 100, gen_channels: vec![512, 256, 128, 64], disc_channels: vec![64, 128, 256, 512] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArchitectureError {
    #[error("generator produces {gen}x{gen} images but the discriminator expects {disc}x{disc}")]
    SizeMismatch { gen: usize, disc: usize },
    #[error("channel chains and the latent size must be non-empty and positive")]
    Empty,
    #[error("malformed architecture descriptor `{0}`")]
    Descriptor(String),
}

impl GanArchitecture {
    pub fn new(latent_dim: usize, gen_channels: Vec<usize>, disc_channels: Vec<usize>) -> Result<Self, ArchitectureError> {
        let arch = GanArchitecture { latent_dim, gen_channels, disc_channels };
        arch.validate()?;
        Ok(arch)
    }

    fn validate(&self) -> Result<(), ArchitectureError> {
        let chains = [&self.gen_channels, &self.disc_channels];
        if self.latent_dim == 0 || chains.iter().any(|c| c.is_empty() || c.contains(&0)) {
            return Err(ArchitectureError::Empty);
        }
        let size = |layers: usize| 4usize << layers;
        let (gen, disc) = (size(self.gen_channels.len()), size(self.disc_channels.len()));
        if gen != disc {
            return Err(ArchitectureError::SizeMismatch { gen, disc });
        }
        Ok(())
    }

    /// Side length of generated images.
    pub fn image_size(&self) -> usize {
        4 << self.gen_channels.len()
    }

    /// Compact text form, e.g. `latent=100;gen=512,256,128,64;disc=64,128,256,512`.
    pub fn descriptor(&self) -> String {
        let join = |c: &[usize]| c.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        format!("latent={};gen={};disc={}", self.latent_dim, join(&self.gen_channels), join(&self.disc_channels))
    }

    pub fn from_descriptor(s: &str) -> Result<Self, ArchitectureError> {
        let bad = || ArchitectureError::Descriptor(s.to_string());
        let mut parts = s.split(';');
        let mut field = |key: &str| parts.next().and_then(|p| p.strip_prefix(key)).ok_or_else(bad);
        let latent = field("latent=")?.parse().map_err(|_| bad())?;
        let list = |v: &str| v.split(',').map(str::parse).collect::<Result<Vec<usize>, _>>().map_err(|_| bad());
        let gen = list(field("gen=")?)?;
        let disc = list(field("disc=")?)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        GanArchitecture::new(latent, gen, disc)
    }
}

impl fmt::Display for GanArchitecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

/// Normal initialization of conv weights and batch-norm scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub conv_mean: f64,
    pub conv_std: f64,
    pub bn_weight_mean: f64,
    pub bn_weight_std: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec { conv_mean: 0.0, conv_std: 0.02, bn_weight_mean: 1.0, bn_weight_std: 0.02 }
    }
}

/// Generator and discriminator with their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gan<T> {
    arch: GanArchitecture,
    pub generator: Network<T>,
    pub discriminator: Network<T>,
}

impl<T: Scalar> Gan<T> {
    /// Deterministic for a given seed. Generator tensors are drawn first, in
    /// layer order, then the discriminator's. Batch-norm biases start at zero.
    pub fn init(arch: &GanArchitecture, spec: &InitSpec, seed: u64) -> Self {
        arch.validate().expect("invalid architecture");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv = Normal::new(spec.conv_mean, spec.conv_std).expect("valid std");
        let bn = Normal::new(spec.bn_weight_mean, spec.bn_weight_std).expect("valid std");
        let mut draw = |dist: &Normal<f64>, len: usize| -> Vec<T> { (0..len).map(|_| T::of(dist.sample(&mut rng))).collect() };

        let mut gen = Network::new("generator", [arch.latent_dim, 1, 1]);
        let mut cin = arch.latent_dim;
        for (i, &cout) in arch.gen_channels.iter().enumerate() {
            let spec = if i == 0 { ConvSpec { cin, cout, k: KERNEL, s: 1, p: 0 } } else { stride2(cin, cout) };
            gen.conv_transpose(spec, draw(&conv, cin * cout * KERNEL * KERNEL));
            gen.batch_norm(draw(&bn, cout));
            gen.push(Layer::Relu);
            cin = cout;
        }
        gen.conv_transpose(stride2(cin, IMAGE_CHANNELS), draw(&conv, cin * IMAGE_CHANNELS * KERNEL * KERNEL));
        gen.push(Layer::Tanh);

        let size = arch.image_size();
        let mut disc = Network::new("discriminator", [IMAGE_CHANNELS, size, size]);
        let mut cin = IMAGE_CHANNELS;
        for (i, &cout) in arch.disc_channels.iter().enumerate() {
            disc.conv(stride2(cin, cout), draw(&conv, cin * cout * KERNEL * KERNEL));
            if i > 0 {
                disc.batch_norm(draw(&bn, cout));
            }
            disc.push(Layer::LeakyRelu);
            cin = cout;
        }
        disc.conv(ConvSpec { cin, cout: 1, k: KERNEL, s: 1, p: 0 }, draw(&conv, cin * KERNEL * KERNEL));

        Gan { arch: arch.clone(), generator: gen, discriminator: disc }
    }

    pub fn architecture(&self) -> &GanArchitecture {
        &self.arch
    }

    /// Inference-mode generator: `(n, latent, 1, 1)` to `(n, 3, s, s)` in [-1, 1].
    pub fn gen_forward(&self, z: Tensor<T>) -> Result<Tensor<T>, ShapeMismatch> {
        self.generator.forward_eval(z)
    }

    /// Inference-mode discriminator logits, one per image.
    pub fn disc_logits(&self, images: Tensor<T>) -> Result<Vec<T>, ShapeMismatch> {
        Ok(self.discriminator.forward_eval(images)?.into_data())
    }

    /// Inference-mode probabilities that each image is real, strictly inside (0, 1).
    pub fn disc_forward(&self, images: Tensor<T>) -> Result<Vec<f64>, ShapeMismatch> {
        Ok(self.disc_logits(images)?.into_iter().map(|l| probability(l.f64())).collect())
    }

    /// Training-mode discriminator loss: real images against target 1 plus
    /// `G(z)` against target 0, as separate batches.
    pub fn discriminator_loss(&self, real: &Tensor<T>, z: &Tensor<T>) -> Result<f64, ShapeMismatch> {
        let (fake, _) = self.generator.forward_train(z.clone())?;
        let (out_real, _) = self.discriminator.forward_train(real.clone())?;
        let (out_fake, _) = self.discriminator.forward_train(fake)?;
        Ok(bce_with_logits(out_real.data(), 1.0).0 + bce_with_logits(out_fake.data(), 0.0).0)
    }

    /// Training-mode generator loss: `D(G(z))` against target 1.
    pub fn generator_loss(&self, z: &Tensor<T>) -> Result<f64, ShapeMismatch> {
        let (fake, _) = self.generator.forward_train(z.clone())?;
        let (out, _) = self.discriminator.forward_train(fake)?;
        Ok(bce_with_logits(out.data(), 1.0).0)
    }

    /// Adds the gradient of [`Self::discriminator_loss`] to the discriminator's
    /// parameter gradients. Running statistics are left alone.
    pub fn discriminator_gradients(&mut self, real: &Tensor<T>, z: &Tensor<T>) -> Result<f64, ShapeMismatch> {
        let (fake, _) = self.generator.forward_train(z.clone())?;
        let mut total = 0.0;
        for (batch, target) in [(real.clone(), 1.0), (fake, 0.0)] {
            let (out, tape) = self.discriminator.forward_train(batch)?;
            let (loss, grad) = bce_with_logits(out.data(), target);
            self.discriminator.backward(tape, Tensor::from_vec(out.shape(), grad), true, false);
            total += loss;
        }
        Ok(total)
    }

    /// Adds the gradient of [`Self::generator_loss`] to the generator's
    /// parameter gradients. Running statistics are left alone.
    pub fn generator_gradients(&mut self, z: &Tensor<T>) -> Result<f64, ShapeMismatch> {
        let (fake, g_tape) = self.generator.forward_train(z.clone())?;
        let (out, tape) = self.discriminator.forward_train(fake)?;
        let (loss, grad) = bce_with_logits(out.data(), 1.0);
        let dx = self.discriminator.backward(tape, Tensor::from_vec(out.shape(), grad), false, true);
        self.generator.backward(g_tape, dx.expect("input gradient requested"), true, false);
        Ok(loss)
    }
}

fn stride2(cin: usize, cout: usize) -> ConvSpec {
    ConvSpec { cin, cout, k: KERNEL, s: 2, p: 1 }
}

/// Logistic function kept away from exactly 0 and 1.
pub fn probability(logit: f64) -> f64 {
    let p = if logit >= 0.0 { 1.0 / (1.0 + (-logit).exp()) } else { logit.exp() / (1.0 + logit.exp()) };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Mean binary cross-entropy of `sigmoid(logits)` against a constant target,
/// with the gradient with respect to each logit.
pub fn bce_with_logits<T: Scalar>(logits: &[T], target: f64) -> (f64, Vec<T>) {
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let grad = logits
        .iter()
        .map(|&x| {
            let x = x.f64();
            loss += x.max(0.0) - x * target + (-x.abs()).exp().ln_1p();
            let sig = if x >= 0.0 { 1.0 / (1.0 + (-x).exp()) } else { x.exp() / (1.0 + x.exp()) };
            T::of((sig - target) / n)
        })
        .collect();
    (loss / n, grad)
}
