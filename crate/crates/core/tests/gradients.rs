//! Analytic gradients against central finite differences, in f64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rollgan::dcgan::{Gan, GanArchitecture, InitSpec, Network, Tensor};

const STEP: f64 = 1e-6;
const TOLERANCE: f64 = 1e-4;

fn normal(rng: &mut ChaCha8Rng, shape: [usize; 4], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect())
}

/// Larger weights than the default init so activations leave the linear regime.
fn tiny_gan(arch: &GanArchitecture, seed: u64) -> Gan<f64> {
    let spec = InitSpec { conv_std: 0.3, bn_weight_std: 0.3, ..InitSpec::default() };
    let mut gan = Gan::init(arch, &spec, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    for net in [&mut gan.generator, &mut gan.discriminator] {
        for p in net.params_mut().iter_mut().filter(|p| p.name.ends_with(".bias")) {
            p.value.iter_mut().for_each(|b| *b = 0.2 * rng.sample::<f64, _>(StandardNormal));
        }
    }
    gan
}

/// Worst relative error over every parameter of `pick(gan)`.
fn check(
    gan: &mut Gan<f64>,
    pick: fn(&mut Gan<f64>) -> &mut Network<f64>,
    loss: &dyn Fn(&Gan<f64>) -> f64,
    analytic: &dyn Fn(&mut Gan<f64>),
) -> f64 {
    pick(gan).zero_grad();
    analytic(gan);
    let grads: Vec<Vec<f64>> = pick(gan).params().iter().map(|p| p.grad.clone()).collect();
    let mut worst: f64 = 0.0;
    for (pi, grad) in grads.iter().enumerate() {
        for (i, &a) in grad.iter().enumerate() {
            let original = pick(gan).params()[pi].value[i];
            pick(gan).params_mut()[pi].value[i] = original + STEP;
            let up = loss(gan);
            pick(gan).params_mut()[pi].value[i] = original - STEP;
            let down = loss(gan);
            pick(gan).params_mut()[pi].value[i] = original;
            let numeric = (up - down) / (2.0 * STEP);
            let scale = a.abs().max(numeric.abs()).max(1e-6);
            let err = (a - numeric).abs() / scale;
            let name = &pick(gan).params()[pi].name;
            assert!(err < TOLERANCE, "{name}[{i}]: analytic {a:e}, numeric {numeric:e}");
            worst = worst.max(err);
        }
    }
    worst
}

fn check_both(arch: GanArchitecture, batch: usize, seed: u64) {
    let mut gan = tiny_gan(&arch, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = arch.image_size();
    let real = normal(&mut rng, [batch, 3, size, size], 0.5).map(f64::tanh);
    let z = normal(&mut rng, [batch, arch.latent_dim, 1, 1], 1.0);

    let (r, zz) = (real.clone(), z.clone());
    let d_err = check(
        &mut gan,
        |g| &mut g.discriminator,
        &|g| g.discriminator_loss(&r, &zz).unwrap(),
        &|g| {
            g.discriminator_gradients(&r, &zz).unwrap();
        },
    );
    let g_err = check(
        &mut gan,
        |g| &mut g.generator,
        &|g| g.generator_loss(&z).unwrap(),
        &|g| {
            g.generator_gradients(&z).unwrap();
        },
    );
    println!("{}: worst relative error D {d_err:.2e}, G {g_err:.2e}", arch);
}

#[test]
fn tiny_instance_8x8() {
    check_both(GanArchitecture::new(4, vec![8], vec![8]).unwrap(), 3, 1);
}

#[test]
fn tiny_instance_with_discriminator_batch_norm() {
    check_both(GanArchitecture::new(4, vec![6, 4], vec![4, 6]).unwrap(), 2, 2);
}

#[test]
fn gradient_calls_do_not_touch_running_statistics() {
    let arch = GanArchitecture::new(4, vec![6, 4], vec![4, 6]).unwrap();
    let mut gan = tiny_gan(&arch, 3);
    let before = gan.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = normal(&mut rng, [2, 4, 1, 1], 1.0);
    gan.generator_gradients(&z).unwrap();
    assert_eq!(gan.generator.buffers(), before.generator.buffers());
    assert_eq!(gan.discriminator.buffers(), before.discriminator.buffers());
}
