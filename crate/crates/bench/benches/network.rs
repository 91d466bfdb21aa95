use criterion::{criterion_group, criterion_main, Criterion};
use rollgan::dcgan::{images_to_tensor, sample, Gan, GanArchitecture, GanConfig, InitSpec, Tensor, TrainState};
use rollgan::pianoroll::encode_window;
use rollgan::preprocess::Mode;
use rollgan_bench::busy_window;
use std::hint::black_box;

fn reduced() -> GanArchitecture {
    GanArchitecture::new(100, vec![32, 16, 16, 8], vec![8, 16, 16, 32]).unwrap()
}

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward");
    group.sample_size(10);
    let gan: Gan<f32> = Gan::init(&GanArchitecture::default(), &InitSpec::default(), 0);
    group.bench_function("generate/full/8", |b| b.iter(|| sample(black_box(&gan), 8, 0).unwrap()));
    let images = images_to_tensor(&sample(&gan, 8, 1).unwrap());
    group.bench_function("discriminate/full/8", |b| b.iter(|| gan.disc_forward(black_box(images.clone())).unwrap()));
    group.finish();
}

fn train_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_step");
    group.sample_size(10);
    let image = encode_window(&busy_window(Mode::Binary, 9)).unwrap();
    let batch: Tensor<f32> = images_to_tensor(std::iter::repeat(&image).take(16));
    for (name, arch) in [("reduced", reduced()), ("full", GanArchitecture::default())] {
        let mut state = TrainState::new(GanConfig { arch, batch_size: 16, ..GanConfig::default() });
        group.bench_function(format!("{name}/16"), |b| b.iter(|| state.train_step(black_box(batch.clone())).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, forward, train_step);
criterion_main!(benches);
