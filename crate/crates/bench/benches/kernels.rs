use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::Rng;
use spikemix_core::evaluation::{isl_log_likelihood, IslConfig};
use spikemix_core::lif::{calibrate, LifParams, LifSetup, LifSimulator, NoiseConfig, StpParams};
use spikemix_core::samplers::{block_gibbs_sweep, gibbs_sweep, RbmLayout};
use spikemix_core::{seeded, BinaryState, BoltzmannMachine};

fn rbm(layout: &RbmLayout, seed: u64) -> BoltzmannMachine {
    let mut rng = seeded(seed);
    let mut m = BoltzmannMachine::zeros(layout.n_units());
    for v in layout.visible_side() {
        for h in layout.hidden() {
            m.set_weight(v, h, rng.random_range(-0.1..0.1)).unwrap();
        }
    }
    m
}

fn gibbs(c: &mut Criterion) {
    let m = BoltzmannMachine::random_uniform(20, 0.6, &mut seeded(1));
    let mut state = BinaryState::zeros(20);
    let mut rng = seeded(2);
    c.bench_function("gibbs_sweep_20_units", |b| b.iter(|| gibbs_sweep(&m, &mut state, 1.0, &mut rng)));

    let layout = RbmLayout::new(784, 100, 3);
    let m = rbm(&layout, 3);
    let mut state = BinaryState::zeros(layout.n_units());
    c.bench_function("block_gibbs_sweep_784_100_3", |b| {
        b.iter(|| block_gibbs_sweep(&m, &layout, &mut state, 1.0, &mut rng))
    });
}

fn lif(c: &mut Criterion) {
    let cal = calibrate(&LifParams::cuba(), &NoiseConfig::cuba_default(), &mut seeded(4)).unwrap();
    let setup = LifSetup::new(LifParams::cuba(), cal, StpParams::renewing(10.0));
    let m = BoltzmannMachine::random_uniform(10, 0.6, &mut seeded(5));
    let cfg = setup.network(&m).unwrap();
    c.bench_function("lif_10_neurons_100ms", |b| {
        b.iter_batched(
            || LifSimulator::new(cfg.clone(), seeded(6)).unwrap(),
            |mut sim| sim.run_until(100.0),
            BatchSize::SmallInput,
        )
    });
}

fn isl(c: &mut Criterion) {
    let mut rng = seeded(7);
    let mut images = |n: usize| -> Vec<Vec<u8>> {
        (0..n).map(|_| (0..784).map(|_| rng.random_bool(0.2) as u8).collect()).collect()
    };
    let test = images(100);
    let generated = images(1000);
    c.bench_function("isl_100_test_1000_generated", |b| {
        b.iter(|| isl_log_likelihood(&test, &generated, &IslConfig::default()).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = gibbs, lif, isl
}
criterion_main!(benches);
