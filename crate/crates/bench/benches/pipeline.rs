use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use squint_bench::{equatorial_css, fringe_samples, small_scenario, BENCH_ATOMS};
use squint_core::analysis::fit_fringe;
use squint_core::dynamics::{qnd_measure, twist, TwistSpec};
use squint_core::harness::{prepare, run_trial};
use squint_core::rng::stream;
use squint_core::{rotate, SpinProjectionAxis};

fn spin(c: &mut Criterion) {
    let css = equatorial_css(BENCH_ATOMS).unwrap();
    c.bench_function("rotate_pi2_n1170", |b| {
        b.iter(|| rotate(black_box(&css), std::f64::consts::FRAC_PI_2, SpinProjectionAxis::Y).unwrap())
    });
    let spec = TwistSpec { mu: 1e-3, ..Default::default() };
    c.bench_function("twist_echo_n1170", |b| b.iter(|| twist(black_box(&css), &spec).unwrap()));
    c.bench_function("qnd_measure_n1170", |b| {
        b.iter_batched(
            || stream(1, 0, 0),
            |mut rng| qnd_measure(black_box(&css), 5.0, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn analysis(c: &mut Criterion) {
    let (phases, values) = fringe_samples(160, 3.0, 200.0, 0.4);
    c.bench_function("fringe_fit_160", |b| b.iter(|| fit_fringe(black_box(&phases), black_box(&values)).unwrap()));
}

fn harness(c: &mut Criterion) {
    let prep = prepare(&small_scenario("qnd-vs-photons", 100).unwrap()).unwrap();
    c.bench_function("qnd_trial", |b| b.iter(|| run_trial(black_box(&prep), 7).unwrap()));
    let prep = prepare(&small_scenario("squeezed-mz", 100).unwrap()).unwrap();
    c.bench_function("mz_trial", |b| b.iter(|| run_trial(black_box(&prep), 7).unwrap()));
}

criterion_group!(benches, spin, analysis, harness);
criterion_main!(benches);
