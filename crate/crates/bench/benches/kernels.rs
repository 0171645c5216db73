use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use faer::Mat;
use num_complex::Complex64;
use qcollide::entanglement::gram_contraction;
use qcollide::field::{relative_table, FieldOptions};
use qcollide::quadmath::{gauss_legendre, sph_bessel_j_table};
use qcollide::{entanglement_at, phase_shift, PacketPair, PotentialWell, QuadSpec};

fn gram(c: &mut Criterion) {
    let mut group = c.benchmark_group("gram_contraction");
    group.sample_size(10);
    for n in [384usize, 1536] {
        // deterministic, full-rank-ish fill without pulling in an RNG
        let t = Mat::from_fn(n, n, |i, j| {
            let x = (i * 7919 + j * 104_729) as f64;
            Complex64::new((x * 0.618).sin(), (x * 0.414).cos())
        });
        group.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| b.iter(|| gram_contraction(t.as_ref())));
    }
    group.finish();
}

fn special_functions(c: &mut Criterion) {
    let mut out = vec![0.0; 7];
    c.bench_function("sph_bessel_j_table/l6", |b| {
        b.iter(|| {
            for k in 1..=1000 {
                sph_bessel_j_table(black_box(k as f64 * 0.05), &mut out);
            }
        })
    });
    c.bench_function("gauss_legendre/256", |b| b.iter(|| gauss_legendre(black_box(256), -1.0, 1.0)));
    let well = PotentialWell::new(8.0, 1.0).unwrap();
    c.bench_function("phase_shift/l0..6", |b| {
        b.iter(|| (0..=6).map(|l| phase_shift(&well, l, black_box(0.87)).unwrap()).sum::<f64>())
    });
}

fn tables(c: &mut Criterion) {
    let pair = PacketPair::new([1.0, 1.0, 2.0], 0.8, 0.0).unwrap();
    let well = PotentialWell::new(8.0, 1.0).unwrap();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("relative_table/t5", |b| {
        b.iter(|| relative_table(&pair, &well, 5.0, true, &FieldOptions::default()).unwrap())
    });
    let quad = QuadSpec { orders: [12, 24, 16], ..QuadSpec::default() };
    group.bench_function("entanglement_at/t1/coarse", |b| b.iter(|| entanglement_at(&pair, &well, 1.0, &quad).unwrap()));
    group.finish();
}

criterion_group!(benches, gram, special_functions, tables);
criterion_main!(benches);
