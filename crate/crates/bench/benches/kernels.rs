use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;

use cgolab::carleman::{apply_g_tau, m_tau, m_tau_quadrature, CarlemanParams, SpectralField};
use cgolab::forward::{BoxGrid, DirichletSystem};
use cgolab::geometry::{build_flat_torus_basis, ProductCylinder, SimpleManifold2D};
use cgolab::xray::{BoundaryDirectionGrid, DiscreteRayTransform, PixelGrid};

fn multiplier(c: &mut Criterion) {
    c.bench_function("m_tau closed form", |b| {
        b.iter(|| m_tau(black_box(-0.4), black_box(6.5), black_box(16.0)).unwrap())
    });
    c.bench_function("m_tau quadrature 1e-9", |b| {
        b.iter(|| m_tau_quadrature(black_box(-0.4), black_box(6.5), black_box(16.0), 1e-9).unwrap())
    });
}

fn carleman_inverse(c: &mut Criterion) {
    let base = Arc::new(build_flat_torus_basis(&[1.0, 1.0], 64).unwrap());
    let cyl = Arc::new(ProductCylinder::new((-0.6, 0.6), base.clone(), 241).unwrap());
    let f = SpectralField::from_fn(cyl, |x1, y| {
        Complex64::new((-8.0 * x1 * x1).exp() * (6.0 * y[0]).cos(), y[1] * x1)
    });
    let params = CarlemanParams::new(16.0, (-0.6, 0.6), &base).unwrap();
    c.bench_function("apply_g_tau mc64 n1 241", |b| b.iter(|| apply_g_tau(black_box(&f), &params).unwrap()));
}

fn dirichlet(c: &mut Criterion) {
    let grid = BoxGrid::new([-0.6, -0.5, -0.5], [0.6, 0.5, 0.5], [25, 21, 21]).unwrap();
    let sys = DirichletSystem::from_fn(grid.clone(), |x| Complex64::new(2.0 * (-(x[0] * x[0]) * 10.0).exp(), 0.0)).unwrap();
    let f: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            Complex64::from_polar(1.0, 3.0 * p[1] + p[2]) * (4.0 * p[0]).exp()
        })
        .collect();
    c.bench_function("dirichlet solve 25x21x21", |b| b.iter(|| sys.solve(black_box(&f)).unwrap()));
}

fn ray_transform(c: &mut Criterion) {
    let man = SimpleManifold2D::euclidean_disk(1.0);
    let pixels = PixelGrid::new(&man, 32).unwrap();
    let rays = BoundaryDirectionGrid::new(&man, 128, 64).unwrap();
    let t = DiscreteRayTransform::new(&man, pixels.clone(), rays, 0.3);
    let f = pixels.sample(|x| (-4.0 * (x[0] * x[0] + x[1] * x[1])).exp());
    c.bench_function("ray transform 32² pixels", |b| b.iter(|| t.apply(black_box(&f))));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = multiplier, carleman_inverse, dirichlet, ray_transform
}
criterion_main!(benches);
