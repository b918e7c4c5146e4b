use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use reconn_core::problems::MATERIAL_SIGMA;
use reconn_core::{Activation, Batch, Cutoff, Field, JetOrder, Loss, Problem, Rng, SturmLiouvilleSolution, Tape};

fn jet_forward_backward(c: &mut Criterion) {
    let field = Field::classical(&[2, 30, 30, 30, 1], Activation::Tanh, 0).unwrap();
    let mut rng = Rng::new(0, 0);
    let pts: Vec<_> = (0..1000).map(|_| [rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)]).collect();
    let mut group = c.benchmark_group("mlp_1000_points");
    for order in [JetOrder::Value, JetOrder::Gradient, JetOrder::Laplacian] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{order:?}")), &order, |b, &order| {
            b.iter(|| {
                let mut tape = Tape::new();
                let j = field.eval(&mut tape, &pts, order).unwrap();
                let target = if order == JetOrder::Laplacian { j.laplacian(&mut tape) } else { j.u };
                let s = tape.mean(target);
                black_box(tape.gradient(&[(s, 1.0)], field.param_count()))
            })
        });
    }
    group.finish();
}

fn loss_evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("pinns_loss");
    group.sample_size(20);
    let interface = Problem::interface();
    let material = Problem::material_vertex().unwrap();
    let fields = [
        ("interface", &interface, Field::interface(&[2, 30, 30, 30, 2], Activation::Tanh, interface.interfaces.clone(), 0).unwrap()),
        ("material", &material, Field::material_vertex(&[2, 30, 30, 30, 6], &[2, 15, 15, 15, 3], Cutoff::default(), 0).unwrap()),
    ];
    for (name, problem, field) in &fields {
        let loss = Loss::pinns(problem, !field.units().is_empty());
        let batch = Batch::sample(problem, [1000, 1000, 1000], &mut Rng::new(1, 1), false);
        group.bench_function(*name, |b| b.iter(|| black_box(loss.evaluate(field, problem, &batch, true).unwrap().total)));
    }
    group.finish();
}

fn sturm_liouville(c: &mut Criterion) {
    c.bench_function("singular_exponent", |b| {
        b.iter(|| black_box(SturmLiouvilleSolution::solve(black_box(MATERIAL_SIGMA)).unwrap().lambda))
    });
    c.bench_function("fem_exponent_256", |b| {
        b.iter(|| black_box(reconn_core::problems::fem_exponent(black_box(MATERIAL_SIGMA), 256)))
    });
}

criterion_group!(benches, jet_forward_backward, loss_evaluation, sturm_liouville);
criterion_main!(benches);
