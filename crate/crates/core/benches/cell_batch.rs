use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use homog::extension::TwoScaleCoefficient;
use homog::field::{synthesize, FieldKind, FieldSpec};
use homog::upscale::{sample_a_continuous, CellOptions, SampleLattice};
use homog::{DomainBox, Exec};

fn averaging(c: &mut Criterion) {
    let field = synthesize(&FieldSpec {
        kind: FieldKind::SeededRandom {
            seed: 1,
            contrast: 10.0,
            cell: 0.0125,
        },
        omega: DomainBox::unit(2),
        margin: 0.1,
    })
    .unwrap();
    let ext = TwoScaleCoefficient::continuous(field, 0.1).unwrap();
    let lattice = SampleLattice::new(DomainBox::unit(2), vec![5, 5]).unwrap();
    let mut group = c.benchmark_group("cell_batch");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        let opts = CellOptions {
            n: 32,
            exec,
            ..CellOptions::default()
        };
        group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), lattice.len()), &opts, |b, o| {
            b.iter(|| sample_a_continuous(&ext, &lattice, o).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, averaging);
criterion_main!(benches);
