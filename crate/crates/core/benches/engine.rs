use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use neyfact::exact;
use neyfact::sim::{self, EnumerationOptions, SimulationOptions};
use neyfact::{Execution, FactorialDesign};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn lawyer_table(n: u64) -> sim::PotentialOutcomesTable {
    let design = FactorialDesign::new(["race", "gender", "income"]).unwrap();
    let targets: Vec<_> = [2, 2, 2, 3, 5, 2, 5, 6].iter().map(|&c| exact::ratio(c, 12)).collect();
    let base = sim::construct_population(n, &targets, &design).unwrap();
    sim::permute_population(&base, 7)
}

fn simulate(c: &mut Criterion) {
    let table = lawyer_table(96);
    let mut group = c.benchmark_group("simulate_96x1000");
    group.sample_size(10);
    for (name, execution) in MODES {
        let options = SimulationOptions { draws: 1000, execution, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sim::simulate(&table, &[12; 8], &options).unwrap())
        });
    }
    group.finish();
}

fn enumerate(c: &mut Criterion) {
    let design = FactorialDesign::with_factors(2).unwrap();
    let targets = [exact::ratio(1, 4), exact::ratio(1, 2), exact::ratio(1, 2), exact::ratio(3, 4)];
    let table = sim::permute_population(&sim::construct_population(12, &targets, &design).unwrap(), 3);
    let mut group = c.benchmark_group("enumerate_12_in_4x3");
    group.sample_size(10);
    for (name, execution) in MODES {
        let options = EnumerationOptions { execution, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sim::enumerate_randomizations(&table, &[3; 4], &options).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, simulate, enumerate);
criterion_main!(benches);
