#![allow(dead_code)]

use std::collections::BTreeMap;

use neyfact::exact::{self, Rational};
use neyfact::sim::{enumerate_randomizations, EnumerationOptions, PotentialOutcomesTable};
use neyfact::{ContrastMatrix, Execution, FactorialDesign};
use num_traits::Zero;
use rand::Rng;

pub fn random_table<R: Rng>(rng: &mut R, k: usize, n: usize) -> PotentialOutcomesTable {
    let design = FactorialDesign::with_factors(k).unwrap();
    let j = design.treatments();
    let columns = (0..j).map(|_| (0..n).map(|_| rng.gen_range(0..=1u8)).collect()).collect();
    PotentialOutcomesTable::from_columns(design, columns).unwrap()
}

/// Random arm sizes summing to `n`, each at least `min`.
pub fn random_arms<R: Rng>(rng: &mut R, j: usize, n: usize, min: u64) -> Vec<u64> {
    let mut arms = vec![min; j];
    for _ in 0..(n as u64 - min * j as u64) {
        arms[rng.gen_range(0..j)] += 1;
    }
    arms
}

/// Every assignment with the right arm sizes, found by scanning all `J^N`
/// label vectors.
pub fn brute_force_histogram(table: &PotentialOutcomesTable, arms: &[u64]) -> BTreeMap<Vec<u64>, u64> {
    let n = table.n_units();
    let j = arms.len();
    let mut out = BTreeMap::new();
    let mut labels = vec![0usize; n];
    loop {
        let mut sizes = vec![0u64; j];
        for &t in &labels {
            sizes[t] += 1;
        }
        if sizes == arms {
            let mut ones = vec![0u64; j];
            for (i, &t) in labels.iter().enumerate() {
                ones[t] += table.column(t + 1)[i] as u64;
            }
            *out.entry(ones).or_insert(0) += 1;
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return out;
            }
            labels[pos] += 1;
            if labels[pos] < j {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

fn q(n: i64, d: i64) -> Rational {
    exact::ratio(n, d)
}

/// Finite-population heterogeneity of each effect, from its definition.
fn heterogeneity_by_definition(table: &PotentialOutcomesTable, l: &ContrastMatrix) -> Vec<Rational> {
    let n = table.n_units();
    let j = l.size();
    let scale = exact::inv_pow2(table.design().k() as u32 - 1);
    let unit: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            (0..j)
                .map(|e| {
                    let s: i64 = (1..=j).map(|t| l.entry(t, e) as i64 * table.column(t)[i] as i64).sum();
                    exact::int(s) * &scale
                })
                .collect()
        })
        .collect();
    (0..j)
        .map(|e| {
            let mean = unit.iter().fold(Rational::zero(), |a, u| a + &u[e]) / exact::int(n as i64);
            unit.iter().fold(Rational::zero(), |a, u| {
                let d = &u[e] - &mean;
                a + &d * &d
            }) / exact::int(n as i64 - 1)
        })
        .collect()
}

/// Checks the exact randomization identities for one table and plan.
pub fn check_identities(table: &PotentialOutcomesTable, arms: &[u64]) -> Result<(), String> {
    let l = ContrastMatrix::new(table.design());
    let opts = EnumerationOptions { cap: 10_000_000, execution: Execution::Sequential };
    let dist = enumerate_randomizations(table, arms, &opts).map_err(|e| e.to_string())?;
    if dist.histogram() != &brute_force_histogram(table, arms) {
        return Err("enumeration differs from brute force".into());
    }
    let tau = table.tau_fp_exact(&l);
    if dist.mean_effects() != tau {
        return Err("E(estimate) != tau".into());
    }
    let cov = dist.effect_covariance();
    if cov != table.true_covariance_exact(&l, arms).map_err(|e| e.to_string())? {
        return Err("Cov(estimate) != closed form".into());
    }
    if dist.mean_proportions() != table.proportions_exact() {
        return Err("E(p) != P".into());
    }
    let n = table.n_units() as i64;
    let s2 = table.variances_exact();
    let pc = dist.proportion_covariance();
    for a in 0..arms.len() {
        for b in 0..arms.len() {
            let want = if a == b {
                q(n - arms[a] as i64, n * arms[a] as i64) * &s2[a]
            } else {
                -(&s2[a] + &s2[b] - table.difference_variance_exact(a + 1, b + 1)) / exact::int(2 * n)
            };
            if pc[a][b] != want {
                return Err(format!("Cov(p_{}, p_{}) = {} but formula gives {want}", a + 1, b + 1, pc[a][b]));
            }
        }
    }
    if arms.iter().all(|&a| a >= 2) {
        if dist.mean_sample_variances().map_err(|e| e.to_string())? != s2 {
            return Err("E(s^2) != S^2".into());
        }
        let ese2 = dist.mean_neyman_variance().map_err(|e| e.to_string())?;
        let het = heterogeneity_by_definition(table, &l);
        for e in 1..l.size() {
            let gap = &ese2 - &cov[e][e];
            if exact::is_negative(&gap) {
                return Err(format!("negative variance gap for effect {e}"));
            }
            if exact::is_zero(&gap) != exact::is_zero(&het[e]) {
                return Err(format!("gap zero/nonzero mismatch with heterogeneity for effect {e}"));
            }
            if gap != &het[e] / exact::int(n) {
                return Err(format!("gap for effect {e} is {gap}, not S²/N = {}", &het[e] / exact::int(n)));
            }
        }
    }
    Ok(())
}
