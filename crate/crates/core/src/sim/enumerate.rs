//! Exhaustive enumeration of complete randomizations for tiny populations.
//!
//! The randomization distribution of every estimator here depends on an
//! assignment only through the vector of ones per arm, so the enumeration
//! stores a histogram of those vectors and derives all moments exactly.

use std::collections::{BTreeMap, HashMap};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::population::{check_arms, PotentialOutcomesTable};
use crate::design::{ContrastMatrix, FactorialDesign};
use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::exec::Execution;

pub const DEFAULT_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationOptions {
    pub cap: u64,
    pub execution: Execution,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            execution: Execution::Parallel,
        }
    }
}

/// `N! / (N_1! ⋯ N_J!)`, or `None` on overflow.
pub fn assignment_count(arms: &[u64]) -> Option<u128> {
    let mut total: u128 = 1;
    let mut placed: u64 = 0;
    for &a in arms {
        // multiply by C(placed + a, a) incrementally; each step stays integral
        for i in 1..=a {
            placed += 1;
            total = total.checked_mul(placed as u128)? / i as u128;
        }
    }
    Some(total)
}

/// Exact randomization distribution of the per-arm counts of ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDistribution {
    design: FactorialDesign,
    arms: Vec<u64>,
    assignments: u64,
    histogram: BTreeMap<Vec<u64>, u64>,
}

pub fn enumerate_randomizations(
    table: &PotentialOutcomesTable,
    arms: &[u64],
    options: &EnumerationOptions,
) -> Result<ExactDistribution> {
    check_arms(table, arms)?;
    let count = assignment_count(arms);
    match count {
        Some(c) if c <= options.cap as u128 => {}
        _ => {
            return Err(Error::Infeasible(format!(
                "{} assignments exceed the enumeration cap of {}; use simulate instead",
                count.map_or_else(|| "more than 2^128".to_string(), |c| c.to_string()),
                options.cap
            )))
        }
    }
    let expected = count.unwrap() as u64;
    let n = table.n_units();
    let cols = table.columns();
    let j = arms.len();

    // Split the search tree at a shallow depth so prefixes can run in parallel.
    let mut depth = 0;
    let mut prefixes = vec![State {
        remaining: arms.to_vec(),
        ones: vec![0; j],
    }];
    while depth < n && prefixes.len() < 256 {
        prefixes = prefixes
            .into_iter()
            .flat_map(|s| s.children(cols, depth))
            .collect();
        depth += 1;
    }
    let parts = options.execution.map_slice(&prefixes, |s| {
        let mut local = HashMap::new();
        let mut state = s.clone();
        descend(&mut state, cols, depth, n, &mut local);
        local
    });
    let mut histogram = BTreeMap::new();
    for part in parts {
        for (key, c) in part {
            *histogram.entry(key).or_insert(0) += c;
        }
    }
    let visited: u64 = histogram.values().sum();
    debug_assert_eq!(visited, expected);
    if visited != expected {
        return Err(Error::Degenerate(format!(
            "enumeration visited {visited} assignments, expected {expected}"
        )));
    }
    Ok(ExactDistribution {
        design: table.design().clone(),
        arms: arms.to_vec(),
        assignments: expected,
        histogram,
    })
}

#[derive(Clone)]
struct State {
    remaining: Vec<u64>,
    ones: Vec<u64>,
}

impl State {
    fn children(&self, cols: &[Vec<u8>], unit: usize) -> Vec<State> {
        (0..self.remaining.len())
            .filter(|&t| self.remaining[t] > 0)
            .map(|t| {
                let mut s = self.clone();
                s.remaining[t] -= 1;
                s.ones[t] += cols[t][unit] as u64;
                s
            })
            .collect()
    }
}

fn descend(s: &mut State, cols: &[Vec<u8>], unit: usize, n: usize, out: &mut HashMap<Vec<u64>, u64>) {
    if unit == n {
        *out.entry(s.ones.clone()).or_insert(0) += 1;
        return;
    }
    for t in 0..s.remaining.len() {
        if s.remaining[t] == 0 {
            continue;
        }
        let y = cols[t][unit] as u64;
        s.remaining[t] -= 1;
        s.ones[t] += y;
        descend(s, cols, unit + 1, n, out);
        s.ones[t] -= y;
        s.remaining[t] += 1;
    }
}

impl ExactDistribution {
    pub fn assignments(&self) -> u64 {
        self.assignments
    }

    pub fn arms(&self) -> &[u64] {
        &self.arms
    }

    /// Map from the vector of ones per arm to the number of assignments producing it.
    pub fn histogram(&self) -> &BTreeMap<Vec<u64>, u64> {
        &self.histogram
    }

    fn expect<F>(&self, f: F) -> Vec<Rational>
    where
        F: Fn(&[u64]) -> Vec<Rational>,
    {
        let mut acc: Vec<Rational> = Vec::new();
        for (key, &c) in &self.histogram {
            let v = f(key);
            if acc.is_empty() {
                acc = vec![Rational::zero(); v.len()];
            }
            let w = exact::int(c as i64);
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x * &w;
            }
        }
        let total = exact::int(self.assignments as i64);
        acc.into_iter().map(|a| a / &total).collect()
    }

    fn proportions(&self, ones: &[u64]) -> Vec<Rational> {
        ones.iter()
            .zip(&self.arms)
            .map(|(&c, &n)| exact::ratio(c as i64, n as i64))
            .collect()
    }

    fn effects(&self, contrasts: &ContrastMatrix, ones: &[u64]) -> Vec<Rational> {
        let scale = exact::inv_pow2(self.design.k() as u32 - 1);
        contrasts
            .transpose_apply(&self.proportions(ones))
            .into_iter()
            .map(|v| v * &scale)
            .collect()
    }

    fn covariance<F>(&self, f: F) -> Vec<Vec<Rational>>
    where
        F: Fn(&[u64]) -> Vec<Rational>,
    {
        let mean = self.expect(&f);
        let d = mean.len();
        let flat = self.expect(|ones| {
            let v = f(ones);
            let mut out = Vec::with_capacity(d * d);
            for a in &v {
                for b in &v {
                    out.push(a * b);
                }
            }
            out
        });
        (0..d)
            .map(|a| (0..d).map(|b| &flat[a * d + b] - &mean[a] * &mean[b]).collect())
            .collect()
    }

    /// `E(p_j)`.
    pub fn mean_proportions(&self) -> Vec<Rational> {
        self.expect(|o| self.proportions(o))
    }

    /// `Cov(p_j, p_{j'})`.
    pub fn proportion_covariance(&self) -> Vec<Vec<Rational>> {
        self.covariance(|o| self.proportions(o))
    }

    /// `E(τ̂)` over all columns, mean column first.
    pub fn mean_effects(&self) -> Vec<Rational> {
        let l = ContrastMatrix::new(&self.design);
        self.expect(|o| self.effects(&l, o))
    }

    /// `Cov(τ̂)`, J×J, mean column first.
    pub fn effect_covariance(&self) -> Vec<Vec<Rational>> {
        let l = ContrastMatrix::new(&self.design);
        self.covariance(|o| self.effects(&l, o))
    }

    fn sample_variances(&self, ones: &[u64]) -> Vec<Rational> {
        ones.iter()
            .zip(&self.arms)
            .map(|(&c, &n)| {
                let (c, n) = (c as i64, n as i64);
                exact::ratio(c * (n - c), n * (n - 1))
            })
            .collect()
    }

    /// `E(s_j²)`; needs every arm to hold at least two units.
    pub fn mean_sample_variances(&self) -> Result<Vec<Rational>> {
        self.check_variances()?;
        Ok(self.expect(|o| self.sample_variances(o)))
    }

    /// `E(SE²)` of the Neymanian variance estimator.
    pub fn mean_neyman_variance(&self) -> Result<Rational> {
        self.check_variances()?;
        let scale = exact::inv_pow2(2 * (self.design.k() as u32 - 1));
        let v = self.expect(|o| {
            let total = self
                .sample_variances(o)
                .into_iter()
                .zip(&self.arms)
                .fold(Rational::zero(), |acc, (s2, &n)| acc + s2 / exact::int(n as i64));
            vec![total * &scale]
        });
        Ok(v.into_iter().next().unwrap_or_else(Rational::zero))
    }

    fn check_variances(&self) -> Result<()> {
        match self.arms.iter().position(|&a| a < 2) {
            Some(j) => Err(Error::VarianceUndefined { treatment: j + 1 }),
            None => Ok(()),
        }
    }
}
