//! Binary potential-outcomes ("science") tables and their finite-population
//! quantities.

use num_traits::Zero;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::design::{ContrastMatrix, FactorialDesign};
use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::rng::{self, Domain};

/// N×J table of binary potential outcomes, stored column by column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotentialOutcomesTable {
    design: FactorialDesign,
    columns: Vec<Vec<u8>>,
}

impl PotentialOutcomesTable {
    pub fn from_columns(design: FactorialDesign, columns: Vec<Vec<u8>>) -> Result<Self> {
        if columns.len() != design.treatments() {
            return Err(Error::input(format!(
                "science table needs {} columns, got {}",
                design.treatments(),
                columns.len()
            )));
        }
        let n = columns[0].len();
        if n < 2 {
            return Err(Error::input("science table needs at least two units"));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::input(format!(
                    "column {} has {} units, expected {n}",
                    j + 1,
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|&y| y > 1) {
                return Err(Error::input(format!(
                    "unit {}, treatment {}: outcome must be 0 or 1",
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(Self { design, columns })
    }

    pub fn from_rows(design: FactorialDesign, rows: &[Vec<u8>]) -> Result<Self> {
        let j = design.treatments();
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != j) {
            return Err(Error::input(format!("unit {} does not have {j} outcomes", i + 1)));
        }
        let columns = (0..j).map(|t| rows.iter().map(|r| r[t]).collect()).collect();
        Self::from_columns(design, columns)
    }

    pub fn design(&self) -> &FactorialDesign {
        &self.design
    }

    pub fn n_units(&self) -> usize {
        self.columns[0].len()
    }

    /// Outcomes under `treatment` (1-based) for every unit.
    pub fn column(&self, treatment: usize) -> &[u8] {
        &self.columns[treatment - 1]
    }

    pub(crate) fn columns(&self) -> &[Vec<u8>] {
        &self.columns
    }

    /// `Y_i(·)` for unit `i` (0-based).
    pub fn row(&self, unit: usize) -> Vec<u8> {
        self.columns.iter().map(|c| c[unit]).collect()
    }

    /// Number of ones per column.
    pub fn counts(&self) -> Vec<u64> {
        self.columns
            .iter()
            .map(|c| c.iter().map(|&y| y as u64).sum())
            .collect()
    }

    fn n_rational(&self) -> Rational {
        exact::int(self.n_units() as i64)
    }

    pub fn proportions_exact(&self) -> Vec<Rational> {
        let n = self.n_units() as i64;
        self.counts().iter().map(|&c| exact::ratio(c as i64, n)).collect()
    }

    pub fn proportions(&self) -> Vec<f64> {
        self.proportions_exact().iter().map(exact::to_f64).collect()
    }

    /// `S_j² = N/(N−1) · P_j(1−P_j)`.
    pub fn variances_exact(&self) -> Vec<Rational> {
        let n = self.n_units() as i64;
        self.counts()
            .iter()
            .map(|&c| exact::ratio(c as i64 * (n - c as i64), n * (n - 1)))
            .collect()
    }

    /// `S_{jj'} = (N−1)^{-1} Σ_i (Y_i(j) − P_j)(Y_i(j') − P_{j'})`, J×J.
    pub fn covariance_matrix_exact(&self) -> Vec<Vec<Rational>> {
        let n = self.n_units() as i64;
        let counts = self.counts();
        let j = counts.len();
        let mut out = vec![vec![Rational::zero(); j]; j];
        for a in 0..j {
            for b in a..j {
                let both: i64 = self.columns[a]
                    .iter()
                    .zip(&self.columns[b])
                    .map(|(&x, &y)| (x & y) as i64)
                    .sum();
                let v = exact::ratio(n * both - counts[a] as i64 * counts[b] as i64, n * (n - 1));
                out[a][b] = v.clone();
                out[b][a] = v;
            }
        }
        out
    }

    /// Variance of unit-level differences,
    /// `S²_{j−j'} = (N−1)^{-1} Σ_i (Y_i(j) − Y_i(j') − (P_j − P_{j'}))²`.
    pub fn difference_variance_exact(&self, a: usize, b: usize) -> Rational {
        let n = self.n_units() as i64;
        let p = self.proportions_exact();
        let centre = &p[a - 1] - &p[b - 1];
        let mut total = Rational::zero();
        for (&x, &y) in self.column(a).iter().zip(self.column(b)) {
            let d = exact::int(x as i64 - y as i64) - &centre;
            total += &d * &d;
        }
        total / exact::int(n - 1)
    }

    /// Integer contrast sums `Lᵀ Y_i` per unit; unit effects are these times `2^{−(K−1)}`.
    pub fn unit_contrast_sums(&self, contrasts: &ContrastMatrix) -> Vec<Vec<i64>> {
        (0..self.n_units())
            .map(|i| {
                let row: Vec<i64> = self.columns.iter().map(|c| c[i] as i64).collect();
                contrasts.transpose_apply(&row)
            })
            .collect()
    }

    /// Unit-level effect vectors `τ_i` (mean column first, holding `2τ_{i,0}`).
    pub fn unit_effects_exact(&self, contrasts: &ContrastMatrix) -> Vec<Vec<Rational>> {
        let scale = exact::inv_pow2(self.design.k() as u32 - 1);
        self.unit_contrast_sums(contrasts)
            .into_iter()
            .map(|u| u.into_iter().map(|v| exact::int(v) * &scale).collect())
            .collect()
    }

    /// `τ^FP = 2^{−(K−1)} Lᵀ P`, mean column included.
    pub fn tau_fp_exact(&self, contrasts: &ContrastMatrix) -> Vec<Rational> {
        let scale = exact::inv_pow2(self.design.k() as u32 - 1);
        contrasts
            .transpose_apply(&self.proportions_exact())
            .into_iter()
            .map(|v| v * &scale)
            .collect()
    }

    pub fn tau_fp(&self, contrasts: &ContrastMatrix) -> Vec<f64> {
        self.tau_fp_exact(contrasts).iter().map(exact::to_f64).collect()
    }

    /// Heterogeneity `S²_{τ_ℓ} = (N−1)^{-1} Σ_i (τ_{i,ℓ} − τ_ℓ)²` per column.
    pub fn heterogeneity_exact(&self, contrasts: &ContrastMatrix) -> Vec<Rational> {
        let n = self.n_units() as i64;
        let j = contrasts.size();
        let mut sum = vec![0i128; j];
        let mut sum_sq = vec![0i128; j];
        for u in self.unit_contrast_sums(contrasts) {
            for (l, v) in u.into_iter().enumerate() {
                sum[l] += v as i128;
                sum_sq[l] += (v as i128) * (v as i128);
            }
        }
        let k = self.design.k() as u32;
        let scale = exact::inv_pow2(2 * (k - 1));
        (0..j)
            .map(|l| {
                // Σ(u − ū)² = (N Σu² − (Σu)²) / N
                let centred = num_bigint::BigInt::from(sum_sq[l]) * n
                    - num_bigint::BigInt::from(sum[l]) * num_bigint::BigInt::from(sum[l]);
                Rational::new(centred, num_bigint::BigInt::from(n * (n - 1))) * &scale
            })
            .collect()
    }

    /// Estimable part `2^{−2(K−1)} Σ_j S_j²/N_j`, the common diagonal of the
    /// conservative covariance.
    pub fn conservative_variance_exact(&self, arms: &[u64]) -> Result<Rational> {
        check_arms(self, arms)?;
        let k = self.design.k() as u32;
        let mut total = Rational::zero();
        for (s2, &nj) in self.variances_exact().iter().zip(arms) {
            total += s2 / exact::int(nj as i64);
        }
        Ok(total * exact::inv_pow2(2 * (k - 1)))
    }

    /// Sampling covariance of `τ̂` under complete randomization with arm sizes
    /// `arms`, written term by term: the `λ̃_j λ̃_jᵀ S_j²/N_j` sum minus the
    /// `(N(N−1))^{-1} Σ_i (τ_i − τ)(τ_i − τ)ᵀ` heterogeneity term.
    pub fn true_covariance_exact(
        &self,
        contrasts: &ContrastMatrix,
        arms: &[u64],
    ) -> Result<Vec<Vec<Rational>>> {
        check_arms(self, arms)?;
        let j = contrasts.size();
        let k = self.design.k() as u32;
        let n = self.n_units() as i64;
        let s2 = self.variances_exact();
        let mut out = vec![vec![Rational::zero(); j]; j];
        let lead = exact::inv_pow2(2 * (k - 1));
        for t in 1..=j {
            let w = &lead * &s2[t - 1] / exact::int(arms[t - 1] as i64);
            let row = contrasts.row(t);
            for a in 0..j {
                for b in 0..j {
                    out[a][b] += &w * exact::int((row[a] * row[b]) as i64);
                }
            }
        }
        let tau = self.tau_fp_exact(contrasts);
        let denom = exact::int(n * (n - 1));
        for unit in self.unit_effects_exact(contrasts) {
            let d: Vec<Rational> = unit.iter().zip(&tau).map(|(u, t)| u - t).collect();
            for a in 0..j {
                for b in 0..j {
                    out[a][b] -= &d[a] * &d[b] / &denom;
                }
            }
        }
        Ok(out)
    }

    /// Diagonal of the sampling covariance for effects `1..J`, via
    /// `conservative − S²_{τ_ℓ}/N`.
    pub fn true_variances(&self, contrasts: &ContrastMatrix, arms: &[u64]) -> Result<Vec<f64>> {
        let base = self.conservative_variance_exact(arms)?;
        let n = self.n_rational();
        Ok(self.heterogeneity_exact(contrasts)[1..]
            .iter()
            .map(|h| exact::to_f64(&(&base - h / &n)))
            .collect())
    }
}

pub(crate) fn check_arms(table: &PotentialOutcomesTable, arms: &[u64]) -> Result<()> {
    if arms.len() != table.design.treatments() {
        return Err(Error::input(format!(
            "allocation has {} arms, design has {} treatments",
            arms.len(),
            table.design.treatments()
        )));
    }
    let total: u64 = arms.iter().sum();
    if total != table.n_units() as u64 {
        return Err(Error::input(format!(
            "allocation assigns {total} units but the table has {}",
            table.n_units()
        )));
    }
    if let Some(j) = arms.iter().position(|&a| a == 0) {
        return Err(Error::EmptyArm { treatment: j + 1 });
    }
    Ok(())
}

/// Builds a table whose column `j` has exactly `N·P_j` ones, all placed on the
/// first units (comonotone coupling).
pub fn construct_population(
    n: u64,
    targets: &[Rational],
    design: &FactorialDesign,
) -> Result<PotentialOutcomesTable> {
    if targets.len() != design.treatments() {
        return Err(Error::input(format!(
            "expected {} target proportions, got {}",
            design.treatments(),
            targets.len()
        )));
    }
    let nr = exact::int(n as i64);
    let mut columns = Vec::with_capacity(targets.len());
    for (j, p) in targets.iter().enumerate() {
        if exact::is_negative(p) || p > &exact::int(1) {
            return Err(Error::input(format!(
                "target proportion for treatment {} outside [0, 1]",
                j + 1
            )));
        }
        let ones = p * &nr;
        if !ones.is_integer() {
            return Err(Error::Infeasible(format!(
                "N = {n} gives a non-integer number of ones for treatment {}; {}",
                j + 1,
                nearest_feasible(n, targets)
            )));
        }
        let ones = exact::to_f64(&ones) as usize;
        let mut col = vec![0u8; n as usize];
        col[..ones].fill(1);
        columns.push(col);
    }
    PotentialOutcomesTable::from_columns(design.clone(), columns)
}

fn nearest_feasible(n: u64, targets: &[Rational]) -> String {
    use num_integer::Integer;
    use num_traits::ToPrimitive;
    let step = targets
        .iter()
        .fold(num_bigint::BigInt::from(1), |acc, p| acc.lcm(p.denom()));
    match step.to_u64() {
        Some(step) => {
            let below = n / step * step;
            let above = below + step;
            if below >= 2 {
                format!("nearest feasible N are {below} and {above}")
            } else {
                format!("smallest feasible N is {above}")
            }
        }
        None => "no feasible N fits in 64 bits".to_string(),
    }
}

/// Independently permutes each column. Column `j` uses stream `j` of the
/// permutation domain under `seed`.
pub fn permute_population(table: &PotentialOutcomesTable, seed: u64) -> PotentialOutcomesTable {
    let columns = table
        .columns
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let mut col = col.clone();
            col.shuffle(&mut rng::stream(seed, Domain::Permutation, j as u64));
            col
        })
        .collect();
    PotentialOutcomesTable {
        design: table.design.clone(),
        columns,
    }
}
