//! Diagnostics for the regularity conditions behind the normal approximation.

use serde::{Deserialize, Serialize};

use super::population::{check_arms, PotentialOutcomesTable};
use crate::error::Result;
use crate::exact;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n: usize,
    pub fractions: Vec<f64>,
    pub proportions: Vec<f64>,
    pub variances: Vec<f64>,
    pub covariances: Vec<Vec<f64>>,
    /// `max_i max_j (Y_i(j) − P_j)² / N`; should vanish as N grows.
    pub max_deviation: f64,
    /// Treatments (1-based) whose potential outcomes are constant.
    pub zero_variance: Vec<usize>,
}

pub fn clt_condition_report(table: &PotentialOutcomesTable, arms: &[u64]) -> Result<CltReport> {
    check_arms(table, arms)?;
    let n = table.n_units();
    let p = table.proportions();
    let s2 = table.variances_exact();
    let zero_variance = s2
        .iter()
        .enumerate()
        .filter(|(_, v)| exact::is_zero(v))
        .map(|(j, _)| j + 1)
        .collect::<Vec<_>>();
    for j in &zero_variance {
        log::warn!("treatment {j} has S² = 0");
    }
    // Outcomes are binary, so the largest squared deviation in column j is
    // max(P_j, 1 − P_j)², attained by whichever value occurs.
    let counts = table.counts();
    let max_deviation = p
        .iter()
        .zip(&counts)
        .map(|(&pj, &c)| {
            let hi = if c > 0 { (1.0 - pj).powi(2) } else { 0.0 };
            let lo = if (c as usize) < n { pj * pj } else { 0.0 };
            hi.max(lo)
        })
        .fold(0.0, f64::max)
        / n as f64;
    Ok(CltReport {
        n,
        fractions: arms.iter().map(|&a| a as f64 / n as f64).collect(),
        proportions: p,
        variances: s2.iter().map(exact::to_f64).collect(),
        covariances: table
            .covariance_matrix_exact()
            .iter()
            .map(|r| r.iter().map(exact::to_f64).collect())
            .collect(),
        max_deviation,
        zero_variance,
    })
}
