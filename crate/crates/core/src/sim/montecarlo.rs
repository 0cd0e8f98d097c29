//! Monte Carlo over complete randomizations of a fixed science table.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::population::{check_arms, permute_population, PotentialOutcomesTable};
use crate::design::ContrastMatrix;
use crate::error::{Error, Result};
use crate::estimation::{ObservedDataset, Record};
use crate::exec::Execution;
use crate::normal::upper_point;
use crate::rng::{self, Domain};

/// One complete randomization: `treatments[i]` is the arm (1-based) of unit `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub treatments: Vec<usize>,
}

impl Assignment {
    /// Observed outcomes `Y_i^obs = Y_i(W_i)` as a unit-level dataset.
    pub fn observe(&self, table: &PotentialOutcomesTable) -> Result<ObservedDataset> {
        let cols = table.columns();
        let records = self
            .treatments
            .iter()
            .enumerate()
            .map(|(i, &t)| Record {
                treatment: t,
                outcome: cols[t - 1][i],
            })
            .collect();
        ObservedDataset::new(table.design().clone(), records)
    }
}

/// Shuffles `N_1` copies of label 1, `N_2` of label 2, … using stream `draw`.
pub fn draw_assignment(arms: &[u64], seed: u64, draw: u64) -> Assignment {
    let mut treatments = labels(arms);
    treatments.shuffle(&mut rng::stream(seed, Domain::Assignment, draw));
    Assignment { treatments }
}

fn labels(arms: &[u64]) -> Vec<usize> {
    arms.iter()
        .enumerate()
        .flat_map(|(j, &n)| std::iter::repeat_n(j + 1, n as usize))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub draws: usize,
    pub alpha: f64,
    /// Effects in the tested family; `None` means all `J − 1`.
    pub family: Option<Vec<usize>>,
    /// Effects that must all be rejected for a joint success; `None` means the family.
    pub joint: Option<Vec<usize>>,
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            draws: 1000,
            alpha: 0.05,
            family: None,
            joint: None,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSimulation {
    pub effect: usize,
    pub label: String,
    pub tau: f64,
    /// Randomization variance of `τ̂_ℓ` from the closed form.
    pub true_variance: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub empirical_variance: f64,
    pub mean_se2: f64,
    pub rejection_ier: f64,
    pub rejection_eer: f64,
    pub coverage_ier: f64,
    pub coverage_eer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub draws: usize,
    /// Draws whose standard error was zero; they count as non-rejections and
    /// are left out of the coverage rates.
    pub degenerate: usize,
    pub alpha: f64,
    pub family_size: usize,
    pub joint: Vec<usize>,
    pub effects: Vec<EffectSimulation>,
    pub joint_power_ier: f64,
    pub joint_power_eer: f64,
    /// Rate of at least one rejection in the family.
    pub familywise_ier: f64,
    pub familywise_eer: f64,
}

struct Draw {
    estimates: Vec<f64>,
    se: f64,
}

fn resolve_family(contrasts: &ContrastMatrix, family: &Option<Vec<usize>>, what: &str) -> Result<Vec<usize>> {
    let j = contrasts.size();
    let mut f = match family {
        None => (1..j).collect::<Vec<_>>(),
        Some(f) => f.clone(),
    };
    f.sort_unstable();
    f.dedup();
    if f.is_empty() {
        return Err(Error::input(format!("{what} is empty")));
    }
    if let Some(bad) = f.iter().find(|&&e| e == 0 || e >= j) {
        return Err(Error::input(format!("effect index {bad} is not a factorial effect")));
    }
    Ok(f)
}

/// Draws `options.draws` complete randomizations of `table` with arm sizes
/// `arms` and tallies two-sided Wald tests under both IER and Bonferroni.
///
/// Draw `d` always uses assignment stream `d`, so the report does not depend
/// on the execution mode.
pub fn simulate(
    table: &PotentialOutcomesTable,
    arms: &[u64],
    options: &SimulationOptions,
) -> Result<SimulationReport> {
    check_arms(table, arms)?;
    if let Some(j) = arms.iter().position(|&a| a < 2) {
        return Err(Error::VarianceUndefined { treatment: j + 1 });
    }
    if options.draws == 0 {
        return Err(Error::input("number of draws must be positive"));
    }
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::input(format!("alpha must lie in (0, 1), got {}", options.alpha)));
    }
    let contrasts = ContrastMatrix::new(table.design());
    let family = resolve_family(&contrasts, &options.family, "tested family")?;
    let joint = match &options.joint {
        None => family.clone(),
        Some(_) => resolve_family(&contrasts, &options.joint, "joint set")?,
    };
    if let Some(e) = joint.iter().find(|e| !family.contains(e)) {
        return Err(Error::input(format!("joint effect {e} is not in the tested family")));
    }
    let g = family.len();
    let z_ier = upper_point(options.alpha / 2.0)?;
    let z_eer = upper_point(options.alpha / (2.0 * g as f64))?;

    let k = table.design().k() as i32;
    let scale = 0.5f64.powi(k - 1);
    let scale2 = scale * scale;
    let cols = table.columns();
    let base_labels = labels(arms);

    let draws: Vec<Draw> = options.execution.map_indexed(options.draws, |d| {
        let mut w = base_labels.clone();
        w.shuffle(&mut rng::stream(options.seed, Domain::Assignment, d as u64));
        let mut ones = vec![0u64; arms.len()];
        for (i, &t) in w.iter().enumerate() {
            ones[t - 1] += cols[t - 1][i] as u64;
        }
        let p: Vec<f64> = ones.iter().zip(arms).map(|(&c, &n)| c as f64 / n as f64).collect();
        let sum: f64 = ones
            .iter()
            .zip(arms)
            .map(|(&c, &n)| {
                let (c, n) = (c as f64, n as f64);
                c * (n - c) / (n * n * (n - 1.0))
            })
            .sum();
        let estimates = contrasts
            .transpose_apply(&p)
            .into_iter()
            .map(|v| v * scale)
            .collect();
        Draw {
            estimates,
            se: (scale2 * sum).sqrt(),
        }
    });

    let tau = table.tau_fp(&contrasts);
    let truth = table.true_variances(&contrasts, arms)?;
    let total = options.draws as f64;
    let mut degenerate = 0usize;
    let mut joint_ier = 0usize;
    let mut joint_eer = 0usize;
    let mut fw_ier = 0usize;
    let mut fw_eer = 0usize;
    let mut acc: Vec<Acc> = family.iter().map(|_| Acc::default()).collect();
    for draw in &draws {
        let ok = draw.se > 0.0;
        if !ok {
            degenerate += 1;
        }
        let mut any_ier = false;
        let mut any_eer = false;
        let mut all_ier = true;
        let mut all_eer = true;
        for (a, &e) in acc.iter_mut().zip(&family) {
            let est = draw.estimates[e];
            a.sum += est;
            a.sum_sq += est * est;
            a.se2 += draw.se * draw.se;
            let (r_ier, r_eer) = if ok {
                let t = (est / draw.se).abs();
                let dev = (est - tau[e]).abs();
                a.covered += 1;
                a.cover_ier += (dev <= z_ier * draw.se) as usize;
                a.cover_eer += (dev <= z_eer * draw.se) as usize;
                (t >= z_ier, t >= z_eer)
            } else {
                (false, false)
            };
            a.reject_ier += r_ier as usize;
            a.reject_eer += r_eer as usize;
            any_ier |= r_ier;
            any_eer |= r_eer;
            if joint.contains(&e) {
                all_ier &= r_ier;
                all_eer &= r_eer;
            }
        }
        joint_ier += all_ier as usize;
        joint_eer += all_eer as usize;
        fw_ier += any_ier as usize;
        fw_eer += any_eer as usize;
    }

    let effects = family
        .iter()
        .zip(&acc)
        .map(|(&e, a)| {
            let mean = a.sum / total;
            let var = if options.draws > 1 {
                (a.sum_sq - total * mean * mean) / (total - 1.0)
            } else {
                0.0
            };
            let covered = a.covered.max(1) as f64;
            EffectSimulation {
                effect: e,
                label: contrasts.columns()[e].label.clone(),
                tau: tau[e],
                true_variance: truth[e - 1],
                mean_estimate: mean,
                bias: mean - tau[e],
                empirical_variance: var.max(0.0),
                mean_se2: a.se2 / total,
                rejection_ier: a.reject_ier as f64 / total,
                rejection_eer: a.reject_eer as f64 / total,
                coverage_ier: a.cover_ier as f64 / covered,
                coverage_eer: a.cover_eer as f64 / covered,
            }
        })
        .collect();

    if degenerate > 0 {
        log::warn!("{degenerate} of {} draws had a zero standard error", options.draws);
    }
    Ok(SimulationReport {
        draws: options.draws,
        degenerate,
        alpha: options.alpha,
        family_size: g,
        joint,
        effects,
        joint_power_ier: joint_ier as f64 / total,
        joint_power_eer: joint_eer as f64 / total,
        familywise_ier: fw_ier as f64 / total,
        familywise_eer: fw_eer as f64 / total,
    })
}

#[derive(Default)]
struct Acc {
    sum: f64,
    sum_sq: f64,
    se2: f64,
    reject_ier: usize,
    reject_eer: usize,
    covered: usize,
    cover_ier: usize,
    cover_eer: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationResult {
    pub index: usize,
    pub seed: u64,
    pub joint_power_ier: f64,
    pub joint_power_eer: f64,
    pub familywise_ier: f64,
    pub familywise_eer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub draws: usize,
    pub populations: Vec<PopulationResult>,
    pub joint_power_ier: f64,
    pub joint_power_eer: f64,
}

/// Averages joint power over `populations` independent column permutations
/// of `base`. Population `m` uses `child_seed(seed, m)` for both its
/// permutation and its assignments.
pub fn run_protocol(
    base: &PotentialOutcomesTable,
    arms: &[u64],
    populations: usize,
    options: &SimulationOptions,
) -> Result<ProtocolReport> {
    if populations == 0 {
        return Err(Error::input("number of populations must be positive"));
    }
    let mut results = Vec::with_capacity(populations);
    for m in 0..populations {
        let seed = rng::child_seed(options.seed, m as u64);
        let table = permute_population(base, seed);
        let report = simulate(&table, arms, &SimulationOptions { seed, ..options.clone() })?;
        log::info!(
            "population {m}: joint power {:.4} (IER) {:.4} (Bonferroni)",
            report.joint_power_ier,
            report.joint_power_eer
        );
        results.push(PopulationResult {
            index: m,
            seed,
            joint_power_ier: report.joint_power_ier,
            joint_power_eer: report.joint_power_eer,
            familywise_ier: report.familywise_ier,
            familywise_eer: report.familywise_eer,
        });
    }
    let m = populations as f64;
    Ok(ProtocolReport {
        draws: options.draws,
        joint_power_ier: results.iter().map(|r| r.joint_power_ier).sum::<f64>() / m,
        joint_power_eer: results.iter().map(|r| r.joint_power_eer).sum::<f64>() / m,
        populations: results,
    })
}
