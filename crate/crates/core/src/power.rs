//! Design-stage calculations: analytic power, sample size and arm allocation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::{Deserialize, Serialize};

use crate::design::ContrastMatrix;
use crate::error::{Error, Result};
use crate::estimation::{Alternative, Correction, GroupSummary};
use crate::exact;
use crate::exec::Execution;
use crate::normal::{normal_cdf, upper_point};
use crate::sim::PotentialOutcomesTable;

/// Source of the per-arm variances `S̃_j²` used at the design stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceGuess {
    /// `S̃_j²` supplied directly, e.g. sample variances from a pilot.
    Variances(Vec<f64>),
    /// Guessed proportions `P̃_j`; `S̃_j² = N/(N−1)·P̃_j(1−P̃_j)` for total size N.
    Proportions(Vec<f64>),
    /// Raw pilot proportions with `arm_size` units per arm;
    /// `s_j² = r₀/(r₀−1)·p_j(1−p_j)`.
    Pilot { proportions: Vec<f64>, arm_size: u64 },
}

impl VarianceGuess {
    /// Sample variances of an observed (pilot) experiment.
    pub fn from_summary(summary: &GroupSummary) -> Result<Self> {
        Ok(Self::Variances(summary.variances()?))
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Variances(v) | Self::Proportions(v) => v.len(),
            Self::Pilot { proportions, .. } => proportions.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, treatments: usize) -> Result<()> {
        if self.len() != treatments {
            return Err(Error::input(format!(
                "variance guess has {} entries, design has {treatments} treatments",
                self.len()
            )));
        }
        match self {
            Self::Variances(v) => {
                if let Some(j) = v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::input(format!("variance guess for treatment {} must be ≥ 0", j + 1)));
                }
            }
            Self::Proportions(p) | Self::Pilot { proportions: p, .. } => {
                if let Some(j) = p.iter().position(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::input(format!("proportion for treatment {} outside [0, 1]", j + 1)));
                }
            }
        }
        if let Self::Pilot { arm_size, .. } = self {
            if *arm_size < 2 {
                return Err(Error::input("pilot arm size must be at least 2"));
            }
        }
        Ok(())
    }

    /// `S̃_j²` for a study with `n_total` units.
    pub fn variances(&self, n_total: u64) -> Vec<f64> {
        match self {
            Self::Variances(v) => v.clone(),
            Self::Proportions(p) => {
                let n = n_total as f64;
                p.iter().map(|&p| n / (n - 1.0) * p * (1.0 - p)).collect()
            }
            Self::Pilot { proportions, arm_size } => {
                let r = *arm_size as f64;
                proportions.iter().map(|&p| r / (r - 1.0) * p * (1.0 - p)).collect()
            }
        }
    }
}

/// Optimality criterion for arm sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Balanced arms.
    #[default]
    D,
    /// `N_j ∝ S̃_j`.
    A,
    /// `N_j ∝ S̃_j²`.
    E,
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d" | "balanced" => Ok(Self::D),
            "a" => Ok(Self::A),
            "e" => Ok(Self::E),
            other => Err(Error::input(format!("unknown criterion {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub arms: Vec<u64>,
    /// `None` for a user-supplied plan.
    pub rule: Option<Criterion>,
}

impl AllocationPlan {
    pub fn explicit(arms: Vec<u64>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::input("allocation plan has no arms"));
        }
        if let Some(j) = arms.iter().position(|&a| a == 0) {
            return Err(Error::EmptyArm { treatment: j + 1 });
        }
        Ok(Self { arms, rule: None })
    }

    pub fn balanced(n: u64, treatments: usize) -> Result<Self> {
        let j = treatments as u64;
        if n < 2 * j {
            return Err(Error::Infeasible(format!(
                "N = {n} is below the minimum of {} (two units per arm)",
                2 * j
            )));
        }
        if !n.is_multiple_of(j) {
            let below = n / j * j;
            return Err(Error::Infeasible(format!(
                "balanced allocation needs N divisible by {j}; nearest feasible N are {below} and {}",
                below + j
            )));
        }
        Ok(Self {
            arms: vec![n / j; treatments],
            rule: Some(Criterion::D),
        })
    }

    pub fn total(&self) -> u64 {
        self.arms.iter().sum()
    }

    pub fn fractions(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.arms.iter().map(|&a| a as f64 / n).collect()
    }
}

/// Continuous optimum `ξ_j` for a criterion, summing to one.
pub fn optimal_fractions(criterion: Criterion, variances: &[f64]) -> Result<Vec<f64>> {
    let j = variances.len();
    if j == 0 {
        return Err(Error::input("no treatments"));
    }
    let weights: Vec<f64> = match criterion {
        Criterion::D => vec![1.0; j],
        Criterion::A => variances.iter().map(|v| v.sqrt()).collect(),
        Criterion::E => variances.to_vec(),
    };
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::input(
            "every variance guess is zero; A- and E-optimal allocations are undefined",
        ));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// Integer arm sizes for `criterion` at total size `n`.
///
/// A and E quotas are rounded by largest remainder with at least two units
/// per arm; ties go to the lower treatment index.
pub fn allocate_optimal(
    criterion: Criterion,
    guess: &VarianceGuess,
    n: u64,
    treatments: usize,
) -> Result<AllocationPlan> {
    guess.validate(treatments)?;
    if n < 2 * treatments as u64 {
        return Err(Error::Infeasible(format!(
            "N = {n} is below the minimum of {} (two units per arm)",
            2 * treatments
        )));
    }
    if criterion == Criterion::D {
        return AllocationPlan::balanced(n, treatments);
    }
    let weights = optimal_fractions(criterion, &guess.variances(n))?;
    Ok(AllocationPlan {
        arms: largest_remainder(&weights, n, 2),
        rule: Some(criterion),
    })
}

fn largest_remainder(weights: &[f64], n: u64, floor: u64) -> Vec<u64> {
    let j = weights.len();
    let mut pinned = vec![false; j];
    let quotas = loop {
        let free = pinned.iter().filter(|p| !**p).count() as u64;
        let budget = (n - floor * (j as u64 - free)) as f64;
        let w: f64 = (0..j).filter(|&t| !pinned[t]).map(|t| weights[t]).sum();
        let quotas: Vec<f64> = (0..j)
            .map(|t| if pinned[t] { floor as f64 } else { budget * weights[t] / w })
            .collect();
        let low: Vec<usize> = (0..j).filter(|&t| !pinned[t] && quotas[t] < floor as f64).collect();
        if low.is_empty() {
            break quotas;
        }
        for t in low {
            pinned[t] = true;
        }
    };
    let mut arms: Vec<u64> = quotas.iter().map(|q| (q + 1e-9).floor() as u64).collect();
    let mut order: Vec<usize> = (0..j).filter(|&t| !pinned[t]).collect();
    let rem = |t: usize| (quotas[t] - arms[t] as f64).max(0.0);
    order.sort_by(|&a, &b| rem(b).total_cmp(&rem(a)).then(a.cmp(&b)));
    let mut left = n - arms.iter().sum::<u64>();
    for t in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        arms[t] += 1;
        left -= 1;
    }
    arms
}

fn se_from_sizes(variances: &[f64], sizes: &[f64], k: usize) -> f64 {
    let sum: f64 = variances.iter().zip(sizes).map(|(v, n)| v / n).sum();
    (sum * 0.25f64.powi(k as i32 - 1)).sqrt()
}

/// `sqrt(2^{−2(K−1)} Σ_j S̃_j²/N_j)`.
pub fn se_tilde(guess: &VarianceGuess, plan: &AllocationPlan, k: usize) -> Result<f64> {
    guess.validate(plan.arms.len())?;
    if plan.arms.len() != 1 << k {
        return Err(Error::input(format!(
            "plan has {} arms, a 2^{k} design has {}",
            plan.arms.len(),
            1usize << k
        )));
    }
    if let Some(j) = plan.arms.iter().position(|&a| a == 0) {
        return Err(Error::EmptyArm { treatment: j + 1 });
    }
    let sizes: Vec<f64> = plan.arms.iter().map(|&a| a as f64).collect();
    Ok(se_from_sizes(&guess.variances(plan.total()), &sizes, k))
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::input(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_se(se: f64) -> Result<()> {
    if se > 0.0 && se.is_finite() {
        Ok(())
    } else {
        Err(Error::Degenerate(format!("standard error must be positive, got {se}")))
    }
}

/// `2 − Φ(z_{α/2} − τ/SE) − Φ(z_{α/2} + τ/SE)`.
pub fn power_two_sided(tau: f64, se: f64, alpha: f64) -> Result<f64> {
    power_two_sided_family(tau, se, alpha, 1)
}

/// Two-sided power with the Bonferroni critical value `z_{α/(2G)}`.
pub fn power_two_sided_family(tau: f64, se: f64, alpha: f64, family_size: usize) -> Result<f64> {
    check_level(alpha)?;
    check_se(se)?;
    if family_size == 0 {
        return Err(Error::input("family size must be positive"));
    }
    let z = upper_point(alpha / (2.0 * family_size as f64))?;
    let t = tau / se;
    Ok(normal_cdf(t - z) + normal_cdf(-z - t))
}

pub fn power_one_sided(tau: f64, se: f64, alpha: f64, direction: Alternative) -> Result<f64> {
    check_level(alpha)?;
    check_se(se)?;
    let z = upper_point(alpha)?;
    Ok(match direction {
        Alternative::Greater => normal_cdf(tau / se - z),
        Alternative::Less => normal_cdf(-z - tau / se),
        Alternative::TwoSided => return power_two_sided(tau, se, alpha),
    })
}

/// Power of the two-sided Wald test for effect `effect` when the whole
/// science table is known: the test uses the conservative SE while `τ̂`
/// actually has the smaller randomization variance.
pub fn power_exact(table: &PotentialOutcomesTable, plan: &AllocationPlan, effect: usize, alpha: f64) -> Result<f64> {
    power_exact_family(table, plan, effect, alpha, 1)
}

pub fn power_exact_family(
    table: &PotentialOutcomesTable,
    plan: &AllocationPlan,
    effect: usize,
    alpha: f64,
    family_size: usize,
) -> Result<f64> {
    check_level(alpha)?;
    let l = ContrastMatrix::new(table.design());
    if effect == 0 || effect >= l.size() {
        return Err(Error::input(format!("effect index {effect} is not a factorial effect")));
    }
    let se = exact::to_f64(&table.conservative_variance_exact(&plan.arms)?).sqrt();
    let v = table.true_variances(&l, &plan.arms)?[effect - 1];
    if !(v > 0.0) {
        return Err(Error::Degenerate(format!(
            "the randomization variance of effect {} is zero",
            l.columns()[effect].label
        )));
    }
    let tau = table.tau_fp(&l)[effect];
    let z = upper_point(alpha / (2.0 * family_size as f64))?;
    let sd = v.sqrt();
    Ok(normal_cdf((tau - se * z) / sd) + normal_cdf((-se * z - tau) / sd))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    pub label: String,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurveOptions {
    pub alpha: f64,
    pub correction: Correction,
    /// Bonferroni family size; defaults to `J − 1`.
    pub family_size: Option<usize>,
    pub criterion: Criterion,
    pub target: f64,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for PowerCurveOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            correction: Correction::Ier,
            family_size: None,
            criterion: Criterion::D,
            target: 0.8,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub n: u64,
    pub feasible: bool,
    /// Why the allocation failed at this N.
    pub note: Option<String>,
    pub arms: Option<Vec<u64>>,
    pub se: Option<f64>,
    pub powers: Vec<f64>,
    pub joint: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub specs: Vec<PowerSpec>,
    pub alpha: f64,
    pub correction: Correction,
    pub family_size: usize,
    pub criterion: Criterion,
    pub target: f64,
    pub points: Vec<PowerPoint>,
    /// Smallest feasible grid N whose joint power reaches the target.
    pub smallest_n: Option<u64>,
}

/// `step, 2·step, …` up to `max`.
pub fn default_grid(step: u64, max: u64) -> Vec<u64> {
    (1..=max / step.max(1)).map(|i| i * step.max(1)).collect()
}

/// Power of each spec, and their product, over a grid of total sizes.
pub fn power_curve(
    specs: &[PowerSpec],
    guess: &VarianceGuess,
    k: usize,
    grid: &[u64],
    options: &PowerCurveOptions,
) -> Result<PowerCurve> {
    if specs.is_empty() {
        return Err(Error::input("power curve needs at least one effect size"));
    }
    if grid.is_empty() {
        return Err(Error::input("N grid is empty"));
    }
    check_level(options.alpha)?;
    let j = 1usize << k;
    guess.validate(j)?;
    let family_size = match options.correction {
        Correction::Ier => 1,
        Correction::Bonferroni => options.family_size.unwrap_or(j - 1),
    };
    let points: Vec<Result<PowerPoint>> = options.execution.map_slice(grid, |&n| {
        let plan = match allocate_optimal(options.criterion, guess, n, j) {
            Ok(p) => p,
            Err(e @ (Error::Infeasible(_) | Error::Input(_))) => {
                return Ok(PowerPoint {
                    n,
                    feasible: false,
                    note: Some(e.to_string()),
                    arms: None,
                    se: None,
                    powers: Vec::new(),
                    joint: None,
                })
            }
            Err(e) => return Err(e),
        };
        let se = se_tilde(guess, &plan, k)?;
        let powers = specs
            .iter()
            .map(|s| power_two_sided_family(s.tau, se, options.alpha, family_size))
            .collect::<Result<Vec<_>>>()?;
        Ok(PowerPoint {
            n,
            feasible: true,
            note: None,
            arms: Some(plan.arms),
            se: Some(se),
            joint: Some(powers.iter().product()),
            powers,
        })
    });
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    for p in points.iter().filter(|p| !p.feasible) {
        log::debug!("N = {} flagged: {}", p.n, p.note.as_deref().unwrap_or(""));
    }
    let smallest_n = points
        .iter()
        .filter(|p| p.joint.is_some_and(|b| b >= options.target))
        .map(|p| p.n)
        .min();
    Ok(PowerCurve {
        specs: specs.to_vec(),
        alpha: options.alpha,
        correction: options.correction,
        family_size,
        criterion: options.criterion,
        target: options.target,
        points,
        smallest_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleSizeMode {
    ProportionGuess,
    Pilot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    pub mode: SampleSizeMode,
    pub raw: f64,
    pub rounded: u64,
    /// `rounded` raised until the allocation `deltas` gives every arm two units
    /// (and, for balanced designs, equal integer arms).
    pub feasible: u64,
    pub deltas: Vec<f64>,
}

/// Conservative one-sided sample size for detecting `tau` with power `beta`.
///
/// Proportion guesses use `P̃_j(1−P̃_j)` and add one unit; pilot variances
/// and `Variances` are used as they are. `deltas` are the arm fractions, balanced when `None`.
pub fn sample_size(
    tau: f64,
    alpha: f64,
    beta: f64,
    deltas: Option<&[f64]>,
    guess: &VarianceGuess,
) -> Result<SampleSize> {
    check_level(alpha)?;
    if !(beta > alpha.max(0.5) && beta < 1.0) {
        return Err(Error::input(format!(
            "target power must exceed max(alpha, 0.5) = {} and be below 1, got {beta}",
            alpha.max(0.5)
        )));
    }
    if tau == 0.0 || !tau.is_finite() {
        return Err(Error::input("effect size must be non-zero"));
    }
    let j = guess.len();
    if j < 2 || !j.is_power_of_two() {
        return Err(Error::input(format!("{j} arms do not form a 2^K design")));
    }
    guess.validate(j)?;
    let k = j.trailing_zeros() as i32;
    let deltas = match deltas {
        None => vec![1.0 / j as f64; j],
        Some(d) => {
            if d.len() != j {
                return Err(Error::input(format!("{} arm fractions for {j} treatments", d.len())));
            }
            if d.iter().any(|x| !(*x > 0.0)) || (d.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::input("arm fractions must be positive and sum to 1"));
            }
            d.to_vec()
        }
    };
    let (mode, terms, extra) = match guess {
        VarianceGuess::Proportions(p) => (SampleSizeMode::ProportionGuess, p.iter().map(|p| p * (1.0 - p)).collect(), 1.0),
        other => (SampleSizeMode::Pilot, other.variances(0), 0.0),
    };
    let c: f64 = terms.iter().zip(&deltas).map(|(v, d)| v / d).sum::<f64>() * 0.25f64.powi(k - 1);
    if !(c > 0.0) {
        return Err(Error::Degenerate("every variance guess is zero".into()));
    }
    let z_a = upper_point(alpha)?;
    let z_b = upper_point(beta)?;
    let raw = c * ((z_a - z_b) / tau).powi(2) + extra;
    let rounded = raw.ceil() as u64;
    let min_delta = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    let balanced = deltas.iter().all(|d| (d - min_delta).abs() < 1e-12);
    let feasible = if balanced {
        let j = j as u64;
        rounded.div_ceil(j).max(2) * j
    } else {
        rounded.max((2.0 / min_delta - 1e-9).ceil() as u64)
    };
    Ok(SampleSize {
        mode,
        raw,
        rounded,
        feasible,
        deltas,
    })
}
