//! Group summaries, unbiased factorial-effect estimates, Neymanian standard
//! errors and per-effect tests with optional Bonferroni adjustment.
//!
//! Effect estimates are computed in exact rational arithmetic from the arm
//! counts; floating point enters only at the square root of the variance.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::design::{ContrastMatrix, FactorialDesign};
use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::normal::{normal_cdf, upper_point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    /// 1-based treatment index.
    pub treatment: usize,
    pub outcome: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedDataset {
    design: FactorialDesign,
    records: Vec<Record>,
}

impl ObservedDataset {
    pub fn new(design: FactorialDesign, records: Vec<Record>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if r.treatment == 0 || r.treatment > design.treatments() {
                return Err(Error::input(format!(
                    "record {}: treatment index {} outside 1..={}",
                    i + 1,
                    r.treatment,
                    design.treatments()
                )));
            }
            if r.outcome > 1 {
                return Err(Error::input(format!(
                    "record {}: outcome must be 0 or 1, got {}",
                    i + 1,
                    r.outcome
                )));
            }
        }
        Ok(Self { design, records })
    }

    pub fn design(&self) -> &FactorialDesign {
        &self.design
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Counts for one treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmCounts {
    pub treatment: usize,
    /// Units assigned, `N_j`.
    pub n: u64,
    /// Units responding with 1, `n_{j1}`.
    pub n1: u64,
}

impl ArmCounts {
    pub fn n0(&self) -> u64 {
        self.n - self.n1
    }

    pub fn proportion_exact(&self) -> Rational {
        exact::ratio(self.n1 as i64, self.n as i64)
    }

    pub fn proportion(&self) -> f64 {
        self.n1 as f64 / self.n as f64
    }

    /// `s_j² = N_j/(N_j−1) · p_j(1−p_j) = n1·n0 / (N_j (N_j−1))`.
    pub fn variance_exact(&self) -> Result<Rational> {
        if self.n < 2 {
            return Err(Error::VarianceUndefined {
                treatment: self.treatment,
            });
        }
        Ok(exact::ratio(
            (self.n1 * self.n0()) as i64,
            (self.n * (self.n - 1)) as i64,
        ))
    }

    pub fn variance(&self) -> Result<f64> {
        self.variance_exact().map(|v| exact::to_f64(&v))
    }
}

/// Per-treatment counts, proportions and sample variances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSummary {
    design: FactorialDesign,
    arms: Vec<ArmCounts>,
}

impl GroupSummary {
    /// Builds a summary from `(N_j, n_{j1})` pairs listed in treatment order.
    pub fn from_counts(design: FactorialDesign, counts: &[(u64, u64)]) -> Result<Self> {
        if counts.len() != design.treatments() {
            return Err(Error::input(format!(
                "expected counts for {} treatments, got {}",
                design.treatments(),
                counts.len()
            )));
        }
        let mut arms = Vec::with_capacity(counts.len());
        for (i, &(n, n1)) in counts.iter().enumerate() {
            let treatment = i + 1;
            if n == 0 {
                return Err(Error::EmptyArm { treatment });
            }
            if n1 > n {
                return Err(Error::input(format!(
                    "treatment {treatment}: n1 = {n1} exceeds n = {n}"
                )));
            }
            arms.push(ArmCounts { treatment, n, n1 });
        }
        Ok(Self { design, arms })
    }

    pub fn design(&self) -> &FactorialDesign {
        &self.design
    }

    pub fn arms(&self) -> &[ArmCounts] {
        &self.arms
    }

    pub fn total(&self) -> u64 {
        self.arms.iter().map(|a| a.n).sum()
    }

    pub fn proportions(&self) -> Vec<f64> {
        self.arms.iter().map(ArmCounts::proportion).collect()
    }

    pub fn proportions_exact(&self) -> Vec<Rational> {
        self.arms.iter().map(ArmCounts::proportion_exact).collect()
    }

    pub fn variances(&self) -> Result<Vec<f64>> {
        self.arms.iter().map(ArmCounts::variance).collect()
    }

    pub fn variances_exact(&self) -> Result<Vec<Rational>> {
        self.arms.iter().map(ArmCounts::variance_exact).collect()
    }

    pub fn arm_sizes(&self) -> Vec<u64> {
        self.arms.iter().map(|a| a.n).collect()
    }
}

pub fn summarize(data: &ObservedDataset) -> Result<GroupSummary> {
    let j = data.design.treatments();
    let mut counts = vec![(0u64, 0u64); j];
    for r in &data.records {
        let c = &mut counts[r.treatment - 1];
        c.0 += 1;
        c.1 += r.outcome as u64;
    }
    if let Some(empty) = counts.iter().position(|c| c.0 == 0) {
        return Err(Error::EmptyArm {
            treatment: empty + 1,
        });
    }
    let summary = GroupSummary::from_counts(data.design.clone(), &counts)?;
    if let Some(single) = summary.arms.iter().find(|a| a.n < 2) {
        return Err(Error::VarianceUndefined {
            treatment: single.treatment,
        });
    }
    Ok(summary)
}

/// Exact point estimates. `effects[i]` belongs to contrast column `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimates {
    /// Average of the arm proportions.
    pub grand_mean: Rational,
    pub effects: Vec<Rational>,
}

impl EffectEstimates {
    pub fn to_f64(&self) -> Vec<f64> {
        self.effects.iter().map(exact::to_f64).collect()
    }
}

/// `τ̂ = 2^{−(K−1)} Lᵀ p`, exact.
pub fn estimate_effects(summary: &GroupSummary, contrasts: &ContrastMatrix) -> EffectEstimates {
    effects_from_proportions(&summary.proportions_exact(), contrasts)
}

pub(crate) fn effects_from_proportions(
    proportions: &[Rational],
    contrasts: &ContrastMatrix,
) -> EffectEstimates {
    let k = contrasts.design().k() as u32;
    let scale = exact::inv_pow2(k - 1);
    let mut all: Vec<Rational> = contrasts
        .transpose_apply(proportions)
        .into_iter()
        .map(|v| v * &scale)
        .collect();
    // Column 0 carries 2·mean.
    let grand_mean = all.remove(0) / exact::int(2);
    EffectEstimates {
        grand_mean,
        effects: all,
    }
}

/// Exact Neymanian variance `2^{−2(K−1)} Σ_j s_j²/N_j`, shared by every effect.
pub fn neyman_variance(summary: &GroupSummary) -> Result<Rational> {
    let k = summary.design.k() as u32;
    let mut total = Rational::zero();
    for arm in &summary.arms {
        total += arm.variance_exact()? / exact::int(arm.n as i64);
    }
    Ok(total * exact::inv_pow2(2 * (k - 1)))
}

pub fn neyman_se(summary: &GroupSummary) -> Result<f64> {
    neyman_variance(summary).map(|v| exact::to_f64(&v).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    Greater,
    Less,
}

impl std::str::FromStr for Alternative {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "two-sided" | "two_sided" | "twosided" => Ok(Self::TwoSided),
            "greater" => Ok(Self::Greater),
            "less" => Ok(Self::Less),
            other => Err(Error::input(format!("unknown alternative {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    /// Individual error rate: each test at level α.
    #[default]
    Ier,
    /// Experiment-wise error rate via Bonferroni over the tested family.
    Bonferroni,
}

impl std::fmt::Display for Correction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Correction::Ier => "IER",
            Correction::Bonferroni => "Bonferroni",
        })
    }
}

impl std::str::FromStr for Correction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ier" => Ok(Self::Ier),
            "bonferroni" | "eer" => Ok(Self::Bonferroni),
            other => Err(Error::input(format!("unknown correction {other:?}"))),
        }
    }
}

/// Two-sided or one-sided interval. `None` bounds are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Interval {
    pub(crate) fn around(
        estimate: f64,
        se: f64,
        level: f64,
        alternative: Alternative,
    ) -> Result<Self> {
        Ok(match alternative {
            Alternative::TwoSided => {
                let half = upper_point(level / 2.0)? * se;
                Interval {
                    lower: Some(estimate - half),
                    upper: Some(estimate + half),
                }
            }
            Alternative::Greater => Interval {
                lower: Some(estimate - upper_point(level)? * se),
                upper: None,
            },
            Alternative::Less => Interval {
                lower: None,
                upper: Some(estimate + upper_point(level)? * se),
            },
        })
    }

    pub fn clipped(self, low: f64, high: f64) -> Self {
        Interval {
            lower: Some(self.lower.map_or(low, |v| v.clamp(low, high))),
            upper: Some(self.upper.map_or(high, |v| v.clamp(low, high))),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower.is_none_or(|l| l <= value) && self.upper.is_none_or(|u| value <= u)
    }
}

pub(crate) fn p_value(statistic: f64, alternative: Alternative) -> f64 {
    match alternative {
        Alternative::TwoSided => (2.0 * normal_cdf(-statistic.abs())).min(1.0),
        Alternative::Greater => normal_cdf(-statistic),
        Alternative::Less => normal_cdf(statistic),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceOptions {
    pub alpha: f64,
    pub alternative: Alternative,
    pub correction: Correction,
    /// Restricts the tested family to these effect columns; `None` tests all `J − 1`.
    pub family: Option<Vec<usize>>,
    /// Clip interval ends to `[−1, 1]`.
    pub clip: bool,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            alternative: Alternative::TwoSided,
            correction: Correction::Ier,
            family: None,
            clip: false,
        }
    }
}

impl InferenceOptions {
    pub(crate) fn validate(&self, contrasts: &ContrastMatrix) -> Result<Vec<usize>> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::input(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        let family: Vec<usize> = match &self.family {
            None => (1..contrasts.size()).collect(),
            Some(f) => {
                let mut f = f.clone();
                f.sort_unstable();
                f.dedup();
                if f.is_empty() {
                    return Err(Error::input("tested family is empty"));
                }
                if let Some(bad) = f.iter().find(|&&e| e == 0 || e >= contrasts.size()) {
                    return Err(Error::input(format!("effect index {bad} is not a factorial effect")));
                }
                f
            }
        };
        Ok(family)
    }

    /// Per-test level after any multiplicity correction.
    pub(crate) fn per_test_level(&self, family_size: usize) -> f64 {
        match self.correction {
            Correction::Ier => self.alpha,
            Correction::Bonferroni => self.alpha / family_size as f64,
        }
    }

    pub(crate) fn adjust(&self, p_raw: f64, family_size: usize) -> f64 {
        match self.correction {
            Correction::Ier => p_raw,
            Correction::Bonferroni => (p_raw * family_size as f64).min(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectInference {
    pub effect: usize,
    pub label: String,
    pub estimate: f64,
    pub se: f64,
    pub statistic: f64,
    pub interval: Interval,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceTable {
    pub alpha: f64,
    pub alternative: Alternative,
    pub correction: Correction,
    pub family_size: usize,
    pub se: f64,
    pub rows: Vec<EffectInference>,
}

/// Normal-approximation inference for the linear factorial effects.
///
/// Under Bonferroni the intervals use the per-test level `α/G`, matching the
/// adjusted rejection rule.
pub fn infer(
    summary: &GroupSummary,
    contrasts: &ContrastMatrix,
    options: &InferenceOptions,
) -> Result<InferenceTable> {
    let family = options.validate(contrasts)?;
    let se = neyman_se(summary)?;
    if se <= 0.0 {
        return Err(Error::Degenerate(
            "the Neymanian standard error is zero (every arm has p in {0, 1}); \
             use exact enumeration instead"
                .into(),
        ));
    }
    let estimates = estimate_effects(summary, contrasts).to_f64();
    let g = family.len();
    let level = options.per_test_level(g);
    let mut rows = Vec::with_capacity(g);
    for &e in &family {
        let estimate = estimates[e - 1];
        let statistic = estimate / se;
        let p_raw = p_value(statistic, options.alternative);
        let p_adjusted = options.adjust(p_raw, g);
        let mut interval = Interval::around(estimate, se, level, options.alternative)?;
        if options.clip {
            interval = interval.clipped(-1.0, 1.0);
        }
        rows.push(EffectInference {
            effect: e,
            label: contrasts.columns()[e].label.clone(),
            estimate,
            se,
            statistic,
            interval,
            p_raw,
            p_adjusted,
            reject: p_adjusted <= options.alpha,
        });
    }
    Ok(InferenceTable {
        alpha: options.alpha,
        alternative: options.alternative,
        correction: options.correction,
        family_size: g,
        se,
        rows,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn lawyer_summary() -> GroupSummary {
        let design = FactorialDesign::new(["R", "G", "I"]).unwrap();
        let counts: Vec<(u64, u64)> = [2, 2, 2, 3, 5, 2, 5, 6].iter().map(|&c| (12, c)).collect();
        GroupSummary::from_counts(design, &counts).unwrap()
    }

    #[test]
    fn lawyer_proportions_and_variances() {
        let s = lawyer_summary();
        let p = [0.167, 0.167, 0.167, 0.250, 0.417, 0.167, 0.417, 0.500];
        let s2 = [0.1515, 0.1515, 0.1515, 0.2045, 0.2652, 0.1515, 0.2652, 0.2727];
        for (arm, (&pp, &ss)) in s.arms().iter().zip(p.iter().zip(&s2)) {
            assert!((arm.proportion() - pp).abs() < 5e-4);
            assert!((arm.variance().unwrap() - ss).abs() < 5e-5);
            assert_eq!(arm.n0() + arm.n1, arm.n);
        }
        assert_eq!(s.total(), 96);
    }

    #[test]
    fn summarize_counts_records() {
        let design = FactorialDesign::with_factors(1).unwrap();
        let records = vec![
            Record { treatment: 1, outcome: 0 },
            Record { treatment: 1, outcome: 0 },
            Record { treatment: 2, outcome: 1 },
            Record { treatment: 2, outcome: 0 },
        ];
        let data = ObservedDataset::new(design.clone(), records).unwrap();
        let s = summarize(&data).unwrap();
        assert_eq!(s.arms()[0].n1, 0);
        assert_eq!(s.arms()[0].proportion(), 0.0);
        assert_eq!(s.arms()[0].variance().unwrap(), 0.0);
        assert_eq!(s.arms()[1].proportion(), 0.5);
    }

    #[test]
    fn summarize_rejects_empty_and_singleton_arms() {
        let design = FactorialDesign::with_factors(1).unwrap();
        let data = ObservedDataset::new(
            design.clone(),
            vec![Record { treatment: 1, outcome: 1 }, Record { treatment: 1, outcome: 0 }],
        )
        .unwrap();
        assert!(matches!(summarize(&data), Err(Error::EmptyArm { treatment: 2 })));
        let data = ObservedDataset::new(
            design.clone(),
            vec![
                Record { treatment: 1, outcome: 1 },
                Record { treatment: 1, outcome: 0 },
                Record { treatment: 2, outcome: 0 },
            ],
        )
        .unwrap();
        assert!(matches!(
            summarize(&data),
            Err(Error::VarianceUndefined { treatment: 2 })
        ));
        assert!(ObservedDataset::new(design.clone(), vec![Record { treatment: 3, outcome: 0 }]).is_err());
        assert!(ObservedDataset::new(design, vec![Record { treatment: 1, outcome: 2 }]).is_err());
    }

    #[test]
    fn lawyer_estimates_are_exact() {
        let s = lawyer_summary();
        let l = ContrastMatrix::new(s.design());
        let est = estimate_effects(&s, &l);
        let want = [(9, 48), (5, 48), (-1, 48), (3, 48), (-3, 48), (5, 48), (3, 48)];
        for (got, &(n, d)) in est.effects.iter().zip(&want) {
            assert_eq!(*got, exact::ratio(n, d));
        }
        assert_eq!(est.effects[0], exact::ratio(3, 16));
        let rounded: Vec<f64> = est.to_f64().iter().map(|v| (v * 1e4).round() / 1e4).collect();
        assert_eq!(rounded, vec![0.1875, 0.1042, -0.0208, 0.0625, -0.0625, 0.1042, 0.0625]);
    }

    #[test]
    fn constant_and_single_factor_estimates() {
        let design = FactorialDesign::with_factors(2).unwrap();
        let s = GroupSummary::from_counts(design, &[(4, 1); 4]).unwrap();
        let l = ContrastMatrix::new(s.design());
        assert!(estimate_effects(&s, &l).effects.iter().all(Zero::is_zero));

        let design = FactorialDesign::with_factors(1).unwrap();
        let s = GroupSummary::from_counts(design, &[(10, 2), (10, 7)]).unwrap();
        let l = ContrastMatrix::new(s.design());
        assert_eq!(estimate_effects(&s, &l).effects, vec![exact::ratio(1, 2)]);
    }

    #[test]
    fn neyman_se_examples() {
        assert!((neyman_se(&lawyer_summary()).unwrap() - 0.0917).abs() < 5e-5);

        let design = FactorialDesign::with_factors(2).unwrap();
        let s = GroupSummary::from_counts(design, &[(5, 0), (5, 5), (6, 0), (3, 3)]).unwrap();
        assert_eq!(neyman_se(&s).unwrap(), 0.0);

        // K=1, N_j=2, one success per arm: s² = 0.5, SE = sqrt(0.25 + 0.25).
        let design = FactorialDesign::with_factors(1).unwrap();
        let s = GroupSummary::from_counts(design, &[(2, 1), (2, 1)]).unwrap();
        assert!((neyman_se(&s).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);

        let design = FactorialDesign::with_factors(1).unwrap();
        let s = GroupSummary::from_counts(design, &[(1, 1), (2, 1)]).unwrap();
        assert!(matches!(neyman_se(&s), Err(Error::VarianceUndefined { treatment: 1 })));
    }

    #[test]
    fn lawyer_table_rows() {
        let s = lawyer_summary();
        let l = ContrastMatrix::new(s.design());
        let t = infer(&s, &l, &InferenceOptions::default()).unwrap();
        let race = &t.rows[0];
        assert_eq!(race.label, "R");
        // Full precision; the printed 2.0447 is 0.1875 / 0.0917 with the rounded SE.
        assert!((race.statistic - 2.045262475).abs() < 1e-8);
        assert!((race.interval.lower.unwrap() - 0.0078).abs() < 5e-5);
        assert!((race.interval.upper.unwrap() - 0.3672).abs() < 5e-5);
        assert!((race.p_raw - 0.040828988).abs() < 1e-8);
        assert!(race.reject);
        assert!(t.rows.iter().all(|r| r.se == t.se));
        let gender = &t.rows[1];
        assert!((gender.p_raw - 0.2558).abs() < 5e-5);

        let bonf = InferenceOptions {
            correction: Correction::Bonferroni,
            ..Default::default()
        };
        let t = infer(&s, &l, &bonf).unwrap();
        assert!((t.rows[0].p_adjusted - 0.29).abs() < 5e-3);
        assert!(t.rows[1..].iter().all(|r| r.p_adjusted == 1.0));
        assert!(t.rows.iter().all(|r| r.p_adjusted >= r.p_raw));
        assert!(!t.rows[0].reject);
    }

    #[test]
    fn restricted_family_changes_divisor() {
        let s = lawyer_summary();
        let l = ContrastMatrix::new(s.design());
        let opts = InferenceOptions {
            correction: Correction::Bonferroni,
            family: Some(vec![1, 2, 6]),
            ..Default::default()
        };
        let t = infer(&s, &l, &opts).unwrap();
        assert_eq!(t.family_size, 3);
        assert_eq!(t.rows.len(), 3);
        assert!((t.rows[0].p_adjusted - 3.0 * t.rows[0].p_raw).abs() < 1e-15);
        let bad = InferenceOptions {
            family: Some(vec![0]),
            ..Default::default()
        };
        assert!(infer(&s, &l, &bad).is_err());
    }

    #[test]
    fn one_sided_rows() {
        let s = lawyer_summary();
        let l = ContrastMatrix::new(s.design());
        let opts = InferenceOptions {
            alternative: Alternative::Greater,
            ..Default::default()
        };
        let t = infer(&s, &l, &opts).unwrap();
        let r = &t.rows[0];
        let z = upper_point(0.05).unwrap();
        assert!((r.interval.lower.unwrap() - (r.estimate - z * r.se)).abs() < 1e-15);
        assert!(r.interval.upper.is_none());
        assert!((r.p_raw - (1.0 - normal_cdf(r.statistic))).abs() < 1e-12);

        let clipped = infer(&s, &l, &InferenceOptions { clip: true, ..opts }).unwrap();
        assert_eq!(clipped.rows[0].interval.upper, Some(1.0));

        let less = infer(
            &s,
            &l,
            &InferenceOptions {
                alternative: Alternative::Less,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(less.rows[0].interval.lower.is_none());
        assert!((less.rows[0].p_raw + t.rows[0].p_raw - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_statistic_has_unit_p_value() {
        let design = FactorialDesign::with_factors(1).unwrap();
        let s = GroupSummary::from_counts(design, &[(10, 3), (10, 3)]).unwrap();
        let l = ContrastMatrix::new(s.design());
        let t = infer(&s, &l, &InferenceOptions::default()).unwrap();
        assert_eq!(t.rows[0].statistic, 0.0);
        assert_eq!(t.rows[0].p_raw, 1.0);
        let mid = (t.rows[0].interval.lower.unwrap() + t.rows[0].interval.upper.unwrap()) / 2.0;
        assert!(mid.abs() < 1e-15);
    }

    #[test]
    fn zero_se_refuses() {
        let design = FactorialDesign::with_factors(1).unwrap();
        let s = GroupSummary::from_counts(design, &[(4, 0), (4, 4)]).unwrap();
        let l = ContrastMatrix::new(s.design());
        let err = infer(&s, &l, &InferenceOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn counts_validation() {
        let design = FactorialDesign::with_factors(1).unwrap();
        assert!(GroupSummary::from_counts(design.clone(), &[(2, 3), (2, 1)]).is_err());
        assert!(matches!(
            GroupSummary::from_counts(design.clone(), &[(0, 0), (2, 1)]),
            Err(Error::EmptyArm { treatment: 1 })
        ));
        assert!(GroupSummary::from_counts(design, &[(2, 1)]).is_err());
    }
}
