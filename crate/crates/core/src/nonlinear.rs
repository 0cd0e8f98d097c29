//! Log and logit factorial effects with plug-in delta-method variances.
//!
//! `η_ℓ = 2^{−(K−1)} Σ_j λ_{ℓj} log P_j` and
//! `θ_ℓ = 2^{−(K−1)} Σ_j λ_{ℓj} logit P_j`, estimated by substituting `p_j`.
//! The variance estimate substitutes `s_j²` for `S_j²`, `p_j` for `P_j` and
//! drops the non-estimable `S²_{j−j'}` term; cross terms are kept.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::design::ContrastMatrix;
use crate::error::{Error, Result};
use crate::estimation::{p_value, EffectInference, GroupSummary, InferenceOptions, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NonlinearKind {
    /// Contrast of log proportions.
    LogFe,
    /// Contrast of log odds.
    LogitFe,
}

impl NonlinearKind {
    pub fn name(self) -> &'static str {
        match self {
            NonlinearKind::LogFe => "logFE",
            NonlinearKind::LogitFe => "logitFE",
        }
    }

    fn transform(self, p: f64) -> f64 {
        match self {
            NonlinearKind::LogFe => p.ln(),
            NonlinearKind::LogitFe => (p / (1.0 - p)).ln(),
        }
    }

    /// Reciprocal of the transform's derivative: `p` or `p(1−p)`.
    fn slope_inverse(self, p: f64) -> f64 {
        match self {
            NonlinearKind::LogFe => p,
            NonlinearKind::LogitFe => p * (1.0 - p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NonlinearOptions {
    /// Haldane–Anscombe: use `(n_{j1}+½)/(N_j+1)` for every arm.
    pub haldane: bool,
}

#[derive(Debug, Clone, Copy)]
struct ArmInput {
    n: f64,
    p: f64,
}

fn arm_inputs(
    summary: &GroupSummary,
    kind: NonlinearKind,
    options: NonlinearOptions,
) -> Result<Vec<ArmInput>> {
    summary
        .arms()
        .iter()
        .map(|arm| {
            let p = if options.haldane {
                (arm.n1 as f64 + 0.5) / (arm.n as f64 + 1.0)
            } else {
                arm.proportion()
            };
            let defined = match kind {
                NonlinearKind::LogFe => p > 0.0,
                NonlinearKind::LogitFe => p > 0.0 && p < 1.0,
            };
            if !defined {
                return Err(Error::Undefined(format!(
                    "{} requires {} but treatment {} has p = {p}; \
                     enable the Haldane correction to proceed",
                    kind.name(),
                    if kind == NonlinearKind::LogFe { "p > 0" } else { "0 < p < 1" },
                    arm.treatment
                )));
            }
            Ok(ArmInput {
                n: arm.n as f64,
                p,
            })
        })
        .collect()
}

fn scale(contrasts: &ContrastMatrix, power: i32) -> f64 {
    0.5f64.powi(power * (contrasts.design().k() as i32 - 1))
}

/// Plug-in estimates for effects `1..J`, returned in effect order.
pub fn estimate(
    summary: &GroupSummary,
    contrasts: &ContrastMatrix,
    kind: NonlinearKind,
    options: NonlinearOptions,
) -> Result<Vec<f64>> {
    let arms = arm_inputs(summary, kind, options)?;
    let values: Vec<f64> = arms.iter().map(|a| kind.transform(a.p)).collect();
    let c = scale(contrasts, 1);
    Ok(contrasts.transpose_apply(&values)[1..]
        .iter()
        .map(|v| v * c)
        .collect())
}

pub fn estimate_logfe(summary: &GroupSummary, contrasts: &ContrastMatrix) -> Result<Vec<f64>> {
    estimate(summary, contrasts, NonlinearKind::LogFe, NonlinearOptions::default())
}

pub fn estimate_logitfe(summary: &GroupSummary, contrasts: &ContrastMatrix) -> Result<Vec<f64>> {
    estimate(summary, contrasts, NonlinearKind::LogitFe, NonlinearOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub value: f64,
    /// The plug-in value was negative and has been set to zero.
    pub clamped: bool,
}

/// Plug-in variance estimates for effects `1..J`.
pub fn variance_estimate(
    summary: &GroupSummary,
    contrasts: &ContrastMatrix,
    kind: NonlinearKind,
    options: NonlinearOptions,
) -> Result<Vec<VarianceEstimate>> {
    let arms = arm_inputs(summary, kind, options)?;
    let mut s2 = Vec::with_capacity(arms.len());
    for (arm, input) in summary.arms().iter().zip(&arms) {
        if arm.n < 2 {
            return Err(Error::VarianceUndefined {
                treatment: arm.treatment,
            });
        }
        s2.push(input.n / (input.n - 1.0) * input.p * (1.0 - input.p));
    }
    let total: f64 = arms.iter().map(|a| a.n).sum();
    let g: Vec<f64> = arms.iter().map(|a| kind.slope_inverse(a.p)).collect();

    let own: f64 = arms
        .iter()
        .zip(&s2)
        .zip(&g)
        .map(|((a, s), g)| (total - a.n) * s / (total * a.n * g * g))
        .sum();
    // Σ_{j<j'} λ_j λ_j' (s_j² + s_j'²)/(g_j g_j') = U·W − Σ_j s_j²/g_j²
    // with U = Lᵀ(s²/g), W = Lᵀ(1/g).
    let diag: f64 = s2.iter().zip(&g).map(|(s, g)| s / (g * g)).sum();
    let u = contrasts.transpose_apply(&s2.iter().zip(&g).map(|(s, g)| s / g).collect::<Vec<_>>());
    let w = contrasts.transpose_apply(&g.iter().map(|g| 1.0 / g).collect::<Vec<_>>());
    let c = scale(contrasts, 2);

    let mut out = Vec::with_capacity(contrasts.size() - 1);
    for effect in contrasts.effects() {
        let cross = (u[effect.index] * w[effect.index] - diag) / total;
        let value = c * (own - cross);
        if !value.is_finite() {
            return Err(Error::Degenerate(format!(
                "{} variance for {} is not finite",
                kind.name(),
                effect.label
            )));
        }
        if value < 0.0 {
            warn!(
                "{} plug-in variance for {} is negative ({value:e}); clamped to 0",
                kind.name(),
                effect.label
            );
            out.push(VarianceEstimate {
                value: 0.0,
                clamped: true,
            });
        } else {
            out.push(VarianceEstimate {
                value,
                clamped: false,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearRow {
    #[serde(flatten)]
    pub inference: EffectInference,
    pub variance: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearTable {
    pub kind: NonlinearKind,
    pub haldane: bool,
    pub alpha: f64,
    pub alternative: crate::estimation::Alternative,
    pub correction: crate::estimation::Correction,
    pub family_size: usize,
    pub rows: Vec<NonlinearRow>,
}

/// Normal-approximation inference using the plug-in variance. The `clip`
/// option is ignored here: these estimands are unbounded.
pub fn infer(
    summary: &GroupSummary,
    contrasts: &ContrastMatrix,
    kind: NonlinearKind,
    nonlinear: NonlinearOptions,
    options: &InferenceOptions,
) -> Result<NonlinearTable> {
    let family = options.validate(contrasts)?;
    let estimates = estimate(summary, contrasts, kind, nonlinear)?;
    let variances = variance_estimate(summary, contrasts, kind, nonlinear)?;
    let g = family.len();
    let level = options.per_test_level(g);
    let mut rows = Vec::with_capacity(g);
    for &e in &family {
        let estimate = estimates[e - 1];
        let var = variances[e - 1];
        let se = var.value.sqrt();
        if se <= 0.0 {
            return Err(Error::Degenerate(format!(
                "{} variance estimate for {} is zero",
                kind.name(),
                contrasts.columns()[e].label
            )));
        }
        let statistic = estimate / se;
        let p_raw = p_value(statistic, options.alternative);
        let p_adjusted = options.adjust(p_raw, g);
        rows.push(NonlinearRow {
            inference: EffectInference {
                effect: e,
                label: contrasts.columns()[e].label.clone(),
                estimate,
                se,
                statistic,
                interval: Interval::around(estimate, se, level, options.alternative)?,
                p_raw,
                p_adjusted,
                reject: p_adjusted <= options.alpha,
            },
            variance: var.value,
            clamped: var.clamped,
        });
    }
    Ok(NonlinearTable {
        kind,
        haldane: nonlinear.haldane,
        alpha: options.alpha,
        alternative: options.alternative,
        correction: options.correction,
        family_size: g,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::FactorialDesign;
    use crate::estimation::tests::lawyer_summary;
    use proptest::prelude::*;

    /// Literal transcription of the double-sum variance formula.
    fn straight_line_variance(
        summary: &GroupSummary,
        l: &ContrastMatrix,
        kind: NonlinearKind,
        effect: usize,
    ) -> f64 {
        let k = l.design().k() as i32;
        let arms = summary.arms();
        let n: f64 = arms.iter().map(|a| a.n as f64).sum();
        let p: Vec<f64> = arms.iter().map(|a| a.n1 as f64 / a.n as f64).collect();
        let s2: Vec<f64> = arms
            .iter()
            .zip(&p)
            .map(|(a, p)| a.n as f64 / (a.n as f64 - 1.0) * p * (1.0 - p))
            .collect();
        let denom = |j: usize| match kind {
            NonlinearKind::LogFe => p[j],
            NonlinearKind::LogitFe => p[j] * (1.0 - p[j]),
        };
        let j_count = arms.len();
        let mut first = 0.0;
        for j in 0..j_count {
            let nj = arms[j].n as f64;
            first += (n - nj) * s2[j] / (n * nj * denom(j) * denom(j));
        }
        let mut second = 0.0;
        for j in 0..j_count - 1 {
            for jp in j + 1..j_count {
                let lam = l.entry(j + 1, effect) as f64 * l.entry(jp + 1, effect) as f64;
                second += lam * (s2[j] + s2[jp]) / (denom(j) * denom(jp));
            }
        }
        (first - second / n) / 4f64.powi(k - 1)
    }

    #[test]
    fn lawyer_point_estimates() {
        let s = lawyer_summary();
        let l = ContrastMatrix::new(s.design());
        let eta = estimate_logfe(&s, &l).unwrap();
        let theta = estimate_logitfe(&s, &l).unwrap();
        assert!((eta[0] - 0.63).abs() < 0.005);
        assert!((theta[0] - 0.91).abs() < 0.005);
    }

    #[test]
    fn lawyer_variance_matches_double_sum() {
        let s = lawyer_summary();
        let l = ContrastMatrix::new(s.design());
        for kind in [NonlinearKind::LogFe, NonlinearKind::LogitFe] {
            let v = variance_estimate(&s, &l, kind, NonlinearOptions::default()).unwrap();
            for e in l.effects() {
                let want = straight_line_variance(&s, &l, kind, e.index);
                assert!((v[e.index - 1].value - want).abs() < 1e-12, "{kind:?} {}", e.label);
            }
        }
    }

    #[test]
    fn single_factor_cases() {
        let d = FactorialDesign::with_factors(1).unwrap();
        let s = GroupSummary::from_counts(d.clone(), &[(4, 1), (4, 2)]).unwrap();
        let l = ContrastMatrix::new(&d);
        assert!((estimate_logfe(&s, &l).unwrap()[0] - 2f64.ln()).abs() < 1e-15);
        let s = GroupSummary::from_counts(d.clone(), &[(10, 5), (10, 8)]).unwrap();
        assert!((estimate_logitfe(&s, &l).unwrap()[0] - 4f64.ln()).abs() < 1e-14);

        // N = 4, N_j = 2, p = (½, ½), s² = ½: own term 1, cross term −1.
        let s = GroupSummary::from_counts(d.clone(), &[(2, 1), (2, 1)]).unwrap();
        let v = variance_estimate(&s, &l, NonlinearKind::LogFe, NonlinearOptions::default()).unwrap();
        assert!((v[0].value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_arms() {
        let d = FactorialDesign::with_factors(2).unwrap();
        let l = ContrastMatrix::new(&d);
        let s = GroupSummary::from_counts(d.clone(), &[(6, 2); 4]).unwrap();
        assert!(estimate_logfe(&s, &l).unwrap().iter().all(|v| v.abs() < 1e-15));
        assert!(estimate_logitfe(&s, &l).unwrap().iter().all(|v| v.abs() < 1e-15));
        // All-ones arms: s² = 0 everywhere, so the logFE variance is zero.
        let s = GroupSummary::from_counts(d, &[(5, 5); 4]).unwrap();
        let v = variance_estimate(&s, &l, NonlinearKind::LogFe, NonlinearOptions::default()).unwrap();
        assert!(v.iter().all(|v| v.value == 0.0 && !v.clamped));
        let err = infer(&s, &l, NonlinearKind::LogFe, NonlinearOptions::default(), &InferenceOptions::default());
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }

    #[test]
    fn zero_cells_need_haldane() {
        let d = FactorialDesign::with_factors(1).unwrap();
        let l = ContrastMatrix::new(&d);
        let s = GroupSummary::from_counts(d, &[(10, 0), (10, 10)]).unwrap();
        let err = estimate_logfe(&s, &l).unwrap_err();
        assert!(err.to_string().contains("treatment 1"));
        assert_eq!(err.exit_code(), 3);
        let err = estimate_logitfe(&s, &l).unwrap_err();
        assert!(err.to_string().contains("treatment 1"));
        let opts = NonlinearOptions { haldane: true };
        let eta = estimate(&s, &l, NonlinearKind::LogFe, opts).unwrap();
        assert!((eta[0] - (10.5f64 / 0.5).ln()).abs() < 1e-12);
        let t = infer(&s, &l, NonlinearKind::LogitFe, opts, &InferenceOptions::default()).unwrap();
        assert!(t.haldane && t.rows[0].inference.se > 0.0);
    }

    #[test]
    fn null_estimate_two_sided_p_is_one() {
        let d = FactorialDesign::with_factors(1).unwrap();
        let l = ContrastMatrix::new(&d);
        let s = GroupSummary::from_counts(d, &[(10, 3), (10, 3)]).unwrap();
        let t = infer(&s, &l, NonlinearKind::LogFe, NonlinearOptions::default(), &InferenceOptions::default()).unwrap();
        assert_eq!(t.rows[0].inference.p_raw, 1.0);
    }

    #[test]
    fn two_arm_risk_ratio() {
        let d = FactorialDesign::with_factors(1).unwrap();
        let l = ContrastMatrix::new(&d);
        let s = GroupSummary::from_counts(d, &[(13, 4), (17, 9)]).unwrap();
        let crr = (9.0f64 / 17.0).ln() - (4.0f64 / 13.0).ln();
        assert!((estimate_logfe(&s, &l).unwrap()[0] - crr).abs() < 1e-14);
    }

    fn arbitrary_summary(k: usize) -> impl Strategy<Value = GroupSummary> {
        let j = 1usize << k;
        prop::collection::vec((3u64..30).prop_flat_map(|n| (Just(n), 1..n)), j).prop_map(move |c| {
            GroupSummary::from_counts(FactorialDesign::with_factors(k).unwrap(), &c).unwrap()
        })
    }

    proptest! {
        #[test]
        fn flipping_a_factor_negates_effects_containing_it(
            (k, s) in (1usize..=3).prop_flat_map(|k| (Just(k), arbitrary_summary(k))),
            raw in any::<usize>(),
        ) {
            let d = s.design().clone();
            let l = ContrastMatrix::new(&d);
            let f = raw % k;
            // Swap treatments that differ only in factor f.
            let counts: Vec<(u64, u64)> = (1..=d.treatments()).map(|t| {
                let mut lv = d.treatment_levels(t).unwrap();
                lv[f] ^= 1;
                let a = s.arms()[d.treatment_index(&lv).unwrap() - 1];
                (a.n, a.n1)
            }).collect();
            let flipped = GroupSummary::from_counts(d, &counts).unwrap();
            for kind in [NonlinearKind::LogFe, NonlinearKind::LogitFe] {
                let a = estimate(&s, &l, kind, NonlinearOptions::default()).unwrap();
                let b = estimate(&flipped, &l, kind, NonlinearOptions::default()).unwrap();
                for e in l.effects() {
                    let sign = if e.factors.contains(&f) { -1.0 } else { 1.0 };
                    prop_assert!((a[e.index - 1] - sign * b[e.index - 1]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn relabelling_factors_permutes_effects(s in arbitrary_summary(2)) {
            // Swap the two factors: treatment (a,b) -> (b,a).
            let d = s.design().clone();
            let l = ContrastMatrix::new(&d);
            let counts: Vec<(u64, u64)> = (1..=4).map(|t| {
                let lv = d.treatment_levels(t).unwrap();
                let a = s.arms()[d.treatment_index(&[lv[1], lv[0]]).unwrap() - 1];
                (a.n, a.n1)
            }).collect();
            let swapped = GroupSummary::from_counts(d, &counts).unwrap();
            let a = estimate(&s, &l, NonlinearKind::LogitFe, NonlinearOptions::default()).unwrap();
            let b = estimate(&swapped, &l, NonlinearKind::LogitFe, NonlinearOptions::default()).unwrap();
            prop_assert!((a[0] - b[1]).abs() < 1e-12);
            prop_assert!((a[1] - b[0]).abs() < 1e-12);
            prop_assert!((a[2] - b[2]).abs() < 1e-12);
        }

        #[test]
        fn factored_variance_matches_double_sum((k, s) in (1usize..=3).prop_flat_map(|k| (Just(k), arbitrary_summary(k)))) {
            let _ = k;
            let l = ContrastMatrix::new(s.design());
            for kind in [NonlinearKind::LogFe, NonlinearKind::LogitFe] {
                let v = variance_estimate(&s, &l, kind, NonlinearOptions::default()).unwrap();
                for e in l.effects() {
                    let want = straight_line_variance(&s, &l, kind, e.index);
                    if want >= 0.0 {
                        prop_assert!((v[e.index - 1].value - want).abs() < 1e-9 * want.abs().max(1.0));
                    } else {
                        prop_assert!(v[e.index - 1].clamped && v[e.index - 1].value == 0.0);
                    }
                }
            }
        }
    }
}
