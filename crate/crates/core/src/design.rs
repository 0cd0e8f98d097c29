//! Treatment indexing and the 2^K contrast matrix.
//!
//! Treatments are numbered `1..=J` lexicographically over factor levels with
//! the first factor most significant, so `(0,…,0) → 1` and `(1,…,1) → J`.
//! Effects are ordered mean first, then main effects in factor order, then
//! interactions by order and lexicographically within an order.

use std::ops::{Add, Neg, Sub};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_FACTORS: usize = 16;

/// Separator used in interaction labels, e.g. `G×I`.
pub const INTERACTION_SEP: &str = "×";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorialDesign {
    factor_names: Vec<String>,
}

impl FactorialDesign {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let factor_names: Vec<String> = names.into_iter().map(Into::into).collect();
        if factor_names.is_empty() || factor_names.len() > MAX_FACTORS {
            return Err(Error::input(format!(
                "number of factors must be between 1 and {MAX_FACTORS}, got {}",
                factor_names.len()
            )));
        }
        for (i, name) in factor_names.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(Error::input(format!("factor {} has an empty name", i + 1)));
            }
            if factor_names[..i].contains(name) {
                return Err(Error::input(format!("duplicate factor name {name:?}")));
            }
        }
        Ok(Self { factor_names })
    }

    /// Design with `k` factors named `A`, `B`, `C`, ...
    pub fn with_factors(k: usize) -> Result<Self> {
        if k == 0 || k > MAX_FACTORS {
            return Self::new(Vec::<String>::new());
        }
        Self::new((0..k).map(|i| ((b'A' + i as u8) as char).to_string()))
    }

    pub fn k(&self) -> usize {
        self.factor_names.len()
    }

    /// Number of treatment combinations, `J = 2^K`.
    pub fn treatments(&self) -> usize {
        1 << self.k()
    }

    pub fn factor_names(&self) -> &[String] {
        &self.factor_names
    }

    pub fn factor_position(&self, name: &str) -> Option<usize> {
        self.factor_names.iter().position(|n| n == name)
    }

    /// 1-based treatment index of a vector of 0/1 factor levels.
    pub fn treatment_index(&self, levels: &[u8]) -> Result<usize> {
        if levels.len() != self.k() {
            return Err(Error::input(format!(
                "expected {} factor levels, got {}",
                self.k(),
                levels.len()
            )));
        }
        let mut code = 0usize;
        for (i, &level) in levels.iter().enumerate() {
            if level > 1 {
                return Err(Error::input(format!(
                    "factor {} level must be 0 or 1, got {level}",
                    self.factor_names[i]
                )));
            }
            code = (code << 1) | level as usize;
        }
        Ok(code + 1)
    }

    /// Inverse of [`treatment_index`](Self::treatment_index).
    pub fn treatment_levels(&self, treatment: usize) -> Result<Vec<u8>> {
        self.check_treatment(treatment)?;
        let code = treatment - 1;
        let k = self.k();
        Ok((0..k).map(|i| ((code >> (k - 1 - i)) & 1) as u8).collect())
    }

    pub fn check_treatment(&self, treatment: usize) -> Result<()> {
        if treatment == 0 || treatment > self.treatments() {
            return Err(Error::input(format!(
                "treatment index {treatment} outside 1..={}",
                self.treatments()
            )));
        }
        Ok(())
    }

    /// Bit that marks factor `position` inside a treatment code or effect mask.
    fn factor_bit(&self, position: usize) -> usize {
        1 << (self.k() - 1 - position)
    }
}

/// One column of the contrast matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effect {
    /// Column position; 0 is the mean, `1..J` are the factorial effects.
    pub index: usize,
    /// Factor positions involved, ascending. Empty for the mean.
    pub factors: Vec<usize>,
    pub label: String,
    #[serde(skip)]
    mask: usize,
}

impl Effect {
    pub fn order(&self) -> usize {
        self.factors.len()
    }
}

/// The J×J matrix of ±1 contrasts. Entries are computed from bit masks on
/// demand rather than stored, so large K stays cheap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastMatrix {
    design: FactorialDesign,
    effects: Vec<Effect>,
}

impl ContrastMatrix {
    pub fn new(design: &FactorialDesign) -> Self {
        let k = design.k();
        let mut effects = vec![Effect {
            index: 0,
            factors: Vec::new(),
            label: "mean".to_string(),
            mask: 0,
        }];
        for order in 1..=k {
            for combo in (0..k).combinations(order) {
                let mask = combo.iter().map(|&f| design.factor_bit(f)).sum();
                let label = combo
                    .iter()
                    .map(|&f| design.factor_names[f].as_str())
                    .join(INTERACTION_SEP);
                effects.push(Effect {
                    index: effects.len(),
                    factors: combo,
                    label,
                    mask,
                });
            }
        }
        Self {
            design: design.clone(),
            effects,
        }
    }

    pub fn design(&self) -> &FactorialDesign {
        &self.design
    }

    pub fn size(&self) -> usize {
        self.effects.len()
    }

    /// All columns including the mean.
    pub fn columns(&self) -> &[Effect] {
        &self.effects
    }

    /// The `J − 1` factorial effects (mean excluded).
    pub fn effects(&self) -> &[Effect] {
        &self.effects[1..]
    }

    pub fn effect(&self, index: usize) -> Option<&Effect> {
        self.effects.get(index)
    }

    /// Looks an effect up by label. Accepts `×`, `x`, `*` or `:` between
    /// factor names and ignores factor order, so `I*G` finds `G×I`.
    pub fn find(&self, label: &str) -> Option<&Effect> {
        let mut positions = Vec::new();
        for part in label.split(['×', '*', ':']) {
            let part = part.trim();
            match self.design.factor_position(part) {
                Some(p) => positions.push(p),
                None => {
                    // `x` is only a separator when the pieces are all factor names.
                    for sub in part.split('x') {
                        positions.push(self.design.factor_position(sub.trim())?);
                    }
                }
            }
        }
        positions.sort_unstable();
        positions.dedup();
        self.effects[1..].iter().find(|e| e.factors == positions)
    }

    /// Entry `λ_{effect, treatment}` with 1-based `treatment`.
    pub fn entry(&self, treatment: usize, effect: usize) -> i8 {
        let mask = self.effects[effect].mask;
        let code = treatment - 1;
        let negatives = mask.count_ones() - (code & mask).count_ones();
        if negatives.is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// Column `effect` as a length-J vector ordered by treatment.
    pub fn column(&self, effect: usize) -> Vec<i8> {
        (1..=self.size()).map(|t| self.entry(t, effect)).collect()
    }

    /// Row for `treatment` (1-based): `λ̃_j`.
    pub fn row(&self, treatment: usize) -> Vec<i8> {
        (0..self.size()).map(|e| self.entry(treatment, e)).collect()
    }

    /// Dense row-major matrix, rows = treatments, columns = effects.
    pub fn to_dense(&self) -> Vec<Vec<i8>> {
        (1..=self.size()).map(|t| self.row(t)).collect()
    }

    /// `Lᵀ v` for `v` indexed by treatment, via a fast Walsh–Hadamard transform.
    pub fn transpose_apply<T>(&self, values: &[T]) -> Vec<T>
    where
        T: Clone + Add<Output = T> + Sub<Output = T> + Neg<Output = T>,
    {
        assert_eq!(values.len(), self.size(), "vector length must equal J");
        let mut buf = values.to_vec();
        walsh_hadamard(&mut buf);
        self.effects
            .iter()
            .map(|e| {
                let v = buf[e.mask].clone();
                if e.mask.count_ones() % 2 == 0 {
                    v
                } else {
                    -v
                }
            })
            .collect()
    }

    /// `L x` for `x` indexed by effect column, returning a vector over treatments.
    pub fn apply<T>(&self, effects: &[T]) -> Vec<T>
    where
        T: Clone + Add<Output = T> + Sub<Output = T> + Neg<Output = T>,
    {
        assert_eq!(effects.len(), self.size(), "vector length must equal J");
        let mut buf = effects.to_vec();
        for (e, x) in self.effects.iter().zip(effects) {
            buf[e.mask] = if e.mask.count_ones() % 2 == 0 {
                x.clone()
            } else {
                -x.clone()
            };
        }
        walsh_hadamard(&mut buf);
        buf
    }

    /// Integer contrast sums `Lᵀ Y` for one unit's binary potential outcomes.
    pub fn unit_contrast_sums(&self, row: &[u8]) -> Result<Vec<i64>> {
        check_binary_row(row, self.size())?;
        let values: Vec<i64> = row.iter().map(|&y| y as i64).collect();
        Ok(self.transpose_apply(&values))
    }

    /// Unit-level effects `(2τ_{i,0}, τ_{i,1}, …) = 2^{−(K−1)} Lᵀ Y_i`.
    pub fn unit_effects(&self, row: &[u8]) -> Result<Vec<f64>> {
        let scale = 0.5f64.powi(self.design.k() as i32 - 1);
        Ok(self
            .unit_contrast_sums(row)?
            .into_iter()
            .map(|s| s as f64 * scale)
            .collect())
    }
}

fn check_binary_row(row: &[u8], j: usize) -> Result<()> {
    if row.len() != j {
        return Err(Error::input(format!(
            "potential-outcome row has {} entries, expected {j}",
            row.len()
        )));
    }
    if let Some(bad) = row.iter().find(|&&y| y > 1) {
        return Err(Error::input(format!("outcome must be 0 or 1, got {bad}")));
    }
    Ok(())
}

/// In-place unnormalised Walsh–Hadamard transform in natural (Sylvester) order.
fn walsh_hadamard<T>(buf: &mut [T])
where
    T: Clone + Add<Output = T> + Sub<Output = T>,
{
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let a = buf[i].clone();
                let b = buf[i + h].clone();
                buf[i] = a.clone() + b.clone();
                buf[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lawyer() -> FactorialDesign {
        FactorialDesign::new(["R", "G", "I"]).unwrap()
    }

    #[test]
    fn treatment_indices_follow_table_order() {
        let d = lawyer();
        assert_eq!(d.treatment_index(&[0, 0, 0]).unwrap(), 1);
        assert_eq!(d.treatment_index(&[0, 0, 1]).unwrap(), 2);
        assert_eq!(d.treatment_index(&[1, 1, 1]).unwrap(), 8);
        assert!(d.treatment_index(&[0, 1]).is_err());
        assert!(d.treatment_index(&[0, 2, 1]).is_err());
        assert_eq!(d.treatment_levels(5).unwrap(), vec![1, 0, 0]);
        assert!(d.treatment_levels(9).is_err());
    }

    #[test]
    fn design_validation() {
        assert!(FactorialDesign::new(Vec::<String>::new()).is_err());
        assert!(FactorialDesign::new(["a", "a"]).is_err());
        assert!(FactorialDesign::new(["a", " "]).is_err());
        assert!(FactorialDesign::with_factors(17).is_err());
        assert_eq!(FactorialDesign::with_factors(16).unwrap().treatments(), 65536);
    }

    #[test]
    fn three_factor_matrix_matches_printed_layout() {
        let l = ContrastMatrix::new(&lawyer());
        let labels: Vec<_> = l.columns().iter().map(|e| e.label.as_str()).collect();
        assert_eq!(
            labels,
            ["mean", "R", "G", "I", "R×G", "R×I", "G×I", "R×G×I"]
        );
        assert_eq!(l.column(1), vec![-1, -1, -1, -1, 1, 1, 1, 1]);
        let expected: [[i8; 8]; 8] = [
            [1, -1, -1, -1, 1, 1, 1, -1],
            [1, -1, -1, 1, 1, -1, -1, 1],
            [1, -1, 1, -1, -1, 1, -1, 1],
            [1, -1, 1, 1, -1, -1, 1, -1],
            [1, 1, -1, -1, -1, -1, 1, 1],
            [1, 1, -1, 1, -1, 1, -1, -1],
            [1, 1, 1, -1, 1, -1, -1, -1],
            [1, 1, 1, 1, 1, 1, 1, 1],
        ];
        let dense = l.to_dense();
        for (row, want) in dense.iter().zip(expected.iter()) {
            assert_eq!(row.as_slice(), want.as_slice());
        }
    }

    #[test]
    fn single_factor_matrix() {
        let d = FactorialDesign::with_factors(1).unwrap();
        let l = ContrastMatrix::new(&d);
        assert_eq!(l.to_dense(), vec![vec![1, -1], vec![1, 1]]);
    }

    #[test]
    fn two_factor_interaction_is_product() {
        let d = FactorialDesign::with_factors(2).unwrap();
        let l = ContrastMatrix::new(&d);
        let a = l.column(1);
        let b = l.column(2);
        let ab: Vec<i8> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        assert_eq!(l.column(3), ab);
    }

    #[test]
    fn label_lookup() {
        let l = ContrastMatrix::new(&lawyer());
        assert_eq!(l.find("G×I").unwrap().index, 6);
        assert_eq!(l.find("I*G").unwrap().index, 6);
        assert_eq!(l.find("GxI").unwrap().index, 6);
        assert_eq!(l.find("R").unwrap().index, 1);
        assert!(l.find("Z").is_none());
    }

    #[test]
    fn unit_effect_examples() {
        let l = ContrastMatrix::new(&lawyer());
        let e = l.unit_effects(&[0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        assert_eq!(e, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let e = l.unit_effects(&[1; 8]).unwrap();
        assert_eq!(e, vec![2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(l.unit_effects(&[0, 2, 0, 0, 0, 0, 0, 0]).is_err());

        // 2^{-1} Lᵀ (1,0,0,1): mean 1, main effects 0, interaction +1.
        let l2 = ContrastMatrix::new(&FactorialDesign::with_factors(2).unwrap());
        assert_eq!(l2.unit_effects(&[1, 0, 0, 1]).unwrap(), vec![1.0, 0.0, 0.0, 1.0]);
    }

    fn dense_transpose_apply(l: &ContrastMatrix, v: &[i64]) -> Vec<i64> {
        (0..l.size())
            .map(|e| (1..=l.size()).map(|t| l.entry(t, e) as i64 * v[t - 1]).sum())
            .collect()
    }

    proptest! {
        #[test]
        fn orthogonality_and_contrast_columns(k in 1usize..=6) {
            let l = ContrastMatrix::new(&FactorialDesign::with_factors(k).unwrap());
            let j = l.size();
            let dense = l.to_dense();
            for a in 0..j {
                let plus = (0..j).filter(|&t| dense[t][a] == 1).count();
                if a == 0 { prop_assert_eq!(plus, j) } else { prop_assert_eq!(plus, j / 2) }
                for b in 0..j {
                    let dot: i64 = (0..j).map(|t| (dense[t][a] * dense[t][b]) as i64).sum();
                    prop_assert_eq!(dot, if a == b { j as i64 } else { 0 });
                    let row_dot: i64 = (0..j).map(|c| (dense[a][c] * dense[b][c]) as i64).sum();
                    prop_assert_eq!(row_dot, if a == b { j as i64 } else { 0 });
                }
            }
            for e in l.effects() {
                let col = l.column(e.index);
                let product: Vec<i8> = (0..j).map(|t| {
                    e.factors.iter().map(|&f| l.column(f + 1)[t]).product()
                }).collect();
                prop_assert_eq!(col, product);
            }
        }

        #[test]
        fn fast_transform_matches_dense(k in 1usize..=5, seed in any::<u64>()) {
            let l = ContrastMatrix::new(&FactorialDesign::with_factors(k).unwrap());
            let v: Vec<i64> = (0..l.size() as u64)
                .map(|i| ((seed.wrapping_mul(6364136223846793005).wrapping_add(i.wrapping_mul(1442695040888963407))) >> 40) as i64 - 8000)
                .collect();
            prop_assert_eq!(l.transpose_apply(&v), dense_transpose_apply(&l, &v));
        }

        #[test]
        fn unit_effects_round_trip(k in 1usize..=5, bits in any::<u64>()) {
            let l = ContrastMatrix::new(&FactorialDesign::with_factors(k).unwrap());
            let j = l.size();
            let row: Vec<u8> = (0..j).map(|t| ((bits >> (t % 64)) & 1) as u8).collect();
            let sums = l.unit_contrast_sums(&row).unwrap();
            // L (Lᵀ Y) = J·Y
            let back = l.apply(&sums);
            let expect: Vec<i64> = row.iter().map(|&y| y as i64 * j as i64).collect();
            prop_assert_eq!(back, expect);
        }

        #[test]
        fn treatment_index_bijection(k in 1usize..=10, raw in any::<u32>()) {
            let d = FactorialDesign::with_factors(k).unwrap();
            let t = (raw as usize % d.treatments()) + 1;
            let levels = d.treatment_levels(t).unwrap();
            prop_assert_eq!(d.treatment_index(&levels).unwrap(), t);
        }
    }
}
