//! Item parameters, class proportions and constraint validation.

use crate::error::{Error, Result};
use crate::gamma::{EquivalencePartition, GammaMatrix};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Positive-response probabilities θ_{j,α}, one row per item, columns in space order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemParams {
    rows: Vec<Vec<f64>>,
}

impl ItemParams {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.is_empty() || m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("item parameters must form a non-empty J×m matrix".into()));
        }
        Ok(ItemParams { rows })
    }

    /// Two-level rows: θ⁺_j on C_j and θ⁻_j elsewhere.
    pub fn two_param(g: &GammaMatrix, plus: &[f64], minus: &[f64]) -> Result<Self> {
        if plus.len() != g.j() || minus.len() != g.j() {
            return Err(Error::Dimension(format!("expected {} item parameters", g.j())));
        }
        let rows = (0..g.j())
            .map(|j| (0..g.m()).map(|a| if g.entry(j, a) { plus[j] } else { minus[j] }).collect())
            .collect();
        Ok(ItemParams { rows })
    }

    pub fn j(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, j: usize, a: usize) -> f64 {
        self.rows[j][a]
    }

    pub fn set(&mut self, j: usize, a: usize, value: f64) {
        self.rows[j][a] = value;
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// θ⁺_j: the common value over C_j, if C_j is non-empty.
    pub fn theta_plus(&self, g: &GammaMatrix, j: usize) -> Option<f64> {
        (0..g.m()).find(|&a| g.entry(j, a)).map(|a| self.rows[j][a])
    }

    /// θ⁻_j: the value at the zero profile.
    pub fn theta_minus(&self, g: &GammaMatrix, j: usize) -> f64 {
        self.rows[j][g.zero_index()]
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &ItemParams) -> f64 {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Class proportions p over the latent class space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Proportions {
    p: Vec<f64>,
}

impl Proportions {
    /// Requires positive entries summing to one within 1e-9.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Argument("proportions must be non-empty".into()));
        }
        if let Some(a) = p.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Argument(format!("proportion {} is not positive", a + 1)));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("proportions sum to {total}, not 1")));
        }
        Ok(Proportions { p })
    }

    pub fn uniform(m: usize) -> Self {
        Proportions { p: vec![1.0 / m as f64; m] }
    }

    /// Normalizes positive weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let total: f64 = w.iter().sum();
        Self::new(w.iter().map(|x| x / total).collect())
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// Grouped proportions ν, one per equivalence class.
    pub fn nu(&self, part: &EquivalencePartition) -> Vec<f64> {
        part.group(&self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// θ outside (0, 1).
    Range,
    /// Values over C_j differ.
    CapableConstant,
    /// A class outside C_j reaches the value over C_j.
    CapableMaximal,
    /// A class outside C_j falls below the zero class.
    Floor,
    /// A two-parameter item has unequal values outside C_j.
    TwoLevel,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// A violated constraint at (item, profile), item numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub item: usize,
    pub profile: String,
    pub rule: Rule,
}

/// Checks the Γ constraints on θ. At most one violation is reported per item and rule.
pub fn validate_params(theta: &ItemParams, g: &GammaMatrix) -> Vec<Violation> {
    let mut out = Vec::new();
    if theta.j() != g.j() || theta.m() != g.m() {
        return out;
    }
    let zero = g.zero_index();
    let tol = 1e-12;
    for j in 0..g.j() {
        let row = theta.row(j);
        let mut push = |a: usize, rule: Rule| {
            if !out.iter().any(|v: &Violation| v.item == j + 1 && v.rule == rule) {
                out.push(Violation { item: j + 1, profile: g.profiles()[a].to_string(), rule });
            }
        };
        for (a, &x) in row.iter().enumerate() {
            if !(x > 0.0 && x < 1.0) {
                push(a, Rule::Range);
            }
        }
        let capable = g.capable_set(j);
        if let Some(&first) = capable.first() {
            let top = row[first];
            if let Some(&a) = capable.iter().find(|&&a| (row[a] - top).abs() > tol) {
                push(a, Rule::CapableConstant);
            }
            if let Some(a) = (0..g.m()).find(|&a| !g.entry(j, a) && row[a] >= top - tol) {
                push(a, Rule::CapableMaximal);
            }
        }
        if let Some(a) = (0..g.m()).find(|&a| !g.entry(j, a) && row[a] < row[zero] - tol) {
            push(a, Rule::Floor);
        }
        if g.models()[j].is_two_param() {
            if let Some(a) = (0..g.m()).find(|&a| !g.entry(j, a) && (row[a] - row[zero]).abs() > tol) {
                push(a, Rule::TwoLevel);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{build_gamma, LatentClassSpace, ModelSpec, QMatrix};

    fn example4() -> GammaMatrix {
        let q = QMatrix::new(vec![vec![1, 0], vec![1, 1]]).unwrap();
        build_gamma(&q, &LatentClassSpace::saturated(2).unwrap(), &ModelSpec::conj(2)).unwrap()
    }

    #[test]
    fn two_level_rows_follow_gamma() {
        let g = example4();
        let t = ItemParams::two_param(&g, &[0.8, 0.9], &[0.2, 0.1]).unwrap();
        assert_eq!(t.row(0), &[0.2, 0.8, 0.2, 0.8]);
        assert_eq!(t.row(1), &[0.1, 0.1, 0.1, 0.9]);
        assert_eq!(t.theta_plus(&g, 1), Some(0.9));
        assert!(validate_params(&t, &g).is_empty());
    }

    #[test]
    fn one_violation_per_rule() {
        let g = example4();
        let t = ItemParams::two_param(&g, &[0.2, 0.9], &[0.2, 0.1]).unwrap();
        let v = validate_params(&t, &g);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::CapableMaximal);
        let mut t = ItemParams::two_param(&g, &[0.8, 0.9], &[0.2, 0.1]).unwrap();
        t.set(1, 1, 0.05);
        let rules: Vec<Rule> = validate_params(&t, &g).iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec![Rule::Floor, Rule::TwoLevel]);
    }

    #[test]
    fn proportions_must_be_positive() {
        assert!(Proportions::new(vec![1.0, 0.0]).is_err());
        assert!(Proportions::new(vec![0.5, 0.6]).is_err());
        assert_eq!(Proportions::uniform(4).as_slice(), &[0.25; 4]);
    }
}
