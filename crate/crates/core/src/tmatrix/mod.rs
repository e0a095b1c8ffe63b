//! The marginal probability matrix T(Θ), numerical rank, distribution gaps,
//! counterexample constructions and a brute-force identifiability oracle.

mod construct;
mod oracle;

pub use construct::{changed_items, construct_counterexample, verify_counterexample, Construction, Counterexample, CounterexampleOptions};
pub use oracle::{brute_force_oracle, ORACLE_MAX_CLASSES, ORACLE_MAX_ITEMS, OracleOptions, OracleOutcome, OracleResult};

use crate::error::{Error, Result};
use crate::models::{ItemParams, Proportions};
use nalgebra::DMatrix;

/// Largest J for which T is materialized.
pub const MAX_T_ITEMS: usize = 20;

/// Default relative singular-value threshold.
pub const RANK_TOL: f64 = 1e-8;

/// 2^J × m matrix with T_{r,α} = ∏_{j: r_j = 1} θ_{j,α}. Row r is the response
/// pattern with bit j set when r_j = 1, in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct TMatrix {
    j: usize,
    values: DMatrix<f64>,
}

impl TMatrix {
    pub fn j(&self) -> usize {
        self.j
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, r: usize, a: usize) -> f64 {
        self.values[(r, a)]
    }

    /// T p: the probabilities P(R ⪰ r) under the mixture.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        (0..self.values.nrows()).map(|r| (0..self.m()).map(|a| self.values[(r, a)] * p[a]).sum()).collect()
    }
}

fn guard(j: usize) -> Result<()> {
    if j > MAX_T_ITEMS {
        return Err(Error::SizeGuard(format!("T has 2^{j} rows; at most J = {MAX_T_ITEMS} is supported")));
    }
    Ok(())
}

/// Products over subsets of one column, by extending each pattern with its lowest bit.
fn column_products(col: impl Fn(usize) -> f64, j: usize) -> Vec<f64> {
    let mut out = vec![1.0; 1 << j];
    for r in 1..out.len() {
        let low = r.trailing_zeros() as usize;
        out[r] = out[r & (r - 1)] * col(low);
    }
    out
}

fn build_from(theta: &ItemParams, shift: &[f64]) -> TMatrix {
    let (j, m) = (theta.j(), theta.m());
    let mut values = DMatrix::zeros(1 << j, m);
    for a in 0..m {
        let col = column_products(|i| theta.get(i, a) - shift[i], j);
        values.column_mut(a).copy_from_slice(&col);
    }
    TMatrix { j, values }
}

pub fn build_tmatrix(theta: &ItemParams) -> Result<TMatrix> {
    guard(theta.j())?;
    Ok(build_from(theta, &vec![0.0; theta.j()]))
}

/// T built from θ_{j,α} − shift_j. Entries may be negative.
pub fn shift_tmatrix(theta: &ItemParams, shift: &[f64]) -> Result<TMatrix> {
    guard(theta.j())?;
    if shift.len() != theta.j() {
        return Err(Error::Dimension(format!("shift has {} entries for J = {}", shift.len(), theta.j())));
    }
    Ok(build_from(theta, shift))
}

/// Number of singular values above `tol` times the largest.
pub fn rank(t: &TMatrix, tol: f64) -> usize {
    let sv = t.values.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// T(Θ) p without materializing T.
pub fn marginals(theta: &ItemParams, p: &[f64]) -> Result<Vec<f64>> {
    guard(theta.j())?;
    if p.len() != theta.m() {
        return Err(Error::Dimension(format!("{} proportions for m = {}", p.len(), theta.m())));
    }
    let mut out = vec![0.0; 1 << theta.j()];
    for (a, &w) in p.iter().enumerate() {
        let col = column_products(|i| theta.get(i, a), theta.j());
        for (o, c) in out.iter_mut().zip(col) {
            *o += w * c;
        }
    }
    Ok(out)
}

/// L∞ distance between T(Θ)p and T(Θ̄)p̄ over all 2^J rows.
pub fn distribution_gap(theta: &ItemParams, p: &Proportions, theta_bar: &ItemParams, p_bar: &Proportions) -> Result<f64> {
    raw_gap(theta, p.as_slice(), theta_bar, p_bar.as_slice())
}

pub(crate) fn raw_gap(theta: &ItemParams, p: &[f64], theta_bar: &ItemParams, p_bar: &[f64]) -> Result<f64> {
    if theta.j() != theta_bar.j() {
        return Err(Error::Dimension("parameter sets have different J".into()));
    }
    let a = marginals(theta, p)?;
    let b = marginals(theta_bar, p_bar)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// L∞ distance over all item parameters and proportions.
pub fn param_gap(theta: &ItemParams, p: &Proportions, theta_bar: &ItemParams, p_bar: &Proportions) -> f64 {
    raw_param_gap(theta, p.as_slice(), theta_bar, p_bar.as_slice())
}

pub(crate) fn raw_param_gap(theta: &ItemParams, p: &[f64], theta_bar: &ItemParams, p_bar: &[f64]) -> f64 {
    let dp = p.iter().zip(p_bar).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    theta.max_abs_diff(theta_bar).max(dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_item() {
        let t = build_tmatrix(&ItemParams::new(vec![vec![0.3, 0.9]]).unwrap()).unwrap();
        assert_eq!(t.values().as_slice(), &[1.0, 0.3, 1.0, 0.9]);
    }

    #[test]
    fn all_ones() {
        let t = build_tmatrix(&ItemParams::new(vec![vec![1.0; 3]; 4]).unwrap()).unwrap();
        assert!(t.values().iter().all(|&x| x == 1.0));
        assert_eq!(rank(&t, RANK_TOL), 1);
    }

    #[test]
    fn zero_shift_is_identity() {
        let theta = ItemParams::new(vec![vec![0.2, 0.7, 0.9], vec![0.1, 0.1, 0.8]]).unwrap();
        assert_eq!(shift_tmatrix(&theta, &[0.0, 0.0]).unwrap(), build_tmatrix(&theta).unwrap());
        assert!(shift_tmatrix(&theta, &[0.0]).is_err());
    }

    #[test]
    fn marginals_match_matrix() {
        let theta = ItemParams::new(vec![vec![0.2, 0.7, 0.9], vec![0.1, 0.1, 0.8]]).unwrap();
        let p = [0.5, 0.3, 0.2];
        let t = build_tmatrix(&theta).unwrap();
        let direct = marginals(&theta, &p).unwrap();
        for (a, b) in t.apply(&p).iter().zip(&direct) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(direct[0], 1.0);
    }

    #[test]
    fn size_guard() {
        let theta = ItemParams::new(vec![vec![0.5]; 21]).unwrap();
        assert!(matches!(build_tmatrix(&theta), Err(Error::SizeGuard(_))));
    }
}
