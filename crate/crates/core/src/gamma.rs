//! The Γ indicator matrix, separability, equivalence classes and S-adjustment.

use crate::bits::{all_items, iter_bits, ItemMask};
use crate::error::{Error, Result};
use crate::profile::Profile;
use crate::qmatrix::{QMatrix, MAX_ITEMS};
use crate::space::LatentClassSpace;
use crate::spec::{ItemModel, ModelSpec};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};

/// J×m binary matrix stored column-wise: bit `j` of `columns[a]` is Γ_{j,α_a}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaMatrix {
    j: usize,
    profiles: Vec<Profile>,
    columns: Vec<u64>,
    zero_index: usize,
    models: Vec<ItemModel>,
    q_rows: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquivalencePartition {
    /// Member indices (into the space order) for each class.
    pub classes: Vec<Vec<usize>>,
    pub representatives: Vec<Profile>,
    /// Class id of every profile index.
    pub class_of: Vec<usize>,
}

impl EquivalencePartition {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Pools `p` into grouped proportions ν, one entry per class.
    pub fn group(&self, p: &[f64]) -> Vec<f64> {
        self.classes.iter().map(|c| c.iter().map(|&a| p[a]).sum()).collect()
    }
}

fn capable(model: ItemModel, q: u32, alpha: u32) -> bool {
    match model {
        ItemModel::TwoParamConj | ItemModel::MultiParam => alpha & q == q,
        ItemModel::TwoParamDisj => alpha & q != 0,
    }
}

/// Builds Γ for the given Q, space and per-item models. Column order follows the space.
pub fn build_gamma(q: &QMatrix, space: &LatentClassSpace, spec: &ModelSpec) -> Result<GammaMatrix> {
    spec.check_len(q.j())?;
    if space.k() != q.k() {
        return Err(Error::Dimension(format!("space has K = {} but Q has K = {}", space.k(), q.k())));
    }
    let columns = space
        .profiles()
        .iter()
        .map(|p| {
            let a = p.bits();
            q.rows()
                .iter()
                .zip(&spec.items)
                .enumerate()
                .fold(0u64, |col, (j, (&r, &m))| if capable(m, r, a) { col | 1 << j } else { col })
        })
        .collect();
    Ok(GammaMatrix {
        j: q.j(),
        profiles: space.profiles().to_vec(),
        columns,
        zero_index: space.zero_index(),
        models: spec.items.clone(),
        q_rows: Some(q.rows().to_vec()),
    })
}

impl GammaMatrix {
    /// A Γ given directly by its rows. Columns are labelled with the first m bit
    /// patterns in canonical order, so the first column is the zero profile.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let j = rows.len();
        if j == 0 || j > MAX_ITEMS {
            return Err(Error::SizeGuard(format!("J = {j} must be in 1..={MAX_ITEMS}")));
        }
        let m = rows[0].len();
        if m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("Γ rows must be non-empty and of equal length".into()));
        }
        let k = (usize::BITS - (m - 1).leading_zeros()).max(1) as usize;
        let mut columns = vec![0u64; m];
        for (jj, r) in rows.iter().enumerate() {
            for (a, &x) in r.iter().enumerate() {
                match x {
                    0 => {}
                    1 => columns[a] |= 1 << jj,
                    _ => return Err(Error::Parse(format!("Γ entry {x} is not binary"))),
                }
            }
        }
        let profiles = (0..m as u32).map(|b| Profile::from_raw(b, k)).collect();
        Ok(GammaMatrix {
            j,
            profiles,
            columns,
            zero_index: 0,
            models: vec![ItemModel::MultiParam; j],
            q_rows: None,
        })
    }

    pub fn with_models(mut self, models: Vec<ItemModel>) -> Result<Self> {
        if models.len() != self.j {
            return Err(Error::Dimension(format!("{} models for J = {}", models.len(), self.j)));
        }
        self.models = models;
        Ok(self)
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn columns(&self) -> &[u64] {
        &self.columns
    }

    pub fn column(&self, a: usize) -> u64 {
        self.columns[a]
    }

    pub fn zero_index(&self) -> usize {
        self.zero_index
    }

    pub fn models(&self) -> &[ItemModel] {
        &self.models
    }

    pub fn q_rows(&self) -> Option<&[u32]> {
        self.q_rows.as_deref()
    }

    pub fn all_items(&self) -> ItemMask {
        all_items(self.j)
    }

    pub fn entry(&self, j: usize, a: usize) -> bool {
        self.columns[a] >> j & 1 == 1
    }

    pub fn row(&self, j: usize) -> Vec<u8> {
        self.columns.iter().map(|c| (c >> j & 1) as u8).collect()
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.j).map(|j| self.row(j)).collect()
    }

    /// Profile indices in C_j.
    pub fn capable_set(&self, j: usize) -> Vec<usize> {
        (0..self.m()).filter(|&a| self.entry(j, a)).collect()
    }

    pub fn is_separable(&self) -> bool {
        is_separable(self)
    }

    /// Γ with the rows in `s` complemented.
    pub fn adjust(&self, s: ItemMask) -> GammaMatrix {
        adjust_gamma(self, s)
    }

    /// Columns restricted to the items in `s`.
    pub fn restricted_columns(&self, s: ItemMask) -> Vec<u64> {
        self.columns.iter().map(|c| c & s).collect()
    }

    /// Distinct columns in order of first appearance, with their member indices.
    pub fn class_view(&self) -> ClassView {
        ClassView::new(&self.columns)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut cols = serde_json::Map::new();
        for (p, c) in self.profiles.iter().zip(&self.columns) {
            let col: Vec<u8> = (0..self.j).map(|j| (c >> j & 1) as u8).collect();
            cols.insert(p.to_string(), serde_json::json!(col));
        }
        serde_json::json!({
            "items": self.j,
            "models": self.models.iter().map(|m| m.code().to_string()).collect::<Vec<_>>(),
            "separable": self.is_separable(),
            "columns": cols,
        })
    }
}

/// Γ at the level of distinct columns.
#[derive(Debug, Clone)]
pub struct ClassView {
    pub cols: Vec<u64>,
    pub members: Vec<Vec<usize>>,
}

impl ClassView {
    pub fn new(columns: &[u64]) -> Self {
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut cols = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (a, &c) in columns.iter().enumerate() {
            let id = *index.entry(c).or_insert_with(|| {
                cols.push(c);
                members.push(Vec::new());
                cols.len() - 1
            });
            members[id].push(a);
        }
        ClassView { cols, members }
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    /// Largest item set that every class capable of all items in `t` is capable of.
    /// When no class is capable of `t`, this is `universe`.
    pub fn closure(&self, t: ItemMask, universe: ItemMask) -> ItemMask {
        let mut acc = universe;
        for &c in &self.cols {
            if c & t == t {
                acc &= c;
            }
        }
        acc
    }

    /// Class indices in C_T.
    pub fn capable_of_all(&self, t: ItemMask) -> Vec<usize> {
        (0..self.cols.len()).filter(|&i| self.cols[i] & t == t).collect()
    }
}

pub fn is_separable(g: &GammaMatrix) -> bool {
    let distinct: HashSet<u64> = g.columns.iter().copied().collect();
    distinct.len() == g.columns.len()
}

pub fn adjust_gamma(g: &GammaMatrix, s: ItemMask) -> GammaMatrix {
    let mut out = g.clone();
    for c in &mut out.columns {
        *c ^= s & g.all_items();
    }
    out
}

/// Groups profiles with identical Γ columns. Classes are ordered by their first
/// member in the space order.
///
/// When every item uses the conjunctive capable set and Γ was built from a
/// Q-matrix, the representative of a class is the join of the q-vectors of the
/// items it is capable of (falling back to the smallest member if that join is
/// not in the class). Otherwise it is the member with the smallest bit pattern.
pub fn equivalence_partition(g: &GammaMatrix) -> EquivalencePartition {
    let view = g.class_view();
    let conj = g.models.iter().all(|m| *m != ItemModel::TwoParamDisj);
    let mut class_of = vec![0usize; g.m()];
    let mut representatives = Vec::with_capacity(view.len());
    for (id, members) in view.members.iter().enumerate() {
        for &a in members {
            class_of[a] = id;
        }
        let smallest = members.iter().map(|&a| g.profiles[a]).min_by_key(|p| p.bits()).unwrap();
        let rep = match (&g.q_rows, conj) {
            (Some(rows), true) => {
                let k = smallest.len();
                let joined = iter_bits(view.cols[id]).fold(0u32, |acc, j| acc | rows[j]);
                let cand = Profile::from_raw(joined, k);
                if members.iter().any(|&a| g.profiles[a] == cand) {
                    cand
                } else {
                    smallest
                }
            }
            _ => smallest,
        };
        representatives.push(rep);
    }
    EquivalencePartition { classes: view.members, representatives, class_of }
}

/// Union-closure of the q-rows together with the zero vector, sorted by bit pattern.
pub fn conjunctive_representatives(q: &QMatrix) -> Vec<Profile> {
    union_closure(q.rows(), q.k()).into_iter().map(|b| Profile::from_raw(b, q.k())).collect()
}

/// Complements of the conjunctive representatives, sorted by bit pattern.
pub fn disjunctive_representatives(q: &QMatrix) -> Vec<Profile> {
    let mut out: Vec<Profile> = conjunctive_representatives(q).iter().map(|p| p.complement()).collect();
    out.sort_by_key(|p| p.bits());
    out
}

/// All joins of subsets of `rows` (including the empty join), ascending.
pub(crate) fn union_closure(rows: &[u32], _k: usize) -> Vec<u32> {
    let mut seen: HashSet<u32> = HashSet::new();
    seen.insert(0);
    let mut frontier = vec![0u32];
    while let Some(v) = frontier.pop() {
        for &r in rows {
            let w = v | r;
            if seen.insert(w) {
                frontier.push(w);
            }
        }
    }
    let mut out: Vec<u32> = seen.into_iter().collect();
    out.sort_unstable();
    out
}

/// Partition keyed by representative bitstring, for reports.
pub fn partition_json(g: &GammaMatrix, part: &EquivalencePartition) -> serde_json::Value {
    let mut classes = BTreeMap::new();
    for (rep, members) in part.representatives.iter().zip(&part.classes) {
        let names: Vec<String> = members.iter().map(|&a| g.profiles[a].to_string()).collect();
        classes.insert(rep.to_string(), names);
    }
    serde_json::json!({
        "count": part.len(),
        "separable": part.len() == g.m(),
        "classes": classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(rows: &[&str]) -> QMatrix {
        let masks = rows.iter().map(|r| Profile::parse(r).unwrap().bits()).collect();
        QMatrix::from_masks(rows[0].len(), masks, true).unwrap()
    }

    #[test]
    fn example_four_pair() {
        let qm = q(&["10", "11"]);
        let sat = LatentClassSpace::saturated(2).unwrap();
        let g1 = build_gamma(&qm, &sat, &ModelSpec::conj(2)).unwrap();
        assert_eq!(g1.rows(), vec![vec![0, 1, 0, 1], vec![0, 0, 0, 1]]);
        assert!(!g1.is_separable());
        let part = equivalence_partition(&g1);
        assert_eq!(part.len(), 3);
        let reps: Vec<String> = part.representatives.iter().map(|p| p.to_string()).collect();
        assert_eq!(reps, vec!["00", "10", "11"]);
        assert_eq!(part.classes[0], vec![0, 2]);

        let sub = LatentClassSpace::from_profiles(
            2,
            vec![Profile::parse("00").unwrap(), Profile::parse("10").unwrap(), Profile::parse("11").unwrap()],
        )
        .unwrap();
        let g2 = build_gamma(&qm, &sub, &ModelSpec::conj(2)).unwrap();
        assert_eq!(g2.rows(), vec![vec![0, 1, 1], vec![0, 0, 1]]);
        assert!(g2.is_separable());
    }

    #[test]
    fn disjunctive_row() {
        let g = build_gamma(&q(&["11"]), &LatentClassSpace::saturated(2).unwrap(), &ModelSpec::disj(1)).unwrap();
        assert_eq!(g.row(0), vec![0, 1, 1, 1]);
    }

    #[test]
    fn single_column_is_separable() {
        let g = GammaMatrix::from_rows(&[vec![0], vec![0]]).unwrap();
        assert!(g.is_separable());
    }

    #[test]
    fn representatives_match_closure() {
        let qm = q(&["10", "11"]);
        let reps: Vec<String> = conjunctive_representatives(&qm).iter().map(|p| p.to_string()).collect();
        assert_eq!(reps, vec!["00", "10", "11"]);
        let id = q(&["100", "010", "001"]);
        assert_eq!(conjunctive_representatives(&id).len(), 8);
        let d: Vec<String> = disjunctive_representatives(&qm).iter().map(|p| p.to_string()).collect();
        assert_eq!(d, vec!["00", "01", "11"]);
    }

    #[test]
    fn adjust_is_involution() {
        let g = build_gamma(&q(&["10", "11", "01"]), &LatentClassSpace::saturated(2).unwrap(), &ModelSpec::conj(3)).unwrap();
        assert_eq!(g.adjust(0), g);
        assert_eq!(g.adjust(0b101).adjust(0b101), g);
        let full = g.adjust(g.all_items());
        for a in 0..g.m() {
            assert_eq!(full.column(a), !g.column(a) & 0b111);
        }
    }
}
