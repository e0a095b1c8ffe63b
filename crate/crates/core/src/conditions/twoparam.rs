//! Conditions for two-parameter models: item classification, S-differentiability,
//! repeated measurement, sequential differentiation and the two-item and
//! necessity cases.

use super::lattice::{differentiate, repeated_cover, supersets_of, CapableLattice, Differentiation, GammaLattice, UnionLattice};
use super::report::{ConditionId, ConditionReport, Counter, ItemSetPair, SearchBudget, Status, Witness};
use crate::bits::{all_items, iter_bits, to_numbers, ItemMask};
use crate::error::{Error, Result};
use crate::gamma::GammaMatrix;
use crate::profile::Profile;
use crate::qmatrix::{drop_bit, QMatrix};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ItemClassification {
    pub basis: ItemMask,
    pub non_basis: ItemMask,
}

#[derive(Serialize)]
struct ClassificationJson {
    basis: Vec<usize>,
    non_basis: Vec<usize>,
}

impl ItemClassification {
    pub fn from_non_basis(j: usize, non_basis: ItemMask) -> Self {
        let all = all_items(j);
        ItemClassification { basis: all & !non_basis, non_basis: non_basis & all }
    }

    /// Basis items numbered from 1.
    pub fn basis_items(&self) -> Vec<usize> {
        to_numbers(self.basis)
    }

    pub fn non_basis_items(&self) -> Vec<usize> {
        to_numbers(self.non_basis)
    }

    pub fn report(&self) -> ConditionReport {
        ConditionReport::satisfied(
            ConditionId::Classification,
            Witness::Classification { basis: self.basis_items(), non_basis: self.non_basis_items() },
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ClassificationJson { basis: self.basis_items(), non_basis: self.non_basis_items() })
            .unwrap_or_default()
    }
}

fn classify_with<L: CapableLattice>(lat: &L, j: usize) -> ItemClassification {
    let all = all_items(j);
    let non = (0..j).filter(|&i| supersets_of(lat, i, all) != 0).fold(0, |m, i| m | 1 << i);
    ItemClassification::from_non_basis(j, non)
}

/// Item j is non-basis iff some other item's capable set contains C_j.
pub fn classify_items(g: &GammaMatrix) -> ItemClassification {
    classify_with(&GammaLattice::new(g), g.j())
}

/// Classification for conjunctive items over the saturated space: j is non-basis
/// iff q_h ⪯ q_j for some h ≠ j.
pub fn classify_items_q(q: &QMatrix) -> ItemClassification {
    classify_with(&UnionLattice::new(q.rows()), q.j())
}

fn check_item(j: usize, item: usize, s: ItemMask) -> Result<()> {
    if item >= j {
        return Err(Error::Argument(format!("item index {item} out of range for J = {j}")));
    }
    if s >> item & 1 == 1 {
        return Err(Error::Argument(format!("item {} belongs to its separator set", item + 1)));
    }
    if s & !all_items(j) != 0 {
        return Err(Error::Argument("separator set contains unknown items".into()));
    }
    Ok(())
}

fn differentiation_report<L: CapableLattice>(lat: &L, item: usize, s: ItemMask, budget: &SearchBudget) -> ConditionReport {
    let id = ConditionId::SDifferentiable;
    match differentiate(lat, item, s, budget.max_lattice) {
        Differentiation::Found { plus, minus } => {
            ConditionReport::satisfied(id, Witness::ItemPairs { pairs: vec![ItemSetPair::new(item, plus, minus)] })
        }
        Differentiation::NotFound => ConditionReport::failure(id, Some(item), None, "no pair of subsets separates an incapable class"),
        Differentiation::Exhausted => ConditionReport::exhausted(id),
    }
}

/// Tests whether `item` (0-based) is `s`-differentiable. The witness pair is (S⁺, S⁻).
pub fn is_s_differentiable(g: &GammaMatrix, item: usize, s: ItemMask, budget: &SearchBudget) -> Result<ConditionReport> {
    check_item(g.j(), item, s)?;
    Ok(differentiation_report(&GammaLattice::new(g), item, s, budget))
}

/// Q-form of [`is_s_differentiable`] for conjunctive items over the saturated space.
pub fn is_s_differentiable_q(q: &QMatrix, item: usize, s: ItemMask, budget: &SearchBudget) -> Result<ConditionReport> {
    check_item(q.j(), item, s)?;
    Ok(differentiation_report(&UnionLattice::new(q.rows()), item, s, budget))
}

fn repeated_with<L: CapableLattice>(
    lat: &L,
    id: ConditionId,
    j: usize,
    relevant: impl Fn(usize) -> ItemMask,
    budget: &SearchBudget,
) -> ConditionReport {
    let counter = Counter::new(budget.max_subsets);
    let mut pairs = Vec::with_capacity(j);
    for item in 0..j {
        match repeated_cover(lat, item, relevant(item), &counter) {
            Some((s1, s2)) => pairs.push(ItemSetPair::new(item, s1, s2)),
            None if counter.exhausted() => return ConditionReport::exhausted(id),
            None => return ConditionReport::failure(id, Some(item), None, "no two disjoint covering item sets"),
        }
    }
    ConditionReport::satisfied(id, Witness::ItemPairs { pairs })
}

/// Repeated measurement: every item has two disjoint item sets whose common
/// capable sets lie inside C_j.
pub fn check_c1(g: &GammaMatrix, budget: &SearchBudget) -> ConditionReport {
    let all = g.all_items();
    repeated_with(&GammaLattice::new(g), ConditionId::C1, g.j(), |j| all & !(1 << j), budget)
}

/// Q-form of repeated measurement: q_j ⪯ ∨ q over each of two disjoint item sets.
pub fn check_c1_star(q: &QMatrix, budget: &SearchBudget) -> ConditionReport {
    let id = ConditionId::C1Star;
    let rows = q.rows();
    for (j, &r) in rows.iter().enumerate() {
        for k in 0..q.k() {
            if r >> k & 1 == 1 {
                let others = rows.iter().enumerate().filter(|&(h, &x)| h != j && x >> k & 1 == 1).count();
                if others < 2 {
                    return ConditionReport::failure(
                        id,
                        Some(j),
                        Some(k),
                        format!("attribute {} is required by {} other item(s)", k + 1, others),
                    );
                }
            }
        }
    }
    let relevant = |j: usize| {
        rows.iter().enumerate().filter(|&(h, &x)| h != j && x & rows[j] != 0).fold(0u64, |m, (h, _)| m | 1 << h)
    };
    repeated_with(&UnionLattice::new(rows), id, q.j(), relevant, budget)
}

fn expand_with<L: CapableLattice>(
    lat: &L,
    id: ConditionId,
    j: usize,
    start: ItemMask,
    budget: &SearchBudget,
) -> ConditionReport {
    let all = all_items(j);
    let mut sep = start & all;
    let mut steps = Vec::new();
    let mut pairs = Vec::new();
    let mut exhausted = false;
    while sep != all {
        let mut added = 0u64;
        for item in iter_bits(all & !sep) {
            match differentiate(lat, item, sep, budget.max_lattice) {
                Differentiation::Found { plus, minus } => {
                    added |= 1 << item;
                    pairs.push(ItemSetPair::new(item, plus, minus));
                }
                Differentiation::NotFound => {}
                Differentiation::Exhausted => exhausted = true,
            }
        }
        if added == 0 {
            break;
        }
        steps.push(to_numbers(added));
        sep |= added;
    }
    let witness = Witness::Expansion { start: to_numbers(start & all), steps, pairs };
    if sep == all {
        ConditionReport::satisfied(id, witness)
    } else if exhausted {
        let mut r = ConditionReport::undetermined(id, witness);
        r.budget_exhausted = true;
        r.with_note(format!("expansion stopped at {:?}", to_numbers(sep)))
    } else {
        ConditionReport::violated(id, witness).with_note(format!("expansion stopped at {:?}", to_numbers(sep)))
    }
}

/// Sequential differentiation starting from the non-basis items of `cls`.
pub fn check_c2(g: &GammaMatrix, cls: &ItemClassification, budget: &SearchBudget) -> ConditionReport {
    expand_with(&GammaLattice::new(g), ConditionId::C2, g.j(), cls.non_basis, budget)
}

/// Q-form of sequential differentiation.
pub fn check_c2_star(q: &QMatrix, cls: &ItemClassification, budget: &SearchBudget) -> ConditionReport {
    expand_with(&UnionLattice::new(q.rows()), ConditionId::C2Star, q.j(), cls.non_basis, budget)
}

fn necessity_with<L: CapableLattice>(lat: &L, j: usize, cls: &ItemClassification, budget: &SearchBudget) -> ConditionReport {
    let id = ConditionId::Thm3;
    let all = all_items(j);
    let mut pairs = Vec::new();
    let mut exhausted = false;
    for item in iter_bits(cls.basis) {
        match differentiate(lat, item, all & !(1 << item), budget.max_lattice) {
            Differentiation::Found { plus, minus } => pairs.push(ItemSetPair::new(item, plus, minus)),
            Differentiation::NotFound => {
                return ConditionReport::failure(id, Some(item), None, "basis item is not differentiable by all other items")
                    .definitive();
            }
            Differentiation::Exhausted => exhausted = true,
        }
    }
    if exhausted {
        ConditionReport::exhausted(id)
    } else {
        ConditionReport::satisfied(id, Witness::ItemPairs { pairs })
    }
}

/// Every basis item must be differentiable by all other items.
pub fn check_thm3_necessity(g: &GammaMatrix, cls: &ItemClassification, budget: &SearchBudget) -> ConditionReport {
    necessity_with(&GammaLattice::new(g), g.j(), cls, budget)
}

pub fn check_thm3_necessity_q(q: &QMatrix, cls: &ItemClassification, budget: &SearchBudget) -> ConditionReport {
    necessity_with(&UnionLattice::new(q.rows()), q.j(), cls, budget)
}

/// Block form of a Q-matrix around an attribute required by exactly two items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoItemBlock {
    pub attribute: usize,
    pub items: (usize, usize),
    pub v1: u32,
    pub v2: u32,
    /// Remaining items, in order, with the attribute removed.
    pub rest_items: Vec<usize>,
    pub rest: Vec<u32>,
    pub k: usize,
}

impl TwoItemBlock {
    pub fn new(q: &QMatrix, attr: usize) -> Result<Self> {
        if attr >= q.k() {
            return Err(Error::Argument(format!("attribute {} out of range", attr + 1)));
        }
        let holders = q.items_with(attr);
        if holders.len() != 2 {
            return Err(Error::Precondition(format!(
                "attribute {} is required by {} items, expected 2",
                attr + 1,
                holders.len()
            )));
        }
        let rest_items: Vec<usize> = (0..q.j()).filter(|j| !holders.contains(j)).collect();
        Ok(TwoItemBlock {
            attribute: attr,
            items: (holders[0], holders[1]),
            v1: drop_bit(q.rows()[holders[0]], attr),
            v2: drop_bit(q.rows()[holders[1]], attr),
            rest: q.minor(&rest_items, attr),
            rest_items,
            k: q.k() - 1,
        })
    }

    pub fn v1_vec(&self) -> Vec<u8> {
        Profile::from_raw(self.v1, self.k).to_vec()
    }

    pub fn v2_vec(&self) -> Vec<u8> {
        Profile::from_raw(self.v2, self.k).to_vec()
    }

    pub fn rest_matrix(&self) -> Option<QMatrix> {
        if self.rest.is_empty() || self.k == 0 {
            return None;
        }
        QMatrix::from_masks(self.k, self.rest.clone(), true).ok()
    }

    fn witness(&self, clauses: Vec<String>) -> Witness {
        Witness::TwoItemBlock {
            attribute: self.attribute + 1,
            items: vec![self.items.0 + 1, self.items.1 + 1],
            v1: self.v1_vec(),
            v2: self.v2_vec(),
            clauses,
        }
    }
}

/// Two-item case for an attribute required by one or two items.
///
/// One item, or two items with an empty remainder vector, rules out identifiability.
/// Otherwise the report is satisfied when the remaining matrix passes both Q-form
/// conditions and, for each of the two remainder vectors, some remaining row fails
/// to dominate it (clause "a") or the second clause holds (clause "b").
pub fn check_thm2_fallback(q: &QMatrix, attr: usize, budget: &SearchBudget) -> Result<ConditionReport> {
    let id = ConditionId::Thm2Case;
    if attr >= q.k() {
        return Err(Error::Argument(format!("attribute {} out of range", attr + 1)));
    }
    let holders = q.items_with(attr);
    if holders.len() == 1 {
        return Ok(ConditionReport::failure(id, Some(holders[0]), Some(attr), "attribute required by only one item")
            .definitive()
            .with_note("case (a)"));
    }
    let block = TwoItemBlock::new(q, attr)?;
    if block.v1 == 0 || block.v2 == 0 {
        return Ok(ConditionReport::violated(id, block.witness(vec![]))
            .definitive()
            .with_note("case (b.1): a remainder vector is zero"));
    }
    let clause = |v: u32| -> Option<String> {
        if block.rest.iter().any(|&r| v & !r != 0) {
            Some("a".into())
        } else if iter_bits(v as u64).any(|k| block.rest.iter().any(|&r| r >> k & 1 == 0)) {
            Some("b".into())
        } else {
            None
        }
    };
    let clauses: Vec<String> = [block.v1, block.v2].iter().map(|&v| clause(v).unwrap_or_else(|| "none".into())).collect();
    let Some(qp) = block.rest_matrix() else {
        return Ok(ConditionReport::undetermined(id, block.witness(clauses)).with_note("no remaining items"));
    };
    let c1 = check_c1_star(&qp, budget);
    let c2 = check_c2_star(&qp, &classify_items_q(&qp), budget);
    let sub = format!("remaining matrix: C1* {:?}, C2* {:?}", c1.status, c2.status).to_lowercase();
    let ok = c1.is_satisfied() && c2.is_satisfied() && clauses.iter().all(|c| c != "none");
    let mut report = if ok {
        ConditionReport::satisfied(id, block.witness(clauses))
    } else {
        ConditionReport::undetermined(id, block.witness(clauses))
    };
    report.budget_exhausted = c1.budget_exhausted || c2.budget_exhausted;
    Ok(report.with_note(format!("case (b.2); {sub}")))
}

/// Explicit conditions for a Q-matrix containing the identity: every attribute
/// required by at least three items, and after removing one unit row per attribute
/// the remaining columns are pairwise distinct.
pub fn check_complete_q_fastpath(q: &QMatrix) -> Result<ConditionReport> {
    let id = ConditionId::CompleteQ;
    let k = q.k();
    let mut unit_rows = Vec::with_capacity(k);
    for a in 0..k {
        match q.rows().iter().position(|&r| r == 1 << a) {
            Some(j) => unit_rows.push(j),
            None => return Err(Error::Precondition(format!("Q lacks a unit row for attribute {}", a + 1))),
        }
    }
    let counts = q.column_counts();
    if let Some(a) = counts.iter().position(|&c| c < 3) {
        return Ok(ConditionReport::failure(id, None, Some(a), format!("attribute {} is required by {} items", a + 1, counts[a]))
            .definitive());
    }
    let rest: Vec<usize> = (0..q.j()).filter(|j| !unit_rows.contains(j)).collect();
    let columns: Vec<u64> = (0..k)
        .map(|a| rest.iter().enumerate().filter(|(_, &j)| q.entry(j, a)).fold(0u64, |m, (i, _)| m | 1 << i))
        .collect();
    for a in 0..k {
        for b in a + 1..k {
            if columns[a] == columns[b] {
                return Ok(ConditionReport::failure(
                    id,
                    None,
                    Some(a),
                    format!("columns {} and {} of the remaining rows coincide", a + 1, b + 1),
                )
                .definitive());
            }
        }
    }
    Ok(ConditionReport::satisfied(id, Witness::Identity { rows: unit_rows.iter().map(|j| j + 1).collect() }))
}

pub(crate) fn status_of(reports: &[ConditionReport]) -> Status {
    if reports.iter().all(|r| r.is_satisfied()) {
        Status::Satisfied
    } else if reports.iter().any(|r| r.is_violated()) {
        Status::Violated
    } else {
        Status::Undetermined
    }
}
