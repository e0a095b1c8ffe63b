//! Generic identifiability conditions on the Q-matrix and the mixed-item conditions.

use super::lattice::{for_each_subset, Visit};
use super::report::{ConditionId, ConditionReport, Counter, SearchBudget, Shrink, Witness};
use super::twoparam::{check_c1, check_c2, classify_items, TwoItemBlock};
use crate::bits::{all_items, iter_bits, to_numbers, ItemMask};
use crate::error::{Error, Result};
use crate::gamma::build_gamma;
use crate::profile::full_mask;
use crate::qmatrix::QMatrix;
use crate::space::LatentClassSpace;
use crate::spec::{ItemModel, ModelSpec};
use std::collections::HashSet;

/// Assigns two distinct items from `pool` to every attribute, each item used once.
/// Returns the items for the first and second copy, indexed by attribute.
pub(crate) fn double_matching(rows: &[u32], k: usize, pool: ItemMask) -> Option<(Vec<usize>, Vec<usize>)> {
    let slots = 2 * k;
    let adj: Vec<Vec<usize>> =
        (0..slots).map(|s| iter_bits(pool).filter(|&j| rows[j] >> (s / 2) & 1 == 1).collect()).collect();
    let mut owner: Vec<Option<usize>> = vec![None; rows.len()];
    fn augment(s: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for &j in &adj[s] {
            if !seen[j] {
                seen[j] = true;
                if owner[j].is_none_or(|o| augment(o, adj, owner, seen)) {
                    owner[j] = Some(s);
                    return true;
                }
            }
        }
        false
    }
    for s in 0..slots {
        let mut seen = vec![false; rows.len()];
        if !augment(s, &adj, &mut owner, &mut seen) {
            return None;
        }
    }
    let mut first = vec![0; k];
    let mut second = vec![0; k];
    for (j, o) in owner.iter().enumerate() {
        if let Some(s) = o {
            if s % 2 == 0 {
                first[s / 2] = j;
            } else {
                second[s / 2] = j;
            }
        }
    }
    Some((first, second))
}

/// Perfect assignment of the items in `set` to distinct attributes they require.
fn diagonal_assignment(rows: &[u32], k: usize, set: ItemMask) -> bool {
    let items: Vec<usize> = iter_bits(set).collect();
    if items.len() != k {
        return false;
    }
    let mut owner: Vec<Option<usize>> = vec![None; k];
    fn augment(i: usize, items: &[usize], rows: &[u32], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for a in 0..owner.len() {
            if rows[items[i]] >> a & 1 == 1 && !seen[a] {
                seen[a] = true;
                if owner[a].is_none_or(|o| augment(o, items, rows, owner, seen)) {
                    owner[a] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    (0..items.len()).all(|i| {
        let mut seen = vec![false; k];
        augment(i, &items, rows, &mut owner, &mut seen)
    })
}

fn union_of(rows: &[u32], set: ItemMask) -> u32 {
    iter_bits(set).fold(0, |acc, j| acc | rows[j])
}

/// Replays item sets for the two diagonal blocks: each set can be ordered so that
/// item k requires attribute k, and the remaining items require every attribute.
pub fn verify_c5_c6(q: &QMatrix, s1: ItemMask, s2: ItemMask) -> bool {
    let rows = q.rows();
    let k = q.k();
    s1 & s2 == 0
        && (s1 | s2) & !all_items(q.j()) == 0
        && diagonal_assignment(rows, k, s1)
        && diagonal_assignment(rows, k, s2)
        && union_of(rows, all_items(q.j()) & !(s1 | s2)) == full_mask(k)
}

/// Two disjoint diagonal K×K blocks, with the remaining items requiring every attribute.
pub fn check_c5_c6(q: &QMatrix, budget: &SearchBudget) -> ConditionReport {
    let id = ConditionId::C5C6;
    let rows = q.rows();
    let k = q.k();
    let full = full_mask(k);
    let counts = q.column_counts();
    if let Some(a) = counts.iter().position(|&c| c < 3) {
        return ConditionReport::failure(id, None, Some(a), format!("attribute {} is required by {} items", a + 1, counts[a]));
    }
    let all = all_items(q.j());
    let counter = Counter::new(budget.max_subsets);
    let elems: Vec<usize> = iter_bits(all).collect();
    let mut suffix = vec![0u32; elems.len() + 1];
    for t in 0..elems.len() {
        suffix[t + 1] = suffix[t] | rows[elems[t]];
    }
    let mut found = None;
    fn go(
        rows: &[u32],
        k: usize,
        full: u32,
        elems: &[usize],
        below: &[u32],
        p: ItemMask,
        pu: u32,
        b: usize,
        all: ItemMask,
        counter: &Counter,
        found: &mut Option<(ItemMask, Vec<usize>, Vec<usize>)>,
    ) -> bool {
        if !counter.tick() {
            return true;
        }
        if pu == full {
            if let Some((a, c)) = double_matching(rows, k, all & !p) {
                *found = Some((p, a, c));
                return true;
            }
            return false;
        }
        if pu | below[b] != full || double_matching(rows, k, all & !p).is_none() {
            return false;
        }
        for t in 0..b {
            let e = elems[t];
            if go(rows, k, full, elems, below, p | 1 << e, pu | rows[e], t, all, counter, found) {
                return true;
            }
        }
        false
    }
    go(rows, k, full, &elems, &suffix, 0, 0, elems.len(), all, &counter, &mut found);
    match found {
        Some((leftover_cover, first, second)) => {
            let used: ItemMask = first.iter().chain(&second).fold(0, |m, &j| m | 1 << j);
            let leftover = all & !used;
            let mut r = ConditionReport::satisfied(
                id,
                Witness::Matching {
                    s1: first.iter().map(|j| j + 1).collect(),
                    s2: second.iter().map(|j| j + 1).collect(),
                    leftover: to_numbers(leftover),
                },
            );
            debug_assert_eq!(leftover_cover & used, 0);
            if rows.iter().all(|&r| r == full) {
                r = r.with_note("all-ones Q: equivalent to J >= 2K + 1");
            }
            r
        }
        None if counter.exhausted() => ConditionReport::exhausted(id),
        None => ConditionReport::failure(id, None, None, "no pair of diagonal blocks leaves every attribute covered"),
    }
}

/// Generic case for an attribute required by one or two items of a multi-parameter Q.
pub fn check_thm8(q: &QMatrix, attr: usize, budget: &SearchBudget) -> Result<ConditionReport> {
    let id = ConditionId::Thm8Case;
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
    let witness = Witness::TwoItemBlock {
        attribute: attr + 1,
        items: vec![block.items.0 + 1, block.items.1 + 1],
        v1: block.v1_vec(),
        v2: block.v2_vec(),
        clauses: vec![],
    };
    if block.v1 | block.v2 == full_mask(block.k) {
        return Ok(ConditionReport::undetermined(id, witness).with_note("case (b): the remainder vectors cover every attribute"));
    }
    let Some(qp) = block.rest_matrix() else {
        return Ok(ConditionReport::undetermined(id, witness).with_note("no remaining items"));
    };
    let sub = check_c5_c6(&qp, budget);
    let mut r = if sub.is_satisfied() {
        ConditionReport::satisfied(id, witness)
    } else {
        ConditionReport::undetermined(id, witness)
    };
    r.budget_exhausted = sub.budget_exhausted;
    Ok(r.with_note(format!("case (b); remaining matrix C5/C6 {:?}", sub.status).to_lowercase()))
}

/// Repeated measurement and sequential differentiation on the stacked Γ of mixed
/// conjunctive and disjunctive items.
pub fn check_mixed_e1(q: &QMatrix, spec: &ModelSpec, space: &LatentClassSpace, budget: &SearchBudget) -> Result<ConditionReport> {
    if !spec.all_two_param() {
        return Err(Error::Precondition("E1 applies to two-parameter items only".into()));
    }
    let g = build_gamma(q, space, spec)?;
    let c1 = check_c1(&g, budget);
    let c2 = check_c2(&g, &classify_items(&g), budget);
    let status = super::twoparam::status_of(&[c1.clone(), c2.clone()]);
    let exhausted = c1.budget_exhausted || c2.budget_exhausted;
    let mut r = ConditionReport::satisfied(ConditionId::E1, Witness::Composite { reports: vec![c1, c2] });
    r.status = status;
    r.budget_exhausted = exhausted;
    Ok(r)
}

/// Capable indicator of one Γ̃ row over the profiles of `space`.
fn capable_row(space: &LatentClassSpace, model: ItemModel, q: u32) -> Vec<bool> {
    space
        .profiles()
        .iter()
        .map(|p| match model {
            ItemModel::TwoParamDisj => p.bits() & q != 0,
            _ => p.bits() & q == q,
        })
        .collect()
}

fn block_separable(rows: &[&Vec<bool>], m: usize) -> bool {
    let mut seen = HashSet::with_capacity(m);
    (0..m).all(|a| seen.insert(rows.iter().fold(0u64, |acc, r| acc << 1 | r[a] as u64)))
}

/// Item choices inside one block: (item, row options).
struct Candidate {
    item: usize,
    options: Vec<(Option<usize>, Vec<bool>)>,
}

/// Searches for a set `s` from `pool` (colex) and a choice of options whose rows
/// form a separable block.
fn separable_block(
    cands: &[Candidate],
    pool: ItemMask,
    m: usize,
    cap: usize,
    counter: &Counter,
    accept: &mut dyn FnMut(ItemMask, Vec<(usize, Option<usize>)>) -> bool,
) -> bool {
    let mut stop = false;
    for_each_subset(pool, cap, counter, &mut |s| {
        if s == 0 {
            return None;
        }
        let members: Vec<&Candidate> = iter_bits(s).map(|j| cands.iter().find(|c| c.item == j).unwrap()).collect();
        let mut choice = vec![0usize; members.len()];
        loop {
            if !counter.tick() {
                stop = true;
                return Some(Visit::Stop);
            }
            let rows: Vec<&Vec<bool>> = members.iter().zip(&choice).map(|(c, &o)| &c.options[o].1).collect();
            if block_separable(&rows, m) {
                let picks = members.iter().zip(&choice).map(|(c, &o)| (c.item, c.options[o].0)).collect();
                if accept(s, picks) {
                    stop = true;
                    return Some(Visit::Stop);
                }
            }
            let mut pos = members.len();
            loop {
                if pos == 0 {
                    return None;
                }
                pos -= 1;
                choice[pos] += 1;
                if choice[pos] < members[pos].options.len() {
                    break;
                }
                choice[pos] = 0;
            }
        }
    });
    stop
}

fn candidates(q: &QMatrix, spec: &ModelSpec, space: &LatentClassSpace, items: ItemMask) -> Vec<Candidate> {
    iter_bits(items)
        .map(|j| {
            let r = q.rows()[j];
            let model = spec.items[j];
            let mut options = vec![(None, capable_row(space, model, r))];
            if model == ItemModel::MultiParam && r.count_ones() > 1 {
                for k in iter_bits(r as u64) {
                    options.push((Some(k), capable_row(space, model, 1 << k)));
                }
            }
            Candidate { item: j, options }
        })
        .collect()
}

type Picks = Vec<(usize, Option<usize>)>;

fn shrink_list(picks: &[(usize, Option<usize>)]) -> Vec<Shrink> {
    picks.iter().filter_map(|&(j, k)| k.map(|k| Shrink { item: j + 1, attribute: k + 1 })).collect()
}

/// Replays a unit-shrinkage witness. `shrinks` lists (item, attribute) pairs, both 0-based.
pub fn verify_e2(
    q: &QMatrix,
    spec: &ModelSpec,
    space: &LatentClassSpace,
    s1: ItemMask,
    s2: ItemMask,
    shrinks: &[(usize, usize)],
    leftover: ItemMask,
) -> Result<bool> {
    spec.check_len(q.j())?;
    let multi: ItemMask = (0..q.j()).filter(|&j| spec.items[j] == ItemModel::MultiParam).fold(0, |m, j| m | 1 << j);
    if s1 & s2 != 0 || leftover & (s1 | s2) != 0 || leftover & !multi != 0 {
        return Ok(false);
    }
    let mut rows: Vec<u32> = q.rows().to_vec();
    for &(j, k) in shrinks {
        if multi >> j & 1 == 0 || rows[j] >> k & 1 == 0 || (s1 | s2) >> j & 1 == 0 {
            return Ok(false);
        }
        rows[j] = 1 << k;
    }
    let m = space.len();
    let block = |s: ItemMask| -> bool {
        let rs: Vec<Vec<bool>> = iter_bits(s).map(|j| capable_row(space, spec.items[j], rows[j])).collect();
        let refs: Vec<&Vec<bool>> = rs.iter().collect();
        block_separable(&refs, m)
    };
    Ok(block(s1) && block(s2) && union_of(q.rows(), leftover) == full_mask(q.k()))
}

/// Unit-shrinkage condition for models with multi-parameter items: a set of
/// multi-parameter items requiring every attribute, and two disjoint separable
/// blocks among the other items after replacing some multi-parameter rows by a
/// unit vector they dominate.
pub fn check_mixed_e2(q: &QMatrix, spec: &ModelSpec, space: &LatentClassSpace, budget: &SearchBudget) -> Result<ConditionReport> {
    spec.check_len(q.j())?;
    if space.k() != q.k() {
        return Err(Error::Dimension("space and Q disagree on K".into()));
    }
    let id = ConditionId::E2;
    let rows = q.rows();
    let full = full_mask(q.k());
    let multi: ItemMask = (0..q.j()).filter(|&j| spec.items[j] == ItemModel::MultiParam).fold(0, |m, j| m | 1 << j);
    if union_of(rows, multi) != full {
        return Ok(ConditionReport::failure(id, None, None, "multi-parameter items do not require every attribute"));
    }
    let all = all_items(q.j());
    let m = space.len();
    let cands = candidates(q, spec, space, all);
    let cap = if 3f64.powi(q.j() as i32) <= budget.max_subsets as f64 { q.j() } else { q.k() + 2 };
    let counter = Counter::new(budget.max_subsets);
    let mut found: Option<(ItemMask, ItemMask, ItemMask, Picks)> = None;
    for_each_subset(multi, q.j(), &counter, &mut |cover| {
        if union_of(rows, cover) != full {
            return None;
        }
        let pool = all & !cover;
        let mut result = None;
        separable_block(&cands, pool, m, cap, &counter, &mut |s1, picks1| {
            let mut second = None;
            separable_block(&cands, pool & !s1, m, cap, &counter, &mut |s2, picks2| {
                second = Some((s2, picks2));
                true
            });
            match second {
                Some((s2, picks2)) => {
                    let mut picks = picks1;
                    picks.extend(picks2);
                    result = Some((s1, s2, picks));
                    true
                }
                None => false,
            }
        });
        match result {
            Some((s1, s2, picks)) => {
                found = Some((s1, s2, cover, picks));
                Some(Visit::Stop)
            }
            None => Some(Visit::Prune),
        }
    });
    Ok(match found {
        Some((s1, s2, cover, picks)) => {
            let mut r = ConditionReport::satisfied(
                id,
                Witness::Shrinkage { s1: to_numbers(s1), s2: to_numbers(s2), shrunk: shrink_list(&picks), leftover: to_numbers(cover) },
            );
            if spec.all_multi() && rows.iter().all(|&r| r == full) {
                r = r.with_note("all-ones Q: equivalent to J >= 2K + 1");
            }
            r
        }
        None if counter.exhausted() => ConditionReport::exhausted(id),
        None if cap < q.j() => ConditionReport::undetermined(id, Witness::None)
            .with_note(format!("no witness among blocks of size at most {cap}")),
        None => ConditionReport::failure(id, None, None, "no decomposition yields two separable blocks"),
    })
}
