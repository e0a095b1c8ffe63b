//! Conditions for multi-parameter items based on two disjoint separable blocks.

use super::lattice::{for_each_subset, Visit};
use super::report::{ConditionId, ConditionReport, Counter, Flip, SearchBudget, Witness};
use crate::bits::{iter_bits, to_numbers, ItemMask};
use crate::error::{Error, Result};
use crate::gamma::GammaMatrix;
use std::collections::HashSet;

/// Whether profile `a` dominates profile `b` on the items in `s`.
fn dominates(cols: &[u64], a: usize, b: usize, s: ItemMask) -> bool {
    cols[b] & s & !cols[a] == 0
}

fn separable_on(cols: &[u64], s: ItemMask) -> bool {
    let mut seen = HashSet::with_capacity(cols.len());
    cols.iter().all(|c| seen.insert(c & s))
}

fn orders_equal(cols: &[u64], s1: ItemMask, s2: ItemMask) -> bool {
    let m = cols.len();
    (0..m).all(|a| (0..m).all(|b| dominates(cols, a, b, s1) == dominates(cols, a, b, s2)))
}

/// First distinct pair (a, b) with a ⪰ b on `order_set` whose columns agree on `rest`.
fn c4_failure(cols: &[u64], order_set: ItemMask, rest: ItemMask) -> Option<(usize, usize)> {
    let m = cols.len();
    for a in 0..m {
        for b in 0..m {
            if a != b && dominates(cols, a, b, order_set) && cols[a] & rest == cols[b] & rest {
                return Some((a, b));
            }
        }
    }
    None
}

/// Classes other than the zero class with no other non-zero class below them on `s`.
fn basis_classes(cols: &[u64], zero: usize, s: ItemMask) -> Vec<usize> {
    let m = cols.len();
    (0..m)
        .filter(|&a| a != zero && !(0..m).any(|b| b != a && b != zero && dominates(cols, a, b, s)))
        .collect()
}

fn star_holds(cols: &[u64], zero: usize, s1: ItemMask, s2: ItemMask, all: ItemMask) -> bool {
    let basis = basis_classes(cols, zero, s1);
    let covered = basis.iter().fold(0u64, |acc, &a| acc | cols[a]);
    let rest = all & !(s1 | s2);
    (s1 | s2) & !covered == 0 && basis.iter().all(|&a| cols[a] & rest != cols[zero] & rest)
}

fn check_disjoint(s1: ItemMask, s2: ItemMask) -> Result<()> {
    if s1 & s2 != 0 || (s1 == s2 && s1 != 0) {
        return Err(Error::Argument("item sets must be disjoint".into()));
    }
    Ok(())
}

/// Whether the two item sets induce the same partial order on the latent classes.
pub fn same_partial_order(g: &GammaMatrix, s1: ItemMask, s2: ItemMask) -> Result<bool> {
    check_disjoint(s1, s2)?;
    Ok(orders_equal(g.columns(), s1, s2))
}

/// Classes with no other non-zero class below them under the order induced by `s`.
pub fn basis_latent_classes(g: &GammaMatrix, s: ItemMask) -> Vec<usize> {
    basis_classes(g.columns(), g.zero_index(), s)
}

pub fn verify_c3_c4(g: &GammaMatrix, s1: ItemMask, s2: ItemMask) -> Result<bool> {
    check_disjoint(s1, s2)?;
    let cols = g.columns();
    Ok(separable_on(cols, s1)
        && separable_on(cols, s2)
        && orders_equal(cols, s1, s2)
        && c4_failure(cols, s1, g.all_items() & !(s1 | s2)).is_none())
}

pub fn verify_c3_c4_star(g: &GammaMatrix, s1: ItemMask, s2: ItemMask) -> Result<bool> {
    check_disjoint(s1, s2)?;
    let cols = g.columns();
    Ok(separable_on(cols, s1)
        && separable_on(cols, s2)
        && orders_equal(cols, s1, s2)
        && star_holds(cols, g.zero_index(), s1, s2, g.all_items()))
}

/// Largest block size searched: every size when the pair search is small, K + 2 otherwise.
fn size_cap(g: &GammaMatrix, budget: &SearchBudget) -> (usize, bool) {
    let pairs = 3f64.powi(g.j() as i32);
    if pairs <= budget.max_subsets as f64 {
        (g.j(), true)
    } else {
        let k = g.profiles().first().map(|p| p.len()).unwrap_or(1);
        ((k + 2).min(g.j()), false)
    }
}

enum Search {
    Found(ItemMask, ItemMask),
    NotFound,
    Exhausted,
}

/// Pairs (S₁, S₂) with separable blocks and equal orders, S₁ in colex order. For
/// each S₁ the first candidate S₂ pairs every row with the lowest unused identical
/// row; then all S₂ in colex order are tried.
fn search_blocks(g: &GammaMatrix, budget: &SearchBudget, accept: &dyn Fn(ItemMask, ItemMask) -> bool) -> Search {
    let cols = g.columns();
    let all = g.all_items();
    let (cap, _) = size_cap(g, budget);
    let counter = Counter::new(budget.max_subsets);
    let min_block = usize::BITS as usize - (cols.len().max(1) - 1).leading_zeros() as usize;
    let mut found = None;
    let complete = for_each_subset(all, cap, &counter, &mut |s1| {
        if (s1.count_ones() as usize) < min_block || !separable_on(cols, s1) {
            return None;
        }
        if let Some(s2) = identical_copy(g, s1) {
            if accept(s1, s2) {
                found = Some((s1, s2));
                return Some(Visit::Stop);
            }
        }
        let mut inner = None;
        let ok = for_each_subset(all & !s1, cap, &counter, &mut |s2| {
            if separable_on(cols, s2) && orders_equal(cols, s1, s2) && accept(s1, s2) {
                inner = Some(s2);
                return Some(Visit::Stop);
            }
            None
        });
        if let Some(s2) = inner {
            found = Some((s1, s2));
            return Some(Visit::Stop);
        }
        if !ok {
            return Some(Visit::Stop);
        }
        None
    });
    match found {
        Some((s1, s2)) => Search::Found(s1, s2),
        None if !complete || counter.exhausted() => Search::Exhausted,
        None => Search::NotFound,
    }
}

fn rows_equal(cols: &[u64], i: usize, h: usize) -> bool {
    cols.iter().all(|c| (c >> i & 1) == (c >> h & 1))
}

fn identical_copy(g: &GammaMatrix, s1: ItemMask) -> Option<ItemMask> {
    let cols = g.columns();
    let mut used = s1;
    let mut s2 = 0;
    for i in iter_bits(s1) {
        let h = iter_bits(g.all_items() & !used).find(|&h| rows_equal(cols, i, h))?;
        used |= 1 << h;
        s2 |= 1 << h;
    }
    Some(s2)
}

fn blocks_report(id: ConditionId, g: &GammaMatrix, budget: &SearchBudget, outcome: Search) -> ConditionReport {
    match outcome {
        Search::Found(s1, s2) => ConditionReport::satisfied(
            id,
            Witness::Blocks { s1: to_numbers(s1), s2: to_numbers(s2), flips1: vec![], flips2: vec![] },
        ),
        Search::Exhausted => ConditionReport::exhausted(id),
        Search::NotFound => {
            let (cap, exhaustive) = size_cap(g, budget);
            if exhaustive {
                ConditionReport::failure(id, None, None, "no pair of disjoint item sets satisfies the condition")
            } else {
                ConditionReport::undetermined(id, Witness::None)
                    .with_note(format!("no witness among item sets of size at most {cap}"))
            }
        }
    }
}

/// Two disjoint separable blocks with equal orders whose complement separates every
/// comparable pair. A supplied witness is verified without search.
pub fn check_c3_c4(g: &GammaMatrix, budget: &SearchBudget, witness: Option<(ItemMask, ItemMask)>) -> Result<ConditionReport> {
    let id = ConditionId::C3C4;
    if let Some((s1, s2)) = witness {
        return Ok(if verify_c3_c4(g, s1, s2)? {
            blocks_report(id, g, budget, Search::Found(s1, s2))
        } else {
            ConditionReport::failure(id, None, None, "supplied item sets do not satisfy the condition")
        });
    }
    let cols = g.columns();
    let all = g.all_items();
    let accept = |s1: ItemMask, s2: ItemMask| c4_failure(cols, s1, all & !(s1 | s2)).is_none();
    Ok(blocks_report(id, g, budget, search_blocks(g, budget, &accept)))
}

/// Variant in which every block item is capable for some basis class and the
/// complement separates each basis class from the zero class.
pub fn check_c3star_c4star(g: &GammaMatrix, budget: &SearchBudget) -> ConditionReport {
    let cols = g.columns();
    let all = g.all_items();
    let zero = g.zero_index();
    let accept = |s1: ItemMask, s2: ItemMask| star_holds(cols, zero, s1, s2, all);
    blocks_report(ConditionId::C3C4Star, g, budget, search_blocks(g, budget, &accept))
}

/// Zero-to-one alterations as (item, profile index) pairs.
pub type Alteration = Vec<(usize, usize)>;

fn apply(cols: &[u64], flips: &[(usize, usize)]) -> Vec<u64> {
    let mut out = cols.to_vec();
    for &(j, a) in flips {
        out[a] |= 1 << j;
    }
    out
}

fn valid_flips(g: &GammaMatrix, flips: &[(usize, usize)], max_per_row: usize) -> bool {
    let mut per_row = vec![0usize; g.j()];
    for &(j, a) in flips {
        if j >= g.j() || a >= g.m() || a == g.zero_index() || g.entry(j, a) {
            return false;
        }
        per_row[j] += 1;
    }
    per_row.iter().all(|&c| c <= max_per_row)
}

/// Replays an alteration witness: flips must turn zeros into ones inside the
/// blocks, the altered blocks must satisfy the block condition and the unaltered
/// complement must separate comparable pairs.
pub fn verify_generic_alteration(
    g: &GammaMatrix,
    s1: ItemMask,
    flips1: &[(usize, usize)],
    s2: ItemMask,
    flips2: &[(usize, usize)],
    max_per_row: usize,
) -> Result<bool> {
    check_disjoint(s1, s2)?;
    if flips1.iter().any(|f| s1 >> f.0 & 1 == 0) || flips2.iter().any(|f| s2 >> f.0 & 1 == 0) {
        return Ok(false);
    }
    let all_flips: Vec<_> = flips1.iter().chain(flips2).copied().collect();
    if !valid_flips(g, &all_flips, max_per_row) {
        return Ok(false);
    }
    let cols = apply(g.columns(), &all_flips);
    Ok(separable_on(&cols, s1)
        && separable_on(&cols, s2)
        && orders_equal(&cols, s1, s2)
        && c4_failure(&cols, s1, g.all_items() & !(s1 | s2)).is_none())
}

fn flip_json(g: &GammaMatrix, flips: &[(usize, usize)]) -> Vec<Flip> {
    flips.iter().map(|&(j, a)| Flip { item: j + 1, profile: g.profiles()[a].to_string() }).collect()
}

/// Options for one row: subsets of its zero entries (outside the zero class) with
/// at most `max` elements, smallest first.
fn row_options(g: &GammaMatrix, cols: &[u64], j: usize, max: usize) -> Vec<Vec<usize>> {
    let zeros: Vec<usize> = (0..cols.len()).filter(|&a| a != g.zero_index() && cols[a] >> j & 1 == 0).collect();
    let mut out = vec![vec![]];
    let mut frontier = vec![(vec![], 0usize)];
    for _ in 0..max {
        let mut next = Vec::new();
        for (set, start) in &frontier {
            for (idx, &a) in zeros.iter().enumerate().skip(*start) {
                let mut s: Vec<usize> = set.clone();
                s.push(a);
                out.push(s.clone());
                next.push((s, idx + 1));
            }
        }
        frontier = next;
    }
    out
}

/// Matches each row of `s1` (in the altered block) to a distinct row outside `s1`
/// that reaches it with at most `max` zero-to-one flips outside the zero class.
fn match_rows(g: &GammaMatrix, altered: &[u64], s1: ItemMask, max: usize) -> Option<Vec<(usize, usize)>> {
    let orig = g.columns();
    let left: Vec<usize> = iter_bits(s1).collect();
    let right: Vec<usize> = iter_bits(g.all_items() & !s1).collect();
    let edge = |i: usize, h: usize| -> bool {
        let mut flips = 0;
        for (a, (&c, &alt)) in orig.iter().zip(altered).enumerate() {
            let target = alt >> i & 1;
            let have = c >> h & 1;
            if have > target {
                return false;
            }
            if have < target {
                if a == g.zero_index() {
                    return false;
                }
                flips += 1;
                if flips > max {
                    return false;
                }
            }
        }
        true
    };
    let adj: Vec<Vec<usize>> = left.iter().map(|&i| (0..right.len()).filter(|&r| edge(i, right[r])).collect()).collect();
    let mut owner: Vec<Option<usize>> = vec![None; right.len()];
    fn augment(l: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for &r in &adj[l] {
            if !seen[r] {
                seen[r] = true;
                if owner[r].is_none_or(|o| augment(o, adj, owner, seen)) {
                    owner[r] = Some(l);
                    return true;
                }
            }
        }
        false
    }
    for l in 0..left.len() {
        let mut seen = vec![false; right.len()];
        if !augment(l, &adj, &mut owner, &mut seen) {
            return None;
        }
    }
    let mut pairs: Vec<(usize, usize)> =
        owner.iter().enumerate().filter_map(|(r, o)| o.map(|l| (left[l], right[r]))).collect();
    pairs.sort_unstable();
    Some(pairs)
}

/// Searches for blocks that become separable with equal orders after zero-to-one
/// alterations (at most `max_flips_per_row` per row) while the unaltered
/// complement separates comparable pairs. A supplied witness is verified instead.
pub fn check_generic_alteration(
    g: &GammaMatrix,
    budget: &SearchBudget,
    witness: Option<(ItemMask, Alteration, ItemMask, Alteration)>,
) -> Result<ConditionReport> {
    let id = ConditionId::Thm6;
    let maxf = budget.max_flips_per_row;
    if let Some((s1, f1, s2, f2)) = witness {
        return Ok(if verify_generic_alteration(g, s1, &f1, s2, &f2, maxf)? {
            ConditionReport::satisfied(
                id,
                Witness::Blocks { s1: to_numbers(s1), s2: to_numbers(s2), flips1: flip_json(g, &f1), flips2: flip_json(g, &f2) },
            )
        } else {
            ConditionReport::failure(id, None, None, "supplied alteration does not satisfy the condition")
        });
    }
    let cols = g.columns();
    let all = g.all_items();
    let (cap, _) = size_cap(g, budget);
    let counter = Counter::new(budget.max_subsets);
    let mut found: Option<(ItemMask, Alteration, ItemMask, Alteration)> = None;
    for_each_subset(all, cap, &counter, &mut |s1| {
        if s1 == 0 {
            return None;
        }
        let rows: Vec<usize> = iter_bits(s1).collect();
        let options: Vec<Vec<Vec<usize>>> = rows.iter().map(|&j| row_options(g, cols, j, maxf)).collect();
        let mut choice = vec![0usize; rows.len()];
        loop {
            if !counter.tick() {
                return Some(Visit::Stop);
            }
            let flips: Alteration =
                rows.iter().zip(&choice).flat_map(|(&j, &c)| options_of(&options, &rows, j, c)).collect();
            let altered = apply(cols, &flips);
            if separable_on(&altered, s1) {
                if let Some(pairs) = match_rows(g, &altered, s1, maxf) {
                    let s2 = pairs.iter().fold(0u64, |m, &(_, h)| m | 1 << h);
                    if c4_failure(&altered, s1, all & !(s1 | s2)).is_none() {
                        let mut f2 = Vec::new();
                        for &(i, h) in &pairs {
                            for (a, (&c, &alt)) in cols.iter().zip(&altered).enumerate() {
                                if alt >> i & 1 == 1 && c >> h & 1 == 0 {
                                    f2.push((h, a));
                                }
                            }
                        }
                        f2.sort_unstable();
                        found = Some((s1, flips, s2, f2));
                        return Some(Visit::Stop);
                    }
                }
            }
            // advance the mixed-radix counter, last row fastest
            let mut pos = rows.len();
            loop {
                if pos == 0 {
                    return None;
                }
                pos -= 1;
                choice[pos] += 1;
                if choice[pos] < options[pos].len() {
                    break;
                }
                choice[pos] = 0;
            }
        }
    });
    Ok(match found {
        Some((s1, f1, s2, f2)) => ConditionReport::satisfied(
            id,
            Witness::Blocks { s1: to_numbers(s1), s2: to_numbers(s2), flips1: flip_json(g, &f1), flips2: flip_json(g, &f2) },
        ),
        None if counter.exhausted() => ConditionReport::exhausted(id),
        None => ConditionReport::undetermined(id, Witness::None)
            .with_note(format!("no alteration with at most {maxf} flips per row and blocks of size at most {cap}")),
    })
}

fn options_of(options: &[Vec<Vec<usize>>], rows: &[usize], j: usize, c: usize) -> Vec<(usize, usize)> {
    let r = rows.iter().position(|&x| x == j).unwrap_or(0);
    options[r][c].iter().map(|&a| (j, a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::from_numbers;

    fn sub() -> Vec<Vec<u8>> {
        vec![vec![0, 1, 1, 1], vec![0, 0, 1, 1], vec![0, 0, 0, 1]]
    }

    #[test]
    fn options_are_small_first() {
        let g = GammaMatrix::from_rows(&sub()).unwrap();
        let opts = row_options(&g, g.columns(), 2, 2);
        assert_eq!(opts, vec![vec![], vec![1], vec![2], vec![1, 2]]);
    }

    #[test]
    fn disjointness_is_required() {
        let g = GammaMatrix::from_rows(&sub()).unwrap();
        assert!(same_partial_order(&g, from_numbers(&[1]), from_numbers(&[1])).is_err());
        assert!(same_partial_order(&g, from_numbers(&[1, 2]), from_numbers(&[3])).is_ok());
    }
}
