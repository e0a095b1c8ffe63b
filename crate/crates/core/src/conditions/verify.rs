//! Direct verification of witnesses, without search.
//!
//! Each verifier evaluates the defining set inclusions on Γ for the sets named
//! in a witness. Q-form reports are checked on the conjunctive Γ over the
//! saturated space.

use super::generic::{verify_c5_c6, verify_e2};
use super::multi::{verify_c3_c4, verify_c3_c4_star, verify_generic_alteration};
use super::report::{ConditionId, ConditionReport, Flip, ItemSetPair, SearchBudget, Status, Witness};
use crate::bits::{all_items, from_numbers, iter_bits, ItemMask};
use crate::error::Result;
use crate::gamma::{build_gamma, GammaMatrix};
use crate::qmatrix::QMatrix;
use crate::space::LatentClassSpace;
use crate::spec::{ItemModel, ModelSpec};

/// Indicator over profiles of C_T, the classes capable of every item in `t`.
fn capable(g: &GammaMatrix, t: ItemMask) -> Vec<bool> {
    g.columns().iter().map(|&c| c & t == t).collect()
}

fn subset(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| !x || y)
}

/// C_{s1} ⊆ C_item and C_{s2} ⊆ C_item for disjoint s1, s2 not containing the item.
pub fn verify_repeated(g: &GammaMatrix, item: usize, s1: ItemMask, s2: ItemMask) -> bool {
    let own = 1u64 << item;
    if item >= g.j() || s1 & s2 != 0 || (s1 | s2) & own != 0 || (s1 | s2) & !g.all_items() != 0 {
        return false;
    }
    let cj = capable(g, own);
    subset(&capable(g, s1), &cj) && subset(&capable(g, s2), &cj)
}

/// (S⁺, S⁻) inside `within` with C_{S⁺} ⊊ C_{S⁻} and no class of C_{S⁻} ∖ C_{S⁺}
/// capable of the item. Either orientation of the pair is accepted.
pub fn verify_differentiation(g: &GammaMatrix, item: usize, a: ItemMask, b: ItemMask, within: ItemMask) -> bool {
    if item >= g.j() || (a | b) & !within != 0 || (a | b) >> item & 1 == 1 {
        return false;
    }
    let cj = capable(g, 1 << item);
    let one_way = |plus: ItemMask, minus: ItemMask| {
        let (cp, cm) = (capable(g, plus), capable(g, minus));
        subset(&cp, &cm) && cp != cm && cm.iter().zip(&cp).zip(&cj).all(|((&m, &p), &j)| !(m && !p && j))
    };
    one_way(a, b) || one_way(b, a)
}

/// Replays an expansion: each step's items are differentiable by the items
/// separated before that step, and the expansion ends with every item.
pub fn verify_expansion(g: &GammaMatrix, start: ItemMask, steps: &[ItemMask], pairs: &[ItemSetPair]) -> bool {
    let mut sep = start;
    for &step in steps {
        if step & sep != 0 || step == 0 {
            return false;
        }
        for item in iter_bits(step) {
            let ok = pairs.iter().filter(|p| p.item == item + 1).any(|p| {
                verify_differentiation(g, item, from_numbers(&p.first), from_numbers(&p.second), sep)
            });
            if !ok {
                return false;
            }
        }
        sep |= step;
    }
    sep == g.all_items()
}

/// Non-basis items are exactly those whose capable set lies inside another item's.
pub fn verify_classification(g: &GammaMatrix, basis: ItemMask, non_basis: ItemMask) -> bool {
    if basis & non_basis != 0 || basis | non_basis != g.all_items() {
        return false;
    }
    (0..g.j()).all(|j| {
        let cj = capable(g, 1 << j);
        let dominated = (0..g.j()).any(|h| h != j && subset(&cj, &capable(g, 1 << h)));
        dominated == (non_basis >> j & 1 == 1)
    })
}

fn verify_identity_rows(q: &QMatrix, rows: &[usize]) -> bool {
    let k = q.k();
    if rows.len() != k || rows.iter().enumerate().any(|(a, &j)| j == 0 || j > q.j() || q.rows()[j - 1] != 1 << a) {
        return false;
    }
    if q.column_counts().iter().any(|&c| c < 3) {
        return false;
    }
    let rest: Vec<usize> = (0..q.j()).filter(|j| !rows.contains(&(j + 1))).collect();
    let cols: Vec<Vec<bool>> = (0..k).map(|a| rest.iter().map(|&j| q.entry(j, a)).collect()).collect();
    (0..k).all(|a| (a + 1..k).all(|b| cols[a] != cols[b]))
}

fn bits_of(v: &[u8]) -> u32 {
    v.iter().enumerate().fold(0, |m, (i, &x)| if x == 1 { m | 1 << i } else { m })
}

/// Block structure of a two-item witness: the attribute is required by exactly
/// the listed items and the remainder vectors match.
fn verify_two_items(q: &QMatrix, attribute: usize, items: &[usize], v1: &[u8], v2: &[u8]) -> bool {
    if attribute == 0 || attribute > q.k() || items.len() != 2 {
        return false;
    }
    let k = attribute - 1;
    let holders: Vec<usize> = q.items_with(k).iter().map(|j| j + 1).collect();
    let drop = |r: u32| (r & ((1 << k) - 1)) | (r >> (k + 1)) << k;
    holders == items && drop(q.rows()[items[0] - 1]) == bits_of(v1) && drop(q.rows()[items[1] - 1]) == bits_of(v2)
}

fn flips(g: &GammaMatrix, f: &[Flip]) -> Option<Vec<(usize, usize)>> {
    f.iter()
        .map(|x| {
            let a = g.profiles().iter().position(|p| p.to_string() == x.profile)?;
            Some((x.item.checked_sub(1)?, a))
        })
        .collect()
}

/// Largest K for which Q-form reports are replayed on the saturated Γ.
const Q_FORM_MAX_ATTRIBUTES: usize = 16;

/// What a report is checked against.
pub struct ReplayContext {
    pub q: QMatrix,
    pub space: LatentClassSpace,
    pub spec: ModelSpec,
    pub budget: SearchBudget,
    /// Γ of the model as analysed (the conjunctive dual for all-disjunctive models).
    pub g: GammaMatrix,
    /// Conjunctive Γ over the saturated space, for Q-form reports.
    pub q_form: Option<GammaMatrix>,
}

impl ReplayContext {
    pub fn new(q: &QMatrix, space: &LatentClassSpace, spec: &ModelSpec, budget: &SearchBudget) -> Result<Self> {
        let dual = space.is_saturated() && spec.all(ItemModel::TwoParamDisj);
        let g = if dual { build_gamma(q, space, &ModelSpec::conj(q.j()))? } else { build_gamma(q, space, spec)? };
        let q_form = if q.k() <= Q_FORM_MAX_ATTRIBUTES {
            Some(build_gamma(q, &LatentClassSpace::saturated(q.k())?, &ModelSpec::conj(q.j()))?)
        } else {
            None
        };
        Ok(ReplayContext { q: q.clone(), space: space.clone(), spec: spec.clone(), budget: *budget, g, q_form })
    }
}

/// Replays one report against `g`. `None` means the report carries nothing to replay.
pub fn replay(report: &ConditionReport, ctx: &ReplayContext, g: &GammaMatrix) -> Option<bool> {
    if report.status != Status::Satisfied {
        return None;
    }
    let q_form = ctx.q_form.as_ref();
    let pairs_hold = |g: &GammaMatrix, pairs: &[ItemSetPair], check: &dyn Fn(&GammaMatrix, usize, ItemMask, ItemMask) -> bool| {
        pairs.len() == g.j() && pairs.iter().enumerate().all(|(i, p)| p.item == i + 1 && check(g, i, from_numbers(&p.first), from_numbers(&p.second)))
    };
    match (&report.id, &report.witness) {
        (ConditionId::Separability, _) => Some(g.is_separable()),
        (ConditionId::Classification, Witness::Classification { basis, non_basis }) => {
            Some(verify_classification(g, from_numbers(basis), from_numbers(non_basis)))
        }
        (ConditionId::C1, Witness::ItemPairs { pairs }) => Some(pairs_hold(g, pairs, &verify_repeated)),
        (ConditionId::C1Star, Witness::ItemPairs { pairs }) => Some(pairs_hold(q_form?, pairs, &verify_repeated)),
        (ConditionId::C2, Witness::Expansion { start, steps, pairs }) => {
            let steps: Vec<ItemMask> = steps.iter().map(|s| from_numbers(s)).collect();
            Some(verify_expansion(g, from_numbers(start), &steps, pairs))
        }
        (ConditionId::C2Star, Witness::Expansion { start, steps, pairs }) => {
            let steps: Vec<ItemMask> = steps.iter().map(|s| from_numbers(s)).collect();
            Some(verify_expansion(q_form?, from_numbers(start), &steps, pairs))
        }
        (ConditionId::Thm3, Witness::ItemPairs { pairs }) => Some(pairs.iter().all(|p| {
            let item = p.item - 1;
            verify_differentiation(g, item, from_numbers(&p.first), from_numbers(&p.second), g.all_items() & !(1 << item))
        })),
        (ConditionId::SDifferentiable, Witness::ItemPairs { pairs }) => Some(pairs.iter().all(|p| {
            verify_differentiation(g, p.item - 1, from_numbers(&p.first), from_numbers(&p.second), g.all_items())
        })),
        (ConditionId::C3C4, Witness::Blocks { s1, s2, .. }) => verify_c3_c4(g, from_numbers(s1), from_numbers(s2)).ok(),
        (ConditionId::C3C4Star, Witness::Blocks { s1, s2, .. }) => verify_c3_c4_star(g, from_numbers(s1), from_numbers(s2)).ok(),
        (ConditionId::Thm6, Witness::Blocks { s1, s2, flips1, flips2 }) => {
            let (f1, f2) = (flips(g, flips1)?, flips(g, flips2)?);
            verify_generic_alteration(g, from_numbers(s1), &f1, from_numbers(s2), &f2, ctx.budget.max_flips_per_row).ok()
        }
        (ConditionId::C5C6, Witness::Matching { s1, s2, leftover }) => {
            let ok = verify_c5_c6(&ctx.q, from_numbers(s1), from_numbers(s2));
            let used = from_numbers(s1) | from_numbers(s2);
            Some(ok && from_numbers(leftover) == all_items(ctx.q.j()) & !used)
        }
        (ConditionId::E2, Witness::Shrinkage { s1, s2, shrunk, leftover }) => {
            let shrinks: Vec<(usize, usize)> = shrunk.iter().map(|s| (s.item - 1, s.attribute - 1)).collect();
            verify_e2(&ctx.q, &ctx.spec, &ctx.space, from_numbers(s1), from_numbers(s2), &shrinks, from_numbers(leftover)).ok()
        }
        (ConditionId::E1, Witness::Composite { reports }) => {
            Some(reports.iter().all(|r| replay(r, ctx, g).unwrap_or(r.status == Status::Satisfied)))
        }
        (ConditionId::CompleteQ, Witness::Identity { rows }) => Some(verify_identity_rows(&ctx.q, rows)),
        (ConditionId::Thm2Case, Witness::TwoItemBlock { attribute, items, v1, v2, .. }) => {
            Some(v1.contains(&1) && v2.contains(&1) && verify_two_items(&ctx.q, *attribute, items, v1, v2))
        }
        (ConditionId::Thm8Case, Witness::TwoItemBlock { attribute, items, v1, v2, .. }) => {
            let covers = v1.iter().zip(v2).all(|(&a, &b)| a == 1 || b == 1);
            Some(!covers && verify_two_items(&ctx.q, *attribute, items, v1, v2))
        }
        _ => None,
    }
}

/// Replays every satisfied report of a trace in order. Adjustment reports switch
/// the Γ used for the reports that follow them.
pub fn replay_trace(trace: &[ConditionReport], ctx: &ReplayContext) -> Vec<(ConditionId, Option<bool>)> {
    let mut g = ctx.g.clone();
    trace
        .iter()
        .map(|r| {
            if let (ConditionId::Adjustment, Witness::Adjustment { adjusted }) = (&r.id, &r.witness) {
                g = ctx.g.adjust(from_numbers(adjusted));
                return (r.id, None);
            }
            (r.id, replay(r, ctx, &g))
        })
        .collect()
}
