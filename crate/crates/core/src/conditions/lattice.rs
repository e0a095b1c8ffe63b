//! Searches over the lattice of capable-set intersections C_T.
//!
//! A lattice value stands for C_T and supports extension by one item and the
//! test C_T ⊆ C_h. Two representations are provided: one over the distinct
//! columns of Γ and one over unions of q-vectors for conjunctive items under a
//! saturated space.

use super::report::Counter;
use crate::bits::{iter_bits, ItemMask};
use crate::gamma::{ClassView, GammaMatrix};
use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

pub(crate) trait CapableLattice {
    type Value: Copy + Eq + Hash;

    fn bottom(&self) -> Self::Value;
    fn add(&self, v: Self::Value, item: usize) -> Self::Value;
    /// Whether C_v ⊆ C_item.
    fn within(&self, v: Self::Value, item: usize) -> bool;

    fn value_of(&self, t: ItemMask) -> Self::Value {
        iter_bits(t).fold(self.bottom(), |v, h| self.add(v, h))
    }

    /// Whether C_j ⊇ C_T.
    fn covers(&self, t: ItemMask, j: usize) -> bool {
        self.within(self.value_of(t), j)
    }
}

/// Lattice over distinct Γ columns. `None` stands for the empty set of classes.
pub(crate) struct GammaLattice {
    view: ClassView,
    universe: ItemMask,
}

impl GammaLattice {
    pub fn new(g: &GammaMatrix) -> Self {
        GammaLattice { view: g.class_view(), universe: g.all_items() }
    }

    fn closure(&self, t: ItemMask) -> Option<ItemMask> {
        let mut any = false;
        let mut acc = self.universe;
        for &c in &self.view.cols {
            if c & t == t {
                any = true;
                acc &= c;
            }
        }
        any.then_some(acc)
    }
}

impl CapableLattice for GammaLattice {
    type Value = Option<ItemMask>;

    fn bottom(&self) -> Self::Value {
        self.closure(0)
    }

    fn add(&self, v: Self::Value, item: usize) -> Self::Value {
        match v {
            None => None,
            Some(c) if c >> item & 1 == 1 => Some(c),
            Some(c) => self.closure(c | 1 << item),
        }
    }

    fn within(&self, v: Self::Value, item: usize) -> bool {
        v.is_none_or(|c| c >> item & 1 == 1)
    }
}

/// Lattice of q-vector unions for conjunctive items over {0,1}^K.
pub(crate) struct UnionLattice<'a> {
    rows: &'a [u32],
}

impl<'a> UnionLattice<'a> {
    pub fn new(rows: &'a [u32]) -> Self {
        UnionLattice { rows }
    }
}

impl CapableLattice for UnionLattice<'_> {
    type Value = u32;

    fn bottom(&self) -> u32 {
        0
    }

    fn add(&self, v: u32, item: usize) -> u32 {
        v | self.rows[item]
    }

    fn within(&self, v: u32, item: usize) -> bool {
        self.rows[item] & !v == 0
    }
}

/// Items h ≠ j with C_h ⊇ C_j.
pub(crate) fn supersets_of<L: CapableLattice>(lat: &L, j: usize, universe: ItemMask) -> ItemMask {
    let v = lat.value_of(1 << j);
    iter_bits(universe & !(1 << j)).filter(|&h| lat.within(v, h)).fold(0, |m, h| m | 1 << h)
}

pub(crate) enum Differentiation {
    Found { plus: ItemMask, minus: ItemMask },
    NotFound,
    Exhausted,
}

/// Searches for (S⁺, S⁻) ⊆ `s` with C_{S⁺} ⊊ C_{S⁻} and C_{S⁻} ∖ C_{S⁺} disjoint from C_j.
///
/// Such a pair exists iff some lattice value X = C_T and some h ∈ s satisfy
/// C_T ⊄ C_h and C_T ∩ C_j ⊆ C_h, in which case (T ∪ {h}, T) is a witness.
/// Values are visited breadth first from C_∅ and items in ascending order; each
/// value keeps the first subset that produced it.
pub(crate) fn differentiate<L: CapableLattice>(lat: &L, j: usize, s: ItemMask, max_lattice: usize) -> Differentiation {
    let mut witness: HashMap<L::Value, ItemMask> = HashMap::new();
    let mut queue = VecDeque::new();
    let start = lat.bottom();
    witness.insert(start, 0);
    queue.push_back(start);
    while let Some(x) = queue.pop_front() {
        let tx = witness[&x];
        let with_j = lat.add(x, j);
        for h in iter_bits(s) {
            let y = lat.add(x, h);
            if !witness.contains_key(&y) {
                if witness.len() >= max_lattice {
                    return Differentiation::Exhausted;
                }
                witness.insert(y, tx | 1 << h);
                queue.push_back(y);
            }
            if !lat.within(x, h) && lat.within(with_j, h) {
                return Differentiation::Found { plus: witness[&y], minus: tx };
            }
        }
    }
    Differentiation::NotFound
}

/// Colex-first subset T of `pool` with C_j ⊇ C_T.
pub(crate) fn first_cover<L: CapableLattice>(lat: &L, j: usize, pool: ItemMask, counter: &Counter) -> Option<ItemMask> {
    let elems: Vec<usize> = iter_bits(pool).collect();
    let prefix = prefix_masks(&elems);
    let mut found = None;
    cover_dfs(lat, j, &elems, &prefix, 0, lat.bottom(), elems.len(), counter, &mut |_, p| {
        found = Some(p);
        Visit::Stop
    });
    found
}

/// Two disjoint subsets of `relevant`, each with C_j ⊇ C_T. The first is the
/// colex-first cover admitting a disjoint second cover, the second the colex-first
/// cover of the complement.
pub(crate) fn repeated_cover<L: CapableLattice>(
    lat: &L,
    j: usize,
    relevant: ItemMask,
    counter: &Counter,
) -> Option<(ItemMask, ItemMask)> {
    if !lat.covers(relevant, j) {
        return None;
    }
    let elems: Vec<usize> = iter_bits(relevant).collect();
    let prefix = prefix_masks(&elems);
    let mut out = None;
    cover_dfs_with_guard(lat, j, &elems, &prefix, relevant, counter, &mut |p| {
        match first_cover(lat, j, relevant & !p, counter) {
            Some(s2) => {
                out = Some((p, s2));
                Visit::Stop
            }
            None => Visit::Prune,
        }
    });
    out
}

fn prefix_masks(elems: &[usize]) -> Vec<ItemMask> {
    let mut prefix = vec![0u64; elems.len() + 1];
    for (i, &e) in elems.iter().enumerate() {
        prefix[i + 1] = prefix[i] | 1 << e;
    }
    prefix
}

#[derive(PartialEq, Eq)]
pub(crate) enum Visit {
    Stop,
    Prune,
}

/// Visits subsets P ∪ (subsets of elems[..b]) in ascending bitmask order and calls
/// `on_cover` at every P that covers. Covers are never extended.
#[allow(clippy::too_many_arguments)]
fn cover_dfs<L: CapableLattice>(
    lat: &L,
    j: usize,
    elems: &[usize],
    prefix: &[ItemMask],
    p: ItemMask,
    pv: L::Value,
    b: usize,
    counter: &Counter,
    on_cover: &mut dyn FnMut(L::Value, ItemMask) -> Visit,
) -> bool {
    if !counter.tick() {
        return true;
    }
    if lat.within(pv, j) {
        return on_cover(pv, p) == Visit::Stop;
    }
    if !lat.covers(p | prefix[b], j) {
        return false;
    }
    for t in 0..b {
        let e = elems[t];
        if cover_dfs(lat, j, elems, prefix, p | 1 << e, lat.add(pv, e), t, counter, on_cover) {
            return true;
        }
    }
    false
}

fn cover_dfs_with_guard<L: CapableLattice>(
    lat: &L,
    j: usize,
    elems: &[usize],
    prefix: &[ItemMask],
    relevant: ItemMask,
    counter: &Counter,
    on_cover: &mut dyn FnMut(ItemMask) -> Visit,
) {
    fn go<L: CapableLattice>(
        lat: &L,
        j: usize,
        elems: &[usize],
        prefix: &[ItemMask],
        relevant: ItemMask,
        p: ItemMask,
        pv: L::Value,
        b: usize,
        counter: &Counter,
        on_cover: &mut dyn FnMut(ItemMask) -> Visit,
    ) -> bool {
        if !counter.tick() {
            return true;
        }
        if !lat.covers(relevant & !p, j) {
            return false;
        }
        if lat.within(pv, j) {
            return on_cover(p) == Visit::Stop;
        }
        if !lat.covers(p | prefix[b], j) {
            return false;
        }
        for t in 0..b {
            let e = elems[t];
            if go(lat, j, elems, prefix, relevant, p | 1 << e, lat.add(pv, e), t, counter, on_cover) {
                return true;
            }
        }
        false
    }
    go(lat, j, elems, prefix, relevant, 0, lat.bottom(), elems.len(), counter, on_cover);
}

/// Colex enumeration of item subsets of `pool` with at most `max_size` elements.
/// `f` returns `Visit::Stop` to end the enumeration or `Visit::Prune` to skip the
/// supersets reachable from the current set. Returns false if the counter ran out.
pub(crate) fn for_each_subset(
    pool: ItemMask,
    max_size: usize,
    counter: &Counter,
    f: &mut dyn FnMut(ItemMask) -> Option<Visit>,
) -> bool {
    fn go(
        elems: &[usize],
        p: ItemMask,
        size: usize,
        b: usize,
        max_size: usize,
        counter: &Counter,
        f: &mut dyn FnMut(ItemMask) -> Option<Visit>,
    ) -> Option<bool> {
        if !counter.tick() {
            return None;
        }
        match f(p) {
            Some(Visit::Stop) => return Some(true),
            Some(Visit::Prune) => return Some(false),
            None => {}
        }
        if size == max_size {
            return Some(false);
        }
        for t in 0..b {
            match go(elems, p | 1 << elems[t], size + 1, t, max_size, counter, f) {
                Some(true) => return Some(true),
                Some(false) => {}
                None => return None,
            }
        }
        Some(false)
    }
    let elems: Vec<usize> = iter_bits(pool).collect();
    go(&elems, 0, 0, elems.len(), max_size, counter, f).is_some()
}
