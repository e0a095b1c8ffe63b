//! Alternate parameter sets that reproduce the response distribution.
//!
//! Each construction perturbs one designated item parameter level by δ and
//! rebalances class proportions in pairs of latent classes that differ only in
//! that item's level. The result is accepted only after direct verification.

use super::{raw_gap, raw_param_gap};
use crate::bits::iter_bits;
use crate::conditions::{check_thm3_necessity, classify_items, SearchBudget, Witness, SCHEMA};
use crate::error::{Error, Result};
use crate::gamma::{build_gamma, equivalence_partition, GammaMatrix};
use crate::models::{validate_params, ItemParams, Proportions};
use crate::qmatrix::QMatrix;
use crate::space::LatentClassSpace;
use crate::spec::{ItemModel, ModelSpec};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

const GAP_TOL: f64 = 1e-10;
const EQ_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Construction {
    /// Two-parameter item holding an attribute no other item requires.
    Thm2a,
    /// Attribute held by two items, one of which requires nothing else.
    Thm2b1,
    /// Basis item that the remaining items cannot differentiate.
    Thm3,
    /// Mass moved inside one equivalence class.
    #[serde(rename = "Prop2-grouping")]
    Prop2Grouping,
    /// Multi-parameter item holding an attribute no other item requires.
    Thm8a,
}

impl Construction {
    pub const ALL: [Construction; 5] =
        [Construction::Thm2a, Construction::Thm2b1, Construction::Thm3, Construction::Prop2Grouping, Construction::Thm8a];

    pub fn name(self) -> &'static str {
        match self {
            Construction::Thm2a => "Thm2a",
            Construction::Thm2b1 => "Thm2b1",
            Construction::Thm3 => "Thm3",
            Construction::Prop2Grouping => "Prop2-grouping",
            Construction::Thm8a => "Thm8a",
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Construction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Construction::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown construction '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleOptions {
    pub delta: f64,
    pub max_halvings: usize,
    /// Attribute (Thm2a, Thm2b1, Thm8a), item (Thm3) or class (Prop2-grouping), 0-based.
    pub target: Option<usize>,
    /// Seed that produced the original parameters, recorded in the output.
    pub seed: Option<u64>,
}

impl Default for CounterexampleOptions {
    fn default() -> Self {
        CounterexampleOptions { delta: 0.05, max_halvings: 10, target: None, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub construction: Construction,
    pub theta: ItemParams,
    pub p: Proportions,
    pub theta_bar: ItemParams,
    pub p_bar: Proportions,
    pub distance: f64,
    pub param_gap: f64,
    pub delta: f64,
    pub seed: Option<u64>,
    /// What was perturbed, e.g. "item 1, attribute 1".
    pub site: String,
}

impl Counterexample {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).unwrap_or_default();
        if let Some(obj) = v.as_object_mut() {
            obj.insert("schema".into(), serde_json::json!(SCHEMA));
        }
        v
    }
}

/// Recomputes both gaps and the validity of the alternate parameters.
pub fn verify_counterexample(ce: &Counterexample, g: &GammaMatrix) -> Result<bool> {
    let distance = raw_gap(&ce.theta, ce.p.as_slice(), &ce.theta_bar, ce.p_bar.as_slice())?;
    let gap = raw_param_gap(&ce.theta, ce.p.as_slice(), &ce.theta_bar, ce.p_bar.as_slice());
    Ok(distance <= GAP_TOL && gap >= ce.delta / 2.0 && validate_params(&ce.theta_bar, g).is_empty())
}

/// Special profile and its partner: the perturbed level sits on the special side.
type Pairs = Vec<(usize, usize)>;

struct Attempt {
    theta_bar: ItemParams,
    p_bar: Vec<f64>,
}

/// Moves item `item` at every special profile by `bump` and rebalances each pair
/// so that pair mass and the item's positive mass are unchanged.
fn shift_pairs(theta: &ItemParams, p: &[f64], item: usize, pairs: &[(usize, usize)], bump: f64) -> Option<Attempt> {
    let mut theta_bar = theta.clone();
    let mut p_bar = p.to_vec();
    for &(s, o) in pairs {
        let (ts, to) = (theta.get(item, s), theta.get(item, o));
        let new = ts + bump;
        if (new - to).abs() < EQ_TOL || (ts - to).abs() < EQ_TOL {
            return None;
        }
        let c = (ts - to) / (new - to);
        theta_bar.set(item, s, new);
        p_bar[s] = c * p[s];
        p_bar[o] = p[o] + (1.0 - c) * p[s];
    }
    Some(Attempt { theta_bar, p_bar })
}

struct Context<'a> {
    g: &'a GammaMatrix,
    theta: &'a ItemParams,
    p: &'a Proportions,
    index: HashMap<u32, usize>,
}

impl Context<'_> {
    fn bits(&self, a: usize) -> u32 {
        self.g.profiles()[a].bits()
    }

    fn partner(&self, a: usize, attr: usize) -> Option<usize> {
        self.index.get(&(self.bits(a) ^ 1 << attr)).copied()
    }

    /// Every item other than `skip` takes equal values on profiles that differ only in `attr`.
    fn invariant_except(&self, skip: &[usize], attr: usize) -> Result<()> {
        for j in (0..self.g.j()).filter(|j| !skip.contains(j)) {
            for a in 0..self.g.m() {
                if let Some(b) = self.partner(a, attr) {
                    if (self.theta.get(j, a) - self.theta.get(j, b)).abs() > EQ_TOL {
                        return Err(Error::Precondition(format!(
                            "item {} depends on attribute {}, which it does not require",
                            j + 1,
                            attr + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Pairs for shifting the level of `item` shared by `special`, each partnered across `attr`.
    fn level_pairs(&self, item: usize, special: &[usize], attr: usize) -> Option<Pairs> {
        special
            .iter()
            .map(|&s| {
                let o = self.partner(s, attr)?;
                ((self.theta.get(item, s) - self.theta.get(item, o)).abs() > EQ_TOL).then_some((s, o))
            })
            .collect()
    }
}

fn holders(q: &QMatrix, attr: usize) -> Vec<usize> {
    q.items_with(attr)
}

fn pick_attribute(q: &QMatrix, target: Option<usize>, ok: impl Fn(usize) -> bool, what: &str) -> Result<usize> {
    match target {
        Some(k) if k < q.k() && ok(k) => Ok(k),
        Some(k) => Err(Error::Precondition(format!("attribute {} does not fit the {what} case", k + 1))),
        None => (0..q.k()).find(|&k| ok(k)).ok_or_else(|| Error::Precondition(format!("no attribute fits the {what} case"))),
    }
}

/// Attribute required by a single item of the given kind: the level over C_j
/// (or outside it) moves together with the classes across the attribute.
fn single_item(cx: &Context, q: &QMatrix, opts: &CounterexampleOptions, multi: bool) -> Result<(String, Vec<Pairs>, usize)> {
    let what = if multi { "single multi-parameter item" } else { "single two-parameter item" };
    let fits = |k: usize| {
        let h = holders(q, k);
        h.len() == 1 && (cx.g.models()[h[0]] == ItemModel::MultiParam) == multi
    };
    let attr = pick_attribute(q, opts.target, fits, what)?;
    let item = holders(q, attr)[0];
    cx.invariant_except(&[item], attr)?;
    let m = cx.g.m();
    let mut candidates = Vec::new();
    if multi {
        let high: Vec<usize> = (0..m).filter(|&a| cx.bits(a) >> attr & 1 == 1).collect();
        candidates.extend(cx.level_pairs(item, &high, attr));
    } else {
        let capable = cx.g.capable_set(item);
        let incapable: Vec<usize> = (0..m).filter(|&a| !cx.g.entry(item, a)).collect();
        candidates.extend(cx.level_pairs(item, &capable, attr));
        candidates.extend(cx.level_pairs(item, &incapable, attr));
    }
    if candidates.is_empty() {
        return Err(Error::Precondition(format!(
            "profiles of item {} lack partners across attribute {} in the class space",
            item + 1,
            attr + 1
        )));
    }
    Ok((format!("item {}, attribute {}", item + 1, attr + 1), candidates, item))
}

fn run_single(cx: &Context, item: usize, candidates: &[Pairs], bump: f64) -> Vec<Attempt> {
    candidates.iter().filter_map(|pairs| shift_pairs(cx.theta, cx.p.as_slice(), item, pairs, bump)).collect()
}

/// Attribute held by items i1 (requiring only it) and i2. The level of i1 on one
/// side of the attribute moves; the level of i2 on the other side absorbs the
/// change where i2 distinguishes the pair.
fn two_items(cx: &Context, q: &QMatrix, opts: &CounterexampleOptions) -> Result<(String, usize, usize, usize)> {
    let fits = |k: usize| {
        let h = holders(q, k);
        h.len() == 2 && h.iter().any(|&j| q.rows()[j] == 1 << k) && h.iter().all(|&j| cx.g.models()[j].is_two_param())
    };
    let attr = pick_attribute(q, opts.target, fits, "two-item block with an empty remainder")?;
    let h = holders(q, attr);
    let (i1, i2) = if q.rows()[h[0]] == 1 << attr { (h[0], h[1]) } else { (h[1], h[0]) };
    cx.invariant_except(&[i1, i2], attr)?;
    if (0..cx.g.m()).any(|a| cx.partner(a, attr).is_none()) {
        return Err(Error::Precondition(format!("class space is not closed under toggling attribute {}", attr + 1)));
    }
    let p = cx.p.as_slice();
    let mut ratio: Option<f64> = None;
    for a in (0..cx.g.m()).filter(|&a| cx.bits(a) >> attr & 1 == 0) {
        let b = cx.partner(a, attr).unwrap();
        if (cx.theta.get(i2, a) - cx.theta.get(i2, b)).abs() > EQ_TOL {
            let r = p[a] / p[b];
            match ratio {
                Some(r0) if (r - r0).abs() > 1e-9 * r0.max(1.0) => {
                    return Err(Error::Precondition(format!(
                        "proportion ratio across attribute {} is not constant where item {} differs",
                        attr + 1,
                        i2 + 1
                    )));
                }
                _ => ratio = Some(r),
            }
        }
    }
    Ok((format!("items {} and {}, attribute {}", i1 + 1, i2 + 1, attr + 1), attr, i1, i2))
}

fn run_two_items(cx: &Context, attr: usize, i1: usize, i2: usize, bump: f64) -> Vec<Attempt> {
    let p = cx.p.as_slice();
    let mut out = Vec::new();
    let low: Vec<usize> = (0..cx.g.m()).filter(|&a| cx.bits(a) >> attr & 1 == 0).collect();
    for side_high in [false, true] {
        let pairs: Pairs = low
            .iter()
            .map(|&a| {
                let b = cx.partner(a, attr).unwrap();
                if side_high {
                    (b, a)
                } else {
                    (a, b)
                }
            })
            .collect();
        let Some(mut att) = shift_pairs(cx.theta, p, i1, &pairs, bump) else { continue };
        let mut level: Option<f64> = None;
        let mut consistent = true;
        for &(s, o) in &pairs {
            let (ts, to) = (cx.theta.get(i2, s), cx.theta.get(i2, o));
            if (ts - to).abs() <= EQ_TOL {
                continue;
            }
            let new = (to * p[o] + ts * (p[s] - att.p_bar[s])) / att.p_bar[o];
            match level {
                Some(l) if (l - new).abs() > 1e-9 => consistent = false,
                _ => level = Some(new),
            }
            att.theta_bar.set(i2, o, new);
        }
        if consistent {
            out.push(att);
        }
    }
    out
}

/// Basis item j: every class on one side of item j has a partner whose Γ column
/// differs only in row j. The level of j on that side moves.
fn class_pairs(g: &GammaMatrix, item: usize) -> Vec<(Vec<usize>, Vec<(usize, usize)>)> {
    let part = equivalence_partition(g);
    let cols: Vec<u64> = part.classes.iter().map(|c| g.column(c[0])).collect();
    let find = |col: u64| cols.iter().position(|&c| c == col);
    let mut out = Vec::new();
    for capable_side in [false, true] {
        let special: Vec<usize> = (0..cols.len()).filter(|&c| (cols[c] >> item & 1 == 1) == capable_side).collect();
        let pairs: Option<Vec<(usize, usize)>> = special.iter().map(|&c| find(cols[c] ^ 1 << item).map(|o| (c, o))).collect();
        if let Some(pairs) = pairs {
            out.push((special, pairs));
        }
    }
    out
}

fn run_classes(cx: &Context, item: usize, bump: f64) -> Vec<Attempt> {
    let mut out = Vec::new();
    let part = equivalence_partition(cx.g);
    let p = cx.p.as_slice();
    let nu = part.group(p);
    for (_, pairs) in class_pairs(cx.g, item) {
        let mut theta_bar = cx.theta.clone();
        let mut nu_bar = nu.clone();
        let mut ok = true;
        for &(s, o) in &pairs {
            let (ts, to) = (cx.theta.get(item, part.classes[s][0]), cx.theta.get(item, part.classes[o][0]));
            let new = ts + bump;
            if (new - to).abs() < EQ_TOL {
                ok = false;
                break;
            }
            let c = (ts - to) / (new - to);
            nu_bar[s] = c * nu[s];
            nu_bar[o] = nu[o] + (1.0 - c) * nu[s];
            for &a in &part.classes[s] {
                theta_bar.set(item, a, new);
            }
        }
        if ok {
            let p_bar = (0..p.len()).map(|a| p[a] * nu_bar[part.class_of[a]] / nu[part.class_of[a]]).collect();
            out.push(Attempt { theta_bar, p_bar });
        }
    }
    out.extend(least_squares_classes(cx, item, bump));
    out
}

/// Fallback: move the level of `item` outside C_j and solve for grouped
/// proportions in the least-squares sense.
fn least_squares_classes(cx: &Context, item: usize, bump: f64) -> Option<Attempt> {
    let part = equivalence_partition(cx.g);
    let p = cx.p.as_slice();
    let nu = part.group(p);
    let mut theta_bar = cx.theta.clone();
    for a in (0..cx.g.m()).filter(|&a| !cx.g.entry(item, a)) {
        theta_bar.set(item, a, cx.theta.get(item, a) + bump);
    }
    let reps: Vec<usize> = part.classes.iter().map(|c| c[0]).collect();
    let target = super::marginals(cx.theta, p).ok()?;
    let sub = |t: &ItemParams| ItemParams::new((0..t.j()).map(|j| reps.iter().map(|&a| t.get(j, a)).collect()).collect());
    let tb = super::build_tmatrix(&sub(&theta_bar).ok()?).ok()?;
    let b = DVector::from_vec(target);
    let a: DMatrix<f64> = tb.values().clone();
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    if sol.iter().any(|&x| x <= 0.0) {
        return None;
    }
    let p_bar = (0..p.len()).map(|x| p[x] * sol[part.class_of[x]] / nu[part.class_of[x]]).collect();
    Some(Attempt { theta_bar, p_bar })
}

fn thm3_item(g: &GammaMatrix, target: Option<usize>) -> Result<usize> {
    if let Some(j) = target {
        if j >= g.j() || !g.models()[j].is_two_param() {
            return Err(Error::Precondition(format!("item {} is not a two-parameter item", j + 1)));
        }
        return Ok(j);
    }
    if !g.models().iter().all(|m| m.is_two_param()) {
        return Err(Error::Precondition("the necessity construction needs two-parameter items".into()));
    }
    let report = check_thm3_necessity(g, &classify_items(g), &SearchBudget::default());
    match report.witness {
        Witness::Failure { item: Some(item), .. } if report.is_violated() => Ok(item - 1),
        _ => Err(Error::Precondition("every basis item is differentiable by the other items".into())),
    }
}

fn grouping_pair(cx: &Context, target: Option<usize>) -> Result<(String, usize, usize)> {
    let part = equivalence_partition(cx.g);
    let ok = |c: usize| {
        let members = &part.classes[c];
        members.len() >= 2
            && (0..cx.g.j()).all(|j| members.iter().all(|&a| (cx.theta.get(j, a) - cx.theta.get(j, members[0])).abs() <= EQ_TOL))
    };
    let class = match target {
        Some(c) if c < part.len() && ok(c) => c,
        Some(c) => return Err(Error::Precondition(format!("class {} cannot be regrouped", c + 1))),
        None => (0..part.len()).find(|&c| ok(c)).ok_or_else(|| {
            Error::Precondition("no equivalence class with two members and equal item parameters".into())
        })?,
    };
    let (a, b) = (part.classes[class][0], part.classes[class][1]);
    let names = (cx.g.profiles()[a], cx.g.profiles()[b]);
    Ok((format!("profiles {} and {}", names.0, names.1), a, b))
}

/// Builds and verifies an alternate parameter set with the same distribution.
/// δ starts at `opts.delta`; for each δ the perturbation +δ is tried before −δ,
/// and δ is halved up to `opts.max_halvings` times.
pub fn construct_counterexample(
    q: &QMatrix,
    space: &LatentClassSpace,
    spec: &ModelSpec,
    theta: &ItemParams,
    p: &Proportions,
    construction: Construction,
    opts: &CounterexampleOptions,
) -> Result<Counterexample> {
    if !(opts.delta > 0.0) {
        return Err(Error::Argument("δ must be positive".into()));
    }
    let g = build_gamma(q, space, spec)?;
    if theta.j() != g.j() || theta.m() != g.m() || p.len() != g.m() {
        return Err(Error::Dimension("parameters do not match Q and the class space".into()));
    }
    if let Some(v) = validate_params(theta, &g).first() {
        return Err(Error::Argument(format!("original parameters violate {} at item {}, profile {}", v.rule, v.item, v.profile)));
    }
    let index = g.profiles().iter().enumerate().map(|(a, pr)| (pr.bits(), a)).collect();
    let cx = Context { g: &g, theta, p, index };
    let attempt: Box<dyn Fn(f64) -> Vec<Attempt> + '_>;
    let site;
    match construction {
        Construction::Thm2a | Construction::Thm8a => {
            let (s, candidates, item) = single_item(&cx, q, opts, construction == Construction::Thm8a)?;
            site = s;
            let cx = &cx;
            attempt = Box::new(move |bump| run_single(cx, item, &candidates, bump));
        }
        Construction::Thm2b1 => {
            let (s, attr, i1, i2) = two_items(&cx, q, opts)?;
            site = s;
            let cx = &cx;
            attempt = Box::new(move |bump| run_two_items(cx, attr, i1, i2, bump));
        }
        Construction::Thm3 => {
            let item = thm3_item(&g, opts.target)?;
            site = format!("item {}", item + 1);
            let cx = &cx;
            attempt = Box::new(move |bump| run_classes(cx, item, bump));
        }
        Construction::Prop2Grouping => {
            if g.is_separable() {
                return Err(Error::Precondition("Γ is separable".into()));
            }
            let (s, a, b) = grouping_pair(&cx, opts.target)?;
            site = s;
            attempt = Box::new(move |bump| {
                let mut p_bar = p.as_slice().to_vec();
                p_bar[a] += bump;
                p_bar[b] -= bump;
                vec![Attempt { theta_bar: theta.clone(), p_bar }]
            });
        }
    }
    let mut delta = opts.delta;
    for _ in 0..=opts.max_halvings {
        for bump in [delta, -delta] {
            for att in attempt(bump) {
                if let Some(ce) = accept(&g, theta, p, att, construction, delta, opts.seed, &site) {
                    return Ok(ce);
                }
            }
        }
        delta /= 2.0;
    }
    Err(Error::Construction(format!("{construction}: no valid perturbation at {site}")))
}

#[allow(clippy::too_many_arguments)]
fn accept(
    g: &GammaMatrix,
    theta: &ItemParams,
    p: &Proportions,
    att: Attempt,
    construction: Construction,
    delta: f64,
    seed: Option<u64>,
    site: &str,
) -> Option<Counterexample> {
    if att.p_bar.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return None;
    }
    let p_bar = Proportions::new(att.p_bar).ok()?;
    if !validate_params(&att.theta_bar, g).is_empty() {
        return None;
    }
    let distance = raw_gap(theta, p.as_slice(), &att.theta_bar, p_bar.as_slice()).ok()?;
    let param_gap = raw_param_gap(theta, p.as_slice(), &att.theta_bar, p_bar.as_slice());
    (distance <= GAP_TOL && param_gap >= delta / 2.0).then(|| Counterexample {
        construction,
        theta: theta.clone(),
        p: p.clone(),
        theta_bar: att.theta_bar,
        p_bar,
        distance,
        param_gap,
        delta,
        seed,
        site: site.to_string(),
    })
}

/// Item sets of the alternate parameters that differ from the original, for reports.
pub fn changed_items(ce: &Counterexample) -> Vec<usize> {
    let mask = (0..ce.theta.j())
        .filter(|&j| ce.theta.row(j).iter().zip(ce.theta_bar.row(j)).any(|(a, b)| (a - b).abs() > 0.0))
        .fold(0u64, |m, j| m | 1 << j);
    iter_bits(mask).map(|j| j + 1).collect()
}
