//! The decision procedure: builds Γ, runs the conditions for the model class and
//! attaches a verified counterexample to negative verdicts.

use super::generic::{check_c5_c6, check_mixed_e1, check_mixed_e2, check_thm8};
use super::multi::{check_c3_c4, check_c3star_c4star, check_generic_alteration};
use super::report::{ConditionId, ConditionReport, Level, SearchBudget, Status, Witness, SCHEMA};
use super::twoparam::{
    check_c1, check_c1_star, check_c2, check_c2_star, check_complete_q_fastpath, check_thm2_fallback, check_thm3_necessity,
    check_thm3_necessity_q, classify_items, classify_items_q,
};
use crate::bits::{to_numbers, ItemMask};
use crate::error::Result;
use crate::gamma::{build_gamma, equivalence_partition, GammaMatrix};
use crate::models::{default_params, Proportions};
use crate::qmatrix::QMatrix;
use crate::space::LatentClassSpace;
use crate::spec::{ItemModel, ModelSpec};
use crate::tmatrix::{construct_counterexample, verify_counterexample, Construction, Counterexample, CounterexampleOptions};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecideOptions {
    pub budget: SearchBudget,
    /// Responses are polytomous and analysed through their two-parameter reduction.
    pub categorical: bool,
    /// Build and verify counterexamples for negative verdicts.
    pub construct: bool,
}

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions { budget: SearchBudget::default(), categorical: false, construct: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub level: Level,
    /// A negative verdict backed by a verified counterexample.
    pub definitive: bool,
    /// Number of equivalence classes of Γ.
    pub classes: usize,
    pub separable: bool,
    pub trace: Vec<ConditionReport>,
    pub counterexample: Option<Counterexample>,
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        self.level.exit_code()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": SCHEMA,
            "level": self.level,
            "definitive": self.definitive,
            "classes": self.classes,
            "separable": self.separable,
            "conditions": self.trace,
            "counterexample": self.counterexample.as_ref().map(|c| c.to_json()),
        })
    }
}

/// A construction to try, with its target (attribute, item or class, 0-based).
type Candidate = (Construction, Option<usize>);

struct Outcome {
    level: Level,
    trace: Vec<ConditionReport>,
    /// Constructions that would back a negative verdict, in order of preference.
    candidates: Vec<Candidate>,
    /// The negative verdict rests on a theorem rather than on the construction alone.
    proven: bool,
}

impl Outcome {
    fn new() -> Self {
        Outcome { level: Level::Undetermined, trace: Vec::new(), candidates: Vec::new(), proven: false }
    }

    fn negative(&mut self, candidates: Vec<Candidate>) {
        self.level = Level::NotIdentifiable;
        self.proven = true;
        self.candidates = candidates;
    }
}

fn positive(separable: bool) -> Level {
    if separable {
        Level::Strict
    } else {
        Level::PPartial
    }
}

pub fn decide(q: &QMatrix, space: &LatentClassSpace, spec: &ModelSpec, budget: &SearchBudget) -> Result<Verdict> {
    decide_with(q, space, spec, &DecideOptions { budget: *budget, ..DecideOptions::default() })
}

/// Runs the decision procedure. All-disjunctive models over the saturated space
/// are analysed through their conjunctive dual; counterexamples are always built
/// for the model as given.
pub fn decide_with(q: &QMatrix, space: &LatentClassSpace, spec: &ModelSpec, opts: &DecideOptions) -> Result<Verdict> {
    let g = build_gamma(q, space, spec)?;
    let part = equivalence_partition(&g);
    let separable = part.len() == g.m();
    let mut head = vec![separability_report(separable, part.len())];
    if opts.categorical {
        head.push(
            ConditionReport::satisfied(ConditionId::Categorical, Witness::None)
                .with_note("polytomous responses: the verdict of the two-parameter reduction applies"),
        );
    }
    let budget = &opts.budget;
    let dual = space.is_saturated() && spec.all(ItemModel::TwoParamDisj);
    let route_spec = if dual { ModelSpec::conj(q.j()) } else { spec.clone() };
    let mut out = if spec.all_two_param() {
        let route_g = if dual { build_gamma(q, space, &route_spec)? } else { g.clone() };
        if dual {
            head.push(
                ConditionReport::satisfied(ConditionId::Duality, Witness::None)
                    .with_note("all items disjunctive: analysed through the conjunctive dual"),
            );
        }
        let saturated_conj = space.is_saturated() && route_spec.all(ItemModel::TwoParamConj);
        let mut out = if saturated_conj { q_route(q, budget, separable) } else { Outcome::new() };
        if out.level == Level::Undetermined {
            gamma_route(&mut out, q, space, &route_spec, &route_g, separable, opts)?;
        }
        out
    } else if spec.all_multi() {
        multi_route(q, space, &g, separable, budget)?
    } else {
        mixed_route(q, space, spec, &g, separable, budget)?
    };
    head.append(&mut out.trace);
    let mut verdict =
        Verdict { level: out.level, definitive: false, classes: part.len(), separable, trace: head, counterexample: None };
    if out.level == Level::NotIdentifiable && opts.construct {
        match first_counterexample(q, space, spec, &g, &out.candidates) {
            Some(ce) => {
                verdict.definitive = true;
                verdict.counterexample = Some(ce);
            }
            None => verdict.trace.push(
                ConditionReport::undetermined(ConditionId::Thm3, Witness::None)
                    .with_note("no construction verified for the model as given; the negative verdict is not definitive"),
            ),
        }
    }
    if !out.proven && verdict.level == Level::NotIdentifiable && !verdict.definitive {
        verdict.level = Level::Undetermined;
    }
    Ok(verdict)
}

fn separability_report(separable: bool, classes: usize) -> ConditionReport {
    let note = format!("{classes} equivalence classes");
    if separable {
        ConditionReport::satisfied(ConditionId::Separability, Witness::None).with_note(note)
    } else {
        ConditionReport::violated(ConditionId::Separability, Witness::None).with_note(note)
    }
}

fn first_counterexample(
    q: &QMatrix,
    space: &LatentClassSpace,
    spec: &ModelSpec,
    g: &GammaMatrix,
    candidates: &[Candidate],
) -> Option<Counterexample> {
    let theta = default_params(q, space, spec).ok()?;
    let p = Proportions::uniform(space.len());
    candidates.iter().find_map(|&(c, target)| {
        let opts = CounterexampleOptions { target, ..CounterexampleOptions::default() };
        let ce = construct_counterexample(q, space, spec, &theta, &p, c, &opts).ok()?;
        verify_counterexample(&ce, g).ok()?.then_some(ce)
    })
}

fn failure_item(r: &ConditionReport) -> Option<usize> {
    match &r.witness {
        Witness::Failure { item: Some(j), .. } => Some(j - 1),
        _ => None,
    }
}

/// Conjunctive items over the saturated space, in Q-form.
fn q_route(q: &QMatrix, budget: &SearchBudget, separable: bool) -> Outcome {
    let mut out = Outcome::new();
    let counts = q.column_counts();
    let cls = classify_items_q(q);
    out.trace.push(cls.report());
    if let Some(k) = counts.iter().position(|&c| c == 1) {
        if let Ok(r) = check_thm2_fallback(q, k, budget) {
            out.trace.push(r);
        }
        out.negative(vec![(Construction::Thm2a, Some(k))]);
        return out;
    }
    let c1 = check_c1_star(q, budget);
    let c1_ok = c1.is_satisfied();
    out.trace.push(c1);
    if c1_ok {
        let c2 = check_c2_star(q, &cls, budget);
        let status = c2.status;
        out.trace.push(c2);
        if status == Status::Satisfied {
            out.level = positive(separable);
        }
    } else {
        let pairs: Vec<usize> = (0..q.k()).filter(|&k| counts[k] == 2).collect();
        let mut all_ok = !pairs.is_empty();
        for &k in &pairs {
            let Ok(r) = check_thm2_fallback(q, k, budget) else { continue };
            let (violated, ok) = (r.is_violated() && r.definitive, r.is_satisfied());
            out.trace.push(r);
            if violated {
                out.negative(vec![(Construction::Thm2b1, Some(k))]);
                return out;
            }
            all_ok &= ok;
        }
        if all_ok {
            if pairs.len() > 1 {
                out.trace.push(
                    ConditionReport::satisfied(ConditionId::Thm2Case, Witness::None).with_note(format!(
                        "extension: each of attributes {:?} is required by two items and passes on its own",
                        pairs.iter().map(|k| k + 1).collect::<Vec<_>>()
                    )),
                );
            }
            out.level = positive(separable);
        }
    }
    if out.level == Level::Undetermined {
        let t3 = check_thm3_necessity_q(q, &cls, budget);
        let item = failure_item(&t3);
        let violated = t3.is_violated();
        out.trace.push(t3);
        if violated {
            out.negative(vec![(Construction::Thm3, item)]);
        }
    }
    if q.is_complete() {
        if let Ok(fast) = check_complete_q_fastpath(q) {
            let (ok, bad) = (fast.is_satisfied(), fast.is_violated());
            out.trace.push(fast);
            if ok && out.level != Level::NotIdentifiable {
                out.level = Level::Strict;
            } else if bad && out.level == Level::Undetermined {
                out.negative(vec![(Construction::Thm2a, None), (Construction::Thm2b1, None), (Construction::Thm3, None)]);
            }
        }
    }
    out
}

/// Adjustment sets in search order: ∅, single items, all disjunctive items, then
/// the remaining sets in ascending bitmask order, up to `max_adjustments` in total.
fn adjustment_sets(g: &GammaMatrix, spec: &ModelSpec, max: usize) -> Vec<ItemMask> {
    let j = g.j();
    let disj: ItemMask = (0..j).filter(|&i| spec.items[i] == ItemModel::TwoParamDisj).fold(0, |m, i| m | 1 << i);
    let mut out = vec![0];
    out.extend((0..j).map(|i| 1u64 << i));
    if disj != 0 && disj.count_ones() > 1 {
        out.push(disj);
    }
    let mut s: u64 = 1;
    while out.len() < max && (j == 64 || s < 1u64 << j) {
        if s.count_ones() > 1 && s != disj {
            out.push(s);
        }
        s += 1;
    }
    out.truncate(max.max(1));
    out
}

/// Γ-level conditions with adjustment attempts, then the necessity check and the
/// attribute-once construction.
fn gamma_route(
    out: &mut Outcome,
    q: &QMatrix,
    space: &LatentClassSpace,
    spec: &ModelSpec,
    g: &GammaMatrix,
    separable: bool,
    opts: &DecideOptions,
) -> Result<()> {
    let budget = &opts.budget;
    let mixed = spec.items.contains(&ItemModel::TwoParamConj) && spec.items.contains(&ItemModel::TwoParamDisj);
    if mixed {
        let e1 = check_mixed_e1(q, spec, space, budget)?;
        let ok = e1.is_satisfied();
        out.trace.push(e1);
        if ok {
            out.level = positive(separable);
            return Ok(());
        }
    }
    let mut first: Option<(ConditionReport, ConditionReport)> = None;
    for s in adjustment_sets(g, spec, budget.max_adjustments) {
        let ga = g.adjust(s);
        let c1 = check_c1(&ga, budget);
        let c2 = if c1.is_satisfied() { Some(check_c2(&ga, &classify_items(&ga), budget)) } else { None };
        let ok = c2.as_ref().is_some_and(|r| r.is_satisfied());
        if ok {
            if s != 0 {
                out.trace.push(ConditionReport::satisfied(ConditionId::Adjustment, Witness::Adjustment { adjusted: to_numbers(s) }));
            }
            out.trace.push(c1);
            out.trace.extend(c2);
            out.level = positive(separable);
            return Ok(());
        }
        if first.is_none() {
            let c2 = c2.unwrap_or_else(|| ConditionReport::undetermined(ConditionId::C2, Witness::None).with_note("not reached"));
            first = Some((c1, c2));
        }
    }
    if let Some((c1, c2)) = first {
        out.trace.push(c1.with_note("no adjustment set satisfied both conditions"));
        out.trace.push(c2);
    }
    let t3 = check_thm3_necessity(g, &classify_items(g), budget);
    let item = failure_item(&t3);
    let violated = t3.is_violated();
    out.trace.push(t3);
    if violated {
        out.negative(vec![(Construction::Thm3, item)]);
        return Ok(());
    }
    if opts.construct && first_counterexample(q, space, spec, g, &[(Construction::Thm2a, None)]).is_some() {
        out.negative(vec![(Construction::Thm2a, None)]);
    }
    Ok(())
}

fn multi_route(q: &QMatrix, space: &LatentClassSpace, g: &GammaMatrix, separable: bool, budget: &SearchBudget) -> Result<Outcome> {
    let mut out = Outcome::new();
    if separable {
        let r = check_c3_c4(g, budget, None)?;
        let ok = r.is_satisfied();
        out.trace.push(r);
        if ok {
            out.level = Level::Strict;
            return Ok(out);
        }
        let r = check_c3star_c4star(g, budget);
        let ok = r.is_satisfied();
        out.trace.push(r);
        if ok {
            out.level = Level::Strict;
            return Ok(out);
        }
    }
    if space.is_saturated() {
        let r = check_c5_c6(q, budget);
        let ok = r.is_satisfied();
        out.trace.push(r);
        if ok {
            out.level = Level::Generic;
            return Ok(out);
        }
        let counts = q.column_counts();
        if let Some(k) = counts.iter().position(|&c| c == 1) {
            out.trace.push(check_thm8(q, k, budget)?);
            out.negative(vec![(Construction::Thm8a, Some(k))]);
            return Ok(out);
        }
        let pairs: Vec<usize> = (0..q.k()).filter(|&k| counts[k] == 2).collect();
        let mut all_ok = !pairs.is_empty();
        for &k in &pairs {
            let r = check_thm8(q, k, budget)?;
            all_ok &= r.is_satisfied();
            out.trace.push(r);
        }
        if all_ok {
            out.level = Level::Generic;
            return Ok(out);
        }
    }
    let r = check_generic_alteration(g, budget, None)?;
    let ok = r.is_satisfied();
    out.trace.push(r);
    if ok {
        out.level = Level::Generic;
    }
    Ok(out)
}

fn mixed_route(
    q: &QMatrix,
    space: &LatentClassSpace,
    spec: &ModelSpec,
    g: &GammaMatrix,
    separable: bool,
    budget: &SearchBudget,
) -> Result<Outcome> {
    let mut out = Outcome::new();
    if separable {
        for r in [check_c3_c4(g, budget, None)?, check_c3star_c4star(g, budget)] {
            let ok = r.is_satisfied();
            out.trace.push(r);
            if ok {
                out.level = Level::Strict;
                return Ok(out);
            }
        }
    }
    let r = check_mixed_e2(q, spec, space, budget)?;
    let ok = r.is_satisfied();
    out.trace.push(r);
    if ok {
        out.level = Level::Generic;
    }
    Ok(out)
}

/// Items whose capable sets are flipped by the adjustment in a report, if any.
pub fn adjusted_items(v: &Verdict) -> Option<ItemMask> {
    v.trace.iter().find_map(|r| match &r.witness {
        Witness::Adjustment { adjusted } if r.id == ConditionId::Adjustment => {
            Some(adjusted.iter().fold(0u64, |m, &j| m | 1 << (j - 1)))
        }
        _ => None,
    })
}
