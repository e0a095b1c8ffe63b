//! Multi-start search for an alternate parameter set with the same distribution.
//!
//! Each restart pins one parameter (an item level or a class proportion) at its
//! original value plus or minus ε and minimizes the squared distribution gap over
//! the remaining parameters. The parametrization keeps every candidate inside the
//! Γ constraints, so the search is unconstrained. Finding nothing is evidence of
//! identifiability, not proof.

use super::{marginals, raw_gap, raw_param_gap};
use crate::conditions::SCHEMA;
use crate::error::{Error, Result};
use crate::gamma::{build_gamma, GammaMatrix};
use crate::models::{validate_params, ItemParams, Proportions};
use crate::par::{map_range, Execution};
use crate::qmatrix::QMatrix;
use crate::space::LatentClassSpace;
use crate::spec::ModelSpec;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const ORACLE_MAX_ITEMS: usize = 5;
pub const ORACLE_MAX_CLASSES: usize = 8;
const U_CLAMP: f64 = 20.0;
const SWEEPS: usize = 50;
const LM_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Required parameter separation of the alternate.
    pub epsilon: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Distribution gap below which an alternate counts as found.
    pub tol: f64,
    pub exec: Execution,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { epsilon: 0.05, restarts: 200, seed: 0, tol: 1e-8, exec: Execution::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleOutcome {
    FoundCounterexample,
    NoneFound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub outcome: OracleOutcome,
    /// Smallest distribution gap reached over all restarts.
    pub best_gap: f64,
    pub restarts: usize,
    /// Restart that produced the reported alternate.
    pub restart: Option<usize>,
    pub theta_bar: Option<ItemParams>,
    pub p_bar: Option<Proportions>,
    pub param_gap: Option<f64>,
    /// Parameter pinned in the reported restart.
    pub pinned: Option<String>,
    pub epsilon: f64,
    pub seed: u64,
    pub note: String,
}

impl OracleResult {
    pub fn found(&self) -> bool {
        self.outcome == OracleOutcome::FoundCounterexample
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).unwrap_or_default();
        if let Some(obj) = v.as_object_mut() {
            obj.insert("schema".into(), serde_json::json!(SCHEMA));
        }
        v
    }
}

/// Cells of one item grouped by level: an optional floor, free middle levels and an optional top.
struct ItemLayout {
    floor: Vec<usize>,
    mids: Vec<Vec<usize>>,
    top: Vec<usize>,
}

impl ItemLayout {
    fn new(g: &GammaMatrix, j: usize) -> Self {
        let zero = g.zero_index();
        let top = g.capable_set(j);
        let incapable: Vec<usize> = (0..g.m()).filter(|&a| !g.entry(j, a)).collect();
        if g.entry(j, zero) {
            return ItemLayout { floor: vec![], mids: incapable.into_iter().map(|a| vec![a]).collect(), top };
        }
        if g.models()[j].is_two_param() {
            return ItemLayout { floor: incapable, mids: vec![], top };
        }
        let mids = incapable.iter().filter(|&&a| a != zero).map(|&a| vec![a]).collect();
        ItemLayout { floor: vec![zero], mids, top }
    }

    /// Levels in order floor, middles, top; each as its cell list.
    fn levels(&self) -> Vec<&[usize]> {
        let mut out: Vec<&[usize]> = Vec::new();
        if !self.floor.is_empty() {
            out.push(&self.floor);
        }
        out.extend(self.mids.iter().map(|m| m.as_slice()));
        if !self.top.is_empty() {
            out.push(&self.top);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pin {
    Level { item: usize, level: usize, value: f64 },
    Proportion { class: usize, value: f64 },
}

struct Problem<'a> {
    g: &'a GammaMatrix,
    layouts: Vec<ItemLayout>,
    theta: &'a ItemParams,
    p: &'a Proportions,
    target: Vec<f64>,
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u.clamp(-U_CLAMP, U_CLAMP)).exp())
}

fn inv(x: f64, lo: f64, hi: f64) -> f64 {
    let t = ((x - lo) / (hi - lo)).clamp(1e-3, 1.0 - 1e-3);
    (t / (1.0 - t)).ln()
}

/// Either decodes free coordinates into values or encodes values into coordinates.
enum Mode<'x> {
    Decode(&'x [f64]),
    Encode(&'x mut Vec<f64>),
}

impl Problem<'_> {
    fn n_pinnable(&self) -> usize {
        self.layouts.iter().map(|l| l.levels().len()).sum::<usize>() + self.g.m()
    }

    fn pin(&self, index: usize, sign: f64, eps: f64) -> Option<(Pin, String)> {
        let mut i = index;
        for (j, l) in self.layouts.iter().enumerate() {
            let levels = l.levels();
            if i < levels.len() {
                let value = self.theta.get(j, levels[i][0]) + sign * eps;
                let label = format!("item {} level at profile {}", j + 1, self.g.profiles()[levels[i][0]]);
                return (value > 0.0 && value < 1.0).then_some((Pin::Level { item: j, level: i, value }, label));
            }
            i -= levels.len();
        }
        let value = self.p.as_slice()[i] + sign * eps;
        let label = format!("proportion of profile {}", self.g.profiles()[i]);
        (value > 0.0 && value < 1.0).then_some((Pin::Proportion { class: i, value }, label))
    }

    /// Walks every free coordinate in a fixed order. With `Decode` the values are
    /// written to the returned rows and proportions; with `Encode` the original
    /// parameters are mapped to coordinates.
    fn walk(&self, pin: Pin, mut mode: Mode) -> (Vec<Vec<f64>>, Vec<f64>) {
        let m = self.g.m();
        let mut rows = vec![vec![0.0; m]; self.layouts.len()];
        let mut cursor = 0;
        let mut level = |mode: &mut Mode, original: f64, lo: f64, hi: f64| -> f64 {
            match mode {
                Mode::Decode(x) => {
                    let v = lo + (hi - lo) * sigmoid(x[cursor]);
                    cursor += 1;
                    v
                }
                Mode::Encode(out) => {
                    out.push(inv(original, lo, hi));
                    original
                }
            }
        };
        for (j, l) in self.layouts.iter().enumerate() {
            let levels = l.levels();
            let pinned = match pin {
                Pin::Level { item, level, value } if item == j => Some((level, value)),
                _ => None,
            };
            let orig = |lv: usize| self.theta.get(j, levels[lv][0]);
            let has_floor = !l.floor.is_empty();
            let top_index = if l.top.is_empty() { None } else { Some(levels.len() - 1) };
            let mut values = vec![0.0; levels.len()];
            // floor
            let floor = if has_floor {
                let v = match pinned {
                    Some((0, v)) => v,
                    Some((_, v)) => level(&mut mode, orig(0), 0.0, v),
                    None => level(&mut mode, orig(0), 0.0, 1.0),
                };
                values[0] = v;
                v
            } else {
                0.0
            };
            // top
            let top = match top_index {
                Some(t) => {
                    let v = match pinned {
                        Some((lv, v)) if lv == t => v,
                        Some((lv, v)) if !(has_floor && lv == 0) => level(&mut mode, orig(t), v, 1.0),
                        _ => level(&mut mode, orig(t), floor, 1.0),
                    };
                    values[t] = v;
                    v
                }
                None => 1.0,
            };
            // middles
            let first_mid = usize::from(has_floor);
            for lv in first_mid..first_mid + l.mids.len() {
                values[lv] = match pinned {
                    Some((p, v)) if p == lv => v,
                    _ => level(&mut mode, orig(lv), floor, top),
                };
            }
            for (lv, cells) in levels.iter().enumerate() {
                for &a in cells.iter() {
                    rows[j][a] = values[lv];
                }
            }
        }
        // proportions: softmax over the free classes with the last free logit at 0
        let pinned_class = match pin {
            Pin::Proportion { class, value } => Some((class, value)),
            _ => None,
        };
        let free: Vec<usize> = (0..m).filter(|&a| pinned_class.map(|(c, _)| c != a).unwrap_or(true)).collect();
        let mass = pinned_class.map(|(_, v)| 1.0 - v).unwrap_or(1.0);
        let last = *free.last().expect("at least two classes");
        let mut logits = vec![0.0; m];
        for &a in &free[..free.len() - 1] {
            match &mut mode {
                Mode::Decode(x) => {
                    logits[a] = x[cursor].clamp(-50.0, 50.0);
                    cursor += 1;
                }
                Mode::Encode(out) => out.push((self.p.as_slice()[a] / self.p.as_slice()[last]).ln()),
            }
        }
        let top = free.iter().map(|&a| logits[a]).fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = free.iter().map(|&a| (logits[a] - top).exp()).sum();
        let mut p = vec![0.0; m];
        for &a in &free {
            p[a] = mass * (logits[a] - top).exp() / total;
        }
        if let Some((c, v)) = pinned_class {
            p[c] = v;
        }
        (rows, p)
    }

    fn encode(&self, pin: Pin) -> Vec<f64> {
        let mut out = Vec::new();
        self.walk(pin, Mode::Encode(&mut out));
        out
    }

    fn residuals(&self, pin: Pin, x: &[f64]) -> Vec<f64> {
        let (rows, p) = self.walk(pin, Mode::Decode(x));
        let theta = ItemParams::new(rows).expect("rows have equal length");
        let got = marginals(&theta, &p).expect("J within the guard");
        got.iter().zip(&self.target).skip(1).map(|(a, b)| a - b).collect()
    }

    fn objective(&self, pin: Pin, x: &[f64]) -> f64 {
        self.residuals(pin, x).iter().map(|r| r * r).sum()
    }
}

fn coordinate_descent(pr: &Problem, pin: Pin, x: &mut [f64]) -> f64 {
    let mut f = pr.objective(pin, x);
    let mut steps = vec![0.5; x.len()];
    for _ in 0..SWEEPS {
        let mut moved = false;
        for i in 0..x.len() {
            let orig = x[i];
            let mut best = (f, orig);
            for cand in [orig + steps[i], orig - steps[i]] {
                x[i] = cand;
                let fc = pr.objective(pin, x);
                if fc < best.0 {
                    best = (fc, cand);
                }
            }
            x[i] = best.1;
            if best.0 < f {
                f = best.0;
                moved = true;
            } else {
                steps[i] *= 0.5;
            }
        }
        if f < 1e-24 || (!moved && steps.iter().all(|&s| s < 1e-6)) {
            break;
        }
    }
    f
}

fn levenberg_marquardt(pr: &Problem, pin: Pin, x: &mut Vec<f64>) -> f64 {
    let n = x.len();
    let mut r = DVector::from_vec(pr.residuals(pin, x));
    let mut f = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..LM_ITERS {
        if f < 1e-26 || n == 0 {
            break;
        }
        let mut jac = DMatrix::zeros(r.len(), n);
        for i in 0..n {
            let h = 1e-7 * x[i].abs().max(1.0);
            let mut xp = x.clone();
            xp[i] += h;
            let rp = DVector::from_vec(pr.residuals(pin, &xp));
            jac.set_column(i, &((rp - &r) / h));
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&jtr))) else {
                lambda *= 4.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rn = DVector::from_vec(pr.residuals(pin, &xn));
            let fnew = rn.norm_squared();
            if fnew < f {
                *x = xn;
                r = rn;
                f = fnew;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    f
}

struct Attempt {
    gap: f64,
    found: bool,
    theta_bar: ItemParams,
    p_bar: Proportions,
    param_gap: f64,
    pinned: String,
}

fn restart(pr: &Problem, opts: &OracleOptions, r: usize) -> Option<Attempt> {
    let n = pr.n_pinnable();
    let sign = if (r / n) % 2 == 0 { 1.0 } else { -1.0 };
    let (pin, label) = pr.pin(r % n, sign, opts.epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(r as u64);
    let scale = 0.3 * (1 + r / (2 * n)) as f64;
    let mut x: Vec<f64> = pr.encode(pin).into_iter().map(|v| v + rng.random_range(-scale..scale)).collect();
    coordinate_descent(pr, pin, &mut x);
    levenberg_marquardt(pr, pin, &mut x);
    let (rows, p) = pr.walk(pin, Mode::Decode(&x));
    let theta_bar = ItemParams::new(rows).ok()?;
    let p_bar = Proportions::new(p).ok()?;
    let gap = raw_gap(pr.theta, pr.p.as_slice(), &theta_bar, p_bar.as_slice()).ok()?;
    let param_gap = raw_param_gap(pr.theta, pr.p.as_slice(), &theta_bar, p_bar.as_slice());
    let found = gap < opts.tol && param_gap >= opts.epsilon - 1e-12 && validate_params(&theta_bar, pr.g).is_empty();
    Some(Attempt { gap, found, theta_bar, p_bar, param_gap, pinned: label })
}

/// Searches for valid (Θ̄, p̄) with distribution gap below `opts.tol` and parameter
/// distance at least ε from (Θ, p). Restart r pins parameter r mod n at its
/// original value plus ε (minus ε on alternate passes) and uses random stream r
/// of the master seed. The earliest successful restart is reported.
pub fn brute_force_oracle(
    q: &QMatrix,
    space: &LatentClassSpace,
    spec: &ModelSpec,
    theta: &ItemParams,
    p: &Proportions,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    if q.j() > ORACLE_MAX_ITEMS || space.len() > ORACLE_MAX_CLASSES {
        return Err(Error::SizeGuard(format!(
            "the oracle supports J ≤ {ORACLE_MAX_ITEMS} and m ≤ {ORACLE_MAX_CLASSES}; got J = {} and m = {}",
            q.j(),
            space.len()
        )));
    }
    if !(opts.epsilon > 0.0) {
        return Err(Error::Argument("ε must be positive".into()));
    }
    if space.len() < 2 {
        return Err(Error::Argument("the oracle needs at least two latent classes".into()));
    }
    let g = build_gamma(q, space, spec)?;
    if theta.j() != g.j() || theta.m() != g.m() || p.len() != g.m() {
        return Err(Error::Dimension("parameters do not match Q and the class space".into()));
    }
    if let Some(v) = validate_params(theta, &g).first() {
        return Err(Error::Argument(format!("original parameters violate {} at item {}, profile {}", v.rule, v.item, v.profile)));
    }
    let layouts = (0..g.j()).map(|j| ItemLayout::new(&g, j)).collect();
    let target = marginals(theta, p.as_slice())?;
    let pr = Problem { g: &g, layouts, theta, p, target };
    let attempts = map_range(opts.exec, opts.restarts, |r| restart(&pr, opts, r));
    let best_gap = attempts.iter().flatten().map(|a| a.gap).fold(f64::INFINITY, f64::min);
    let note = "none_found is evidence of identifiability, not proof: the search is local and non-convex".to_string();
    let found = attempts.into_iter().enumerate().find_map(|(r, a)| a.filter(|a| a.found).map(|a| (r, a)));
    Ok(match found {
        Some((r, a)) => OracleResult {
            outcome: OracleOutcome::FoundCounterexample,
            best_gap,
            restarts: opts.restarts,
            restart: Some(r),
            theta_bar: Some(a.theta_bar),
            p_bar: Some(a.p_bar),
            param_gap: Some(a.param_gap),
            pinned: Some(a.pinned),
            epsilon: opts.epsilon,
            seed: opts.seed,
            note,
        },
        None => OracleResult {
            outcome: OracleOutcome::NoneFound,
            best_gap,
            restarts: opts.restarts,
            restart: None,
            theta_bar: None,
            p_bar: None,
            param_gap: None,
            pinned: None,
            epsilon: opts.epsilon,
            seed: opts.seed,
            note,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::default_params;
    use crate::spec::ItemModel;

    fn setup(rows: Vec<Vec<u8>>, spec: &ModelSpec) -> (QMatrix, LatentClassSpace, ItemParams, Proportions) {
        let q = QMatrix::new(rows).unwrap();
        let space = LatentClassSpace::saturated(q.k()).unwrap();
        let theta = default_params(&q, &space, spec).unwrap();
        let p = Proportions::uniform(space.len());
        (q, space, theta, p)
    }

    #[test]
    fn encode_then_decode_is_identity() {
        let spec = ModelSpec::from_items(vec![ItemModel::MultiParam, ItemModel::TwoParamConj, ItemModel::MultiParam]);
        let (q, space, theta, p) = setup(vec![vec![1, 1], vec![0, 1], vec![1, 1]], &spec);
        let g = build_gamma(&q, &space, &spec).unwrap();
        let layouts = (0..3).map(|j| ItemLayout::new(&g, j)).collect();
        let target = marginals(&theta, p.as_slice()).unwrap();
        let pr = Problem { g: &g, layouts, theta: &theta, p: &p, target };
        let pin = Pin::Proportion { class: 0, value: 0.25 };
        let x = pr.encode(pin);
        let (rows, pp) = pr.walk(pin, Mode::Decode(&x));
        let back = ItemParams::new(rows).unwrap();
        assert!(back.max_abs_diff(&theta) < 1e-12);
        assert!(pp.iter().zip(p.as_slice()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn guards() {
        let spec = ModelSpec::conj(6);
        let (q, space, theta, p) = setup(vec![vec![1]; 6], &spec);
        assert!(matches!(brute_force_oracle(&q, &space, &spec, &theta, &p, &OracleOptions::default()), Err(Error::SizeGuard(_))));
        let spec = ModelSpec::conj(2);
        let (q, space, theta, p) = setup(vec![vec![1]; 2], &spec);
        let opts = OracleOptions { epsilon: 0.0, ..OracleOptions::default() };
        assert!(matches!(brute_force_oracle(&q, &space, &spec, &theta, &p, &opts), Err(Error::Argument(_))));
    }

    #[test]
    fn attribute_measured_once() {
        let spec = ModelSpec::conj(3);
        let (q, space, theta, p) = setup(vec![vec![1, 0], vec![0, 1], vec![0, 1]], &spec);
        let opts = OracleOptions { restarts: 40, ..OracleOptions::default() };
        let r = brute_force_oracle(&q, &space, &spec, &theta, &p, &opts).unwrap();
        assert!(r.found(), "best gap {}", r.best_gap);
        assert!(r.best_gap < 1e-8);
    }
}
