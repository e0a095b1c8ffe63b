//! EM estimation for two-parameter models over the equivalence classes of Γ.

use super::simulate::Dataset;
use crate::conditions::SCHEMA;
use crate::error::{Error, Result};
use crate::gamma::{build_gamma, equivalence_partition};
use crate::par::{map_chunks, map_range, Execution};
use crate::profile::Profile;
use crate::qmatrix::QMatrix;
use crate::space::LatentClassSpace;
use crate::spec::ModelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const CLAMP: f64 = 1e-4;
/// Distinct response patterns per E-step chunk.
const PATTERN_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    pub init_plus: f64,
    pub init_minus: f64,
    pub exec: Execution,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { tol: 1e-7, max_iter: 2000, restarts: 5, seed: 0, init_plus: 0.75, init_minus: 0.25, exec: Execution::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmFit {
    pub theta_plus: Vec<f64>,
    pub theta_minus: Vec<f64>,
    /// Grouped proportions, one per equivalence class.
    pub nu: Vec<f64>,
    pub representatives: Vec<Profile>,
    pub loglik: f64,
    pub loglik_trace: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    pub restart: usize,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl EmFit {
    pub fn to_json(&self) -> serde_json::Value {
        let mut nu = serde_json::Map::new();
        for (r, v) in self.representatives.iter().zip(&self.nu) {
            nu.insert(r.to_string(), serde_json::json!(v));
        }
        serde_json::json!({
            "schema": SCHEMA,
            "theta_plus": self.theta_plus,
            "theta_minus": self.theta_minus,
            "nu": nu,
            "loglik": self.loglik,
            "iters": self.iters,
            "converged": self.converged,
            "seed": self.seed,
            "warnings": self.warnings,
        })
    }
}

struct Problem {
    j: usize,
    /// Γ column of each class.
    cols: Vec<u64>,
    patterns: Vec<(u64, u64)>,
    n: f64,
}

struct State {
    plus: Vec<f64>,
    minus: Vec<f64>,
    nu: Vec<f64>,
}

/// Partial sums over a chunk of patterns: loglik, posterior mass per class and
/// per (class, item) positive responses.
struct Partial {
    loglik: f64,
    mass: Vec<f64>,
    positive: Vec<f64>,
}

fn e_chunk(pr: &Problem, st: &State, chunk: &[(u64, u64)]) -> Partial {
    let c = pr.cols.len();
    let mut out = Partial { loglik: 0.0, mass: vec![0.0; c], positive: vec![0.0; c * pr.j] };
    let log_nu: Vec<f64> = st.nu.iter().map(|v| v.ln()).collect();
    let mut logf = vec![0.0; c];
    for &(r, count) in chunk {
        for (ci, &col) in pr.cols.iter().enumerate() {
            let mut s = log_nu[ci];
            for j in 0..pr.j {
                let t = if col >> j & 1 == 1 { st.plus[j] } else { st.minus[j] };
                s += if r >> j & 1 == 1 { t.ln() } else { (1.0 - t).ln() };
            }
            logf[ci] = s;
        }
        let top = logf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logf.iter().map(|x| (x - top).exp()).sum();
        let lse = top + total.ln();
        let w = count as f64;
        out.loglik += w * lse;
        for ci in 0..c {
            let post = w * (logf[ci] - lse).exp();
            out.mass[ci] += post;
            for j in 0..pr.j {
                if r >> j & 1 == 1 {
                    out.positive[ci * pr.j + j] += post;
                }
            }
        }
    }
    out
}

fn e_step(pr: &Problem, st: &State, exec: Execution) -> Partial {
    let parts = map_chunks(exec, &pr.patterns, PATTERN_CHUNK, |ch| e_chunk(pr, st, ch));
    let c = pr.cols.len();
    let mut acc = Partial { loglik: 0.0, mass: vec![0.0; c], positive: vec![0.0; c * pr.j] };
    for p in parts {
        acc.loglik += p.loglik;
        for (a, b) in acc.mass.iter_mut().zip(&p.mass) {
            *a += b;
        }
        for (a, b) in acc.positive.iter_mut().zip(&p.positive) {
            *a += b;
        }
    }
    acc
}

fn m_step(pr: &Problem, st: &mut State, e: &Partial, warnings: &mut Vec<String>) {
    for j in 0..pr.j {
        let (mut np, mut dp, mut nm, mut dm) = (0.0, 0.0, 0.0, 0.0);
        for (ci, &col) in pr.cols.iter().enumerate() {
            let pos = e.positive[ci * pr.j + j];
            if col >> j & 1 == 1 {
                np += pos;
                dp += e.mass[ci];
            } else {
                nm += pos;
                dm += e.mass[ci];
            }
        }
        if dp > 0.0 {
            st.plus[j] = (np / dp).clamp(CLAMP, 1.0 - CLAMP);
        }
        if dm > 0.0 {
            st.minus[j] = (nm / dm).clamp(CLAMP, 1.0 - CLAMP);
        }
        if st.plus[j] < st.minus[j] {
            std::mem::swap(&mut st.plus[j], &mut st.minus[j]);
            let msg = format!("item {}: estimated θ⁺ below θ⁻, swapped", j + 1);
            log::warn!("{msg}");
            if !warnings.contains(&msg) {
                warnings.push(msg);
            }
        }
    }
    for (v, &mass) in st.nu.iter_mut().zip(&e.mass) {
        *v = (mass / pr.n).max(f64::MIN_POSITIVE);
    }
}

struct Run {
    state: State,
    trace: Vec<f64>,
    converged: bool,
    warnings: Vec<String>,
}

fn run(pr: &Problem, mut st: State, opts: &EmOptions) -> Run {
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let e = e_step(pr, &st, opts.exec);
        let prev = trace.last().copied();
        trace.push(e.loglik);
        if let Some(prev) = prev {
            if (e.loglik - prev).abs() <= opts.tol * prev.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        m_step(pr, &mut st, &e, &mut warnings);
    }
    Run { state: st, trace, converged, warnings }
}

fn initial(pr: &Problem, opts: &EmOptions, restart: usize) -> State {
    let c = pr.cols.len();
    if restart == 0 {
        return State { plus: vec![opts.init_plus; pr.j], minus: vec![opts.init_minus; pr.j], nu: vec![1.0 / c as f64; c] };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(restart as u64);
    let plus = (0..pr.j).map(|_| rng.random_range(0.6..0.9)).collect();
    let minus = (0..pr.j).map(|_| rng.random_range(0.1..0.4)).collect();
    let w: Vec<f64> = (0..c).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = w.iter().sum();
    State { plus, minus, nu: w.iter().map(|x| x / total).collect() }
}

/// Fits (θ⁺, θ⁻, ν) by EM. Restart 0 starts from the configured values; the
/// others start from seeded random values. The fit with the highest final
/// log-likelihood is returned; ties go to the earliest restart.
pub fn fit_em_two_param(data: &Dataset, q: &QMatrix, space: &LatentClassSpace, spec: &ModelSpec, opts: &EmOptions) -> Result<EmFit> {
    if !spec.all_two_param() {
        return Err(Error::Precondition("EM estimation needs two-parameter items only".into()));
    }
    if data.is_empty() {
        return Err(Error::Argument("dataset is empty".into()));
    }
    if data.j() != q.j() {
        return Err(Error::Dimension(format!("dataset has {} items but Q has {}", data.j(), q.j())));
    }
    let g = build_gamma(q, space, spec)?;
    let part = equivalence_partition(&g);
    let cols: Vec<u64> = part.classes.iter().map(|c| g.column(c[0])).collect();
    let pr = Problem { j: q.j(), cols, patterns: data.pattern_counts(), n: data.len() as f64 };
    let restarts = opts.restarts.max(1);
    let runs = map_range(opts.exec, restarts, |r| run(&pr, initial(&pr, opts, r), opts));
    let (best, chosen) = runs
        .into_iter()
        .enumerate()
        .reduce(|a, b| if b.1.trace.last() > a.1.trace.last() { b } else { a })
        .expect("at least one restart");
    let mut warnings = chosen.warnings;
    if data.len() < 2 {
        warnings.push("fewer than two observations: the fit is degenerate".into());
        log::warn!("EM on {} observation(s) gives a degenerate fit", data.len());
    }
    Ok(EmFit {
        theta_plus: chosen.state.plus,
        theta_minus: chosen.state.minus,
        nu: chosen.state.nu,
        representatives: part.representatives,
        loglik: chosen.trace.last().copied().unwrap_or(f64::NEG_INFINITY),
        iters: chosen.trace.len(),
        loglik_trace: chosen.trace,
        converged: chosen.converged,
        restart: best,
        seed: opts.seed,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate, ItemParams, Proportions};

    #[test]
    fn rejects_bad_inputs() {
        let q = QMatrix::new(vec![vec![1]]).unwrap();
        let space = LatentClassSpace::saturated(1).unwrap();
        let empty = Dataset::new(1, vec![]).unwrap();
        assert!(fit_em_two_param(&empty, &q, &space, &ModelSpec::conj(1), &EmOptions::default()).is_err());
        let one = Dataset::new(1, vec![1]).unwrap();
        assert!(fit_em_two_param(&one, &q, &space, &ModelSpec::multi(1), &EmOptions::default()).is_err());
        let fit = fit_em_two_param(&one, &q, &space, &ModelSpec::conj(1), &EmOptions::default()).unwrap();
        assert!(!fit.warnings.is_empty());
    }

    #[test]
    fn execution_mode_does_not_change_the_fit() {
        let q = QMatrix::new(vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, 0], vec![0, 1]]).unwrap();
        let space = LatentClassSpace::saturated(2).unwrap();
        let spec = ModelSpec::conj(5);
        let g = build_gamma(&q, &space, &spec).unwrap();
        let t = ItemParams::two_param(&g, &[0.8; 5], &[0.2; 5]).unwrap();
        let data = simulate(&t, &Proportions::uniform(4), 3000, 11).unwrap();
        let seq = EmOptions { exec: Execution::Sequential, ..EmOptions::default() };
        let par = EmOptions { exec: Execution::Parallel, ..EmOptions::default() };
        let a = fit_em_two_param(&data, &q, &space, &spec, &seq).unwrap();
        let b = fit_em_two_param(&data, &q, &space, &spec, &par).unwrap();
        assert_eq!(a, b);
    }
}
