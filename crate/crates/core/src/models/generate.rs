//! Random parameters for the two-parameter and multi-parameter item families.

use super::params::{ItemParams, Proportions};
use crate::bits::iter_bits;
use crate::error::{Error, Result};
use crate::gamma::build_gamma;
use crate::qmatrix::QMatrix;
use crate::space::LatentClassSpace;
use crate::spec::{ItemModel, ModelSpec, MultiFamily};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LOW: (f64, f64) = (0.05, 0.3);
const HIGH: (f64, f64) = (0.7, 0.95);
const FLOOR: f64 = 0.05;

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// θ of a main-effect item at `alpha`. `effects[k]` is the coefficient of
/// attribute k and is ignored unless q has bit k; the link is inverted on the sum.
pub fn main_effect_theta(family: MultiFamily, q: u32, intercept: f64, effects: &[f64], alpha: u32) -> f64 {
    let eta = intercept + iter_bits((q & alpha) as u64).map(|k| effects[k]).sum::<f64>();
    match family {
        MultiFamily::MainEffectLogit => logistic(eta),
        MultiFamily::MainEffectLog => eta.exp(),
        _ => eta,
    }
}

/// θ of an all-effect item at `alpha`: the sum of β_S over attribute sets S ⊆ q ∧ α.
/// `effects` lists (S, β_S) with S as a bit pattern; the empty set is the intercept.
pub fn all_effect_theta(q: u32, effects: &[(u32, f64)], alpha: u32) -> f64 {
    let held = q & alpha;
    effects.iter().filter(|(s, _)| s & !held == 0 && s & !q == 0).map(|(_, b)| b).sum()
}

/// Reduced-model θ: `high` when α masters every required attribute, `low` otherwise.
pub fn dina_theta(q: u32, slip: f64, guess: f64, alpha: u32) -> f64 {
    if alpha & q == q {
        1.0 - slip
    } else {
        guess
    }
}

fn multi_row<R: Rng>(rng: &mut R, family: MultiFamily, q: u32, k: usize, profiles: &[u32]) -> Vec<f64> {
    let low = rng.random_range(LOW.0..LOW.1);
    let high = rng.random_range(HIGH.0..HIGH.1);
    let attrs: Vec<usize> = iter_bits(q as u64).collect();
    match family {
        MultiFamily::MainEffectIdentity | MultiFamily::MainEffectLogit => {
            let mut effects = vec![0.0; k];
            for &a in &attrs {
                effects[a] = rng.random_range(0.1..1.0);
            }
            let total: f64 = effects.iter().sum();
            let (lo, hi) = if family == MultiFamily::MainEffectLogit { (logit(low), logit(high)) } else { (low, high) };
            let scaled: Vec<f64> = effects.iter().map(|b| b * (hi - lo) / total).collect();
            profiles.iter().map(|&a| main_effect_theta(family, q, lo, &scaled, a)).collect()
        }
        MultiFamily::MainEffectLog => {
            let mut ratios = vec![1.0; k];
            for &a in &attrs {
                ratios[a] = rng.random_range(0.3..0.9);
            }
            let product: f64 = attrs.iter().map(|&a| ratios[a]).product();
            if high * product < FLOOR {
                let power = (FLOOR / high).ln() / product.ln();
                for &a in &attrs {
                    ratios[a] = ratios[a].powf(power);
                }
            }
            // log θ = log θ⁺ + Σ_k (1 - α_k) log r_k, written as a main-effect sum
            let logs: Vec<f64> = ratios.iter().map(|r| -r.ln()).collect();
            let intercept = high.ln() - attrs.iter().map(|&a| logs[a]).sum::<f64>();
            profiles.iter().map(|&a| main_effect_theta(family, q, intercept, &logs, a)).collect()
        }
        MultiFamily::AllEffect => {
            let mut effects: Vec<(u32, f64)> = Vec::new();
            for s in 1..=q {
                if s & !q == 0 {
                    let beta = if s.count_ones() == 1 { rng.random_range(0.1..1.0) } else { rng.random_range(0.0..0.5) };
                    effects.push((s, beta));
                }
            }
            let total: f64 = effects.iter().map(|(_, b)| b).sum();
            let mut scaled: Vec<(u32, f64)> = effects.iter().map(|&(s, b)| (s, b * (high - low) / total)).collect();
            scaled.push((0, low));
            profiles.iter().map(|&a| all_effect_theta(q, &scaled, a)).collect()
        }
    }
}

/// Draws valid item parameters. Two-parameter items get slipping and guessing
/// uniform on [0.05, 0.3]; multi-parameter items follow `family` (or the spec's
/// family, defaulting to all effects) with θ between U[0.05, 0.3] and U[0.7, 0.95].
pub fn generate_params(
    q: &QMatrix,
    space: &LatentClassSpace,
    spec: &ModelSpec,
    family: Option<MultiFamily>,
    seed: u64,
) -> Result<ItemParams> {
    let g = build_gamma(q, space, spec)?;
    let has_multi = spec.items.iter().any(|m| *m == ItemModel::MultiParam);
    if family.is_some() && !has_multi {
        return Err(Error::Argument("a multi-parameter family needs at least one multi-parameter item".into()));
    }
    let family = family.or(spec.multi_family).unwrap_or(MultiFamily::AllEffect);
    let profiles: Vec<u32> = space.profiles().iter().map(|p| p.bits()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..q.j())
        .map(|j| match spec.items[j] {
            ItemModel::MultiParam => multi_row(&mut rng, family, q.rows()[j], q.k(), &profiles),
            _ => {
                let slip = rng.random_range(LOW.0..LOW.1);
                let guess = rng.random_range(LOW.0..LOW.1);
                (0..g.m()).map(|a| if g.entry(j, a) { 1.0 - slip } else { guess }).collect()
            }
        })
        .collect();
    ItemParams::new(rows)
}

/// Deterministic parameters: θ⁺ = 0.8 and θ⁻ = 0.2 for two-parameter items, and
/// for multi-parameter items 0.2 plus 0.6 times the share of required attributes held.
pub fn default_params(q: &QMatrix, space: &LatentClassSpace, spec: &ModelSpec) -> Result<ItemParams> {
    let g = build_gamma(q, space, spec)?;
    let rows = (0..q.j())
        .map(|j| {
            let r = q.rows()[j];
            (0..g.m())
                .map(|a| match spec.items[j] {
                    ItemModel::MultiParam => {
                        let held = (space.profiles()[a].bits() & r).count_ones() as f64;
                        0.2 + 0.6 * held / r.count_ones() as f64
                    }
                    _ if g.entry(j, a) => 0.8,
                    _ => 0.2,
                })
                .collect()
        })
        .collect();
    ItemParams::new(rows)
}

/// Proportions from weights uniform on [0.5, 1.5], normalized.
pub fn random_proportions(m: usize, seed: u64) -> Proportions {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = w.iter().sum();
    Proportions::new(w.iter().map(|x| x / total).collect()).unwrap_or_else(|_| Proportions::uniform(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::validate_params;

    fn example6() -> (QMatrix, LatentClassSpace) {
        (QMatrix::new(vec![vec![1, 0], vec![1, 1]]).unwrap(), LatentClassSpace::saturated(2).unwrap())
    }

    #[test]
    fn every_family_validates() {
        let (q, space) = example6();
        let spec = ModelSpec::multi(2);
        let g = build_gamma(&q, &space, &spec).unwrap();
        for family in [MultiFamily::MainEffectIdentity, MultiFamily::MainEffectLogit, MultiFamily::MainEffectLog, MultiFamily::AllEffect] {
            for seed in 0..20 {
                let t = generate_params(&q, &space, &spec, Some(family), seed).unwrap();
                assert!(validate_params(&t, &g).is_empty(), "{family:?} seed {seed}");
                assert!(t.rows().iter().flatten().all(|&x| (FLOOR - 1e-12..=0.95 + 1e-12).contains(&x)));
            }
        }
    }

    #[test]
    fn family_requires_multi_items() {
        let (q, space) = example6();
        assert!(generate_params(&q, &space, &ModelSpec::conj(2), Some(MultiFamily::AllEffect), 1).is_err());
        assert!(generate_params(&q, &space, &ModelSpec::conj(2), None, 1).is_ok());
    }

    #[test]
    fn main_effects_separate_equivalent_profiles() {
        // profiles 00 and 01 share a Γ column, yet item 2 depends on attribute 2
        let (q, space) = example6();
        let t = generate_params(&q, &space, &ModelSpec::multi(2), Some(MultiFamily::MainEffectIdentity), 3).unwrap();
        assert_ne!(t.get(1, 0), t.get(1, 2));
    }

    #[test]
    fn reduced_all_effect_model_is_dina() {
        let q = 0b11;
        let effects = [(0u32, 0.2), (0b11u32, 0.7)];
        for alpha in 0..4 {
            assert!((all_effect_theta(q, &effects, alpha) - dina_theta(q, 0.1, 0.2, alpha)).abs() < 1e-15);
        }
    }

    #[test]
    fn dina_substitution() {
        assert_eq!(dina_theta(0b01, 0.2, 0.2, 0b11), 0.8);
        assert_eq!(dina_theta(0b11, 0.2, 0.2, 0b01), 0.2);
    }
}
