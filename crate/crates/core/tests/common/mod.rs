#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlcm_core::models::{generate_params, random_proportions, ItemParams, Proportions};
use rlcm_core::tmatrix::Construction;
use rlcm_core::{GammaMatrix, LatentClassSpace, ModelSpec, Profile, QMatrix};

pub fn q(rows: &[&str]) -> QMatrix {
    QMatrix::new(rows.iter().map(|r| Profile::parse(r).unwrap().to_vec()).collect()).unwrap()
}

/// Independent product over items, evaluated entry by entry.
pub fn naive_entry(theta: &ItemParams, r: usize, a: usize) -> f64 {
    (0..theta.j()).filter(|j| r >> j & 1 == 1).map(|j| theta.get(j, a)).product()
}

pub fn two_param(g: &GammaMatrix, rng: &mut ChaCha8Rng) -> ItemParams {
    let plus: Vec<f64> = (0..g.j()).map(|_| rng.random_range(0.6..0.95)).collect();
    let minus: Vec<f64> = (0..g.j()).map(|_| rng.random_range(0.05..0.4)).collect();
    ItemParams::two_param(g, &plus, &minus).unwrap()
}

/// Random Q with K in 2..=4 and J in K..=8, and a random space containing the zero profile.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (QMatrix, LatentClassSpace) {
    let k = rng.random_range(2..=4);
    let j = rng.random_range(k..=8);
    let rows: Vec<u32> = (0..j).map(|_| rng.random_range(1..1u32 << k)).collect();
    let qm = QMatrix::from_masks(k, rows, true).unwrap();
    let mut profiles = vec![Profile::zero(k)];
    for bits in 1..1u32 << k {
        if rng.random_bool(0.7) {
            profiles.push(Profile::new(bits, k).unwrap());
        }
    }
    (qm, LatentClassSpace::canonical(k, profiles).unwrap())
}

/// Proportions with P(α) = ρ P(α + e_k) for every α lacking attribute k.
pub fn ratio_proportions(space: &LatentClassSpace, attr: usize, rho: f64, rng: &mut ChaCha8Rng) -> Proportions {
    let salt: u64 = rng.random();
    let w: Vec<f64> = space
        .profiles()
        .iter()
        .map(|p| {
            let base = p.bits() & !(1 << attr);
            let mut r = ChaCha8Rng::seed_from_u64(base as u64 ^ salt);
            let v: f64 = r.random_range(0.5..1.5);
            if p.get(attr) {
                v
            } else {
                v * rho
            }
        })
        .collect();
    Proportions::from_weights(&w).unwrap()
}

pub fn family_instances(c: Construction) -> Vec<(QMatrix, ModelSpec)> {
    match c {
        Construction::Thm2a => vec![(q(&["10", "01", "01"]), ModelSpec::conj(3)), (q(&["100", "011", "010", "001", "011"]), ModelSpec::disj(5))],
        Construction::Thm2b1 => vec![(q(&["10", "11", "01", "01"]), ModelSpec::conj(4)), (q(&["10", "11", "01", "01"]), ModelSpec::disj(4))],
        Construction::Thm3 => vec![(q(&["100", "010", "001", "101"]), ModelSpec::conj(4)), (q(&["100", "100", "010", "111"]), ModelSpec::conj(4))],
        Construction::Prop2Grouping => vec![(q(&["10", "11"]), ModelSpec::conj(2)), (q(&["110", "011", "111"]), ModelSpec::disj(3))],
        Construction::Thm8a => vec![(q(&["10", "01", "01", "01"]), ModelSpec::multi(4)), (q(&["100", "011", "010", "001", "011"]), ModelSpec::multi(5))],
    }
}

/// Seeded instance of a construction family: Q, space, spec, Θ and p.
pub fn family_case(c: Construction, seed: u64) -> (QMatrix, LatentClassSpace, ModelSpec, ItemParams, Proportions) {
    let instances = family_instances(c);
    let (qm, spec) = instances[seed as usize % instances.len()].clone();
    let space = LatentClassSpace::saturated(qm.k()).unwrap();
    let theta = generate_params(&qm, &space, &spec, None, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = if c == Construction::Thm2b1 {
        let rho = rng.random_range(0.5..2.0);
        ratio_proportions(&space, 0, rho, &mut rng)
    } else {
        random_proportions(space.len(), seed)
    };
    (qm, space, spec, theta, p)
}
