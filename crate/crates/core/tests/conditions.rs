use rlcm_core::bits::{from_numbers, to_numbers};
use rlcm_core::conditions::*;
use rlcm_core::datasets;
use rlcm_core::gamma::equivalence_partition;
use rlcm_core::{build_gamma, GammaMatrix, LatentClassSpace, ModelSpec, Profile, QMatrix};

fn q(rows: &[&str]) -> QMatrix {
    QMatrix::new(rows.iter().map(|r| Profile::parse(r).unwrap().to_vec()).collect()).unwrap()
}

fn example5() -> QMatrix {
    q(&["100", "010", "111", "011", "101"])
}

fn pairs(r: &ConditionReport) -> Vec<(usize, Vec<usize>, Vec<usize>)> {
    match &r.witness {
        Witness::ItemPairs { pairs } | Witness::Expansion { pairs, .. } => {
            pairs.iter().map(|p| (p.item, p.first.clone(), p.second.clone())).collect()
        }
        w => panic!("unexpected witness {w:?}"),
    }
}

fn worked_gamma() -> GammaMatrix {
    GammaMatrix::from_rows(&[vec![0, 0, 1, 1], vec![0, 0, 0, 1], vec![0, 1, 0, 0]]).unwrap()
}

#[test]
fn example5_classification_and_witnesses() {
    let qm = example5();
    let budget = SearchBudget::default();
    let cls = classify_items_q(&qm);
    assert_eq!(cls.basis_items(), vec![1, 2]);
    assert_eq!(cls.non_basis_items(), vec![3, 4, 5]);
    let g = build_gamma(&qm, &LatentClassSpace::saturated(3).unwrap(), &ModelSpec::conj(5)).unwrap();
    assert_eq!(classify_items(&g), cls);

    let c1 = check_c1_star(&qm, &budget);
    assert!(c1.is_satisfied());
    assert_eq!(
        pairs(&c1),
        vec![
            (1, vec![3], vec![5]),
            (2, vec![3], vec![4]),
            (3, vec![1, 4], vec![2, 5]),
            (4, vec![3], vec![2, 5]),
            (5, vec![3], vec![1, 4]),
        ]
    );
    let c2 = check_c2_star(&qm, &cls, &budget);
    assert!(c2.is_satisfied());
    assert_eq!(pairs(&c2), vec![(1, vec![3], vec![4]), (2, vec![3], vec![5])]);

    let d = is_s_differentiable_q(&qm, 0, from_numbers(&[3, 4]), &budget).unwrap();
    assert_eq!(pairs(&d), vec![(1, vec![3], vec![4])]);

    let gc1 = check_c1(&g, &budget);
    assert!(gc1.is_satisfied());
    assert!(check_c2(&g, &classify_items(&g), &budget).is_satisfied());
    assert!(check_thm3_necessity(&g, &cls, &budget).is_satisfied());
}

#[test]
fn worked_gamma_expansion() {
    let g = worked_gamma();
    let budget = SearchBudget::default();
    let cls = classify_items(&g);
    assert_eq!(cls.non_basis_items(), vec![2]);
    let stated = ItemClassification::from_non_basis(3, from_numbers(&[2, 3]));
    let c2 = check_c2(&g, &stated, &budget);
    assert!(c2.is_satisfied());
    match &c2.witness {
        Witness::Expansion { steps, .. } => assert_eq!(steps, &vec![vec![1]]),
        w => panic!("{w:?}"),
    }
    let d = is_s_differentiable(&g, 0, from_numbers(&[2, 3]), &budget).unwrap();
    assert_eq!(pairs(&d), vec![(1, vec![2, 3], vec![3])]);
    assert!(is_s_differentiable(&g, 0, from_numbers(&[1, 2]), &budget).is_err());
}

#[test]
fn toefl_partitions() {
    let sat = LatentClassSpace::saturated(4).unwrap();
    for (d, n, missing) in [
        (datasets::toefl_a(), 14, vec!["0001", "1001"]),
        (datasets::toefl_b(), 12, vec!["0001", "1001", "0101", "1101"]),
    ] {
        let g = build_gamma(&d.q, &sat, &ModelSpec::conj(d.q.j())).unwrap();
        let part = equivalence_partition(&g);
        assert_eq!(part.len(), n);
        let mut reps: Vec<String> = part.representatives.iter().map(|p| p.to_string()).collect();
        reps.sort();
        let mut expected: Vec<String> =
            sat.profiles().iter().map(|p| p.to_string()).filter(|s| !missing.contains(&s.as_str())).collect();
        expected.sort();
        assert_eq!(reps, expected);
        let budget = SearchBudget::default();
        assert!(check_c1_star(&d.q, &budget).is_satisfied());
        let cls = classify_items_q(&d.q);
        assert_eq!(cls.basis, 0);
        assert!(check_c5_c6(&d.q, &budget).is_satisfied());
    }
}

#[test]
fn timss_structure() {
    let d = datasets::timss();
    let budget = SearchBudget::default();
    let cls = classify_items_q(&d.q);
    assert_eq!(cls.basis_items(), vec![4, 8, 15, 16, 19, 24, 30, 34, 38]);
    assert!(check_c1_star(&d.q, &budget).is_satisfied());
    assert!(check_c2_star(&d.q, &cls, &budget).is_satisfied());
    let c5 = check_c5_c6(&d.q, &budget);
    assert!(c5.is_satisfied(), "{c5:?}");
    let s1 = from_numbers(&[1, 3, 4, 5, 7, 8, 12, 13, 15, 17, 19, 38]);
    let s2 = from_numbers(&[2, 11, 16, 20, 22, 23, 24, 26, 30, 31, 33, 34]);
    assert!(verify_c5_c6(&d.q, s1, s2));
}

#[test]
fn fraction_routes() {
    let d = datasets::fraction();
    let budget = SearchBudget::default();
    let counts = d.q.column_counts();
    assert_eq!(counts[5], 2);
    let r = check_thm2_fallback(&d.q, 5, &budget).unwrap();
    assert!(r.is_satisfied(), "{r:?}");
    match &r.witness {
        Witness::TwoItemBlock { items, v1, v2, .. } => {
            assert_eq!(items, &vec![1, 18]);
            assert_eq!(v1, &vec![0, 0, 0, 1, 0, 1, 0]);
            assert_eq!(v2, &vec![0, 1, 0, 0, 1, 1, 0]);
        }
        w => panic!("{w:?}"),
    }
    let t8 = check_thm8(&d.q, 5, &budget).unwrap();
    assert!(t8.is_satisfied(), "{t8:?}");
}

#[test]
fn example7_blocks() {
    let sub = vec![vec![0, 1, 1, 1], vec![0, 0, 1, 1], vec![0, 0, 0, 1]];
    let s1b = vec![vec![0, 0, 1, 1], vec![0, 0, 1, 1], vec![0, 0, 0, 1]];
    let s2b = vec![vec![0, 1, 1, 1], vec![0, 0, 0, 1], vec![0, 0, 0, 1]];
    let budget = SearchBudget::default();
    let three: Vec<Vec<u8>> = sub.iter().chain(&sub).chain(&sub).cloned().collect();
    let g = GammaMatrix::from_rows(&three).unwrap();
    let r = check_c3_c4(&g, &budget, None).unwrap();
    assert!(r.is_satisfied());
    match &r.witness {
        Witness::Blocks { s1, s2, .. } => {
            assert_eq!(s1, &vec![1, 2, 3]);
            assert_eq!(s2, &vec![4, 5, 6]);
        }
        w => panic!("{w:?}"),
    }
    let a = check_generic_alteration(&g, &budget, None).unwrap();
    assert!(a.is_satisfied());

    let new: Vec<Vec<u8>> = s1b.iter().chain(&s2b).chain(&sub).cloned().collect();
    let gn = GammaMatrix::from_rows(&new).unwrap();
    assert!(check_c3_c4(&gn, &budget, None).unwrap().is_violated());
    let alt = check_generic_alteration(&gn, &budget, None).unwrap();
    assert!(alt.is_satisfied(), "{alt:?}");
    let paper = (from_numbers(&[1, 2, 3]), vec![(0, 1)], from_numbers(&[4, 5, 6]), vec![(4, 2)]);
    assert!(verify_generic_alteration(&gn, paper.0, &paper.1, paper.2, &paper.3, 2).unwrap());
    assert!(check_generic_alteration(&gn, &budget, Some(paper)).unwrap().is_satisfied());
    println!("{}", serde_json::to_string(&alt).unwrap());
}

#[test]
fn mixed_examples() {
    let budget = SearchBudget::default();
    let qm = q(&["10", "11", "11", "11", "11", "11"]);
    let spec = ModelSpec::parse("ccccdd", 6).unwrap();
    let sat = LatentClassSpace::saturated(2).unwrap();
    let e1 = check_mixed_e1(&qm, &spec, &sat, &budget).unwrap();
    assert!(e1.is_satisfied(), "{e1:?}");
    assert!(build_gamma(&qm, &sat, &spec).unwrap().is_separable());

    let qe = q(&["10", "11", "11", "10", "11", "11", "11"]);
    let se = ModelSpec::parse("cdmcdmm", 7).unwrap();
    let e2 = check_mixed_e2(&qe, &se, &sat, &budget).unwrap();
    assert!(e2.is_satisfied());
    println!("{}", serde_json::to_string(&e2).unwrap());
    assert!(verify_e2(&qe, &se, &sat, from_numbers(&[1, 2, 3]), from_numbers(&[4, 5, 6]), &[(2, 1), (5, 1)], from_numbers(&[7])).unwrap());
    let _ = to_numbers(0);
}
