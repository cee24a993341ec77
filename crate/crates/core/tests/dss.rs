mod common;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyplan_core::dss::*;
use skyplan_core::mission::{Importance, OperatorProfile, ProfileKind, RankingVariable};
use skyplan_core::plan::{Assignment, PlanGenome};

fn keys(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("k{i:03}")).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

#[test]
fn uniform_weights_for_all_medium() {
    let mut p = OperatorProfile::default();
    for v in RankingVariable::ALL {
        p.importance.insert(v, Importance::Medium);
    }
    for w in weights_from_profile(&p).unwrap() {
        assert!(close(w, 1.0 / 12.0));
    }
}

#[test]
fn single_very_high_weight() {
    let mut p = OperatorProfile::default();
    for v in RankingVariable::ALL {
        p.importance.insert(v, Importance::VeryLow);
    }
    p.importance.insert(RankingVariable::Cost, Importance::VeryHigh);
    let w = weights_from_profile(&p).unwrap();
    assert!(close(w[1], 5.0 / 16.0));
    assert!(close(w[0], 1.0 / 16.0));
}

#[test]
fn usecase1_weights_are_pinned() {
    let w = weights_from_profile(&common::usecase1().profile).unwrap();
    // importance scores 5,4,4,4,4,2,2,2,2,3,4,2 out of 38
    let expect = [5.0, 4.0, 4.0, 4.0, 4.0, 2.0, 2.0, 2.0, 2.0, 3.0, 4.0, 2.0].map(|x| x / 38.0);
    for (a, b) in w.iter().zip(expect) {
        assert!(close(*a, b), "{w:?}");
    }
}

#[test]
fn missing_importance_is_an_error() {
    let mut p = OperatorProfile::default();
    p.importance.remove(&RankingVariable::Gcss);
    assert_eq!(weights_from_profile(&p), Err(DssError::MissingImportance("gcss")));
}

fn matrix(rows: Vec<Vec<f64>>, maximize: Vec<bool>) -> CriteriaMatrix {
    let n = rows.len();
    CriteriaMatrix::new(rows, maximize, keys(n)).unwrap()
}

#[test]
fn vikor_three_by_three_matches_hand_calculation() {
    let m = matrix(vec![vec![10.0, 4.0, 7.0], vec![6.0, 8.0, 3.0], vec![8.0, 5.0, 9.0]], vec![false; 3]);
    let ranked = vikor_rank(&m, &[0.5, 0.3, 0.2], 0.5).unwrap();
    let by_row = |i: usize| ranked.iter().find(|p| p.index == i).unwrap();
    let s = [19.0 / 30.0, 3.0 / 10.0, 21.0 / 40.0];
    let r = [1.0 / 2.0, 3.0 / 10.0, 1.0 / 4.0];
    let q = [1.0, 1.0 / 10.0, 27.0 / 80.0];
    for i in 0..3 {
        let p = by_row(i);
        assert!(close(p.s, s[i]) && close(p.r, r[i]) && close(p.q, q[i]), "{p:?}");
    }
    assert_eq!(ranked.iter().map(|p| p.index).collect::<Vec<_>>(), vec![1, 2, 0]);
    // Q gap 0.2375 < 1/2: no acceptable advantage, so rows within 1/2 of the
    // leader form the compromise set
    assert!(by_row(1).in_compromise_set && by_row(2).in_compromise_set);
    assert!(!by_row(0).in_compromise_set);
}

#[test]
fn vikor_twelve_criteria_matches_oracle() {
    let rows = vec![
        vec![3600.0, 1200.0, 45.0, 5400.0, 60000.0, 20.0, 0.0, 10.0, 30.0, 2.0, 5.0, 1.0],
        vec![4200.0, 900.0, 38.0, 4800.0, 52000.0, 35.0, 10.0, 0.0, 5.0, 2.0, 5.0, 1.0],
        vec![3000.0, 1500.0, 60.0, 6600.0, 71000.0, 10.0, 0.0, 25.0, 60.0, 3.0, 5.0, 1.0],
        vec![5000.0, 700.0, 30.0, 4000.0, 45000.0, 50.0, 40.0, 0.0, 0.0, 1.0, 4.0, 1.0],
        vec![3900.0, 1100.0, 42.0, 5100.0, 58000.0, 25.0, 5.0, 5.0, 15.0, 2.0, 5.0, 2.0],
    ];
    let maximize = RankingVariable::ALL.iter().map(|v| v.maximized()).collect();
    let w = weights_from_profile(&common::usecase1().profile).unwrap();
    let ranked = vikor_rank(&matrix(rows, maximize), &w, 0.5).unwrap();
    let s = [0.3753036437246964, 0.28397435897435896, 0.6052631578947368, 0.34210526315789475, 0.3932186234817814];
    let r = [0.06578947368421052, 0.07894736842105263, 0.10526315789473684, 0.13157894736842105, 0.05921052631578947];
    let q = [0.1875841264689317, 0.13636363636363635, 0.8181818181818182, 0.590465189541111, 0.17000945080331828];
    for p in &ranked {
        let i = p.index;
        assert!(close(p.s, s[i]) && close(p.r, r[i]) && close(p.q, q[i]), "{p:?}");
    }
    assert_eq!(ranked.iter().map(|p| p.index).collect::<Vec<_>>(), vec![1, 4, 0, 3, 2]);
}

#[test]
fn single_row_is_the_compromise() {
    let ranked = vikor_rank(&matrix(vec![vec![1.0, 2.0]], vec![false, true]), &[0.5, 0.5], 0.5).unwrap();
    assert_eq!(ranked.len(), 1);
    assert_eq!((ranked[0].q, ranked[0].rank, ranked[0].in_compromise_set), (0.0, 1, true));
}

#[test]
fn dominating_row_ranks_first() {
    let m = matrix(vec![vec![5.0, 5.0, 1.0], vec![4.0, 5.0, 2.0]], vec![false, false, true]);
    let ranked = vikor_rank(&m, &[0.2, 0.3, 0.5], 0.5).unwrap();
    assert_eq!(ranked[0].index, 1);
    assert!(ranked[0].in_compromise_set && !ranked[1].in_compromise_set);
}

#[test]
fn dimension_errors() {
    let m = matrix(vec![vec![1.0, 2.0]], vec![false, false]);
    assert!(matches!(vikor_rank(&m, &[1.0], 0.5), Err(DssError::Dimension(_))));
    assert!(CriteriaMatrix::new(vec![vec![1.0]], vec![false, false], keys(1)).is_err());
    assert!(CriteriaMatrix::new(vec![], vec![false], vec![]).is_err());
    assert!(CriteriaMatrix::new(vec![vec![f64::NAN]], vec![false], keys(1)).is_err());
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (CriteriaMatrix, Vec<f64>) {
    let rows = (0..n).map(|_| (0..m).map(|_| rng.gen_range(0..20) as f64).collect()).collect();
    let maximize = (0..m).map(|_| rng.gen_bool(0.3)).collect();
    let w: Vec<f64> = (0..m).map(|_| rng.gen_range(1..=5) as f64).collect();
    let total: f64 = w.iter().sum();
    (matrix(rows, maximize), w.iter().map(|x| x / total).collect())
}

#[test]
fn ordering_survives_affine_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let (m, w) = random_matrix(&mut rng, 6, 5);
        let base: Vec<usize> = vikor_rank(&m, &w, 0.5).unwrap().iter().map(|p| p.index).collect();
        let mut scaled = m.clone();
        for j in 0..m.n_cols() {
            // powers of two keep the arithmetic exact
            let a = [0.25, 0.5, 2.0, 8.0][rng.gen_range(0..4)];
            let b = rng.gen_range(-64..64) as f64;
            for row in scaled.rows.iter_mut() {
                row[j] = a * row[j] + b;
            }
        }
        let again: Vec<usize> = vikor_rank(&scaled, &w, 0.5).unwrap().iter().map(|p| p.index).collect();
        assert_eq!(base, again);
    }
}

#[test]
fn row_permutation_is_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let (m, w) = random_matrix(&mut rng, 7, 4);
        let base = vikor_rank(&m, &w, 0.5).unwrap();
        let mut perm: Vec<usize> = (0..m.n_rows()).collect();
        perm.shuffle(&mut rng);
        let shuffled = CriteriaMatrix::new(
            perm.iter().map(|&i| m.rows[i].clone()).collect(),
            m.maximize.clone(),
            perm.iter().map(|&i| m.keys[i].clone()).collect(),
        )
        .unwrap();
        let again = vikor_rank(&shuffled, &w, 0.5).unwrap();
        for (a, b) in base.iter().zip(&again) {
            assert_eq!(a.index, perm[b.index]);
            assert_eq!((a.rank, a.in_compromise_set), (b.rank, b.in_compromise_set));
            assert!(close(a.q, b.q));
        }
    }
}

fn genome(
    assign: &[&[usize]],
    rank: &[u32],
    profile: &[ProfileKind],
    sensor: &[usize],
    gcs: &[Option<usize>],
    ret: &[ProfileKind],
) -> PlanGenome {
    PlanGenome {
        assignment: assign
            .iter()
            .map(|u| if u.is_empty() { Assignment::Omitted } else { Assignment::Uavs(u.to_vec()) })
            .collect(),
        rank: rank.to_vec(),
        profile: profile.to_vec(),
        sensor: sensor.to_vec(),
        gcs: gcs.to_vec(),
        return_profile: ret.to_vec(),
    }
}

use ProfileKind::{MaxSpeed as Fast, MinConsumption as Slow};

fn base_genome() -> PlanGenome {
    genome(&[&[0], &[0]], &[0, 1], &[Slow, Slow], &[0, 0], &[Some(0), Some(0)], &[Slow, Slow])
}

#[test]
fn distance_examples() {
    let a = base_genome();
    assert_eq!(genome_distance(&a, &a).unwrap(), 0.0);
    // one of four legs flown differently
    let mut b = a.clone();
    b.profile[1] = Fast;
    assert!(close(genome_distance(&a, &b).unwrap(), 1.0 / 68.0));
    // every gene different
    let c = genome(&[&[1], &[]], &[1, 0], &[Fast, Fast], &[1, 1], &[Some(1), None], &[Fast, Fast]);
    assert!(close(genome_distance(&a, &c).unwrap(), 1.0));
    let short = genome(&[&[0]], &[0], &[Slow], &[0], &[Some(0), Some(0)], &[Slow, Slow]);
    assert_eq!(genome_distance(&a, &short), Err(DssError::Structure));
}

fn random_genome(rng: &mut ChaCha8Rng, n: usize, m: usize) -> PlanGenome {
    let mut rank: Vec<u32> = (0..n as u32).collect();
    rank.shuffle(rng);
    let kinds = [Slow, Fast];
    PlanGenome {
        assignment: (0..n)
            .map(|_| match rng.gen_range(0..=m) {
                0 => Assignment::Omitted,
                u => Assignment::Uavs(vec![u - 1]),
            })
            .collect(),
        rank,
        profile: (0..n).map(|_| kinds[rng.gen_range(0..2)]).collect(),
        sensor: (0..n).map(|_| rng.gen_range(0..2)).collect(),
        gcs: (0..m).map(|_| Some(rng.gen_range(0..2))).collect(),
        return_profile: (0..m).map(|_| kinds[rng.gen_range(0..2)]).collect(),
    }
}

#[test]
fn distance_is_a_pseudometric() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..500 {
        let (a, b, c) = (random_genome(&mut rng, 5, 3), random_genome(&mut rng, 5, 3), random_genome(&mut rng, 5, 3));
        let ab = genome_distance(&a, &b).unwrap();
        assert_eq!(ab, genome_distance(&b, &a).unwrap());
        assert!((0.0..=1.0).contains(&ab));
        let ac = genome_distance(&a, &c).unwrap();
        let cb = genome_distance(&c, &b).unwrap();
        assert!(ab <= ac + cb + 1e-12);
        assert_eq!(genome_distance(&a, &a).unwrap(), 0.0);
    }
}

fn ranked_list(n: usize) -> Vec<RankedPlan> {
    (0..n)
        .map(|i| RankedPlan {
            index: i,
            s: 0.0,
            r: 0.0,
            q: i as f64 / n as f64,
            rank: i + 1,
            in_compromise_set: i == 0,
        })
        .collect()
}

#[test]
fn filter_drops_duplicates_and_profile_variants() {
    let a = base_genome();
    let mut variant = a.clone();
    variant.profile[0] = Fast;
    let other = genome(&[&[1], &[]], &[1, 0], &[Fast, Fast], &[1, 1], &[Some(1), None], &[Fast, Fast]);
    let genomes = vec![a.clone(), a.clone(), variant, other];
    let kept = filter_similar(&ranked_list(4), &genomes, DEFAULT_SIMILARITY_THRESHOLD);
    assert_eq!(kept.iter().map(|p| p.index).collect::<Vec<_>>(), vec![0, 3]);
    assert_eq!(kept.iter().map(|p| p.rank).collect::<Vec<_>>(), vec![1, 2]);
    let all = filter_similar(&ranked_list(4), &genomes, 0.0);
    assert_eq!(all.len(), 4);
}

#[test]
fn filter_keeps_leader_and_relative_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..100 {
        let genomes: Vec<_> = (0..10).map(|_| random_genome(&mut rng, 4, 2)).collect();
        let kept = filter_similar(&ranked_list(10), &genomes, rng.gen_range(0.0..0.6));
        assert_eq!(kept[0].index, 0);
        assert!(kept.windows(2).all(|w| w[0].index < w[1].index));
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                assert!(genome_distance(&genomes[a.index], &genomes[b.index]).unwrap() > 0.0);
            }
        }
    }
}
