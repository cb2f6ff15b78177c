use std::sync::Arc;

use markov_groupoid::boundary::{cesaro_echo_sweep, classify, decay_profile, matrix_profile};
use markov_groupoid::measure::ObjectMeasure;
use markov_groupoid::operator::FibreMatrix;
use markov_groupoid::{fibrewise_report, fixtures, EquivariantOperator, ProfileMode, Rational, Scalar, Verdict};
use num_traits::Zero;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Q = Rational;

fn naive_power(m: &[Vec<Q>], n: usize) -> Vec<Vec<Q>> {
    let d = m.len();
    let mut acc: Vec<Vec<Q>> = (0..d).map(|i| (0..d).map(|j| if i == j { Q::from_count(1) } else { Q::zero() }).collect()).collect();
    for _ in 0..n {
        acc = (0..d)
            .map(|i| (0..d).map(|j| (0..d).map(|k| acc[i][k].clone() * m[k][j].clone()).sum()).collect())
            .collect();
    }
    acc
}

fn max_row_distance(m: &[Vec<Q>]) -> Q {
    let mut best = Q::zero();
    for a in m {
        for b in m {
            let d: Q = a.iter().zip(b).map(|(x, y)| if x > y { x - y } else { y - x }).sum();
            if d > best {
                best = d;
            }
        }
    }
    best
}

/// Closed communicating classes of the support graph.
fn closed_classes(m: &FibreMatrix<Q>) -> usize {
    let n = m.dim();
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in m.entries.iter().enumerate() {
        reach[i][i] = true;
        for (j, v) in row.iter().enumerate() {
            if !v.is_zero() {
                reach[i][j] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let closed: Vec<usize> = (0..n).filter(|&i| (0..n).all(|j| !reach[i][j] || reach[j][i])).collect();
    let mut reps: Vec<usize> = Vec::new();
    for &i in &closed {
        if !reps.iter().any(|&r| reach[r][i]) {
            reps.push(i);
        }
    }
    reps.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tail_profiles_match_naive_powers_and_never_increase(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Arc::new(fixtures::random_groupoid(&mut rng, 4, 8));
        let p = fixtures::random_operator::<_, Q>(&mut rng, &g, false);
        for x in g.objects() {
            let m = p.fibre_matrix(x);
            let values = matrix_profile(&m, 10, ProfileMode::Tail);
            for (n, v) in values.iter().enumerate() {
                prop_assert_eq!(v, &max_row_distance(&naive_power(&m.entries, n + 1)));
            }
            prop_assert!(values.windows(2).all(|w| w[1] <= w[0]));
            let lazy = matrix_profile(&m, 10, ProfileMode::Lazy);
            prop_assert!(lazy.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn cesaro_profiles_average_the_powers(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Arc::new(fixtures::random_groupoid(&mut rng, 3, 6));
        let p = fixtures::random_operator::<_, Q>(&mut rng, &g, false);
        let q = p.cesaro(n).unwrap();
        for x in g.objects() {
            let values = matrix_profile(&p.fibre_matrix(x), n, ProfileMode::Cesaro);
            prop_assert_eq!(&values[n - 1], &q.fibre_matrix(x).max_pairwise_distance());
        }
    }

    #[test]
    fn cesaro_and_lazy_verdicts_follow_closed_classes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Arc::new(fixtures::random_groupoid(&mut rng, 4, 6));
        let p = fixtures::random_operator::<_, Q>(&mut rng, &g, false);
        let pf = EquivariantOperator::from_system(g.clone(), p.system().map_scalar(|v| v.as_f64()), Default::default()).unwrap();
        for x in g.objects() {
            let classes = closed_classes(&p.fibre_matrix(x));
            let cesaro = decay_profile(&pf, x, 400, ProfileMode::Cesaro, 1e-6).verdict;
            let lazy = decay_profile(&pf, x, 400, ProfileMode::Lazy, 1e-6).verdict;
            if classes > 1 {
                prop_assert_eq!(cesaro, Verdict::NonTrivial);
                prop_assert_eq!(lazy, Verdict::NonTrivial);
            } else {
                prop_assert_eq!(lazy, Verdict::Trivial);
                prop_assert_ne!(cesaro, Verdict::NonTrivial);
            }
        }
    }

    #[test]
    fn report_aggregate_is_the_trivial_kappa_fraction(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Arc::new(fixtures::random_groupoid(&mut rng, 5, 6));
        let p = fixtures::random_operator::<_, Q>(&mut rng, &g, false);
        let kappa: ObjectMeasure<Q> = fixtures::random_kappa(&mut rng, g.num_objects());
        let report = fibrewise_report(&p, &kappa, 20, ProfileMode::Lazy, 1e-6).unwrap();
        let trivial: Q = g
            .objects()
            .filter(|&x| decay_profile(&p, x, 20, ProfileMode::Lazy, 1e-6).verdict == Verdict::Trivial)
            .map(|x| kappa.weight(x).clone())
            .sum();
        prop_assert_eq!(report.aggregate, trivial / kappa.total());
        prop_assert_eq!(report.per_object.len(), g.num_objects());
    }

    #[test]
    fn echo_sweep_never_increases(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Arc::new(fixtures::random_groupoid(&mut rng, 3, 6));
        let p = fixtures::random_operator::<_, Q>(&mut rng, &g, true);
        let m_hat = fixtures::random_reference::<_, Q>(&mut rng, &g);
        let sweep = cesaro_echo_sweep(&p, &m_hat, 4);
        let direct = p.weighted_discrepancy(&m_hat);
        prop_assert!(sweep.iter().all(|(_, v)| *v <= direct));
    }
}

#[test]
fn classification_thresholds() {
    let f = |v: &[f64]| classify(v, 1e-6);
    assert_eq!(f(&[1.0, 0.5, 0.0]), Verdict::Trivial);
    assert_eq!(f(&[2.0, 2.0, 2.0, 2.0]), Verdict::NonTrivial);
    assert_eq!(f(&[2.0, 2.0, 2.0, 1.0]), Verdict::Inconclusive);
    assert_eq!(f(&[]), Verdict::Inconclusive);
}

#[test]
fn modes_parse_and_print() {
    for mode in [ProfileMode::Tail, ProfileMode::Cesaro, ProfileMode::Lazy] {
        assert_eq!(mode.to_string().parse::<ProfileMode>().unwrap(), mode);
    }
    assert!("weekly".parse::<ProfileMode>().is_err());
}

#[test]
fn flip_walk_profiles() {
    let p = fixtures::z2_flip::<Q>();
    let x = markov_groupoid::ObjectId(0);
    let tail = decay_profile(&p, x, 50, ProfileMode::Tail, 1e-6);
    assert!(tail.values.iter().all(|v| *v == Q::from_count(2)));
    assert_eq!(tail.verdict, Verdict::NonTrivial);
    let lazy = decay_profile(&p, x, 5, ProfileMode::Lazy, 1e-6);
    assert!(lazy.values[0].is_zero());
    assert_eq!(lazy.verdict, Verdict::Trivial);
}
