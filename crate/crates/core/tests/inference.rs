use lmnet::model::{for_each_assignment, GraphKind, GraphSpec, Potentials, WeightVector};
use lmnet::{bb_infer, exhaustive_infer, icm_infer, BBConfig, InferenceStatus};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_model(
    rng: &mut ChaCha8Rng,
    max_k: usize,
    max_d: usize,
    kind: GraphKind,
) -> (GraphSpec, WeightVector, Vec<f64>) {
    let k = rng.random_range(1..=max_k);
    let d = rng.random_range(0..=max_d);
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    let g = if rng.random_bool(0.5) {
        GraphSpec::full(kind, k, d, order).unwrap()
    } else {
        GraphSpec::chain(kind, k, d, order).unwrap()
    };
    let w = (0..g.num_cliques()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let x = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    (g.clone(), WeightVector::new(&g, w, 1.0, 0.0).unwrap(), x)
}

fn binomial(n: u64, r: u64) -> u64 {
    if r > n {
        return 0;
    }
    (0..r).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn bb_objective_equals_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..400 {
        let (g, w, x) = random_model(&mut rng, 12, 5, GraphKind::Directed);
        let b = bb_infer(&g, &w, &x, &BBConfig::default()).unwrap();
        let e = exhaustive_infer(&g, &w, &x).unwrap();
        assert_eq!(b.objective, e.objective, "trial {trial}");
        assert_eq!(b.status, InferenceStatus::ProvenOptimal);
        if b.y_hat != e.y_hat {
            let pot = Potentials::new(&g, &w, &x).unwrap();
            assert_eq!(pot.loss(&b.y_hat), pot.loss(&e.y_hat));
        }
    }
}

#[test]
fn at_most_one_assignment_below_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let (g, w, x) = random_model(&mut rng, 10, 3, GraphKind::Directed);
        let pot = Potentials::new(&g, &w, &x).unwrap();
        let best = exhaustive_infer(&g, &w, &x).unwrap();
        let mut below = 0;
        for_each_assignment(g.k(), |y| {
            let l = pot.loss(y);
            if l < 1.0 {
                below += 1;
            }
            if y != best.y_hat.as_slice() {
                assert!(l >= 1.0 - 1e-9, "{l}");
            }
        });
        assert!(below <= 1);
    }
}

/// Every evaluated branch extends a prefix with fewer than S right turns, so the
/// count is at most twice the number of such prefixes.
#[test]
fn visited_states_respect_the_right_branch_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let (g, w, x) = random_model(&mut rng, 12, 3, GraphKind::Directed);
        let k = g.k() as u64;
        let e = exhaustive_infer(&g, &w, &x).unwrap();
        for s in [1.0, 2.0, 3.0, 4.0, 8.0] {
            let r = bb_infer(&g, &w, &x, &BBConfig::with_cutoff(s)).unwrap();
            let s_int = s as u64;
            let cap = 2 * (1..=s_int).map(|i| binomial(k, i)).sum::<u64>();
            assert!(r.states_visited <= cap, "K {k} S {s}: {} > {cap}", r.states_visited);
            if e.objective < s {
                assert_eq!(r.status, InferenceStatus::ProvenOptimal);
                assert_eq!(r.objective, e.objective);
                let budget = k * (0..s_int).map(|i| binomial(k, i)).sum::<u64>();
                assert!(r.states_to_best <= budget);
            } else {
                assert_eq!(r.status, InferenceStatus::NoSolutionUnderS);
            }
        }
    }
}

#[test]
fn pruned_subtrees_never_hide_better_leaves() {
    // a budgeted search that stopped early can only be worse than the full one,
    // and the full search with any cutoff above the optimum finds it
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let (g, w, x) = random_model(&mut rng, 9, 2, GraphKind::Directed);
        let e = exhaustive_infer(&g, &w, &x).unwrap();
        let r = bb_infer(&g, &w, &x, &BBConfig::with_cutoff((e.objective + 1e-6).max(1.0))).unwrap();
        assert_eq!(r.objective, e.objective);
        assert_eq!(r.status, InferenceStatus::ProvenOptimal);
    }
}

#[test]
fn icm_never_beats_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut gaps = Vec::new();
    for _ in 0..200 {
        let (g, w, x) = random_model(&mut rng, 10, 3, GraphKind::Undirected);
        let e = exhaustive_infer(&g, &w, &x).unwrap();
        let start = lmnet::inference::unary_init(&g, &w, &x).unwrap();
        let r = icm_infer(&g, &w, &x, &start, 100).unwrap();
        assert!(r.objective >= e.objective);
        gaps.push(r.objective - e.objective);
    }
    let exact = gaps.iter().filter(|&&gap| gap == 0.0).count();
    eprintln!(
        "icm exact on {exact}/{} instances, worst gap {:.4}",
        gaps.len(),
        gaps.iter().cloned().fold(0.0, f64::max)
    );
}

#[test]
fn zero_weights_converge_immediately() {
    let g = GraphSpec::full(GraphKind::Undirected, 4, 1, vec![0, 1, 2, 3]).unwrap();
    let w = WeightVector::zeros(&g, 1.0, 0.0);
    let r = icm_infer(&g, &w, &[0.3], &[1, 1, -1, 1], 10).unwrap();
    assert_eq!(r.objective, 4.0);
    assert_eq!(r.states_visited, 4);
}
