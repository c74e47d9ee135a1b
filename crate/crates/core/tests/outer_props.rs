use grasspcp::f2la::{enumerate_grassmann, mask, sample_between, sample_subspace, F2Subspace};
use grasspcp::outerpcp::{
    covering_sd_advice, gen_3lin, lift, play_game, project, retain_codim_experiment, sample_question, v_choices, Estimation,
    OuterConfig, Planted, RandomProver,
};
use grasspcp::rng::{indexed_seed, rng_from_seed};
use grasspcp::stats::chi_square_uniform;
use proptest::prelude::*;
use std::collections::HashMap;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lift_and_project_are_inverse(m in any::<u64>(), v in any::<u64>(), j in 1usize..=5) {
        let n = 3 * j;
        let m = m & mask(n);
        let k = m.count_ones() as usize;
        let v = v & mask(k);
        let up = lift(v, m, n);
        prop_assert_eq!(up & !m, 0);
        prop_assert_eq!(project(up, m, n), v);
    }

    #[test]
    fn questions_carry_consistent_advice(seed in any::<u64>(), beta in 0.0f64..=1.0, j in 1usize..=3, r in 0usize..=3) {
        let (inst, _) = gen_3lin(20, 20, 0.0, 1).unwrap();
        let q = sample_question(&inst, &OuterConfig { j, beta, r }, &mut rng_from_seed(seed)).unwrap();
        prop_assert!(q.advice_consistent());
        prop_assert_eq!(q.advice_u.len(), r);
        prop_assert!(q.v_vars.iter().all(|v| q.u_vars.binary_search(v).is_ok()));
    }
}

#[test]
fn noiseless_planted_provers_always_win() {
    let (inst, sigma) = gen_3lin(40, 60, 0.0, 2).unwrap();
    for (j, beta) in [(1, 0.0), (2, 0.3), (4, 1.0)] {
        let p = play_game(&inst, &OuterConfig { j, beta, r: 2 }, &Planted(sigma.clone()), &Planted(sigma.clone()), 3000, 3).unwrap();
        assert_eq!(p.successes, p.trials);
    }
    let rnd = play_game(&inst, &OuterConfig { j: 2, beta: 0.1, r: 1 }, &RandomProver, &RandomProver, 3000, 4).unwrap();
    assert!(rnd.ci_high < 0.5);
}

#[test]
fn noisy_instances_flip_the_stated_number_of_equations() {
    let (inst, sigma) = gen_3lin(50, 100, 0.1, 5).unwrap();
    assert_eq!(inst.satisfied_count(&sigma), 90);
}

#[test]
fn v_choice_probabilities_sum_to_one() {
    for (j, beta) in [(1, 0.0), (2, 0.1), (3, 0.7)] {
        let total: f64 = v_choices(j, beta).unwrap().iter().map(|c| c.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

// Direct sum over nonzero vectors; one-dimensional spaces are lines.
fn sd_advice_lines(j: usize, beta: f64) -> f64 {
    let n = 3 * j;
    let choices = v_choices(j, beta).unwrap();
    let valid: f64 = choices.iter().filter(|(m, _)| *m != 0).map(|c| c.1).sum();
    let uniform = 1.0 / ((1u64 << n) - 1) as f64;
    (1..1u64 << n)
        .map(|v| {
            let p: f64 = choices
                .iter()
                .filter(|(m, _)| *m != 0 && v & !m == 0)
                .map(|(m, p)| p / ((1u64 << m.count_ones()) - 1) as f64)
                .sum::<f64>()
                / valid;
            (p - uniform).abs()
        })
        .sum::<f64>()
        / 2.0
}

#[test]
fn advice_covering_matches_a_direct_sum() {
    for j in [2, 3] {
        for beta in [0.0, 0.1, 0.2] {
            let rep = covering_sd_advice(j, 1, beta, Estimation::Exact).unwrap();
            assert!((rep.estimate - sd_advice_lines(j, beta)).abs() < 1e-12, "j={j} beta={beta}");
            assert!(rep.holds);
        }
        assert_eq!(covering_sd_advice(j, 0, 0.3, Estimation::Exact).unwrap().estimate, 0.0);
    }
}

#[test]
fn retained_codimension_without_smoothing_is_exact() {
    let mut rng = rng_from_seed(6);
    for j in [2, 3] {
        for s in 0..=1 {
            let w = sample_subspace(3 * j, 3 * j - s, &mut rng).unwrap();
            assert_eq!(retain_codim_experiment(j, &w, 0.0, Estimation::Exact).unwrap().failure, 0.0);
            assert!(retain_codim_experiment(j, &w, 0.2, Estimation::Exact).unwrap().holds);
        }
    }
}

#[test]
fn subspace_sampler_is_uniform() {
    let n = 4;
    for (q_dim, l) in [(0, 2), (1, 2), (1, 3)] {
        let q = sample_subspace(n, q_dim, &mut rng_from_seed(1)).unwrap();
        let cells: Vec<F2Subspace> =
            enumerate_grassmann(n, l).unwrap().into_iter().filter(|s| s.contains(&q).unwrap()).collect();
        let mut hist: HashMap<F2Subspace, u64> = cells.iter().map(|c| (c.clone(), 0)).collect();
        let full = F2Subspace::full(n);
        for t in 0..30 * cells.len() as u64 {
            let s = sample_between(&q, &full, l, &mut rng_from_seed(indexed_seed(2, "cell", t))).unwrap();
            *hist.get_mut(&s).expect("sample lies in the zoom") += 1;
        }
        let counts: Vec<u64> = cells.iter().map(|c| hist[c]).collect();
        assert!(chi_square_uniform(&counts).1 > 1e-3, "q_dim={q_dim} l={l}");
    }
}
