use grasspcp::f2la::{
    enumerate_between, enumerate_grassmann, enumerate_superspaces, gaussian_binomial, mask, parity, qbin_u64, sample_between,
    F2Subspace, LinearFunctional,
};
use grasspcp::rng::rng_from_seed;
use proptest::prelude::*;

fn space(n: usize) -> impl Strategy<Value = F2Subspace> {
    prop::collection::vec(any::<u64>(), 0..=n).prop_map(move |rows| F2Subspace::from_rows(rows.into_iter().map(|r| r & mask(n)).collect(), n))
}

fn pair(max_n: usize) -> impl Strategy<Value = (F2Subspace, F2Subspace)> {
    (1..=max_n).prop_flat_map(|n| (space(n), space(n)))
}

// Counts by brute force over all 2^n vectors.
fn members(s: &F2Subspace) -> Vec<u64> {
    (0..1u64 << s.ambient_dim()).filter(|&v| s.contains_vector(v)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn canonical_form_is_span_invariant((a, b) in pair(8)) {
        let shuffled = F2Subspace::from_rows(a.vectors().collect(), a.ambient_dim());
        prop_assert_eq!(&shuffled, &a);
        prop_assert_eq!(members(&a).len(), 1usize << a.dim());
        let sum = a.sum(&b).unwrap();
        prop_assert_eq!(sum, b.sum(&a).unwrap());
    }

    #[test]
    fn dimension_formula((a, b) in pair(8)) {
        let s = a.sum(&b).unwrap();
        let i = a.intersect(&b).unwrap();
        prop_assert_eq!(s.dim() + i.dim(), a.dim() + b.dim());
        let brute: Vec<u64> = members(&a).into_iter().filter(|&v| b.contains_vector(v)).collect();
        prop_assert_eq!(brute.len(), 1usize << i.dim());
        prop_assert_eq!(a.trivial_intersection(&b).unwrap(), i.dim() == 0);
        prop_assert!(s.contains(&a).unwrap() && s.contains(&b).unwrap());
    }

    #[test]
    fn annihilator_duality(a in (1usize..=8).prop_flat_map(space)) {
        let ann = a.annihilator();
        prop_assert_eq!(ann.dim() + a.dim(), a.ambient_dim());
        for x in ann.vectors() {
            for &r in a.basis() {
                prop_assert!(!parity(x & r));
            }
        }
        prop_assert_eq!(ann.annihilator(), a);
    }

    #[test]
    fn functional_extensions_restrict_back((a, b) in pair(6), g in any::<u64>()) {
        let w = a.sum(&b).unwrap();
        let f = LinearFunctional::from_global(a.clone(), g);
        let exts = f.extensions(&w).unwrap();
        prop_assert_eq!(exts.len(), 1usize << (w.dim() - a.dim()));
        for e in &exts {
            prop_assert_eq!(&e.restrict(&a).unwrap(), &f);
        }
        let pairs: Vec<(u64, bool)> = a.basis().iter().map(|&r| (r, f.eval(r))).collect();
        prop_assert_eq!(LinearFunctional::from_pairs(a.ambient_dim(), &pairs).unwrap(), f.clone());
        // A zero vector prescribed to be one is inconsistent.
        let mut bad = pairs.clone();
        bad.push((0, true));
        prop_assert!(LinearFunctional::from_pairs(a.ambient_dim(), &bad).is_none());
    }

    #[test]
    fn sampled_between_respects_bounds(seed in any::<u64>(), n in 2usize..=7) {
        let mut rng = rng_from_seed(seed);
        let q = sample_between(&F2Subspace::zero(n), &F2Subspace::full(n), 1, &mut rng).unwrap();
        let w = sample_between(&q, &F2Subspace::full(n), n - 1, &mut rng).unwrap();
        let l = sample_between(&q, &w, 2.min(n - 1), &mut rng).unwrap();
        prop_assert!(l.contains(&q).unwrap() && w.contains(&l).unwrap());
        prop_assert_eq!(l.dim(), 2.min(n - 1));
    }
}

#[test]
fn grassmann_counts_agree_with_gaussian_binomials() {
    for n in 0..=6 {
        for l in 0..=n {
            let all = enumerate_grassmann(n, l).unwrap();
            assert_eq!(all.len() as u64, qbin_u64(n, l).unwrap(), "n={n} l={l}");
            let mut sorted = all.clone();
            sorted.dedup();
            assert_eq!(sorted.len(), all.len());
        }
    }
    assert_eq!(gaussian_binomial(6, 3).unwrap(), 1395u32.into());
}

#[test]
fn zoom_counts_follow_the_quotient() {
    let n = 5;
    for q in enumerate_grassmann(n, 1).unwrap().iter().step_by(7) {
        for w in enumerate_superspaces(q, 4).unwrap().iter().step_by(3) {
            for l in 1..=4 {
                let got = enumerate_between(q, w, l).unwrap().len() as u64;
                assert_eq!(got, qbin_u64(w.dim() - q.dim(), l - q.dim()).unwrap());
            }
        }
    }
}
