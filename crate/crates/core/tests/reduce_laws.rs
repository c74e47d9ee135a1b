use grasspcp::csp::{csp_value_exact, CspInstance, Edge, RandomCsp, Vertex};
use grasspcp::reduce::{
    build_bipartite_expander, certify_partwise, duplicate_constraints, fully_regular_degree, fully_regularize, k_partitize,
    partwise_error_term, partwise_regularize, spectral_report, BipartiteGraph,
};
use grasspcp::rng::{rng_from_seed, Rng};
use grasspcp::Rational;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng as _;

fn random_sat(k: usize, r: u32, rng: &mut Rng) -> Vec<Vec<u32>> {
    let total = (r as usize).pow(k as u32);
    let mut sat: Vec<Vec<u32>> = (0..total)
        .filter(|_| rng.gen_bool(0.4))
        .map(|mut x| (0..k).map(|_| { let d = (x % r as usize) as u32; x /= r as usize; d }).collect())
        .collect();
    if sat.is_empty() {
        sat.push(vec![0; k]);
    }
    sat
}

/// A k-partite instance in which vertex `v` of part `i` lies on exactly
/// `slots[i][v]` edges.
fn partite_with_degrees(slots: &[Vec<usize>], r: u32, rng: &mut Rng) -> CspInstance {
    let k = slots.len();
    let mut vertices = Vec::new();
    let mut parts = Vec::new();
    let mut columns = Vec::new();
    for (p, degs) in slots.iter().enumerate() {
        let ids: Vec<usize> = (0..degs.len()).map(|j| vertices.len() + j).collect();
        for j in 0..degs.len() {
            vertices.push(Vertex { name: format!("p{p}v{j}"), alphabet: r });
        }
        let mut col: Vec<usize> = degs.iter().enumerate().flat_map(|(j, &d)| std::iter::repeat(ids[j]).take(d)).collect();
        col.shuffle(rng);
        columns.push(col);
        parts.push(ids);
    }
    let m = columns[0].len();
    assert!(columns.iter().all(|c| c.len() == m), "slot totals must agree");
    let edges = (0..m).map(|e| Edge::unit(columns.iter().map(|c| c[e]).collect(), random_sat(k, r, rng))).collect();
    CspInstance::new(k, vertices, Some(parts), edges).unwrap()
}

#[test]
fn k_partitize_sandwich_and_duplicate_invariance() {
    let mut rng = rng_from_seed(21);
    for t in 0..10 {
        let k = 2 + t % 2;
        let inst = RandomCsp { n: 4, k, r: 2, m: 5, density: 0.4 }.generate(&mut rng).unwrap();
        let v = csp_value_exact(&inst).unwrap().value;
        let out = k_partitize(&inst).unwrap();
        assert_eq!(out.vertices().len(), k * inst.vertices().len());
        let w = csp_value_exact(&out).unwrap().value;
        let ratio = Rational::new(((k as u64).pow(k as u32)).into(), (1..=k as u64).product::<u64>().into());
        assert!(v <= w && w <= ratio * &v, "k={k}");
        assert_eq!(csp_value_exact(&duplicate_constraints(&inst, 3).unwrap()).unwrap().value, v);
    }
}

#[test]
fn partwise_regularize_postconditions() {
    let mut rng = rng_from_seed(22);
    for t in 0..8u64 {
        let degs: Vec<Vec<usize>> = vec![vec![1, 2, 3], vec![2, 2, 2]];
        let inst = partite_with_degrees(&degs, 2, &mut rng);
        let i = (t % 2) as usize;
        let d = *degs[i].iter().min().unwrap();
        let (out, rep) = partwise_regularize(&inst, d, i, t).unwrap();
        assert_eq!(out.edges().len(), d * inst.edges().len());
        let deg = out.degrees();
        let parts = out.parts().unwrap();
        assert!(parts[i].iter().all(|&v| deg[v] == d));
        for (j, p) in parts.iter().enumerate().filter(|(j, _)| *j != i) {
            for (a, &v) in p.iter().enumerate() {
                assert_eq!(deg[v], d * degs[j][a]);
            }
        }
        let (vi, vo) = (csp_value_exact(&inst).unwrap().value, csp_value_exact(&out).unwrap().value);
        assert!(vo >= vi);
        let err = partwise_error_term(rep.lambda_max.unwrap(), 2, 2, d);
        assert!((&vo - &vi).to_f64().unwrap() <= err + 1e-9);
        assert!(certify_partwise(&inst, &out, &rep).unwrap().holds());
    }
}

#[test]
fn fully_regularize_value_and_degree() {
    let mut rng = rng_from_seed(23);
    for c in [vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]] {
        // Part sizes 2 and 4 with degrees 2 and 1.
        let inst = partite_with_degrees(&[vec![2, 2], vec![1, 1, 1, 1]], 2, &mut rng);
        let out = fully_regularize(&inst, &c).unwrap();
        let deg = out.degrees();
        for (i, p) in out.parts().unwrap().iter().enumerate() {
            let want = fully_regular_degree(&[2, 1], &c, i);
            assert!(p.iter().all(|&v| deg[v] == want), "c={c:?} part {i}");
        }
        assert_eq!(csp_value_exact(&out).unwrap().value, csp_value_exact(&inst).unwrap().value);
    }
}

#[test]
fn regularizing_rejects_low_degree_and_non_partite() {
    let mut rng = rng_from_seed(24);
    let inst = partite_with_degrees(&[vec![1, 2], vec![3]], 2, &mut rng);
    assert!(partwise_regularize(&inst, 2, 0, 0).is_err());
    assert!(fully_regularize(&inst, &[1, 1]).is_err());
    let flat = RandomCsp { n: 4, k: 2, r: 2, m: 3, density: 0.5 }.generate(&mut rng).unwrap();
    assert!(partwise_regularize(&flat, 1, 0, 0).is_err());
}

#[test]
fn expander_spectrum_is_sane() {
    for (n, d) in [(4, 2), (6, 3), (8, 2), (5, 5)] {
        let (g, rep) = build_bipartite_expander(n, d, 7).unwrap();
        assert!(g.is_biregular());
        assert!(rep.second_singular >= -1e-12 && rep.second_singular <= d as f64 + 1e-9);
    }
    // The complete bipartite graph has a single nonzero singular value.
    let k = BipartiteGraph::complete(5);
    assert!(spectral_report(&k, 1).second_singular < 1e-9);
    let ident = BipartiteGraph::from_permutations(4, &[vec![0, 1, 2, 3]]).unwrap();
    assert!((spectral_report(&ident, 1).second_singular - 1.0).abs() < 1e-9);
}
