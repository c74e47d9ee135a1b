//! Acceptance checks. Each criterion prints one `PASS` or `FAIL` line; the
//! process exits nonzero when any criterion fails.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use grasspcp::bilinear::{decay_bound, phi_eigenvalue, rank_of_index};
use grasspcp::composed::{completeness_experiment, ComposedConfig, Universe};
use grasspcp::csp::{csp_value_exact, CspInstance, Edge, RandomCsp, Vertex};
use grasspcp::f2la::{
    coord_bit, enumerate_between, enumerate_grassmann, enumerate_subspaces_of, enumerate_superspaces, gaussian_binomial, qbin_u64,
    sample_subspace, F2Subspace, LinearFunctional,
};
use grasspcp::grasstest::{
    count_hyperedges, family_pseudorandomness, find_maximal_pairs, lift_indicator, run_consistency_test, PassProbability,
    SubspaceFamily, Table, TablePair, TestMode,
};
use grasspcp::outerpcp::{covering_sd_advice, gen_3lin, play_game, retain_codim_experiment, v_choices, Estimation, OuterConfig, Planted};
use grasspcp::reduce::{duplicate_constraints, fully_regularize, k_partitize, partwise_regularize};
use grasspcp::rng::{indexed_seed, rng_from_seed, Rng as ChaRng};
use grasspcp::{BilinearFn, Rational};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

fn ratio(a: u64, b: u64) -> Rational {
    Rational::new(a.into(), b.into())
}

fn qbin(n: usize, l: usize) -> u64 {
    qbin_u64(n, l).expect("small")
}

// ---------------------------------------------------------------------------
// 1. Grassmann counting
// ---------------------------------------------------------------------------

/// Member set of a subspace as a bitmask over the 2^n vectors (n <= 6).
fn members(s: &F2Subspace) -> u64 {
    s.vectors().fold(0, |a, v| a | 1u64 << v)
}

/// Every subspace of F_2^n, grown one vector at a time, as member bitmasks.
fn span_layers(n: usize) -> Vec<HashSet<u64>> {
    let mut layers = vec![HashSet::from([1u64])];
    for _ in 0..n {
        let mut next = HashSet::new();
        for &s in layers.last().expect("nonempty") {
            for v in 0..1u64 << n {
                if s >> v & 1 == 1 {
                    continue;
                }
                let mut t = s;
                for w in 0..1u64 << n {
                    if s >> w & 1 == 1 {
                        t |= 1u64 << (w ^ v);
                    }
                }
                next.insert(t);
            }
        }
        layers.push(next);
    }
    layers
}

fn criterion_1() -> Check {
    let mut checks = 0u64;
    for n in 0..=6 {
        let layers = span_layers(n);
        for l in 0..=n {
            let listed = enumerate_grassmann(n, l).map_err(|e| e.to_string())?;
            let sets: HashSet<u64> = listed.iter().map(members).collect();
            ensure!(sets.len() == listed.len(), "duplicates in Grass({n},{l})");
            ensure!(sets == layers[l], "Grass({n},{l}) differs from the span closure");
            ensure!(gaussian_binomial(n, l).map_err(|e| e.to_string())?.to_u64() == Some(listed.len() as u64), "count at ({n},{l})");
            checks += 1;
        }
        if n == 0 {
            continue;
        }
        for dq in 0..=n {
            for q in enumerate_grassmann(n, dq).map_err(|e| e.to_string())? {
                let qm = members(&q);
                for dw in dq..=n {
                    if n == 6 && (dq > 1 || dw < 5) {
                        continue;
                    }
                    for w in enumerate_superspaces(&q, dw).map_err(|e| e.to_string())? {
                        let wm = members(&w);
                        for l in dq..=dw {
                            let got = enumerate_between(&q, &w, l).map_err(|e| e.to_string())?.len() as u64;
                            let brute = layers[l].iter().filter(|&&s| s & qm == qm && s & !wm == 0).count() as u64;
                            let formula = qbin(dw - dq, l - dq);
                            ensure!(got == formula && brute == formula, "zoom n={n} dq={dq} dw={dw} l={l}: {got} {brute} {formula}");
                            checks += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{checks} counts agree with the span closure and the q-binomials"))
}

// ---------------------------------------------------------------------------
// 2. Consistency-test completeness
// ---------------------------------------------------------------------------

fn exact_pass(tp: &TablePair, k: u32) -> Result<Rational, String> {
    match run_consistency_test(tp, k, TestMode::Exact).map_err(|e| e.to_string())? {
        PassProbability::Exact(r) => Ok(r),
        PassProbability::Estimate(_) => Err("exact mode returned an estimate".into()),
    }
}

fn criterion_2() -> Check {
    let mut rng = rng_from_seed(2);
    let globals: Vec<u64> = [0u64, 0b111111].into_iter().chain((0..4).map(|_| rng.gen_range(0..64))).collect();
    for &f in &globals {
        let tp = TablePair::from_globals(6, 2, 1, f, f).map_err(|e| e.to_string())?;
        for k in 1..=3 {
            let p = exact_pass(&tp, k)?;
            ensure!(p.is_one(), "global {f:06b} at k={k} passes with {p}");
        }
    }
    let want = ratio(qbin(5, 1), qbin(6, 1));
    ensure!(want == ratio(31, 63), "qbin ratio is {want}");
    let mut mismatched = 0;
    for (f, g) in [(0b000001, 0b000011)].into_iter().chain((0..4).map(|_| (rng.gen_range(0..64), rng.gen_range(0..64)))) {
        if f == g {
            continue;
        }
        let p = exact_pass(&TablePair::from_globals(6, 2, 1, f, g).map_err(|e| e.to_string())?, 1)?;
        ensure!(p == want, "globals {f:06b}/{g:06b} pass with {p}");
        mismatched += 1;
    }
    Ok(format!("{} globals pass with 1 at k=1..3; {mismatched} mismatched pairs pass with 31/63", globals.len()))
}

// ---------------------------------------------------------------------------
// 3. Hyperedges versus the inner product
// ---------------------------------------------------------------------------

fn hyperedge_probability(rf: &SubspaceFamily, lf: &SubspaceFamily, k: u32) -> Rational {
    let mut cnt: HashMap<F2Subspace, u64> = HashMap::new();
    for l in lf.members() {
        for r in enumerate_subspaces_of(l, rf.l()).expect("dims") {
            if rf.contains(&r) {
                *cnt.entry(r).or_insert(0) += 1;
            }
        }
    }
    let num: u64 = cnt.values().map(|c| c.pow(k)).sum();
    let sup = qbin(lf.n() - rf.l(), lf.l() - rf.l());
    ratio(num, qbin(rf.n(), rf.l()) * sup.pow(k))
}

fn criterion_3() -> Check {
    let mut rng = rng_from_seed(3);
    let two = Rational::from_integer(2.into());
    let mut pairs: Vec<(SubspaceFamily, SubspaceFamily)> = (0..50)
        .map(|_| {
            let rf = SubspaceFamily::random(6, 1, 0.5, &mut rng).expect("family");
            let lf = SubspaceFamily::random(6, 2, 0.5, &mut rng).expect("family");
            (rf, lf)
        })
        .collect();
    pairs.push((SubspaceFamily::empty(6, 1), SubspaceFamily::full(6, 2).map_err(|e| e.to_string())?));
    pairs.push((SubspaceFamily::full(6, 1).map_err(|e| e.to_string())?, SubspaceFamily::full(6, 2).map_err(|e| e.to_string())?));
    let mut worst = f64::INFINITY;
    for (i, (rf, lf)) in pairs.iter().enumerate() {
        let rep = count_hyperedges(rf, lf, 2).map_err(|e| e.to_string())?;
        ensure!(rep.union_bound_regime, "pair {i} outside the union-bound regime");
        ensure!(rep.probability == hyperedge_probability(rf, lf, 2), "pair {i}: probability disagrees with direct count");
        ensure!(rep.probability <= &two * &rep.inner, "pair {i}: {} > 2 * {}", rep.probability, rep.inner);
        if !rep.probability.is_zero() {
            worst = worst.min((&two * &rep.inner / &rep.probability).to_f64().unwrap_or(f64::NAN));
        }
    }
    ensure!(pairs[50].1.len() as u64 == qbin(6, 2), "full family size");
    Ok(format!("52 family pairs; smallest 2<(TF)^2,G>/Pr ratio {worst:.4}"))
}

// ---------------------------------------------------------------------------
// 4. Lifting preserves pseudo-randomness
// ---------------------------------------------------------------------------

fn criterion_4() -> Check {
    let mut rng = rng_from_seed(4);
    let two = Rational::from_integer(2.into());
    let mut max_ratio = 0.0f64;
    for t in 0..30 {
        let p = rng.gen_range(0.05..0.6);
        let fam = SubspaceFamily::random(5, 2, p, &mut rng).map_err(|e| e.to_string())?;
        let lifted: BilinearFn<Rational> = lift_indicator(&fam).map_err(|e| e.to_string())?;
        for r in 1..=2 {
            let (eps, _) = family_pseudorandomness(&fam, r).map_err(|e| e.to_string())?;
            let rep = lifted.pseudorandomness(r).map_err(|e| e.to_string())?;
            ensure!(rep.epsilon <= &two * &eps, "family {t}, r={r}: lifted {} > 2 * {eps}", rep.epsilon);
            if !eps.is_zero() {
                max_ratio = max_ratio.max((&rep.epsilon / &eps).to_f64().unwrap_or(f64::NAN));
            }
        }
    }
    Ok(format!("30 families at n=5, l=2, r in {{1,2}}; largest lifted/original ratio {max_ratio:.4}"))
}

// ---------------------------------------------------------------------------
// 5. Operator spectra
// ---------------------------------------------------------------------------

/// A basis-invariant boolean function: a random bit per column space.
fn random_invariant<T: grasspcp::scalar::Scalar>(n: usize, m: usize, rng: &mut ChaRng) -> BilinearFn<T> {
    let mut bits = HashMap::new();
    for d in 0..=m.min(n) {
        for s in enumerate_grassmann(n, d).expect("dims") {
            bits.insert(s, rng.gen_bool(0.5));
        }
    }
    BilinearFn::from_column_space(n, m, |s| if bits[s] { T::one() } else { T::zero() }).expect("shape")
}

fn criterion_5() -> Check {
    let mut characters = 0usize;
    let mut max_gap = f64::NEG_INFINITY;
    for n in 4..=5 {
        for c in 1..=2 {
            let m = 2;
            let bad: Vec<usize> = (0..1usize << (n * m))
                .into_par_iter()
                .filter(|&s| {
                    let chi = BilinearFn::<Rational>::character(n, m, s).expect("index");
                    let lam = phi_eigenvalue(n, m, s, c);
                    let bound: Rational = decay_bound(rank_of_index(s, n, m), c, n);
                    chi.apply_phi(c).expect("c <= m") != chi.map(|v| v * &lam) || lam.abs() > bound
                })
                .collect();
            ensure!(bad.is_empty(), "n={n} c={c}: characters {:?} break the eigen identity or the bound", &bad[..bad.len().min(5)]);
            for s in 0..1usize << (n * m) {
                let lam = phi_eigenvalue(n, m, s, c);
                let bound: Rational = decay_bound(rank_of_index(s, n, m), c, n);
                max_gap = max_gap.max((lam.abs() - bound).to_f64().unwrap_or(f64::NAN));
            }
            characters += 1 << (n * m);
        }
    }

    let mut rng = rng_from_seed(5);
    let mut worst_inner = 0.0f64;
    for t in 0..20 {
        let n = 4 + t % 2;
        let f: BilinearFn<f64> = random_invariant(n, 2, &mut rng);
        ensure!(f.is_boolean() && f.is_basis_invariant(), "function {t} is not a basis-invariant boolean function");
        let images: Vec<BilinearFn<f64>> = f.levels().iter().map(|l| l.apply_t(1).expect("c <= m")).collect();
        for i in 0..images.len() {
            for j in i + 1..images.len() {
                let ip = images[i].inner(&images[j]).expect("shapes").abs();
                worst_inner = worst_inner.max(ip);
                ensure!(ip <= 1e-9, "function {t}: <T f^={i}, T f^={j}> = {ip:e}");
            }
        }
    }

    let mut decays = 0;
    for (n, m, c) in [(4, 2, 1), (5, 2, 1), (4, 3, 2)] {
        for _ in 0..4 {
            let f: BilinearFn<Rational> = random_invariant(n, m, &mut rng);
            for (d, level) in f.levels().iter().enumerate() {
                let lhs = level.apply_t(c).expect("c <= m").norm2_sq();
                let bound: Rational = decay_bound(d, c, n);
                let rhs = bound * level.norm2_sq();
                ensure!(lhs <= rhs, "n={n} m={m} c={c} level {d}: {lhs} > {rhs}");
                decays += 1;
            }
        }
    }
    Ok(format!(
        "{characters} characters exact, max |lambda|-bound {max_gap:.4}; 20 functions orthogonal (max {worst_inner:.1e}); {decays} level decays"
    ))
}

// ---------------------------------------------------------------------------
// 6. Parseval and level decomposition
// ---------------------------------------------------------------------------

fn criterion_6() -> Check {
    let mut rng = rng_from_seed(6);
    let mut shapes = 0;
    for n in 1..=12 {
        for m in 1..=12 {
            if n * m > 12 {
                continue;
            }
            for _ in 0..3 {
                let f = BilinearFn::<f64>::from_fn(n, m, |_| rng.gen_range(-1.0..1.0)).map_err(|e| e.to_string())?;
                let levels = f.levels();
                let total: f64 = levels.iter().map(|l| l.norm2_sq()).sum();
                ensure!((total - f.norm2_sq()).abs() <= 1e-9, "n={n} m={m}: level energies {total} vs {}", f.norm2_sq());
                let mut sum = vec![0.0; f.len()];
                for l in &levels {
                    for (a, b) in sum.iter_mut().zip(l.values()) {
                        *a += b;
                    }
                }
                let err = sum.iter().zip(f.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                ensure!(err <= 1e-9, "n={n} m={m}: levels sum back with error {err:e}");
            }
            shapes += 1;
        }
    }
    Ok(format!("{shapes} shapes with n*m <= 12, 3 random functions each"))
}

// ---------------------------------------------------------------------------
// 7. Clique structure
// ---------------------------------------------------------------------------

struct Union {
    n: usize,
    ia: Vec<u64>,
    ib: Vec<u64>,
}

/// Coordinates of both questions inside the span of their joint variables.
fn union_coords(a: &[usize], b: &[usize]) -> Union {
    let vars: BTreeSet<usize> = a.iter().chain(b).copied().collect();
    let vars: Vec<usize> = vars.into_iter().collect();
    let n = vars.len();
    let img = |q: &[usize]| q.iter().map(|v| coord_bit(n, vars.binary_search(v).expect("member"))).collect();
    Union { n, ia: img(a), ib: img(b) }
}

fn embed(v: u64, width: usize, img: &[u64]) -> u64 {
    (0..width).filter(|&j| v & coord_bit(width, j) != 0).fold(0, |acc, j| acc ^ img[j])
}

fn embed_space(s: &F2Subspace, img: &[u64], n: usize) -> F2Subspace {
    F2Subspace::from_rows(s.basis().iter().map(|&b| embed(b, s.ambient_dim(), img)).collect(), n)
}

fn criterion_7() -> Check {
    let (inst, sigma) = gen_3lin(18, 6, 0.0, 7).map_err(|e| e.to_string())?;
    let cfg = ComposedConfig { j: 2, ell2: 2, ellbot: 1, k: 2, r: 1, c: None };
    let uni = Universe::build(&inst, cfg).map_err(|e| e.to_string())?;
    let nq = uni.questions.len();
    ensure!(nq >= 6, "only {nq} admissible questions");
    let na = uni.a.len();
    let h: Vec<F2Subspace> = uni.questions.iter().map(|q| q.h_u()).collect();

    // Relation from the definition, over all pairs.
    let rows: Vec<Vec<usize>> = (0..na)
        .into_par_iter()
        .map(|x| {
            let vx = &uni.a[x];
            (0..na)
                .filter(|&y| {
                    let vy = &uni.a[y];
                    let u = union_coords(&uni.questions[vx.u].vars, &uni.questions[vy.u].vars);
                    let lhs = embed_space(&vx.space, &u.ia, u.n).sum_unchecked(&embed_space(&h[vy.u], &u.ib, u.n));
                    let rhs = embed_space(&vy.space, &u.ib, u.n).sum_unchecked(&embed_space(&h[vx.u], &u.ia, u.n));
                    lhs == rhs
                })
                .collect()
        })
        .collect();
    for x in 0..na {
        ensure!(rows[x].binary_search(&x).is_ok(), "not reflexive at {x}");
        for &y in &rows[x] {
            ensure!(rows[y].binary_search(&x).is_ok(), "not symmetric at ({x},{y})");
            ensure!(rows[y] == rows[x], "not transitive through ({x},{y})");
        }
    }
    for x in (0..na).step_by(3) {
        for y in 0..na {
            ensure!(uni.same_clique(x, y) == rows[x].binary_search(&y).is_ok(), "library relation differs at ({x},{y})");
        }
    }
    let classes: BTreeSet<Vec<usize>> = rows.iter().cloned().collect();
    let cliques: BTreeSet<Vec<usize>> = uni.cliques.iter().map(|c| {
        let mut c = c.clone();
        c.sort_unstable();
        c
    }).collect();
    ensure!(classes == cliques, "equivalence classes differ from the cliques");

    // Extension uniqueness: exactly one target label shares an extension.
    let alph = u64::from(uni.alphabet_a());
    let mut extensions = 0u64;
    for members in &uni.cliques {
        for &x in members {
            for &y in members {
                let u = union_coords(&uni.questions[uni.a[x].u].vars, &uni.questions[uni.a[y].u].vars);
                let width = uni.questions[uni.a[x].u].n();
                for a in 0..alph {
                    let fx = uni.a_functional(x, a);
                    let compatible: Vec<u64> = (0..alph)
                        .filter(|&b| {
                            let fy = uni.a_functional(y, b);
                            let mut pairs: Vec<(u64, bool)> =
                                fx.domain().basis().iter().map(|&v| (embed(v, width, &u.ia), fx.eval(v))).collect();
                            pairs.extend(fy.domain().basis().iter().map(|&v| (embed(v, width, &u.ib), fy.eval(v))));
                            LinearFunctional::from_pairs(u.n, &pairs).is_some()
                        })
                        .collect();
                    let ext = uni.clique_extend_label(a, x, y).map_err(|e| e.to_string())?;
                    ensure!(compatible == vec![ext], "labels {compatible:?} extend {a} from {x} to {y}; library says {ext}");
                    extensions += 1;
                }
            }
        }
    }
    let (t1, _) = uni.planted_tables(&sigma);
    ensure!(uni.is_clique_consistent(&t1), "planted tables are not clique-consistent");
    let largest = uni.cliques.iter().map(Vec::len).max().unwrap_or(0);
    Ok(format!(
        "{nq} questions, {na} A-vertices, {} cliques (largest {largest}); {extensions} unique extensions",
        uni.cliques.len()
    ))
}

// ---------------------------------------------------------------------------
// 8. Composed completeness
// ---------------------------------------------------------------------------

fn criterion_8() -> Check {
    let cfg = ComposedConfig { j: 2, ell2: 2, ellbot: 1, k: 2, r: 1, c: None };
    let mut out = Vec::new();
    for eta in [0.0, 0.1] {
        let (inst, sigma) = gen_3lin(30, 40, eta, 8).map_err(|e| e.to_string())?;
        let uni = Universe::build(&inst, cfg).map_err(|e| e.to_string())?;
        let rep = completeness_experiment(&uni, &inst, &sigma, 10_000, 80).map_err(|e| e.to_string())?;
        ensure!((rep.epsilon1 - eta).abs() < 1e-12, "planted assignment violates {} of the equations", rep.epsilon1);
        ensure!(rep.pass.ci_high >= rep.bound, "eta={eta}: pass {:.4} (CI high {:.4}) < {:.4}", rep.pass.estimate, rep.pass.ci_high, rep.bound);
        out.push(format!("eps1={eta}: {:.4} >= {:.2}", rep.pass.estimate, rep.bound));
    }
    Ok(out.join("; "))
}

// ---------------------------------------------------------------------------
// 9. Outer-game completeness
// ---------------------------------------------------------------------------

fn criterion_9() -> Check {
    let (inst, sigma) = gen_3lin(200, 400, 0.05, 9).map_err(|e| e.to_string())?;
    let eps = 1.0 - inst.value_of(&sigma);
    ensure!((eps - 0.05).abs() < 1e-12, "planted assignment violates {eps}");
    let mut out = Vec::new();
    for j in [2, 4] {
        let cfg = OuterConfig { j, beta: 0.1, r: 1 };
        let p = play_game(&inst, &cfg, &Planted(sigma.clone()), &Planted(sigma.clone()), 100_000, 90 + j as u64)
            .map_err(|e| e.to_string())?;
        let bound = 1.0 - j as f64 * eps;
        ensure!(p.ci_high >= bound, "J={j}: win {:.4} (CI high {:.4}) < {bound:.2}", p.estimate, p.ci_high);
        out.push(format!("J={j}: {:.4} >= {bound:.2}", p.estimate));
    }
    Ok(out.join("; "))
}

// ---------------------------------------------------------------------------
// 10. Covering bounds
// ---------------------------------------------------------------------------

fn advice_lines_sd(j: usize, beta: f64) -> f64 {
    let n = 3 * j;
    let choices = v_choices(j, beta).expect("small");
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

fn criterion_10() -> Check {
    let mut rng = rng_from_seed(10);
    let mut cases = 0;
    let mut tightest = f64::INFINITY;
    for j in [2, 3] {
        for (bi, beta) in [0.0, 0.1, 0.2].into_iter().enumerate() {
            for r1 in 0..=1 {
                let exact = covering_sd_advice(j, r1, beta, Estimation::Exact).map_err(|e| e.to_string())?;
                if r1 == 1 {
                    let direct = advice_lines_sd(j, beta);
                    ensure!((exact.estimate - direct).abs() < 1e-12, "advice SD {} vs direct {direct}", exact.estimate);
                }
                if beta == 0.0 {
                    ensure!(exact.estimate == 0.0, "advice SD at beta=0 is {}", exact.estimate);
                } else {
                    let seed = indexed_seed(100, "advice", (j * 100 + bi * 10 + r1) as u64);
                    let mc = covering_sd_advice(j, r1, beta, Estimation::Sampled { samples: 20_000, seed }).map_err(|e| e.to_string())?;
                    ensure!(mc.ci_low <= mc.bound, "advice j={j} beta={beta} r1={r1}: {} - CI > {}", mc.estimate, mc.bound);
                    ensure!(exact.estimate <= exact.bound, "advice j={j} beta={beta} r1={r1}: exact {} > {}", exact.estimate, exact.bound);
                    tightest = tightest.min(mc.bound - mc.ci_low);
                }
                cases += 1;
            }
            for s in 0..=1 {
                let w = sample_subspace(3 * j, 3 * j - s, &mut rng).map_err(|e| e.to_string())?;
                let exact = retain_codim_experiment(j, &w, beta, Estimation::Exact).map_err(|e| e.to_string())?;
                let seed = indexed_seed(200, "retain", (j * 100 + bi * 10 + s) as u64);
                let mc = retain_codim_experiment(j, &w, beta, Estimation::Sampled { samples: 20_000, seed }).map_err(|e| e.to_string())?;
                if beta == 0.0 {
                    ensure!(exact.failure == 0.0 && mc.failure == 0.0, "retain at beta=0 fails with {} / {}", exact.failure, mc.failure);
                } else {
                    ensure!(mc.ci_low <= mc.bound, "retain j={j} beta={beta} s={s}: {} - CI > {}", mc.failure, mc.bound);
                    ensure!(exact.failure <= exact.bound, "retain j={j} beta={beta} s={s}: exact {} > {}", exact.failure, exact.bound);
                    tightest = tightest.min(mc.bound - mc.ci_low);
                }
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} advice/retain cases; smallest margin bound - (estimate - CI) = {tightest:.4}"))
}

// ---------------------------------------------------------------------------
// 11. Reduction value laws
// ---------------------------------------------------------------------------

fn random_sat(k: usize, r: u32, rng: &mut ChaRng) -> Vec<Vec<u32>> {
    let total = (r as usize).pow(k as u32);
    let mut sat: Vec<Vec<u32>> = (0..total)
        .filter(|_| rng.gen_bool(0.4))
        .map(|mut x| {
            (0..k)
                .map(|_| {
                    let d = (x % r as usize) as u32;
                    x /= r as usize;
                    d
                })
                .collect()
        })
        .collect();
    if sat.is_empty() {
        sat.push((0..k).map(|_| rng.gen_range(0..r)).collect());
    }
    sat
}

/// A k-partite instance with `m` edges; column `i` lists the part-`i`
/// endpoint of every edge.
fn partite(sizes: &[usize], columns: Vec<Vec<usize>>, r: u32, rng: &mut ChaRng) -> CspInstance {
    let mut vertices = Vec::new();
    let mut parts = Vec::new();
    for (p, &s) in sizes.iter().enumerate() {
        parts.push((vertices.len()..vertices.len() + s).collect::<Vec<_>>());
        vertices.extend((0..s).map(|j| Vertex { name: format!("p{p}v{j}"), alphabet: r }));
    }
    let m = columns[0].len();
    let edges = (0..m)
        .map(|e| Edge::unit(columns.iter().enumerate().map(|(p, c)| parts[p][c[e]]).collect(), random_sat(sizes.len(), r, rng)))
        .collect();
    CspInstance::new(sizes.len(), vertices, Some(parts), edges).expect("valid")
}

/// Every vertex appears at least once; the rest of the column is random.
fn covering_column(size: usize, m: usize, rng: &mut ChaRng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut c: Vec<usize> = (0..size).chain((size..m).map(|_| rng.gen_range(0..size))).collect();
    c.shuffle(rng);
    c
}

/// Vertex `v` of a part of size `s` appears exactly `m / s` times.
fn regular_column(size: usize, m: usize, rng: &mut ChaRng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut c: Vec<usize> = (0..m).map(|e| e % size).collect();
    c.shuffle(rng);
    c
}

fn value(inst: &CspInstance) -> Result<Rational, String> {
    Ok(csp_value_exact(inst).map_err(|e| e.to_string())?.value)
}

fn criterion_11() -> Check {
    let mut rng = rng_from_seed(11);
    let mut counts = [0usize; 3];
    let mut worst_slack = f64::INFINITY;
    for t in 0..30 {
        let k = 2 + t % 2;
        let r = 2 + ((t / 2) % 2) as u32;

        // k-partitization and duplication.
        let flat = RandomCsp { n: if k == 2 { 5 } else { 4 }, k, r, m: 6, density: 0.4 }.generate(&mut rng).map_err(|e| e.to_string())?;
        let v = value(&flat)?;
        let w = value(&k_partitize(&flat).map_err(|e| e.to_string())?)?;
        let factor = ratio((k as u64).pow(k as u32), (1..=k as u64).product());
        ensure!(v <= w && w <= &factor * &v, "instance {t}: k-partitize gives {v} -> {w}");
        ensure!(value(&duplicate_constraints(&flat, 2 + t % 3).map_err(|e| e.to_string())?)? == v, "instance {t}: duplication moved the value");
        counts[0] += 1;

        // Partwise regularization of every part.
        let (sizes, m): (Vec<usize>, usize) = if k == 2 { (vec![3, 3], 6) } else { (vec![2, 3, 3], 5) };
        let columns = sizes.iter().map(|&s| covering_column(s, m, &mut rng)).collect();
        let inst = partite(&sizes, columns, r, &mut rng);
        let vin = value(&inst)?;
        let deg = inst.degrees();
        let parts = inst.parts().expect("partite").to_vec();
        for i in 0..k {
            let d = parts[i].iter().map(|&x| deg[x]).min().expect("nonempty");
            let (out, rep) = partwise_regularize(&inst, d, i, indexed_seed(11, "part", (t * 3 + i) as u64)).map_err(|e| e.to_string())?;
            ensure!(out.edges().len() == d * inst.edges().len(), "instance {t} part {i}: |E'| = {}", out.edges().len());
            let odeg = out.degrees();
            let oparts = out.parts().expect("partite");
            ensure!(oparts[i].iter().all(|&x| odeg[x] == d), "instance {t} part {i}: regularized degrees differ from {d}");
            for j in (0..k).filter(|&j| j != i) {
                ensure!(
                    oparts[j].iter().zip(&parts[j]).all(|(&a, &b)| odeg[a] == d * deg[b]),
                    "instance {t} part {i}: part {j} degrees not scaled by {d}"
                );
            }
            let vout = value(&out)?;
            ensure!(vout >= vin, "instance {t} part {i}: value fell from {vin} to {vout}");
            let lambda = rep.lambda_max.expect("measured");
            let err = lambda * f64::from(r).powi(k as i32 - 1).sqrt() / d as f64;
            let gap = (&vout - &vin).to_f64().unwrap_or(f64::INFINITY);
            ensure!(gap <= err + 1e-9, "instance {t} part {i}: val(out) - val(in) = {gap} > {err}");
            worst_slack = worst_slack.min(err - gap);
            counts[1] += 1;
        }

        // Full regularization of a partwise-regular instance.
        let (sizes, m): (Vec<usize>, usize) = if k == 2 { (vec![1, 2], 2) } else { (vec![1, 2, 2], 2) };
        let columns = sizes.iter().map(|&s| regular_column(s, m, &mut rng)).collect();
        let inst = partite(&sizes, columns, r, &mut rng);
        let c: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=2)).collect();
        let d: Vec<usize> = sizes.iter().map(|&s| m / s).collect();
        let out = fully_regularize(&inst, &c).map_err(|e| e.to_string())?;
        let odeg = out.degrees();
        let prod: usize = c.iter().zip(&d).map(|(a, b)| a * b).product();
        for (i, p) in out.parts().expect("partite").iter().enumerate() {
            ensure!(p.iter().all(|&x| odeg[x] == prod / c[i]), "instance {t}: part {i} degree differs from {}", prod / c[i]);
        }
        ensure!(value(&out)? == value(&inst)?, "instance {t}: full regularization moved the value");
        counts[2] += 1;
    }
    Ok(format!(
        "{} sandwich/duplication, {} partwise (min soundness slack {worst_slack:.4}), {} full regularizations",
        counts[0], counts[1], counts[2]
    ))
}

// ---------------------------------------------------------------------------
// 12. Maximal pairs
// ---------------------------------------------------------------------------

type Pair = (F2Subspace, u64);

/// Agreement of every functional on every zoom-out containing `q`, by
/// direct enumeration of the table's subspaces.
fn all_agreements(t: &Table, q: &F2Subspace, ls: &[F2Subspace]) -> HashMap<Pair, Rational> {
    let n = t.n();
    let mut out = HashMap::new();
    for d in t.dim().max(q.dim())..=n {
        for w in enumerate_grassmann(n, d).expect("dims") {
            if !w.contains_unchecked(q) {
                continue;
            }
            let inside: Vec<&F2Subspace> = ls.iter().filter(|l| w.contains_unchecked(l) && l.contains_unchecked(q)).collect();
            for g in LinearFunctional::all_on(&w) {
                let hits = inside.iter().filter(|l| t.get(l) == Some(&g.restrict(l).expect("sub"))).count() as u64;
                out.insert((w.clone(), g.coeff()), ratio(hits, inside.len() as u64));
            }
        }
    }
    out
}

fn brute_maximal(agree: &HashMap<Pair, Rational>, n: usize, c: f64, s: f64, max_codim: usize) -> BTreeSet<(Vec<u64>, u64)> {
    let f = |r: &Rational| r.to_f64().unwrap_or(0.0);
    agree
        .iter()
        .filter(|((w, _), a)| w.codim() <= max_codim && f(a) >= c)
        .filter(|((w, g), _)| {
            let gw = LinearFunctional::from_global(w.clone(), *g);
            !agree.iter().any(|((w2, g2), a2)| {
                w2.dim() > w.dim() && w2.contains_unchecked(w) && f(a2) >= s * c
                    && LinearFunctional::from_global(w2.clone(), *g2).restrict(w).expect("sub") == gw
            })
        })
        .map(|((w, g), _)| (w.basis().to_vec(), LinearFunctional::from_global(w.clone(), *g).coeff()))
        .filter(|_| n > 0)
        .collect()
}

fn criterion_12() -> Check {
    let (n, dim, max_codim) = (5, 2, 2);
    let ls = enumerate_grassmann(n, dim).map_err(|e| e.to_string())?;
    let mut rng = rng_from_seed(12);
    let mut returned = 0;
    for trial in 0..8 {
        let t = Table::random(n, dim, &mut rng).map_err(|e| e.to_string())?;
        let q = if trial % 2 == 0 { F2Subspace::zero(n) } else { sample_subspace(n, 1, &mut rng).map_err(|e| e.to_string())? };
        let agree = all_agreements(&t, &q, &ls);
        for (c, s) in [(0.5, 0.5), (0.75, 0.5), (0.3, 0.8)] {
            let got = find_maximal_pairs(&t, &q, c, s, max_codim).map_err(|e| e.to_string())?;
            for p in &got {
                let a = agree.get(&(p.w.clone(), p.g.coeff())).ok_or("pair outside the zoom-outs")?;
                ensure!(*a == p.agreement, "reported agreement {} vs {a}", p.agreement);
            }
            let got_set: BTreeSet<(Vec<u64>, u64)> = got.iter().map(|p| (p.w.basis().to_vec(), p.g.coeff())).collect();
            let want = brute_maximal(&agree, n, c, s, max_codim);
            ensure!(got_set == want, "trial {trial} C={c} s={s}: {} returned, {} maximal by brute force", got_set.len(), want.len());
            returned += got.len();
        }
    }

    let mut recovered = 0;
    for trial in 0..6 {
        let w0 = sample_subspace(n, n - 1, &mut rng).map_err(|e| e.to_string())?;
        let f = rng.gen_range(0..1u64 << n);
        let mut t = Table::new(n, dim);
        for l in &ls {
            let g = if w0.contains_unchecked(l) {
                LinearFunctional::from_global(l.clone(), f)
            } else {
                LinearFunctional::from_basis_values(l.clone(), rng.gen_range(0..1u64 << dim))
            };
            t.insert(l.clone(), g).map_err(|e| e.to_string())?;
        }
        let q = if trial % 2 == 0 {
            F2Subspace::zero(n)
        } else {
            let line = w0.combine(rng.gen_range(1..1u64 << w0.dim()));
            F2Subspace::span_of(line, n)
        };
        let target = LinearFunctional::from_global(w0.clone(), f);
        let got = find_maximal_pairs(&t, &q, 0.9, 0.9, 2).map_err(|e| e.to_string())?;
        ensure!(got.iter().any(|p| p.w == w0 && p.g == target), "planted trial {trial}: (W0, f|W0) not returned");
        recovered += 1;
    }
    Ok(format!("{returned} pairs match the brute-force maximal sets; {recovered}/6 planted zoom-outs recovered"))
}

// ---------------------------------------------------------------------------
// 13. Determinism
// ---------------------------------------------------------------------------

fn cli(args: &[String]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_grasspcp")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() && out.status.code() != Some(2) {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    Ok(text.lines().filter(|l| !l.trim_start().starts_with("\"wall_time_s\"")).collect::<Vec<_>>().join("\n"))
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).expect("json")).expect("write");
    p.to_string_lossy().into_owned()
}

fn criterion_13() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csp = write(dir.path(), "csp.json", &json!({
        "k": 2,
        "vertices": [{"name": "x", "alphabet": 2}, {"name": "y", "alphabet": 2}, {"name": "z", "alphabet": 2}],
        "edges": [
            {"verts": ["x", "y"], "sat": [[0, 0], [1, 1]]},
            {"verts": ["y", "z"], "sat": [[0, 1], [1, 0]]},
            {"verts": ["x", "z"], "sat": [[0, 0], [1, 1]]}
        ]
    }));
    let regular = write(dir.path(), "reg.json", &json!({
        "k": 2,
        "vertices": [{"name": "a", "alphabet": 2}, {"name": "b", "alphabet": 2}, {"name": "c", "alphabet": 2}],
        "parts": [["a"], ["b", "c"]],
        "edges": [
            {"verts": ["a", "b"], "sat": [[0, 0], [1, 1]]},
            {"verts": ["a", "c"], "sat": [[0, 1]]}
        ]
    }));
    let matching = write(dir.path(), "m.json", &json!({"k": 2, "parts": [["a", "b"], ["c", "d"]], "edges": [["a", "c"], ["b", "c"], ["b", "d"]]}));
    let kp = dir.path().join("kp.json").to_string_lossy().into_owned();
    cli(&["reduce-kpartite", "--in", &csp, "--instance-out", &kp].map(String::from))?;

    let small = ["--vars", "24", "--eqs", "10"];
    let commands: Vec<Vec<&str>> = vec![
        vec!["gen-3lin", "--vars", "20", "--eqs", "10", "--eta", "0.1"],
        vec!["csp-value", "--in", &csp, "--method", "all"],
        vec!["reduce-kpartite", "--in", &csp, "--certify"],
        vec!["reduce-regularize", "--in", &kp, "--part", "0", "--degree", "1", "--certify"],
        vec!["reduce-fullreg", "--in", &regular, "--c", "2,1", "--certify"],
        vec!["grassmann-test", "--n", "5", "--trials", "2000", "--bks-samples", "4"],
        vec!["counting-lemma", "--n", "5", "--pairs", "2"],
        vec!["bilinear-spectrum", "--n", "3", "--m", "2"],
        vec!["covering", "--kind", "advice", "--samples", "2000"],
        vec!["covering", "--kind", "retain", "--samples", "2000"],
        vec!["covering", "--kind", "zoom", "--j", "2", "--nq", "3"],
        vec!["outer-game", "--trials", "2000", "--search"],
        [vec!["composed-build", "--samples", "200"], small.to_vec()].concat(),
        [vec!["composed-completeness", "--trials", "500"], small.to_vec()].concat(),
        [vec!["extract-strategies", "--tables", "random", "--trials", "200"], small.to_vec()].concat(),
        vec!["matching-value", "--in", &matching],
    ];
    let mut names = BTreeSet::new();
    for cmd in &commands {
        let mut args: Vec<String> = cmd.iter().map(|s| s.to_string()).collect();
        args.extend(["--seed", "3"].map(String::from));
        let first = cli(&[args.clone(), vec!["--threads".into(), "1".into()]].concat())?;
        let second = cli(&args)?;
        ensure!(!first.is_empty(), "{} printed nothing", cmd[0]);
        ensure!(first == second, "{} differs between runs", cmd[0]);
        names.insert(cmd[0]);
    }
    ensure!(names.len() == 14, "only {} commands covered", names.len());
    Ok(format!("{} invocations over {} commands repeat byte for byte (one thread vs many)", commands.len(), names.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 13] = [
        ("Grassmann counting identities", criterion_1),
        ("consistency-test completeness", criterion_2),
        ("hyperedges versus inner product", criterion_3),
        ("lifting preserves pseudo-randomness", criterion_4),
        ("operator spectra", criterion_5),
        ("Parseval and level decomposition", criterion_6),
        ("clique structure", criterion_7),
        ("composed completeness", criterion_8),
        ("outer-game completeness", criterion_9),
        ("covering bounds", criterion_10),
        ("reduction value laws", criterion_11),
        ("maximal-pair soundness", criterion_12),
        ("determinism", criterion_13),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {why} ({secs:.1}s)", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
