//! The composed (k+1)-CSP at toy scale: admissible questions, the vertex
//! sets 𝓐 and 𝓑 with their side conditions, cliques and clique extension,
//! the constraint sampler, clique-consistency repair, the completeness
//! experiment and prover-strategy extraction.
//!
//! Every question `U = (e_1, ..., e_J)` has `3J` distinct variables, laid out
//! in block order: coordinate `3i + p` of F₂^U is variable `p` of `e_i`.
//! Subspaces attached to `U` live in F₂^{3J} in these coordinates. Relations
//! between two questions are evaluated in F₂ over the union of their variables.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::caps::Caps;
use crate::csp::{CspInstance, Edge, Vertex};
use crate::error::{Error, Result};
use crate::f2la::{coord_bit, enumerate_grassmann, enumerate_superspaces, parity, sample_between, sample_subspace, vec_to_string, F2Subspace, LinearFunctional};
use crate::grasstest::{best_pair, find_maximal_pairs, Table};
use crate::outerpcp::{Answer, Gap3LinInstance, ProverStrategy, ProverView};
use crate::rng::{indexed_seed, rng_from_seed, Rng as ChaRng};
use crate::stats::Proportion;
use crate::Rational;

pub const CONFIDENCE: f64 = 0.99;
/// Largest number of 𝓐 or 𝓑 vertices a universe may materialize.
pub const MAX_VERTICES: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComposedConfig {
    pub j: usize,
    /// Dimension of `L`, written 2ℓ elsewhere.
    pub ell2: usize,
    /// Dimension of `R`, written 2(1-δ)ℓ elsewhere.
    pub ellbot: usize,
    pub k: usize,
    /// Outer advice parameter.
    pub r: usize,
    /// Agreement threshold `C` for lucky zoom-ins; defaults to `2^{-ell2}/5`.
    pub c: Option<f64>,
}

impl ComposedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.j == 0 || 3 * self.j > 63 {
            return Err(Error::domain("J must lie in 1..=21"));
        }
        if self.ell2 == 0 || self.ellbot >= self.ell2 || self.ell2 > 2 * self.j {
            return Err(Error::domain("need ellbot < ell2 <= 2J"));
        }
        if self.k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        self.c.unwrap_or(2f64.powi(-(self.ell2 as i32)) / 5.0)
    }
}

// ---------------------------------------------------------------------------
// Questions
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Question {
    pub equations: Vec<usize>,
    /// The `3J` variables in block order.
    pub vars: Vec<usize>,
    pub rhs: Vec<bool>,
}

impl Question {
    pub fn j(&self) -> usize {
        self.equations.len()
    }

    pub fn n(&self) -> usize {
        3 * self.j()
    }

    /// `H_U`, spanned by the block indicators `x_{e_i}`.
    pub fn h_u(&self) -> F2Subspace {
        F2Subspace::from_rows((0..self.j()).map(|i| self.block(i)).collect(), self.n())
    }

    fn block(&self, i: usize) -> u64 {
        let n = self.n();
        (0..3).fold(0, |a, p| a | coord_bit(n, 3 * i + p))
    }

    /// Side-condition prescriptions `(x_{e_i}, b_i)`.
    pub fn psi_pairs(&self) -> Vec<(u64, bool)> {
        (0..self.j()).map(|i| (self.block(i), self.rhs[i])).collect()
    }

    pub fn psi(&self) -> LinearFunctional {
        LinearFunctional::from_pairs(self.n(), &self.psi_pairs()).expect("independent blocks")
    }

    /// A global assignment written in block coordinates.
    pub fn restrict_assignment(&self, sigma: &[bool]) -> u64 {
        let n = self.n();
        self.vars.iter().enumerate().filter(|(_, &v)| sigma[v]).fold(0, |a, (c, _)| a | coord_bit(n, c))
    }

    pub fn block_of_var(&self, v: usize) -> Option<usize> {
        self.vars.iter().position(|&x| x == v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuestionSet {
    pub questions: Vec<Question>,
    pub total_tuples: u64,
    pub dropped: u64,
}

impl QuestionSet {
    pub fn dropped_fraction(&self) -> f64 {
        self.dropped as f64 / self.total_tuples.max(1) as f64
    }
}

/// All `J`-tuples of equations whose equations are distinct and pairwise
/// variable-disjoint, and where no two variables from different equations of
/// the tuple occur together in any equation of the instance.
pub fn enumerate_questions(inst: &Gap3LinInstance, j: usize) -> Result<QuestionSet> {
    let m = inst.equations.len() as u64;
    let total = m.checked_pow(j as u32).unwrap_or(u64::MAX);
    let cap = Caps::get().enumeration;
    if total > cap {
        return Err(Error::resource("question tuples", total, cap));
    }
    let mut together: HashSet<(usize, usize)> = HashSet::new();
    for e in &inst.equations {
        for a in e.vars {
            for b in e.vars {
                if a != b {
                    together.insert((a, b));
                }
            }
        }
    }
    let compatible = |a: usize, b: usize| -> bool {
        let (ea, eb) = (&inst.equations[a], &inst.equations[b]);
        a != b
            && ea.vars.iter().all(|x| !eb.vars.contains(x))
            && ea.vars.iter().all(|&x| eb.vars.iter().all(|&y| !together.contains(&(x, y))))
    };
    let mut questions = Vec::new();
    let mut idx = vec![0usize; j];
    if m > 0 {
        loop {
            let ok = (0..j).all(|a| (a + 1..j).all(|b| compatible(idx[a], idx[b])));
            if ok {
                questions.push(Question {
                    equations: idx.clone(),
                    vars: idx.iter().flat_map(|&e| inst.equations[e].vars).collect(),
                    rhs: idx.iter().map(|&e| inst.equations[e].rhs).collect(),
                });
            }
            let mut p = j;
            loop {
                if p == 0 {
                    break;
                }
                p -= 1;
                idx[p] += 1;
                if (idx[p] as u64) < m {
                    break;
                }
                idx[p] = 0;
            }
            if idx.iter().all(|&x| x == 0) {
                break;
            }
        }
    }
    let kept = questions.len() as u64;
    Ok(QuestionSet { questions, total_tuples: total, dropped: total - kept })
}

// ---------------------------------------------------------------------------
// Vertices and cliques
// ---------------------------------------------------------------------------

/// `L ⊕ H_U`, stored as the sum itself; `complement` extends a basis of `H_U`
/// to one of the sum and indexes the alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VertexA {
    pub u: usize,
    pub space: F2Subspace,
    pub complement: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VertexB {
    pub u: usize,
    pub r: F2Subspace,
}

/// Everything the composed CSP needs, materialized.
#[derive(Clone, Debug)]
pub struct Universe {
    pub cfg: ComposedConfig,
    pub questions: Vec<Question>,
    pub a: Vec<VertexA>,
    pub b: Vec<VertexB>,
    a_index: HashMap<(usize, F2Subspace), usize>,
    b_index: HashMap<(usize, F2Subspace), usize>,
    by_equations: HashMap<Vec<usize>, usize>,
    h: Vec<F2Subspace>,
    /// Clique id per 𝓐 vertex; ids are dense, ordered by smallest member.
    pub clique: Vec<usize>,
    pub cliques: Vec<Vec<usize>>,
}

/// Coordinates of the union of two questions' variables, and the images of
/// each question's block coordinates in it.
fn union_images(a: &Question, b: &Question) -> (usize, Vec<u64>, Vec<u64>) {
    let mut vars: Vec<usize> = a.vars.iter().chain(&b.vars).copied().collect();
    vars.sort_unstable();
    vars.dedup();
    let n = vars.len();
    let img = |q: &Question| q.vars.iter().map(|v| coord_bit(n, vars.binary_search(v).expect("in union"))).collect();
    (n, img(a), img(b))
}

fn embed(v: u64, images: &[u64]) -> u64 {
    let d = images.len();
    (0..d).filter(|&j| v & coord_bit(d, j) != 0).fold(0, |acc, j| acc ^ images[j])
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

impl Universe {
    pub fn build(inst: &Gap3LinInstance, cfg: ComposedConfig) -> Result<Self> {
        cfg.validate()?;
        let qs = enumerate_questions(inst, cfg.j)?;
        Universe::from_questions(qs.questions, cfg)
    }

    pub fn from_questions(questions: Vec<Question>, cfg: ComposedConfig) -> Result<Self> {
        cfg.validate()?;
        if questions.is_empty() {
            return Err(Error::domain("no admissible questions"));
        }
        let n = 3 * cfg.j;
        let per_a = crate::f2la::qbin_u64(2 * cfg.j, cfg.ell2).unwrap_or(u64::MAX) as usize;
        let per_b = crate::f2la::qbin_u64(n, cfg.ellbot).unwrap_or(u64::MAX) as usize;
        let need = questions.len().saturating_mul(per_a.max(per_b));
        if need > MAX_VERTICES {
            return Err(Error::resource("composed CSP vertices", need, MAX_VERTICES));
        }
        let h: Vec<F2Subspace> = questions.iter().map(Question::h_u).collect();
        let a_spaces = enumerate_superspaces(&h[0], cfg.j + cfg.ell2)?;
        let r_spaces = enumerate_grassmann(n, cfg.ellbot)?;
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut a_index = HashMap::new();
        let mut b_index = HashMap::new();
        for (u, hu) in h.iter().enumerate() {
            // Every question has the same H_U in block coordinates.
            debug_assert_eq!(hu, &h[0]);
            for s in &a_spaces {
                a_index.insert((u, s.clone()), a.len());
                a.push(VertexA { u, complement: s.complement_basis(hu), space: s.clone() });
            }
            for r in &r_spaces {
                b_index.insert((u, r.clone()), b.len());
                b.push(VertexB { u, r: r.clone() });
            }
        }
        let by_equations = questions.iter().enumerate().map(|(i, q)| (q.equations.clone(), i)).collect();
        let mut uni = Universe { cfg, questions, a, b, a_index, b_index, by_equations, h, clique: Vec::new(), cliques: Vec::new() };
        uni.compute_cliques();
        Ok(uni)
    }

    pub fn a_of(&self, u: usize) -> std::ops::Range<usize> {
        let per = self.a.len() / self.questions.len();
        u * per..(u + 1) * per
    }

    pub fn b_of(&self, u: usize) -> std::ops::Range<usize> {
        let per = self.b.len() / self.questions.len();
        u * per..(u + 1) * per
    }

    pub fn a_id(&self, u: usize, space: &F2Subspace) -> Option<usize> {
        self.a_index.get(&(u, space.clone())).copied()
    }

    pub fn b_id(&self, u: usize, r: &F2Subspace) -> Option<usize> {
        self.b_index.get(&(u, r.clone())).copied()
    }

    pub fn question_id(&self, equations: &[usize]) -> Option<usize> {
        self.by_equations.get(equations).copied()
    }

    fn shares_variable(&self, u: usize, w: usize) -> bool {
        let a = &self.questions[u].vars;
        self.questions[w].vars.iter().any(|v| a.contains(v))
    }

    /// `L + H_U + H_{U'} = L' + H_U + H_{U'}`, evaluated directly.
    pub fn same_clique(&self, x: usize, y: usize) -> bool {
        let (va, vb) = (&self.a[x], &self.a[y]);
        let (qa, qb) = (&self.questions[va.u], &self.questions[vb.u]);
        let (n, ia, ib) = union_images(qa, qb);
        let lift = |s: &F2Subspace, img: &[u64]| s.map_coords(img, n);
        let lhs = lift(&va.space, &ia).sum_unchecked(&lift(&self.h[vb.u], &ib));
        let rhs = lift(&vb.space, &ib).sum_unchecked(&lift(&self.h[va.u], &ia));
        lhs == rhs
    }

    fn compute_cliques(&mut self) {
        let nq = self.questions.len();
        let mut uf = UnionFind((0..self.a.len()).collect());
        for u in 0..nq {
            for w in u + 1..nq {
                if !self.shares_variable(u, w) {
                    continue;
                }
                let (n, iu, iw) = union_images(&self.questions[u], &self.questions[w]);
                let hu = self.h[u].map_coords(&iu, n);
                let hw = self.h[w].map_coords(&iw, n);
                let mut keys: HashMap<F2Subspace, Vec<usize>> = HashMap::new();
                for x in self.a_of(u) {
                    keys.entry(self.a[x].space.map_coords(&iu, n).sum_unchecked(&hw)).or_default().push(x);
                }
                for y in self.a_of(w) {
                    let key = self.a[y].space.map_coords(&iw, n).sum_unchecked(&hu);
                    if let Some(xs) = keys.get(&key) {
                        for &x in xs {
                            uf.union(x, y);
                        }
                    }
                }
            }
        }
        let mut id_of_root = HashMap::new();
        let mut clique = vec![0; self.a.len()];
        let mut cliques: Vec<Vec<usize>> = Vec::new();
        for x in 0..self.a.len() {
            let root = uf.find(x);
            let id = *id_of_root.entry(root).or_insert_with(|| {
                cliques.push(Vec::new());
                cliques.len() - 1
            });
            clique[x] = id;
            cliques[id].push(x);
        }
        self.clique = clique;
        self.cliques = cliques;
    }

    pub fn clique_of(&self, x: usize) -> usize {
        self.clique[x]
    }

    // -- alphabets ---------------------------------------------------------

    pub fn alphabet_a(&self) -> u32 {
        1 << self.cfg.ell2
    }

    pub fn alphabet_b(&self) -> u32 {
        1 << self.cfg.ellbot
    }

    /// The side-condition-honoring functional on `L ⊕ H_U` taking the bits of
    /// `label` on the complement basis.
    pub fn a_functional(&self, x: usize, label: u64) -> LinearFunctional {
        let v = &self.a[x];
        let q = &self.questions[v.u];
        let mut pairs = q.psi_pairs();
        pairs.extend(v.complement.iter().enumerate().map(|(j, &c)| (c, label >> j & 1 == 1)));
        LinearFunctional::from_pairs(q.n(), &pairs).expect("H_U and complement are independent")
    }

    /// Inverse of [`Universe::a_functional`]; errors when `f` is on another
    /// space or violates the side conditions.
    pub fn a_label(&self, x: usize, f: &LinearFunctional) -> Result<u64> {
        let v = &self.a[x];
        if f.domain() != &v.space {
            return Err(Error::domain("functional lives on a different space"));
        }
        if !self.questions[v.u].psi_pairs().iter().all(|&(h, b)| f.eval(h) == b) {
            return Err(Error::domain("functional violates the side conditions"));
        }
        Ok(v.complement.iter().enumerate().fold(0, |acc, (j, &c)| acc | (u64::from(f.eval(c)) << j)))
    }

    pub fn b_functional(&self, y: usize, label: u64) -> LinearFunctional {
        LinearFunctional::from_basis_values(self.b[y].r.clone(), label)
    }

    /// The unique functional on `target` sharing an extension to
    /// `L + H_U + H_{U'}` with `f` that honors both side conditions.
    pub fn clique_extend(&self, f: &LinearFunctional, source: usize, target: usize) -> Result<LinearFunctional> {
        self.a_label(source, f)?;
        if source == target {
            return Ok(f.clone());
        }
        if self.clique[source] != self.clique[target] {
            return Err(Error::domain("source and target are in different cliques"));
        }
        let (vs, vt) = (&self.a[source], &self.a[target]);
        let (qs, qt) = (&self.questions[vs.u], &self.questions[vt.u]);
        let (n, is, it) = union_images(qs, qt);
        let mut pairs: Vec<(u64, bool)> = vs.space.basis().iter().map(|&b| (embed(b, &is), f.eval(b))).collect();
        pairs.extend(qt.psi_pairs().into_iter().map(|(h, b)| (embed(h, &it), b)));
        let g = LinearFunctional::from_pairs(n, &pairs).ok_or_else(|| Error::domain("side conditions of the two questions conflict"))?;
        let out: Vec<(u64, bool)> = vt.space.basis().iter().map(|&b| (b, g.eval(embed(b, &it)))).collect();
        Ok(LinearFunctional::from_pairs(qt.n(), &out).expect("values on a basis"))
    }

    pub fn clique_extend_label(&self, label: u64, source: usize, target: usize) -> Result<u64> {
        if source == target {
            return Ok(label);
        }
        let f = self.a_functional(source, label);
        self.a_label(target, &self.clique_extend(&f, source, target)?)
    }

    // -- constraints -------------------------------------------------------

    /// Steps 1-4 of the constraint distribution: `a[i]` is `L_i ⊕ H_U` and
    /// `a_prime[i]` the clique member actually queried.
    pub fn sample_constraint<R: Rng + ?Sized>(&self, rng: &mut R) -> ConstraintSample {
        let n = 3 * self.cfg.j;
        let u = rng.gen_range(0..self.questions.len());
        let hu = &self.h[u];
        let r = loop {
            let r = sample_subspace(n, self.cfg.ellbot, rng).expect("ellbot <= n");
            if r.trivial_intersection(hu).expect("same ambient") {
                break r;
            }
        };
        let rh = r.sum_unchecked(hu);
        let full = F2Subspace::full(n);
        let a: Vec<usize> = (0..self.cfg.k)
            .map(|_| {
                let s = sample_between(&rh, &full, self.cfg.j + self.cfg.ell2, rng).expect("dimensions fit");
                self.a_id(u, &s).expect("every superspace of H_U is a vertex")
            })
            .collect();
        let a_prime = a
            .iter()
            .map(|&x| *self.cliques[self.clique[x]].choose(rng).expect("nonempty clique"))
            .collect();
        let b = self.b_id(u, &r).expect("every R is a vertex");
        ConstraintSample { u, b, a, a_prime }
    }

    /// Step 5: every extended `T_1` value restricts on `R` to `T_2[R]`.
    pub fn passes(&self, t1: &[u64], t2: &[u64], c: &ConstraintSample) -> bool {
        let r = &self.b[c.b].r;
        let want = self.b_functional(c.b, t2[c.b]);
        c.a.iter().zip(&c.a_prime).all(|(&x, &xp)| {
            let label = self.clique_extend_label(t1[xp], xp, x).expect("same clique");
            let f = self.a_functional(x, label);
            f.restrict(r).map(|g| g == want).unwrap_or(false)
        })
    }

    /// Monte-Carlo pass rate of `(t1, t2)` over the constraint distribution.
    pub fn consistency(&self, t1: &[u64], t2: &[u64], trials: u64, seed: u64) -> Result<Proportion> {
        self.check_tables(t1, t2)?;
        if trials == 0 {
            return Err(Error::domain("need at least one trial"));
        }
        let wins = (0..trials)
            .into_par_iter()
            .filter(|&t| {
                let mut rng = rng_from_seed(indexed_seed(seed, "constraint", t));
                let c = self.sample_constraint(&mut rng);
                self.passes(t1, t2, &c)
            })
            .count() as u64;
        Ok(Proportion::new(wins, trials, CONFIDENCE))
    }

    fn check_tables(&self, t1: &[u64], t2: &[u64]) -> Result<()> {
        if t1.len() != self.a.len() || t2.len() != self.b.len() {
            return Err(Error::domain("table sizes do not match the vertex sets"));
        }
        if t1.iter().any(|&l| l >= u64::from(self.alphabet_a())) || t2.iter().any(|&l| l >= u64::from(self.alphabet_b())) {
            return Err(Error::domain("table label outside the alphabet"));
        }
        Ok(())
    }

    /// Probability that two of the `L_i ⊕ H_U` of a sampled constraint fall
    /// in one clique.
    pub fn clique_collision_probability(&self, trials: u64, seed: u64) -> Proportion {
        let hits = (0..trials)
            .into_par_iter()
            .filter(|&t| {
                let mut rng = rng_from_seed(indexed_seed(seed, "constraint", t));
                let c = self.sample_constraint(&mut rng);
                let ids: Vec<usize> = c.a.iter().map(|&x| self.clique[x]).collect();
                (0..ids.len()).any(|i| (i + 1..ids.len()).any(|j| ids[i] == ids[j]))
            })
            .count() as u64;
        Proportion::new(hits, trials, CONFIDENCE)
    }

    // -- tables ------------------------------------------------------------

    /// `T_1[L ⊕ H_U]` equal to σ on the complement basis and to ψ on `H_U`
    /// (so `σ|_{L ⊕ H_U}` whenever `U` is satisfied by σ); `T_2[R] = σ|_R`.
    pub fn planted_tables(&self, sigma: &[bool]) -> (Vec<u64>, Vec<u64>) {
        let t1 = self
            .a
            .iter()
            .map(|v| {
                let s = self.questions[v.u].restrict_assignment(sigma);
                v.complement.iter().enumerate().fold(0, |acc, (j, &c)| acc | (u64::from(parity(s & c)) << j))
            })
            .collect();
        let t2 = self
            .b
            .iter()
            .map(|v| {
                let s = self.questions[v.u].restrict_assignment(sigma);
                v.r.basis().iter().enumerate().fold(0, |acc, (j, &c)| acc | (u64::from(parity(s & c)) << j))
            })
            .collect();
        (t1, t2)
    }

    pub fn random_tables<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<u64>, Vec<u64>) {
        let t1 = self.a.iter().map(|_| rng.gen_range(0..u64::from(self.alphabet_a()))).collect();
        let t2 = self.b.iter().map(|_| rng.gen_range(0..u64::from(self.alphabet_b()))).collect();
        (t1, t2)
    }

    pub fn is_clique_consistent(&self, t1: &[u64]) -> bool {
        self.cliques.iter().all(|members| {
            let rep = members[0];
            members.iter().all(|&m| self.clique_extend_label(t1[rep], rep, m).ok() == Some(t1[m]))
        })
    }

    /// Per clique, a uniformly chosen member's value propagated to the rest.
    pub fn make_clique_consistent(&self, t1: &[u64], seed: u64) -> Vec<u64> {
        let mut out = t1.to_vec();
        for (c, members) in self.cliques.iter().enumerate() {
            let mut rng = rng_from_seed(indexed_seed(seed, "clique-rep", c as u64));
            let rep = *members.choose(&mut rng).expect("nonempty clique");
            for &m in members {
                out[m] = self.clique_extend_label(t1[rep], rep, m).expect("same clique");
            }
        }
        out
    }

    /// Exact pass probability conditioned on the first question being `u`,
    /// for a clique-consistent `t1`.
    pub fn pass_given_u(&self, t1: &[u64], t2: &[u64], u: usize) -> Rational {
        let hu = &self.h[u];
        let n = 3 * self.cfg.j;
        let full = F2Subspace::full(n);
        let mut total = Rational::zero();
        let mut count = 0u64;
        for y in self.b_of(u) {
            let r = &self.b[y].r;
            if !r.trivial_intersection(hu).expect("same ambient") {
                continue;
            }
            let want = self.b_functional(y, t2[y]);
            let spaces = crate::f2la::enumerate_between(&r.sum_unchecked(hu), &full, self.cfg.j + self.cfg.ell2).expect("dimensions fit");
            let agree = spaces
                .iter()
                .filter(|s| {
                    let x = self.a_id(u, s).expect("vertex");
                    self.a_functional(x, t1[x]).restrict(r).map(|g| g == want).unwrap_or(false)
                })
                .count();
            let frac = Rational::new(BigInt::from(agree), BigInt::from(spaces.len()));
            total += num_traits::pow(frac, self.cfg.k);
            count += 1;
        }
        total / Rational::from_integer(BigInt::from(count.max(1)))
    }

    /// The composed CSP with empirical weights from `samples` draws of the
    /// constraint distribution, plus a sidecar describing the run. Draws that
    /// query one vertex twice are dropped and counted.
    pub fn build_csp(&self, samples: u64, seed: u64) -> Result<(CspInstance, Value)> {
        let k = self.cfg.k;
        let drawn: Vec<ConstraintSample> = (0..samples)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_from_seed(indexed_seed(seed, "constraint", t));
                self.sample_constraint(&mut rng)
            })
            .collect();
        let mut weights: BTreeMap<(Vec<usize>, Vec<usize>), u64> = BTreeMap::new();
        let mut dropped = 0u64;
        for c in drawn {
            let mut seen = c.a_prime.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() < k {
                dropped += 1;
                continue;
            }
            *weights.entry((c.a_prime.clone(), [c.a.clone(), vec![c.b]].concat())).or_insert(0) += 1;
        }
        let na = self.a.len();
        let mut vertices: Vec<Vertex> = self
            .a
            .iter()
            .enumerate()
            .map(|(i, v)| Vertex { name: format!("A{i}:U{}", v.u), alphabet: self.alphabet_a() })
            .collect();
        vertices.extend(self.b.iter().enumerate().map(|(i, v)| Vertex { name: format!("B{i}:U{}", v.u), alphabet: self.alphabet_b() }));
        let mut edges = Vec::with_capacity(weights.len());
        for ((a_prime, rest), w) in weights {
            let (a, b) = (&rest[..k], rest[k]);
            let r = &self.b[b].r;
            let mut sat = Vec::new();
            for y in 0..u64::from(self.alphabet_b()) {
                let want = self.b_functional(b, y);
                let per: Vec<Vec<u32>> = a
                    .iter()
                    .zip(&a_prime)
                    .map(|(&x, &xp)| {
                        (0..u64::from(self.alphabet_a()))
                            .filter(|&l| {
                                let ext = self.clique_extend_label(l, xp, x).expect("same clique");
                                self.a_functional(x, ext).restrict(r).map(|g| g == want).unwrap_or(false)
                            })
                            .map(|l| l as u32)
                            .collect()
                    })
                    .collect();
                let mut tuples: Vec<Vec<u32>> = vec![Vec::new()];
                for choices in &per {
                    tuples = tuples
                        .into_iter()
                        .flat_map(|t| {
                            choices.iter().map(move |&l| {
                                let mut t = t.clone();
                                t.push(l);
                                t
                            })
                        })
                        .collect();
                }
                sat.extend(tuples.into_iter().map(|mut t| {
                    t.push(y as u32);
                    t
                }));
            }
            let verts = a_prime.iter().copied().chain(std::iter::once(na + b)).collect();
            edges.push(Edge::new(verts, Rational::from_integer(BigInt::from(w)), sat));
        }
        let inst = CspInstance::new(k + 1, vertices, None, edges)?;
        let sidecar = json!({
            "cfg": self.cfg,
            "seed": seed,
            "n_constraint_samples": samples,
            "dropped_samples": dropped,
            "questions": self.questions.iter().map(|q| &q.equations).collect::<Vec<_>>(),
            "a_vertices": self.a.iter().map(|v| json!({"u": v.u, "space": v.space.basis().iter().map(|&b| vec_to_string(b, 3 * self.cfg.j)).collect::<Vec<_>>()})).collect::<Vec<_>>(),
            "b_vertices": self.b.iter().map(|v| json!({"u": v.u, "r": v.r.basis().iter().map(|&b| vec_to_string(b, 3 * self.cfg.j)).collect::<Vec<_>>()})).collect::<Vec<_>>(),
            "clique_index": self.clique,
        });
        Ok((inst, sidecar))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstraintSample {
    pub u: usize,
    pub b: usize,
    pub a: Vec<usize>,
    pub a_prime: Vec<usize>,
}

// ---------------------------------------------------------------------------
// Completeness
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompletenessReport {
    pub pass: Proportion,
    /// Fraction of the instance's equations violated by σ.
    pub epsilon1: f64,
    /// Fraction of admissible questions all of whose equations σ satisfies.
    pub satisfied_questions: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn completeness_experiment(uni: &Universe, inst: &Gap3LinInstance, sigma: &[bool], trials: u64, seed: u64) -> Result<CompletenessReport> {
    if sigma.len() != inst.n_vars {
        return Err(Error::domain("assignment length differs from the variable count"));
    }
    let (t1, t2) = uni.planted_tables(sigma);
    let pass = uni.consistency(&t1, &t2, trials, seed)?;
    let epsilon1 = 1.0 - inst.value_of(sigma);
    let sat = uni
        .questions
        .iter()
        .filter(|q| q.equations.iter().all(|&e| inst.equations[e].satisfied_by(|v| sigma[v])))
        .count();
    let bound = 1.0 - uni.cfg.j as f64 * epsilon1;
    Ok(CompletenessReport {
        holds: pass.ci_high >= bound,
        pass,
        epsilon1,
        satisfied_questions: sat as f64 / uni.questions.len() as f64,
        bound,
    })
}

// ---------------------------------------------------------------------------
// Prover strategies from tables
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtractionSummary {
    /// Exact pass probability per admissible question.
    pub p_u: Vec<f64>,
    /// Mean of `p_u`: the overall consistency of the tables.
    pub epsilon: f64,
    pub good: Vec<bool>,
    pub good_fraction: f64,
}

/// First prover: on a good question, picks `r_1 ≤ r` uniformly, spans the
/// first `r_1` advice vectors into `Q`, and answers with a random global
/// extension of the best zoom-out functional on `Q ⊕ H_U` when its agreement
/// reaches `C`.
pub struct FirstProver<'a> {
    uni: &'a Universe,
    tables: Vec<Option<Table>>,
}

/// Second prover: builds `T̃_1[L] = T_1[L ⊕ H_U]|_L` over some admissible
/// `U ⊇ V`, picks `r' ≤ r` uniformly and answers with a random extension of a
/// uniformly chosen `(C/(8·5^r), 1/5)`-maximal pair on the advice span.
pub struct SecondProver<'a> {
    uni: &'a Universe,
    t1: Vec<u64>,
}

pub fn extract_prover_strategies<'a>(uni: &'a Universe, t1: &[u64], t2: &[u64]) -> Result<(ExtractionSummary, FirstProver<'a>, SecondProver<'a>)> {
    uni.check_tables(t1, t2)?;
    if !uni.is_clique_consistent(t1) {
        return Err(Error::domain("first table is not clique-consistent"));
    }
    let p: Vec<Rational> = (0..uni.questions.len()).into_par_iter().map(|u| uni.pass_given_u(t1, t2, u)).collect();
    let eps = p.iter().fold(Rational::zero(), |a, x| a + x) / Rational::from_integer(BigInt::from(p.len()));
    let half = &eps / Rational::from_integer(BigInt::from(2));
    let good: Vec<bool> = p.iter().map(|x| !eps.is_zero() && *x >= half).collect();
    let n = 3 * uni.cfg.j;
    let tables = (0..uni.questions.len())
        .map(|u| -> Result<Option<Table>> {
            if !good[u] {
                return Ok(None);
            }
            let mut t = Table::new(n, uni.cfg.j + uni.cfg.ell2);
            for x in uni.a_of(u) {
                t.insert(uni.a[x].space.clone(), uni.a_functional(x, t1[x]))?;
            }
            Ok(Some(t))
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = ExtractionSummary {
        p_u: p.iter().map(|x| x.to_f64().unwrap_or(0.0)).collect(),
        epsilon: eps.to_f64().unwrap_or(0.0),
        good_fraction: good.iter().filter(|&&g| g).count() as f64 / good.len() as f64,
        good,
    };
    Ok((summary, FirstProver { uni, tables }, SecondProver { uni, t1: t1.to_vec() }))
}

/// Random `s` with `⟨s, ·⟩|_W = g`, as a vector over F₂^{dim}.
fn random_extension<R: Rng + ?Sized>(g: &LinearFunctional, rng: &mut R) -> u64 {
    let ann = g.domain().annihilator();
    g.coeff() ^ ann.combine(rng.gen::<u64>() & crate::f2la::mask(ann.dim()))
}

fn span_prefix(advice: &[u64], r1: usize, n: usize) -> F2Subspace {
    F2Subspace::from_rows(advice.iter().take(r1).copied().collect(), n)
}

impl ProverStrategy for FirstProver<'_> {
    fn answer(&self, _: &Gap3LinInstance, view: ProverView<'_>, rng: &mut ChaRng) -> Answer {
        let uni = self.uni;
        let Some(u) = view.equations.and_then(|e| uni.question_id(e)) else {
            return Answer::GiveUp;
        };
        let Some(table) = &self.tables[u] else {
            return Answer::GiveUp;
        };
        let q = &uni.questions[u];
        let n = q.n();
        // Advice arrives over the sorted variables; move it to block order.
        let images: Vec<u64> = view.vars.iter().map(|&v| coord_bit(n, q.block_of_var(v).expect("variable of U"))).collect();
        let advice: Vec<u64> = view.advice.iter().map(|&a| embed(a, &images)).collect();
        let r1 = rng.gen_range(0..=uni.cfg.r);
        let qs = span_prefix(&advice, r1, n);
        if !qs.trivial_intersection(&uni.h[u]).expect("same ambient") {
            return Answer::GiveUp;
        }
        let zoom_in = qs.sum_unchecked(&uni.h[u]);
        let best = match best_pair(table, &zoom_in, uni.cfg.r) {
            Ok(Some(b)) if b.agreement.to_f64().unwrap_or(0.0) >= uni.cfg.threshold() => b,
            _ => return Answer::GiveUp,
        };
        let s = random_extension(&best.g, rng);
        Answer::Assign(view.vars.iter().map(|&v| s & coord_bit(n, q.block_of_var(v).expect("variable of U")) != 0).collect())
    }
}

impl SecondProver<'_> {
    /// `T̃_1` on `ell2`-subspaces of F₂^V (coordinates in the order of
    /// `vars`), or `None` when no admissible question contains `V`.
    pub fn table_for(&self, vars: &[usize]) -> Option<Table> {
        let uni = self.uni;
        let u = (0..uni.questions.len()).find(|&u| vars.iter().all(|v| uni.questions[u].vars.contains(v)))?;
        let q = &uni.questions[u];
        let n = q.n();
        let nv = vars.len();
        let images: Vec<u64> = vars.iter().map(|&v| coord_bit(n, q.block_of_var(v).expect("V ⊆ U"))).collect();
        let mut t = Table::new(nv, uni.cfg.ell2);
        if nv < uni.cfg.ell2 {
            return Some(t);
        }
        for l in enumerate_grassmann(nv, uni.cfg.ell2).ok()? {
            let lu = l.map_coords(&images, n);
            if !lu.trivial_intersection(&uni.h[u]).expect("same ambient") {
                continue;
            }
            let x = uni.a_id(u, &lu.sum_unchecked(&uni.h[u])).expect("vertex");
            let f = uni.a_functional(x, self.t1[x]);
            let pairs: Vec<(u64, bool)> = l.basis().iter().map(|&b| (b, f.eval(embed(b, &images)))).collect();
            let g = LinearFunctional::from_pairs(nv, &pairs).expect("values on a basis");
            t.insert(l, g).expect("matching dimensions");
        }
        Some(t)
    }
}

impl ProverStrategy for SecondProver<'_> {
    fn answer(&self, _: &Gap3LinInstance, view: ProverView<'_>, rng: &mut ChaRng) -> Answer {
        let uni = self.uni;
        let Some(table) = self.table_for(view.vars) else {
            return Answer::GiveUp;
        };
        let nv = view.vars.len();
        let r1 = rng.gen_range(0..=uni.cfg.r);
        let qs = span_prefix(view.advice, r1, nv);
        let c = uni.cfg.threshold() / (8.0 * 5f64.powi(uni.cfg.r as i32));
        let pairs = match find_maximal_pairs(&table, &qs, c, 0.2, uni.cfg.r) {
            Ok(p) if !p.is_empty() => p,
            _ => return Answer::GiveUp,
        };
        let pick = &pairs[rng.gen_range(0..pairs.len())];
        let s = random_extension(&pick.g, rng);
        Answer::Assign((0..nv).map(|j| s & coord_bit(nv, j) != 0).collect())
    }
}
