//! Weighted k-ary constraint satisfaction instances with explicit satisfying
//! tuples, their value oracles and structural predicates, plus the
//! k-dimensional matching model.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::json::{rational_from_json, rational_to_json};
use crate::rng::{indexed_seed, rng_from_seed};
use crate::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub name: String,
    pub alphabet: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub verts: Vec<usize>,
    pub weight: Rational,
    /// Sorted, duplicate-free satisfying label tuples (one label per vertex of `verts`).
    pub sat: Vec<Vec<u32>>,
}

impl Edge {
    pub fn new(verts: Vec<usize>, weight: Rational, mut sat: Vec<Vec<u32>>) -> Self {
        sat.sort();
        sat.dedup();
        Edge { verts, weight, sat }
    }

    pub fn unit(verts: Vec<usize>, sat: Vec<Vec<u32>>) -> Self {
        Edge::new(verts, Rational::one(), sat)
    }
}

/// A weighted k-CSP over a k-uniform hypergraph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CspInstance {
    k: usize,
    vertices: Vec<Vertex>,
    parts: Option<Vec<Vec<usize>>>,
    edges: Vec<Edge>,
}

pub type Assignment = Vec<u32>;

impl CspInstance {
    pub fn new(k: usize, vertices: Vec<Vertex>, parts: Option<Vec<Vec<usize>>>, edges: Vec<Edge>) -> Result<Self> {
        let inst = CspInstance { k, vertices, parts, edges };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::domain("arity must be positive"));
        }
        let nv = self.vertices.len();
        if self.vertices.iter().any(|v| v.alphabet == 0) {
            return Err(Error::domain("empty alphabet"));
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.verts.len() != self.k {
                return Err(Error::domain(format!("edge {i} has arity {} instead of {}", e.verts.len(), self.k)));
            }
            if e.verts.iter().any(|&v| v >= nv) {
                return Err(Error::domain(format!("edge {i} references a missing vertex")));
            }
            let mut vs = e.verts.clone();
            vs.sort_unstable();
            vs.dedup();
            if vs.len() != self.k {
                return Err(Error::domain(format!("edge {i} repeats a vertex")));
            }
            if e.weight.is_negative() {
                return Err(Error::domain(format!("edge {i} has a negative weight")));
            }
            for t in &e.sat {
                if t.len() != self.k || t.iter().zip(&e.verts).any(|(&l, &v)| l >= self.vertices[v].alphabet) {
                    return Err(Error::domain(format!("edge {i} has a satisfying tuple outside the alphabets")));
                }
            }
            if e.sat.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::domain(format!("edge {i} satisfying tuples are not sorted and distinct")));
            }
        }
        if let Some(parts) = &self.parts {
            if parts.len() != self.k {
                return Err(Error::domain("number of parts differs from the arity"));
            }
            let mut seen = vec![false; nv];
            for p in parts {
                for &v in p {
                    if v >= nv || seen[v] {
                        return Err(Error::domain("parts do not partition the vertex set"));
                    }
                    seen[v] = true;
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::domain("parts do not cover the vertex set"));
            }
            let part_of = self.part_of().expect("parts present");
            for (i, e) in self.edges.iter().enumerate() {
                let mut hit = vec![false; self.k];
                for &v in &e.verts {
                    if hit[part_of[v]] {
                        return Err(Error::domain(format!("edge {i} has two endpoints in one part")));
                    }
                    hit[part_of[v]] = true;
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn parts(&self) -> Option<&[Vec<usize>]> {
        self.parts.as_deref()
    }

    pub fn part_of(&self) -> Option<Vec<usize>> {
        self.parts.as_ref().map(|parts| {
            let mut out = vec![0; self.vertices.len()];
            for (i, p) in parts.iter().enumerate() {
                for &v in p {
                    out[v] = i;
                }
            }
            out
        })
    }

    pub fn total_weight(&self) -> Rational {
        self.edges.iter().fold(Rational::zero(), |a, e| a + &e.weight)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.vertices.len()];
        for e in &self.edges {
            for &v in &e.verts {
                d[v] += 1;
            }
        }
        d
    }

    pub fn max_alphabet(&self) -> u32 {
        self.vertices.iter().map(|v| v.alphabet).max().unwrap_or(0)
    }

    fn nonempty(&self) -> Result<()> {
        if self.edges.is_empty() {
            return Err(Error::domain("value of an instance without edges is undefined"));
        }
        if self.total_weight().is_zero() {
            return Err(Error::domain("total edge weight is zero"));
        }
        Ok(())
    }

    /// Weighted fraction of constraints satisfied by `a`.
    pub fn value_of(&self, a: &[u32]) -> Result<Rational> {
        self.nonempty()?;
        if a.len() != self.vertices.len() || a.iter().zip(&self.vertices).any(|(&l, v)| l >= v.alphabet) {
            return Err(Error::domain("assignment is not total or leaves an alphabet"));
        }
        let sat = self.edges.iter().filter(|e| {
            let t: Vec<u32> = e.verts.iter().map(|&v| a[v]).collect();
            e.sat.binary_search(&t).is_ok()
        });
        Ok(sat.fold(Rational::zero(), |acc, e| acc + &e.weight) / self.total_weight())
    }

    /// Integer weights proportional to the rational ones.
    fn integer_weights(&self) -> Result<(Vec<u128>, u128)> {
        let lcm = self.edges.iter().fold(BigInt::one(), |a, e| a.lcm(e.weight.denom()));
        let ws: Option<Vec<u128>> = self
            .edges
            .iter()
            .map(|e| (e.weight.numer() * (&lcm / e.weight.denom())).to_u128())
            .collect();
        let ws = ws.ok_or_else(|| Error::domain("edge weights too large for the exact solver"))?;
        let total = ws.iter().try_fold(0u128, |a, &w| a.checked_add(w));
        Ok((ws.clone(), total.ok_or_else(|| Error::domain("edge weights overflow"))?))
    }

    /// Serialises in the CSP JSON schema.
    pub fn to_json(&self) -> Value {
        let name = |v: usize| self.vertices[v].name.clone();
        let mut out = json!({
            "k": self.k,
            "vertices": self.vertices.iter().map(|v| json!({"name": v.name, "alphabet": v.alphabet})).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|e| json!({
                "verts": e.verts.iter().map(|&v| name(v)).collect::<Vec<_>>(),
                "weight": rational_to_json(&e.weight),
                "sat": e.sat,
            })).collect::<Vec<_>>(),
        });
        if let Some(parts) = &self.parts {
            out["parts"] = json!(parts.iter().map(|p| p.iter().map(|&v| name(v)).collect::<Vec<_>>()).collect::<Vec<_>>());
        }
        out
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("CSP JSON: {m}"));
        let k = v.get("k").and_then(Value::as_u64).ok_or_else(|| bad("missing k"))? as usize;
        let mut vertices = Vec::new();
        let mut ids = HashMap::new();
        for x in v.get("vertices").and_then(Value::as_array).ok_or_else(|| bad("missing vertices"))? {
            let name = x.get("name").and_then(Value::as_str).ok_or_else(|| bad("vertex without name"))?;
            let alphabet = x.get("alphabet").and_then(Value::as_u64).ok_or_else(|| bad("vertex without alphabet"))?;
            if ids.insert(name.to_string(), vertices.len()).is_some() {
                return Err(bad(&format!("duplicate vertex name {name:?}")));
            }
            vertices.push(Vertex { name: name.to_string(), alphabet: alphabet as u32 });
        }
        let id = |x: &Value| -> Result<usize> {
            let s = x.as_str().ok_or_else(|| bad("vertex reference is not a string"))?;
            ids.get(s).copied().ok_or_else(|| bad(&format!("unknown vertex {s:?}")))
        };
        let parts = match v.get("parts") {
            None | Some(Value::Null) => None,
            Some(p) => Some(
                p.as_array()
                    .ok_or_else(|| bad("parts is not an array"))?
                    .iter()
                    .map(|part| {
                        part.as_array()
                            .ok_or_else(|| bad("part is not an array"))?
                            .iter()
                            .map(id)
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let mut edges = Vec::new();
        for e in v.get("edges").and_then(Value::as_array).ok_or_else(|| bad("missing edges"))? {
            let verts = e
                .get("verts")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("edge without verts"))?
                .iter()
                .map(id)
                .collect::<Result<Vec<_>>>()?;
            let weight = match e.get("weight") {
                None => Rational::one(),
                Some(w) => rational_from_json(w)?,
            };
            let sat: Vec<Vec<u32>> = serde_json::from_value(e.get("sat").cloned().ok_or_else(|| bad("edge without sat"))?)?;
            edges.push(Edge::new(verts, weight, sat));
        }
        CspInstance::new(k, vertices, parts, edges)
    }
}

// ---------------------------------------------------------------------------
// Value oracles
// ---------------------------------------------------------------------------

/// An exact or heuristic value together with an assignment achieving it.
#[derive(Clone, Debug, PartialEq)]
pub struct Valued {
    pub value: Rational,
    pub assignment: Assignment,
}

/// Compiled form used by the solvers: per-edge lookup tables.
struct Compiled {
    n: usize,
    alph: Vec<u32>,
    edges: Vec<(Vec<usize>, Vec<u32>)>, // verts and mixed-radix strides
    sat: Vec<Vec<bool>>,
    tuples: Vec<Vec<Vec<u32>>>,
    weights: Vec<u128>,
    incident: Vec<Vec<usize>>,
}

impl Compiled {
    fn new(inst: &CspInstance) -> Result<Self> {
        let (weights, _) = inst.integer_weights()?;
        let alph: Vec<u32> = inst.vertices.iter().map(|v| v.alphabet).collect();
        let mut edges = Vec::new();
        let mut sat = Vec::new();
        let mut incident = vec![Vec::new(); alph.len()];
        for (i, e) in inst.edges.iter().enumerate() {
            let mut strides = vec![0u32; e.verts.len()];
            let mut acc = 1u64;
            for (j, &v) in e.verts.iter().enumerate().rev() {
                strides[j] = acc as u32;
                acc *= alph[v] as u64;
            }
            if acc > 1 << 24 {
                return Err(Error::resource("constraint table", acc, 1u64 << 24));
            }
            let mut table = vec![false; acc as usize];
            for t in &e.sat {
                let code: u32 = t.iter().zip(&strides).map(|(l, s)| l * s).sum();
                table[code as usize] = true;
            }
            for &v in &e.verts {
                incident[v].push(i);
            }
            edges.push((e.verts.clone(), strides));
            sat.push(table);
        }
        Ok(Compiled {
            n: alph.len(),
            alph,
            edges,
            sat,
            tuples: inst.edges.iter().map(|e| e.sat.clone()).collect(),
            weights,
            incident,
        })
    }

    #[inline]
    fn satisfied(&self, e: usize, a: &[u32]) -> bool {
        let (vs, st) = &self.edges[e];
        let code: u32 = vs.iter().zip(st).map(|(&v, s)| a[v] * s).sum();
        self.sat[e][code as usize]
    }

    fn score(&self, a: &[u32]) -> u128 {
        (0..self.edges.len()).filter(|&e| self.satisfied(e, a)).map(|e| self.weights[e]).sum()
    }

    /// Whether some satisfying tuple of `e` extends the partial assignment.
    fn possible(&self, e: usize, a: &[u32], set: &[bool]) -> bool {
        let vs = &self.edges[e].0;
        if vs.iter().all(|&v| set[v]) {
            return self.satisfied(e, a);
        }
        self.tuples[e]
            .iter()
            .any(|t| t.iter().zip(vs).all(|(&l, &v)| !set[v] || a[v] == l))
    }
}

struct Search<'a> {
    c: &'a Compiled,
    order: Vec<usize>,
    a: Vec<u32>,
    set: Vec<bool>,
    alive: Vec<bool>,
    bound: u128,
    best: u128,
    best_a: Vec<u32>,
}

impl Search<'_> {
    fn dfs(&mut self, depth: usize) {
        if self.bound <= self.best && !(self.best_a.is_empty()) {
            return;
        }
        if depth == self.order.len() {
            if self.bound > self.best || self.best_a.is_empty() {
                self.best = self.bound;
                self.best_a = self.a.clone();
            }
            return;
        }
        let v = self.order[depth];
        self.set[v] = true;
        for l in 0..self.c.alph[v] {
            self.a[v] = l;
            let mut changed = Vec::new();
            for &e in &self.c.incident[v] {
                if self.alive[e] && !self.c.possible(e, &self.a, &self.set) {
                    self.alive[e] = false;
                    self.bound -= self.c.weights[e];
                    changed.push(e);
                }
            }
            self.dfs(depth + 1);
            for e in changed {
                self.alive[e] = true;
                self.bound += self.c.weights[e];
            }
        }
        self.set[v] = false;
        self.a[v] = 0;
    }
}

/// Exact value by branch and bound. Vertices are branched in decreasing
/// degree order; the bound counts every constraint that can still be satisfied.
pub fn csp_value_exact(inst: &CspInstance) -> Result<Valued> {
    inst.nonempty()?;
    let cap = Caps::get().csp_assignments;
    let space = inst
        .vertices
        .iter()
        .try_fold(1u128, |a, v| a.checked_mul(v.alphabet as u128))
        .unwrap_or(u128::MAX);
    if space > cap {
        return Err(Error::resource("exact CSP search", space, cap));
    }
    let c = Compiled::new(inst)?;
    let deg = inst.degrees();
    let mut order: Vec<usize> = (0..c.n).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(deg[v]), v));
    let total: u128 = c.weights.iter().sum();
    // Warm start from a short local search so pruning bites immediately.
    let warm = local_search_compiled(&c, 4, 0x5eed);
    let mut s = Search {
        c: &c,
        order,
        a: vec![0; c.n],
        set: vec![false; c.n],
        alive: vec![true; c.edges.len()],
        bound: total,
        best: c.score(&warm),
        best_a: warm,
    };
    if s.best < total {
        s.dfs(0);
    }
    let (_, den) = inst.integer_weights()?;
    Ok(Valued { value: BigRational::new(BigInt::from(s.best), BigInt::from(den)), assignment: s.best_a })
}

/// Expected value of a uniformly random assignment.
pub fn csp_value_random_baseline(inst: &CspInstance) -> Result<Rational> {
    inst.nonempty()?;
    let mut acc = Rational::zero();
    for e in &inst.edges {
        let space: BigInt = e.verts.iter().map(|&v| BigInt::from(inst.vertices[v].alphabet)).product();
        acc += &e.weight * BigRational::new(BigInt::from(e.sat.len()), space);
    }
    Ok(acc / inst.total_weight())
}

fn local_search_compiled(c: &Compiled, restarts: u32, seed: u64) -> Vec<u32> {
    let results: Vec<(u128, Vec<u32>)> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(indexed_seed(seed, "local-search", r));
            let mut a: Vec<u32> = c.alph.iter().map(|&q| rng.gen_range(0..q)).collect();
            let mut score = c.score(&a);
            loop {
                let mut improved = false;
                for v in 0..c.n {
                    let cur = a[v];
                    let base: u128 = c.incident[v].iter().filter(|&&e| c.satisfied(e, &a)).map(|&e| c.weights[e]).sum();
                    let mut best = (base, cur);
                    for l in 0..c.alph[v] {
                        if l == cur {
                            continue;
                        }
                        a[v] = l;
                        let s: u128 = c.incident[v].iter().filter(|&&e| c.satisfied(e, &a)).map(|&e| c.weights[e]).sum();
                        if s > best.0 {
                            best = (s, l);
                        }
                    }
                    a[v] = best.1;
                    if best.1 != cur {
                        score = score - base + best.0;
                        improved = true;
                    }
                }
                if !improved {
                    break;
                }
            }
            (score, a)
        })
        .collect();
    // Highest score, earliest restart on ties: independent of scheduling.
    results
        .into_iter()
        .fold(None::<(u128, Vec<u32>)>, |best, cur| match best {
            Some(b) if b.0 >= cur.0 => Some(b),
            _ => Some(cur),
        })
        .map(|(_, a)| a)
        .unwrap_or_else(|| vec![0; c.n])
}

/// Hill climbing over single-vertex relabelings from `restarts` random starts.
pub fn csp_value_local_search(inst: &CspInstance, restarts: u32, seed: u64) -> Result<Valued> {
    inst.nonempty()?;
    if restarts == 0 {
        return Err(Error::domain("local search needs restarts >= 1"));
    }
    let c = Compiled::new(inst)?;
    let a = local_search_compiled(&c, restarts, seed);
    Ok(Valued { value: inst.value_of(&a)?, assignment: a })
}

/// Every edge with integer weight `w` (after scaling to a common denominator)
/// replaced by `w` unit-weight copies.
pub fn unweight_by_duplication(inst: &CspInstance) -> Result<CspInstance> {
    let (ws, total) = inst.integer_weights()?;
    if total > 1_000_000 {
        return Err(Error::resource("unweighted edge count", total, 1_000_000));
    }
    let mut edges = Vec::with_capacity(total as usize);
    for (e, &w) in inst.edges.iter().zip(&ws) {
        for _ in 0..w {
            edges.push(Edge { verts: e.verts.clone(), weight: Rational::one(), sat: e.sat.clone() });
        }
    }
    CspInstance::new(inst.k, inst.vertices.clone(), inst.parts.clone(), edges)
}

// ---------------------------------------------------------------------------
// Structure
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StructuralReport {
    pub is_k_partite: bool,
    /// Per part, degree → number of vertices of that degree.
    pub part_degrees: Vec<BTreeMap<usize, usize>>,
    pub is_partwise_regular: bool,
    pub is_fully_regular: bool,
    pub max_degree: usize,
}

pub fn structural_report(inst: &CspInstance) -> StructuralReport {
    let deg = inst.degrees();
    let part_degrees: Vec<BTreeMap<usize, usize>> = match &inst.parts {
        Some(parts) => parts
            .iter()
            .map(|p| {
                let mut m = BTreeMap::new();
                for &v in p {
                    *m.entry(deg[v]).or_insert(0) += 1;
                }
                m
            })
            .collect(),
        None => Vec::new(),
    };
    let is_k_partite = inst.parts.is_some();
    StructuralReport {
        is_k_partite,
        is_partwise_regular: is_k_partite && part_degrees.iter().all(|m| m.len() <= 1),
        is_fully_regular: deg.windows(2).all(|w| w[0] == w[1]),
        max_degree: deg.iter().copied().max().unwrap_or(0),
        part_degrees,
    }
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

/// Parameters of a random instance: `n` vertices with alphabet `r`, `m`
/// unit-weight edges, each satisfied by a random nonempty tuple set where every
/// tuple is kept with probability `density`.
#[derive(Clone, Copy, Debug)]
pub struct RandomCsp {
    pub n: usize,
    pub k: usize,
    pub r: u32,
    pub m: usize,
    pub density: f64,
}

fn all_tuples(alph: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &a in alph {
        out = out
            .into_iter()
            .flat_map(|t| (0..a).map(move |l| {
                let mut t = t.clone();
                t.push(l);
                t
            }))
            .collect();
    }
    out
}

fn random_sat<R: Rng + ?Sized>(alph: &[u32], density: f64, rng: &mut R) -> Vec<Vec<u32>> {
    let all = all_tuples(alph);
    let mut sat: Vec<Vec<u32>> = all.iter().filter(|_| rng.gen_bool(density)).cloned().collect();
    if sat.is_empty() {
        sat.push(all[rng.gen_range(0..all.len())].clone());
    }
    sat
}

impl RandomCsp {
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CspInstance> {
        if self.k > self.n {
            return Err(Error::domain("need at least k vertices"));
        }
        let vertices: Vec<Vertex> = (0..self.n).map(|i| Vertex { name: format!("v{i}"), alphabet: self.r }).collect();
        let edges = (0..self.m)
            .map(|_| {
                let verts = rand::seq::index::sample(rng, self.n, self.k).into_vec();
                let sat = random_sat(&vec![self.r; self.k], self.density, rng);
                Edge::unit(verts, sat)
            })
            .collect();
        CspInstance::new(self.k, vertices, None, edges)
    }

    /// A k-partite instance with parts of the given sizes.
    pub fn generate_partite<R: Rng + ?Sized>(&self, part_sizes: &[usize], rng: &mut R) -> Result<CspInstance> {
        if part_sizes.len() != self.k || part_sizes.contains(&0) {
            return Err(Error::domain("need k nonempty parts"));
        }
        let mut vertices = Vec::new();
        let mut parts = Vec::new();
        for (p, &s) in part_sizes.iter().enumerate() {
            let mut ids = Vec::new();
            for j in 0..s {
                ids.push(vertices.len());
                vertices.push(Vertex { name: format!("p{p}v{j}"), alphabet: self.r });
            }
            parts.push(ids);
        }
        let edges = (0..self.m)
            .map(|_| {
                let verts: Vec<usize> = parts.iter().map(|p| p[rng.gen_range(0..p.len())]).collect();
                let sat = random_sat(&vec![self.r; self.k], self.density, rng);
                Edge::unit(verts, sat)
            })
            .collect();
        CspInstance::new(self.k, vertices, Some(parts), edges)
    }
}

// ---------------------------------------------------------------------------
// k-dimensional matching
// ---------------------------------------------------------------------------

/// A k-partite hypergraph; each edge lists `(part, vertex)` pairs touching
/// every part at most once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchingInstance {
    pub k: usize,
    pub part_sizes: Vec<usize>,
    pub edges: Vec<Vec<(usize, usize)>>,
}

impl MatchingInstance {
    pub fn new(k: usize, part_sizes: Vec<usize>, edges: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        if part_sizes.len() != k {
            return Err(Error::domain("need one size per part"));
        }
        for e in &edges {
            if e.is_empty() || e.len() > k {
                return Err(Error::domain("hyperedge size must be between 1 and k"));
            }
            let mut seen = vec![false; k];
            for &(p, v) in e {
                if p >= k || v >= part_sizes[p] || seen[p] {
                    return Err(Error::domain("hyperedge leaves its parts or repeats a part"));
                }
                seen[p] = true;
            }
        }
        Ok(MatchingInstance { k, part_sizes, edges })
    }

    /// JSON: `{k, parts: [[names]], edges: [[names]]}`.
    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("matching JSON: {m}"));
        let k = v.get("k").and_then(Value::as_u64).ok_or_else(|| bad("missing k"))? as usize;
        let parts: Vec<Vec<String>> = serde_json::from_value(v.get("parts").cloned().ok_or_else(|| bad("missing parts"))?)?;
        let mut ids = HashMap::new();
        for (p, names) in parts.iter().enumerate() {
            for (i, n) in names.iter().enumerate() {
                if ids.insert(n.clone(), (p, i)).is_some() {
                    return Err(bad(&format!("duplicate vertex {n:?}")));
                }
            }
        }
        let edges: Vec<Vec<String>> = serde_json::from_value(v.get("edges").cloned().ok_or_else(|| bad("missing edges"))?)?;
        let edges = edges
            .iter()
            .map(|e| {
                e.iter()
                    .map(|n| ids.get(n).copied().ok_or_else(|| bad(&format!("unknown vertex {n:?}"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        MatchingInstance::new(k, parts.iter().map(Vec::len).collect(), edges)
    }
}

/// Size of a largest set of pairwise disjoint hyperedges, with one such set.
pub fn matching_value_exact(m: &MatchingInstance) -> Result<(usize, Vec<usize>)> {
    let cap = Caps::get().matching_edges;
    if m.edges.len() > cap {
        return Err(Error::resource("exact matching search", m.edges.len(), cap));
    }
    let offsets: Vec<usize> = m
        .part_sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let nv: usize = m.part_sizes.iter().sum();
    let verts: Vec<Vec<usize>> = m.edges.iter().map(|e| e.iter().map(|&(p, v)| offsets[p] + v).collect()).collect();

    fn go(i: usize, verts: &[Vec<usize>], used: &mut Vec<bool>, cur: &mut Vec<usize>, best: &mut Vec<usize>) {
        if cur.len() + (verts.len() - i) <= best.len() {
            return;
        }
        if i == verts.len() {
            *best = cur.clone();
            return;
        }
        if verts[i].iter().all(|&v| !used[v]) {
            for &v in &verts[i] {
                used[v] = true;
            }
            cur.push(i);
            go(i + 1, verts, used, cur, best);
            cur.pop();
            for &v in &verts[i] {
                used[v] = false;
            }
        }
        go(i + 1, verts, used, cur, best);
    }

    // Greedy lower bound first.
    let mut used = vec![false; nv];
    let mut best = Vec::new();
    for (i, e) in verts.iter().enumerate() {
        if e.iter().all(|&v| !used[v]) {
            e.iter().for_each(|&v| used[v] = true);
            best.push(i);
        }
    }
    let mut used = vec![false; nv];
    go(0, &verts, &mut used, &mut Vec::new(), &mut best);
    Ok((best.len(), best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn binary(n: usize) -> Vec<Vertex> {
        (0..n).map(|i| Vertex { name: format!("x{i}"), alphabet: 2 }).collect()
    }

    #[test]
    fn value_examples() {
        let all = CspInstance::new(2, binary(2), None, vec![Edge::unit(vec![0, 1], all_tuples(&[2, 2]))]).unwrap();
        assert_eq!(csp_value_exact(&all).unwrap().value, Rational::one());
        let eq_neq = CspInstance::new(
            2,
            binary(2),
            None,
            vec![
                Edge::unit(vec![0, 1], vec![vec![0, 0], vec![1, 1]]),
                Edge::unit(vec![0, 1], vec![vec![0, 1], vec![1, 0]]),
            ],
        )
        .unwrap();
        assert_eq!(csp_value_exact(&eq_neq).unwrap().value, BigRational::new(1.into(), 2.into()));
        let empty = CspInstance::new(2, binary(2), None, vec![]).unwrap();
        assert!(csp_value_exact(&empty).is_err());
    }

    #[test]
    fn baseline_examples() {
        let xor = CspInstance::new(
            3,
            binary(3),
            None,
            vec![Edge::unit(vec![0, 1, 2], all_tuples(&[2, 2, 2]).into_iter().filter(|t| t.iter().sum::<u32>() % 2 == 1).collect())],
        )
        .unwrap();
        assert_eq!(csp_value_random_baseline(&xor).unwrap(), BigRational::new(1.into(), 2.into()));
        let none = CspInstance::new(2, binary(2), None, vec![Edge::unit(vec![0, 1], vec![])]).unwrap();
        assert_eq!(csp_value_random_baseline(&none).unwrap(), Rational::zero());
    }

    #[test]
    fn repeated_vertex_rejected() {
        assert!(CspInstance::new(2, binary(2), None, vec![Edge::unit(vec![0, 0], vec![])]).is_err());
    }

    #[test]
    fn single_edge_structure() {
        let inst = CspInstance::new(3, binary(3), Some(vec![vec![0], vec![1], vec![2]]), vec![Edge::unit(vec![0, 1, 2], vec![])]).unwrap();
        let r = structural_report(&inst);
        assert!(r.is_k_partite && r.is_partwise_regular && r.is_fully_regular);
        assert_eq!(r.max_degree, 1);
    }

    #[test]
    fn matching_examples() {
        let disjoint = MatchingInstance::new(2, vec![3, 3], (0..3).map(|i| vec![(0, i), (1, i)]).collect()).unwrap();
        assert_eq!(matching_value_exact(&disjoint).unwrap().0, 3);
        let star = MatchingInstance::new(2, vec![1, 3], (0..3).map(|i| vec![(0, 0), (1, i)]).collect()).unwrap();
        assert_eq!(matching_value_exact(&star).unwrap().0, 1);
    }

    #[test]
    fn json_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let inst = RandomCsp { n: 5, k: 3, r: 2, m: 4, density: 0.5 }.generate_partite(&[2, 2, 1], &mut rng).unwrap();
        assert_eq!(CspInstance::from_json(&inst.to_json()).unwrap(), inst);
    }
}
