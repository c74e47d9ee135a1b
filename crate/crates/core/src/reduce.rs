//! Instance transformations: k-partitization, constraint duplication,
//! expander-based partwise regularization and full regularization, with
//! exact value certificates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::csp::{csp_value_exact, structural_report, CspInstance, Edge, Vertex};
use crate::error::{Error, Result};
use crate::json::rational_report;
use crate::rng::{fnv1a, indexed_seed, rng_from_seed};
use crate::Rational;

/// Upper limit on the number of edges a reduction may produce.
pub const MAX_OUTPUT_EDGES: usize = 2_000_000;

/// Number of random candidates tried per expander; the best λ̂ is kept.
pub const EXPANDER_CANDIDATES: usize = 8;

fn check_output_size(edges: usize) -> Result<()> {
    if edges > MAX_OUTPUT_EDGES {
        return Err(Error::resource("reduction output edges", edges, MAX_OUTPUT_EDGES));
    }
    Ok(())
}

pub fn digest(inst: &CspInstance) -> String {
    format!("{:016x}", fnv1a(inst.to_json().to_string().as_bytes()))
}

// ---------------------------------------------------------------------------
// k-partitization and duplication
// ---------------------------------------------------------------------------

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                go(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Copies `(v, p)` of every vertex for `p < k`, part `p` holding the p-th
/// copies; every edge becomes `k!` edges, one per assignment of its
/// endpoints to distinct parts.
pub fn k_partitize(inst: &CspInstance) -> Result<CspInstance> {
    let k = inst.k();
    let perms = permutations(k);
    check_output_size(inst.edges().len() * perms.len())?;
    let nv = inst.vertices().len();
    let id = |v: usize, p: usize| p * nv + v;
    let mut vertices = Vec::with_capacity(nv * k);
    for p in 0..k {
        for v in inst.vertices() {
            vertices.push(Vertex { name: format!("{}@{p}", v.name), alphabet: v.alphabet });
        }
    }
    let parts = (0..k).map(|p| (0..nv).map(|v| id(v, p)).collect()).collect();
    let mut edges = Vec::new();
    for e in inst.edges() {
        for pi in &perms {
            let verts = e.verts.iter().zip(pi).map(|(&v, &p)| id(v, p)).collect();
            edges.push(Edge { verts, weight: e.weight.clone(), sat: e.sat.clone() });
        }
    }
    CspInstance::new(k, vertices, Some(parts), edges)
}

/// Every edge repeated `d` times in place.
pub fn duplicate_constraints(inst: &CspInstance, d: usize) -> Result<CspInstance> {
    if d == 0 {
        return Err(Error::domain("duplication factor must be at least 1"));
    }
    check_output_size(inst.edges().len() * d)?;
    let edges = inst
        .edges()
        .iter()
        .flat_map(|e| std::iter::repeat(e.clone()).take(d))
        .collect();
    CspInstance::new(inst.k(), inst.vertices().to_vec(), inst.parts().map(<[_]>::to_vec), edges)
}

// ---------------------------------------------------------------------------
// Bipartite expanders
// ---------------------------------------------------------------------------

/// A biregular bipartite graph with both sides of size `n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BipartiteGraph {
    pub n_left: usize,
    pub n_right: usize,
    pub degree: usize,
    /// Sorted `(left, right)` pairs.
    pub edges: Vec<(usize, usize)>,
}

impl BipartiteGraph {
    pub fn complete(n: usize) -> Self {
        BipartiteGraph {
            n_left: n,
            n_right: n,
            degree: n,
            edges: (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect(),
        }
    }

    /// Union of `d` edge-disjoint perfect matchings given as permutations.
    pub fn from_permutations(n: usize, perms: &[Vec<usize>]) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> = perms
            .iter()
            .flat_map(|p| p.iter().enumerate().map(|(a, &b)| (a, b)))
            .collect();
        edges.sort_unstable();
        let len = edges.len();
        edges.dedup();
        if edges.len() != len {
            return Err(Error::domain("permutations share an edge"));
        }
        Ok(BipartiteGraph { n_left: n, n_right: n, degree: perms.len(), edges })
    }

    pub fn right_neighbors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        let start = self.edges.partition_point(|&(l, _)| l < a);
        self.edges[start..].iter().take_while(move |&&(l, _)| l == a).map(|&(_, r)| r)
    }

    pub fn is_biregular(&self) -> bool {
        let mut dl = vec![0; self.n_left];
        let mut dr = vec![0; self.n_right];
        for &(a, b) in &self.edges {
            dl[a] += 1;
            dr[b] += 1;
        }
        dl.iter().chain(&dr).all(|&x| x == self.degree)
    }

    pub fn biadjacency(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_left, self.n_right);
        for &(a, b) in &self.edges {
            m[(a, b)] += 1.0;
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SpectralMethod {
    PowerIteration { iterations: usize },
    DenseEigen,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralReport {
    pub top_singular: f64,
    /// Second largest singular value of the biadjacency matrix.
    pub second_singular: f64,
    pub residual: f64,
    pub method: SpectralMethod,
}

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 20_000;

/// Second singular value of a `degree`-biregular graph: the top eigenvalue of
/// BᵀB after removing the all-ones direction, by power iteration, falling back
/// to a dense symmetric eigensolver when the residual stays above 1e-8.
pub fn spectral_report(g: &BipartiteGraph, seed: u64) -> SpectralReport {
    let n = g.n_right;
    let b = g.biadjacency();
    let top = g.degree as f64;
    let mut m = b.transpose() * &b;
    m.add_scalar_mut(-(top * top) / n as f64);
    let mut rng = rng_from_seed(seed);
    let mut x = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
    for it in 1..=POWER_MAX_ITERS {
        let norm = x.norm();
        if norm < 1e-300 {
            break;
        }
        x /= norm;
        let y = &m * &x;
        let mu = x.dot(&y);
        let residual = (&y - &x * mu).norm();
        if y.norm() < 1e-12 {
            return SpectralReport { top_singular: top, second_singular: 0.0, residual: y.norm(), method: SpectralMethod::PowerIteration { iterations: it } };
        }
        if residual < POWER_TOL {
            return SpectralReport {
                top_singular: top,
                second_singular: mu.max(0.0).sqrt(),
                residual,
                method: SpectralMethod::PowerIteration { iterations: it },
            };
        }
        x = y;
    }
    let eig = SymmetricEigen::new(m.clone());
    let (idx, &lam) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty matrix");
    let v = eig.eigenvectors.column(idx);
    let residual = (&m * v - v * lam).norm();
    SpectralReport { top_singular: top, second_singular: lam.max(0.0).sqrt(), residual, method: SpectralMethod::DenseEigen }
}

/// A random perfect matching avoiding `taken` (an `n×n` occupancy table), by
/// augmenting paths over shuffled adjacency. Exists whenever the free graph is
/// regular.
fn random_matching<R: Rng + ?Sized>(n: usize, taken: &[Vec<bool>], rng: &mut R) -> Option<Vec<usize>> {
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|a| {
            let mut v: Vec<usize> = (0..n).filter(|&b| !taken[a][b]).collect();
            v.shuffle(rng);
            v
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut match_r: Vec<Option<usize>> = vec![None; n];
    fn augment(a: usize, adj: &[Vec<usize>], seen: &mut [bool], match_r: &mut [Option<usize>]) -> bool {
        for &b in &adj[a] {
            if !seen[b] {
                seen[b] = true;
                if match_r[b].map_or(true, |a2| augment(a2, adj, seen, match_r)) {
                    match_r[b] = Some(a);
                    return true;
                }
            }
        }
        false
    }
    for &a in &order {
        if !augment(a, &adj, &mut vec![false; n], &mut match_r) {
            return None;
        }
    }
    let mut perm = vec![0; n];
    for (b, a) in match_r.iter().enumerate() {
        perm[a.expect("perfect matching")] = b;
    }
    Some(perm)
}

fn random_regular<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> BipartiteGraph {
    let mut taken = vec![vec![false; n]; n];
    let mut perms = Vec::with_capacity(d);
    for _ in 0..d {
        let p = random_matching(n, &taken, rng).expect("regular bipartite graphs have perfect matchings");
        for (a, &b) in p.iter().enumerate() {
            taken[a][b] = true;
        }
        perms.push(p);
    }
    BipartiteGraph::from_permutations(n, &perms).expect("matchings are edge-disjoint")
}

/// A `d`-regular bipartite graph on `n + n` vertices: complete when `d = n`,
/// otherwise the best of `candidates` random unions of `d` edge-disjoint
/// perfect matchings.
pub fn build_bipartite_expander_with(n: usize, d: usize, seed: u64, candidates: usize) -> Result<(BipartiteGraph, SpectralReport)> {
    if d == 0 || d > n {
        return Err(Error::domain(format!("expander needs 1 <= d <= n, got d={d}, n={n}")));
    }
    if d == n {
        let g = BipartiteGraph::complete(n);
        let rep = SpectralReport { top_singular: n as f64, second_singular: 0.0, residual: 0.0, method: SpectralMethod::DenseEigen };
        return Ok((g, rep));
    }
    let best = (0..candidates.max(1) as u64)
        .map(|c| {
            let mut rng = rng_from_seed(indexed_seed(seed, "expander-candidate", c));
            let g = random_regular(n, d, &mut rng);
            let rep = spectral_report(&g, indexed_seed(seed, "power-iteration", c));
            (g, rep)
        })
        .fold(None::<(BipartiteGraph, SpectralReport)>, |best, cur| match best {
            Some(b) if b.1.second_singular <= cur.1.second_singular => Some(b),
            _ => Some(cur),
        })
        .expect("at least one candidate");
    Ok(best)
}

pub fn build_bipartite_expander(n: usize, d: usize, seed: u64) -> Result<(BipartiteGraph, SpectralReport)> {
    build_bipartite_expander_with(n, d, seed, EXPANDER_CANDIDATES)
}

// ---------------------------------------------------------------------------
// Regularization
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionReport {
    pub kind: &'static str,
    pub input_digest: String,
    pub output_digest: String,
    pub input_vertices: usize,
    pub input_edges: usize,
    pub output_vertices: usize,
    pub output_edges: usize,
    /// Largest measured second singular value over the per-vertex expanders.
    pub lambda_max: Option<f64>,
    pub degree: Option<usize>,
    pub part: Option<usize>,
    pub certificate: Option<ValueCertificate>,
}

impl ReductionReport {
    fn new(kind: &'static str, input: &CspInstance, output: &CspInstance) -> Self {
        ReductionReport {
            kind,
            input_digest: digest(input),
            output_digest: digest(output),
            input_vertices: input.vertices().len(),
            input_edges: input.edges().len(),
            output_vertices: output.vertices().len(),
            output_edges: output.edges().len(),
            lambda_max: None,
            degree: None,
            part: None,
            certificate: None,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "kind": self.kind,
            "input_digest": self.input_digest,
            "output_digest": self.output_digest,
            "input_vertices": self.input_vertices,
            "input_edges": self.input_edges,
            "output_vertices": self.output_vertices,
            "output_edges": self.output_edges,
            "lambda_max": self.lambda_max,
            "degree": self.degree,
            "part": self.part,
            "certificate": self.certificate.as_ref().map(ValueCertificate::to_json),
        })
    }
}

/// Exact values on both sides of a reduction and the inequalities checked
/// between them.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueCertificate {
    pub val_in: Rational,
    pub val_out: Rational,
    pub checks: Vec<(String, bool)>,
}

impl ValueCertificate {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "val_in": rational_report(&self.val_in),
            "val_out": rational_report(&self.val_out),
            "checks": self.checks.iter().map(|(n, h)| json!({"claim": n, "holds": h})).collect::<Vec<_>>(),
            "holds": self.holds(),
        })
    }
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// `val(in) <= val(out) <= (k^k / k!) val(in)`.
pub fn certify_k_partitize(input: &CspInstance, output: &CspInstance) -> Result<ValueCertificate> {
    let val_in = csp_value_exact(input)?.value;
    let val_out = csp_value_exact(output)?.value;
    let k = input.k();
    let ratio = Rational::new((k as u64).pow(k as u32).into(), factorial(k).into());
    Ok(ValueCertificate {
        checks: vec![
            ("val(out) >= val(in)".into(), val_out >= val_in),
            ("val(out) <= k^k/k! * val(in)".into(), val_out <= &ratio * &val_in),
        ],
        val_in,
        val_out,
    })
}

pub fn k_partitize_report(input: &CspInstance, output: &CspInstance) -> ReductionReport {
    ReductionReport::new("k-partitize", input, output)
}

fn partition(inst: &CspInstance) -> Result<Vec<usize>> {
    inst.part_of().ok_or_else(|| Error::domain("instance is not k-partite"))
}

/// Replaces every vertex `v` of part `i` by a cloud `(v, u)`, `u < deg(v)`,
/// joined to its incident edges (in edge order) through a `d`-regular
/// expander `H_v`. An incident edge at position `a` becomes one edge per
/// right neighbour `u` of `a`.
pub fn partwise_regularize(inst: &CspInstance, d: usize, i: usize, seed: u64) -> Result<(CspInstance, ReductionReport)> {
    let part_of = partition(inst)?;
    if i >= inst.k() {
        return Err(Error::domain(format!("part index {i} out of range")));
    }
    if d == 0 {
        return Err(Error::domain("degree must be at least 1"));
    }
    let deg = inst.degrees();
    let members = &inst.parts().expect("partite")[i];
    if let Some(&v) = members.iter().find(|&&v| deg[v] < d) {
        return Err(Error::domain(format!(
            "vertex {:?} of part {i} has degree {} < {d}",
            inst.vertices()[v].name, deg[v]
        )));
    }
    check_output_size(inst.edges().len() * d)?;

    let nv = inst.vertices().len();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (e, edge) in inst.edges().iter().enumerate() {
        for &v in &edge.verts {
            if part_of[v] == i {
                incident[v].push(e);
            }
        }
    }
    let graphs: Vec<Option<(BipartiteGraph, SpectralReport)>> = (0..nv)
        .into_par_iter()
        .map(|v| {
            if part_of[v] == i {
                build_bipartite_expander(deg[v], d, indexed_seed(seed, "cloud", v as u64)).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;

    // Output ids: vertices in input order, part-i vertices expanded in place.
    let mut base = vec![0usize; nv];
    let mut vertices = Vec::new();
    for (v, vert) in inst.vertices().iter().enumerate() {
        base[v] = vertices.len();
        if part_of[v] == i {
            for u in 0..deg[v] {
                vertices.push(Vertex { name: format!("{}#{u}", vert.name), alphabet: vert.alphabet });
            }
        } else {
            vertices.push(vert.clone());
        }
    }
    let mut position = vec![0usize; inst.edges().len()];
    for list in &incident {
        for (a, &e) in list.iter().enumerate() {
            position[e] = a;
        }
    }
    let mut edges = Vec::with_capacity(inst.edges().len() * d);
    for (e, edge) in inst.edges().iter().enumerate() {
        let slot = edge.verts.iter().position(|&v| part_of[v] == i).expect("edge meets every part");
        let v = edge.verts[slot];
        let (g, _) = graphs[v].as_ref().expect("graph built for part-i vertex");
        for u in g.right_neighbors(position[e]) {
            let mut verts: Vec<usize> = edge.verts.iter().map(|&w| base[w]).collect();
            verts[slot] = base[v] + u;
            edges.push(Edge { verts, weight: edge.weight.clone(), sat: edge.sat.clone() });
        }
    }
    let parts = inst
        .parts()
        .expect("partite")
        .iter()
        .map(|p| {
            p.iter()
                .flat_map(|&v| {
                    let len = if part_of[v] == i { deg[v] } else { 1 };
                    base[v]..base[v] + len
                })
                .collect()
        })
        .collect();
    let out = CspInstance::new(inst.k(), vertices, Some(parts), edges)?;
    let mut rep = ReductionReport::new("partwise-regularize", inst, &out);
    rep.lambda_max = Some(graphs.iter().flatten().map(|(_, s)| s.second_singular).fold(0.0, f64::max));
    rep.degree = Some(d);
    rep.part = Some(i);
    Ok((out, rep))
}

/// Error term `λ̂ √(R^{k-1}) / d` of the soundness direction.
pub fn partwise_error_term(lambda: f64, r: u32, k: usize, d: usize) -> f64 {
    lambda * (r as f64).powi(k as i32 - 1).sqrt() / d as f64
}

/// Completeness `val(out) >= val(in)` always; the expander-mixing soundness
/// bound `val(in) >= val(out) - λ̂ √(R^{k-1}) / d` when all weights are equal.
pub fn certify_partwise(input: &CspInstance, output: &CspInstance, report: &ReductionReport) -> Result<ValueCertificate> {
    let val_in = csp_value_exact(input)?.value;
    let val_out = csp_value_exact(output)?.value;
    let mut checks = vec![("val(out) >= val(in)".to_string(), val_out >= val_in)];
    let uniform = input.edges().windows(2).all(|w| w[0].weight == w[1].weight);
    if uniform {
        let lam = report.lambda_max.unwrap_or(0.0);
        let err = partwise_error_term(lam, input.max_alphabet(), input.k(), report.degree.unwrap_or(1));
        let gap = (&val_out - &val_in).to_f64().unwrap_or(f64::INFINITY);
        // Exact when λ̂ vanishes; otherwise compared in floating point with a 1e-9 slack.
        let holds = if lam == 0.0 { val_in >= val_out } else { gap <= err + 1e-9 };
        checks.push((format!("val(in) >= val(out) - {err:.6}"), holds));
    }
    Ok(ValueCertificate { val_in, val_out, checks })
}

/// Cloud product: part-`i` vertex `v` becomes `(v, a, b)` for `a < d_i`,
/// `b < c_i`, and every edge is replaced by all combinations of cloud
/// members of its endpoints. Degrees become `∏ c_j d_j / c_i`.
pub fn fully_regularize(inst: &CspInstance, c: &[usize]) -> Result<CspInstance> {
    let part_of = partition(inst)?;
    let k = inst.k();
    if c.len() != k || c.contains(&0) {
        return Err(Error::domain("need k multiplicities, each at least 1"));
    }
    if inst.edges().is_empty() {
        return Err(Error::domain("instance has no edges"));
    }
    let rep = structural_report(inst);
    if !rep.is_partwise_regular {
        return Err(Error::domain("instance is not partwise regular"));
    }
    let d: Vec<usize> = rep.part_degrees.iter().map(|m| *m.keys().next().unwrap_or(&0)).collect();
    let cloud: Vec<usize> = (0..k).map(|p| d[p] * c[p]).collect();
    let per_edge: usize = cloud.iter().product();
    check_output_size(inst.edges().len().saturating_mul(per_edge))?;

    let mut base = vec![0usize; inst.vertices().len()];
    let mut vertices = Vec::new();
    for (v, vert) in inst.vertices().iter().enumerate() {
        base[v] = vertices.len();
        let p = part_of[v];
        for a in 0..d[p] {
            for b in 0..c[p] {
                vertices.push(Vertex { name: format!("{}#{a}.{b}", vert.name), alphabet: vert.alphabet });
            }
        }
    }
    let mut edges = Vec::with_capacity(inst.edges().len() * per_edge);
    for e in inst.edges() {
        let sizes: Vec<usize> = e.verts.iter().map(|&v| cloud[part_of[v]]).collect();
        let mut idx = vec![0usize; k];
        loop {
            let verts = e.verts.iter().zip(&idx).map(|(&v, &j)| base[v] + j).collect();
            edges.push(Edge { verts, weight: e.weight.clone(), sat: e.sat.clone() });
            let mut pos = k;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < sizes[pos] {
                    break;
                }
                idx[pos] = 0;
            }
            if idx.iter().all(|&j| j == 0) {
                break;
            }
        }
    }
    let parts = inst
        .parts()
        .expect("partite")
        .iter()
        .enumerate()
        .map(|(p, members)| members.iter().flat_map(|&v| base[v]..base[v] + cloud[p]).collect())
        .collect();
    CspInstance::new(k, vertices, Some(parts), edges)
}

/// Exact value equality between input and output.
pub fn certify_equal_value(input: &CspInstance, output: &CspInstance) -> Result<ValueCertificate> {
    let val_in = csp_value_exact(input)?.value;
    let val_out = csp_value_exact(output)?.value;
    Ok(ValueCertificate { checks: vec![("val(out) = val(in)".into(), val_in == val_out)], val_in, val_out })
}

pub fn fully_regularize_report(input: &CspInstance, output: &CspInstance) -> ReductionReport {
    ReductionReport::new("fully-regularize", input, output)
}

/// Duplicate by `dup`, then regularize every part at its current minimum
/// degree, then take the cloud product with all multiplicities 1.
pub fn regularize_pipeline(inst: &CspInstance, dup: usize, seed: u64) -> Result<(CspInstance, Vec<ReductionReport>)> {
    let mut cur = duplicate_constraints(inst, dup)?;
    let mut reports = Vec::new();
    for i in 0..inst.k() {
        let deg = cur.degrees();
        let d = cur.parts().ok_or_else(|| Error::domain("instance is not k-partite"))?[i]
            .iter()
            .map(|&v| deg[v])
            .min()
            .unwrap_or(0);
        if d == 0 {
            return Err(Error::domain(format!("part {i} has an isolated vertex")));
        }
        let (next, rep) = partwise_regularize(&cur, d, i, indexed_seed(seed, "pipeline-part", i as u64))?;
        reports.push(rep);
        cur = next;
    }
    let out = fully_regularize(&cur, &vec![1; inst.k()])?;
    reports.push(fully_regularize_report(&cur, &out));
    Ok((out, reports))
}

/// Degree in part `i` predicted by the cloud product.
pub fn fully_regular_degree(d: &[usize], c: &[usize], i: usize) -> usize {
    d.iter().zip(c).map(|(a, b)| a * b).product::<usize>() / c[i]
}
