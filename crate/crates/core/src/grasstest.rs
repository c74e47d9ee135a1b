//! The `(k+1)`-query Grassmann consistency test and the combinatorics around
//! it: pseudo-random subspace families, their lift to the bilinear scheme,
//! hyperedge counting, maximal zoom-out decoding and the random-linear-function
//! experiment.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilinear::{column_space, rank_of_index, BilinearFn};
use crate::error::{Error, Result};
use crate::f2la::{
    self, enumerate_between, enumerate_grassmann, enumerate_superspaces, gaussian_binomial, vec_from_str,
    vec_to_string, F2Subspace, LinearFunctional, ZoomPair,
};
use crate::rng::{child_rng, indexed_seed, rng_from_seed};
use crate::scalar::Scalar;
use crate::stats::Proportion;
use crate::Rational;

fn ratio(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Rational {
    BigRational::new(num.into(), den.into())
}

fn big(x: &BigUint) -> BigInt {
    BigInt::from(x.clone())
}

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

/// A set of `l`-dimensional subspaces of `F₂ⁿ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubspaceFamily {
    n: usize,
    l: usize,
    members: BTreeSet<F2Subspace>,
}

impl SubspaceFamily {
    pub fn new(n: usize, l: usize, members: impl IntoIterator<Item = F2Subspace>) -> Result<Self> {
        if l > n {
            return Err(Error::domain(format!("family dimension {l} exceeds ambient {n}")));
        }
        let members: BTreeSet<F2Subspace> = members.into_iter().collect();
        if members.iter().any(|s| s.dim() != l || s.ambient_dim() != n) {
            return Err(Error::domain("family member has the wrong dimension"));
        }
        Ok(SubspaceFamily { n, l, members })
    }

    pub fn empty(n: usize, l: usize) -> Self {
        SubspaceFamily { n, l, members: BTreeSet::new() }
    }

    pub fn full(n: usize, l: usize) -> Result<Self> {
        SubspaceFamily::new(n, l, enumerate_grassmann(n, l)?)
    }

    /// Each member of `Grass(n, l)` kept independently with probability `p`.
    pub fn random<R: Rng + ?Sized>(n: usize, l: usize, p: f64, rng: &mut R) -> Result<Self> {
        let all = enumerate_grassmann(n, l)?;
        Ok(SubspaceFamily { n, l, members: all.into_iter().filter(|_| rng.gen_bool(p)).collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn members(&self) -> &BTreeSet<F2Subspace> {
        &self.members
    }

    pub fn contains(&self, s: &F2Subspace) -> bool {
        self.members.contains(s)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `μ(𝓛) = |𝓛| / qbin(n, l)`.
    pub fn density(&self) -> Rational {
        ratio(self.members.len(), big(&gaussian_binomial(self.n, self.l).expect("l <= n")))
    }

    /// Density inside `Zoom[q, w]`, or `None` when the zoom holds no `l`-space.
    pub fn zoom_density(&self, z: &ZoomPair) -> Option<Rational> {
        let (a, b) = (z.q.dim(), z.w.dim());
        if self.l < a || self.l > b {
            return None;
        }
        let total = gaussian_binomial(b - a, self.l - a).expect("ordered");
        let hits = self.members.iter().filter(|s| z.admits(s)).count();
        Some(ratio(hits, big(&total)))
    }
}

/// Largest zoom density over every zoom of size `r`, with a witness.
pub fn family_pseudorandomness(fam: &SubspaceFamily, r: usize) -> Result<(Rational, ZoomPair)> {
    let n = fam.n;
    let mut best: Option<(Rational, ZoomPair)> = None;
    for a in 0..=r.min(n) {
        let codim = r - a;
        if codim > n || n - codim < a {
            continue;
        }
        for q in enumerate_grassmann(n, a)? {
            for w in enumerate_superspaces(&q, n - codim)? {
                let z = ZoomPair { q: q.clone(), w };
                if let Some(d) = fam.zoom_density(&z) {
                    if best.as_ref().is_none_or(|(b, _)| d > *b) {
                        best = Some((d, z));
                    }
                }
            }
        }
    }
    best.ok_or_else(|| Error::domain(format!("no zoom of size {r} meets dimension {}", fam.l)))
}

/// `M ↦ 1[rank M = l and im M ∈ 𝓛]` on `F₂^{n×l}`.
pub fn lift_indicator<T: Scalar>(fam: &SubspaceFamily) -> Result<BilinearFn<T>> {
    let (n, l) = (fam.n, fam.l);
    BilinearFn::from_fn(n, l, |idx| {
        if rank_of_index(idx, n, l) == l && fam.contains(&column_space(idx, n, l)) {
            T::one()
        } else {
            T::zero()
        }
    })
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

/// An assignment of linear functionals to (some) `dim`-dimensional subspaces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    n: usize,
    dim: usize,
    map: HashMap<F2Subspace, LinearFunctional>,
}

impl Table {
    pub fn new(n: usize, dim: usize) -> Self {
        Table { n, dim, map: HashMap::new() }
    }

    /// Every `dim`-space mapped to the restriction of `x ↦ ⟨g, x⟩`.
    pub fn from_global(n: usize, dim: usize, g: u64) -> Result<Self> {
        Table::from_fn(n, dim, |s| LinearFunctional::from_global(s.clone(), g))
    }

    pub fn from_fn(n: usize, dim: usize, mut f: impl FnMut(&F2Subspace) -> LinearFunctional) -> Result<Self> {
        let mut t = Table::new(n, dim);
        for s in enumerate_grassmann(n, dim)? {
            let v = f(&s);
            t.insert(s, v)?;
        }
        Ok(t)
    }

    /// Independent uniformly random functionals on every `dim`-space.
    pub fn random<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Result<Self> {
        Table::from_fn(n, dim, |s| {
            LinearFunctional::from_basis_values(s.clone(), rng.gen::<u64>() & f2la::mask(dim))
        })
    }

    pub fn insert(&mut self, s: F2Subspace, f: LinearFunctional) -> Result<()> {
        if s.dim() != self.dim || s.ambient_dim() != self.n || f.domain() != &s {
            return Err(Error::domain("table entry does not match its key"));
        }
        self.map.insert(s, f);
        Ok(())
    }

    pub fn get(&self, s: &F2Subspace) -> Option<&LinearFunctional> {
        self.map.get(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&F2Subspace, &LinearFunctional)> {
        self.map.iter()
    }

    /// Whether the entry on `l` exists and agrees with `g` (a functional on a
    /// superspace of `l`).
    pub fn matches(&self, l: &F2Subspace, g: &LinearFunctional) -> bool {
        self.map.get(l).is_some_and(|t| l.basis().iter().all(|&b| t.eval(b) == g.eval(b)))
    }

    fn entry(&self, s: &F2Subspace) -> Result<&LinearFunctional> {
        self.map
            .get(s)
            .ok_or_else(|| Error::domain(format!("table has no entry for {s:?}")))
    }
}

/// The tested object: `T₁` on `dim_top`-spaces and `T₂` on `dim_bot`-spaces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TablePair {
    pub n: usize,
    pub dim_top: usize,
    pub dim_bot: usize,
    pub t1: Table,
    pub t2: Table,
}

#[derive(Serialize, Deserialize)]
struct EntryRepr {
    subspace: F2Subspace,
    coeff_bits: String,
}

#[derive(Serialize, Deserialize)]
struct TablePairRepr {
    n: usize,
    dim_top: usize,
    dim_bot: usize,
    entries: Vec<EntryRepr>,
}

impl TablePair {
    pub fn new(t1: Table, t2: Table) -> Result<Self> {
        if t1.n != t2.n || t2.dim >= t1.dim || t1.dim > t1.n {
            return Err(Error::domain("need dim_bot < dim_top <= n on a common ambient space"));
        }
        Ok(TablePair { n: t1.n, dim_top: t1.dim, dim_bot: t2.dim, t1, t2 })
    }

    /// Both tables restrictions of the global functionals `f` (top) and `g` (bottom).
    pub fn from_globals(n: usize, dim_top: usize, dim_bot: usize, f: u64, g: u64) -> Result<Self> {
        TablePair::new(Table::from_global(n, dim_top, f)?, Table::from_global(n, dim_bot, g)?)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, dim_top: usize, dim_bot: usize, rng: &mut R) -> Result<Self> {
        TablePair::new(Table::random(n, dim_top, rng)?, Table::random(n, dim_bot, rng)?)
    }

    /// JSON with entries sorted by subspace for byte-stable output.
    pub fn to_json(&self) -> serde_json::Value {
        let mut entries: Vec<(&F2Subspace, &LinearFunctional)> = self.t1.iter().chain(self.t2.iter()).collect();
        entries.sort_by(|a, b| (a.0.dim(), a.0).cmp(&(b.0.dim(), b.0)));
        let repr = TablePairRepr {
            n: self.n,
            dim_top: self.dim_top,
            dim_bot: self.dim_bot,
            entries: entries
                .into_iter()
                .map(|(s, f)| EntryRepr { subspace: s.clone(), coeff_bits: vec_to_string(f.coeff(), self.n) })
                .collect(),
        };
        serde_json::to_value(repr).expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let r: TablePairRepr = serde_json::from_value(v.clone())?;
        let mut t1 = Table::new(r.n, r.dim_top);
        let mut t2 = Table::new(r.n, r.dim_bot);
        for e in r.entries {
            if e.coeff_bits.len() != r.n {
                return Err(Error::Parse("coeff_bits length differs from n".into()));
            }
            let f = LinearFunctional::from_global(e.subspace.clone(), vec_from_str(&e.coeff_bits)?);
            match e.subspace.dim() {
                d if d == r.dim_top => t1.insert(e.subspace, f)?,
                d if d == r.dim_bot => t2.insert(e.subspace, f)?,
                d => return Err(Error::Parse(format!("entry of dimension {d} fits neither table"))),
            }
        }
        TablePair::new(t1, t2)
    }
}

// ---------------------------------------------------------------------------
// The consistency test
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestMode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum PassProbability {
    Exact(Rational),
    Estimate(Proportion),
}

impl PassProbability {
    pub fn approx(&self) -> f64 {
        match self {
            PassProbability::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            PassProbability::Estimate(p) => p.estimate,
        }
    }
}

/// Number of `dim_top`-spaces containing a fixed `dim_bot`-space.
fn superspace_count(tp: &TablePair) -> BigUint {
    gaussian_binomial(tp.n - tp.dim_bot, tp.dim_top - tp.dim_bot).expect("ordered dims")
}

/// Pass probability of the test: pick `R` uniformly, then `L₁..L_k ⊇ R`
/// independently and uniformly, and accept iff `T₁[Lᵢ]|_R = T₂[R]` for all `i`.
pub fn run_consistency_test(tp: &TablePair, k: u32, mode: TestMode) -> Result<PassProbability> {
    if k == 0 {
        return Err(Error::domain("the test needs k >= 1"));
    }
    match mode {
        TestMode::Exact => {
            let rs = enumerate_grassmann(tp.n, tp.dim_bot)?;
            let sup = superspace_count(tp);
            let cap = crate::caps::Caps::get().enumeration;
            let work = BigUint::from(rs.len()) * &sup;
            if work > BigUint::from(cap) {
                return Err(Error::resource("consistency test enumeration", work, cap));
            }
            let agrees: Vec<Result<u64>> = rs
                .par_iter()
                .map(|r| {
                    let t2 = tp.t2.entry(r)?;
                    let mut cnt = 0u64;
                    for l in enumerate_superspaces(r, tp.dim_top)? {
                        if tp.t1.entry(&l)?.restricts_to(t2) {
                            cnt += 1;
                        }
                    }
                    Ok(cnt)
                })
                .collect();
            let mut num = BigInt::zero();
            for a in agrees {
                num += BigInt::from(a?).pow(k);
            }
            let den = BigInt::from(rs.len()) * big(&sup).pow(k);
            Ok(PassProbability::Exact(BigRational::new(num, den)))
        }
        TestMode::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(Error::domain("Monte-Carlo mode needs trials >= 1"));
            }
            let passes: Result<Vec<bool>> = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_from_seed(indexed_seed(seed, "consistency-trial", i));
                    let r = f2la::sample_subspace(tp.n, tp.dim_bot, &mut rng)?;
                    let t2 = tp.t2.entry(&r)?;
                    for _ in 0..k {
                        let l = f2la::sample_superspace(&r, tp.dim_top, &mut rng)?;
                        if !tp.t1.entry(&l)?.restricts_to(t2) {
                            return Ok(false);
                        }
                    }
                    Ok(true)
                })
                .collect();
            let wins = passes?.into_iter().filter(|&b| b).count() as u64;
            Ok(PassProbability::Estimate(Proportion::new(wins, trials, 0.99)))
        }
    }
}

// ---------------------------------------------------------------------------
// Hyperedge counting
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct HyperedgeReport {
    /// `Pr[R ∈ 𝓡, L₁..L_k ∈ 𝓛]` over `R` and independent `Lᵢ ⊇ R`.
    pub probability: Rational,
    /// `⟨(𝒯F)ᵏ, G⟩` for the lifted indicators.
    pub inner: Rational,
    /// Probability that the random matrices of the bilinear side all have
    /// full column rank; `inner = full_rank_probability · probability`.
    pub full_rank_probability: Rational,
    /// `(top + c·k)·2^top / 2ⁿ ≤ ½` with `c = top − bot`.
    pub union_bound_regime: bool,
    /// `probability ≤ 2·inner`; only asserted inside the regime.
    pub holds: bool,
}

/// Exact count of test hyperedges inside `𝓡 × 𝓛ᵏ`, compared with its
/// bilinear-scheme counterpart.
pub fn count_hyperedges(rfam: &SubspaceFamily, lfam: &SubspaceFamily, k: u32) -> Result<HyperedgeReport> {
    if rfam.n != lfam.n || lfam.l <= rfam.l {
        return Err(Error::domain("need a common ambient space and dim(L) > dim(R)"));
    }
    let (n, top, bot) = (lfam.n, lfam.l, rfam.l);
    let sup = gaussian_binomial(n - bot, top - bot)?;
    let total_r = gaussian_binomial(n, bot)?;
    let mut num = BigInt::zero();
    for r in rfam.members.iter() {
        let cnt = enumerate_superspaces(r, top)?.iter().filter(|l| lfam.contains(l)).count();
        num += BigInt::from(cnt).pow(k);
    }
    let probability = BigRational::new(num, big(&total_r) * big(&sup).pow(k));

    let f: BilinearFn<Rational> = lift_indicator(lfam)?;
    let g: BilinearFn<Rational> = lift_indicator(rfam)?;
    let tf = f.apply_t(top - bot)?;
    let inner = tf.pow(k).inner(&g)?;

    let factor = |i: usize| Rational::one() - Rational::inv_pow2((n - i) as u32);
    let base: Rational = (0..bot).map(factor).fold(Rational::one(), |a, b| a * b);
    let ext: Rational = (bot..top).map(factor).fold(Rational::one(), |a, b| a * b);
    let full_rank_probability = base * num_traits::pow(ext, k as usize);

    let c = top - bot;
    let regime_lhs = ratio(((top + c * k as usize) as u64) << top, BigInt::one() << n);
    let union_bound_regime = regime_lhs <= ratio(1, 2);
    let holds = probability <= inner.clone() * Rational::from_integer(2.into());
    Ok(HyperedgeReport { probability, inner, full_rank_probability, union_bound_regime, holds })
}

// ---------------------------------------------------------------------------
// Maximal zoom-out pairs
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct MaximalPair {
    pub w: F2Subspace,
    pub g: LinearFunctional,
    pub agreement: Rational,
}

/// Exact `Pr_{L ∈ Zoom[q, w]}[g|_L ≡ T[L]]`; entries missing from `t` count
/// as disagreements.
pub fn agreement(t: &Table, q: &F2Subspace, w: &F2Subspace, g: &LinearFunctional) -> Result<Rational> {
    let ls = enumerate_between(q, w, t.dim)?;
    let hits = ls.iter().filter(|l| t.matches(l, g)).count();
    Ok(ratio(hits, ls.len()))
}

/// Agreement counts of every functional on `w`, indexed by basis values.
fn agreement_counts(t: &Table, ls: &[F2Subspace], w: &F2Subspace) -> Vec<u32> {
    let mut counts = vec![0u32; 1 << w.dim()];
    for l in ls {
        let Some(tl) = t.get(l) else { continue };
        // Coordinates of L's basis in W, with the table's values.
        let rows: Vec<(u64, bool)> = l.basis().iter().map(|&b| (w.coords(b), tl.eval(b))).collect();
        for (g, c) in counts.iter_mut().enumerate() {
            if rows.iter().all(|&(co, v)| f2la::parity(co & g as u64) == v) {
                *c += 1;
            }
        }
    }
    counts
}

/// Every zoom-out `W ⊇ q` able to hold a table subspace, largest first, with
/// the agreement counts of every functional on it and the zoom size.
fn zoom_out_counts(t: &Table, q: &F2Subspace) -> Result<(Vec<F2Subspace>, Vec<(Vec<u32>, u32)>)> {
    let n = t.n;
    let mut ws: Vec<F2Subspace> = Vec::new();
    for d in (t.dim.max(q.dim())..=n).rev() {
        ws.extend(enumerate_superspaces(q, d)?);
    }
    let work: u128 = ws.iter().map(|w| 1u128 << w.dim()).sum();
    let cap = crate::caps::Caps::get().enumeration as u128;
    if work > cap {
        return Err(Error::resource("maximal pair search", work, cap));
    }
    let counts = ws
        .par_iter()
        .map(|w| {
            let ls = enumerate_between(q, w, t.dim)?;
            Ok((agreement_counts(t, &ls, w), ls.len() as u32))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ws, counts))
}

/// The pair `(W, g)` with `codim(W) ≤ max_codim` of highest agreement with
/// `t` on `q`; ties go to the larger `W`, then the earlier one in enumeration
/// order, then the smaller `g`.
pub fn best_pair(t: &Table, q: &F2Subspace, max_codim: usize) -> Result<Option<MaximalPair>> {
    if q.ambient_dim() != t.n {
        return Err(Error::domain("zoom-in lives in a different ambient space"));
    }
    if q.dim() > t.dim {
        return Ok(None);
    }
    let (ws, counts) = zoom_out_counts(t, q)?;
    let mut best: Option<(Rational, usize, usize)> = None;
    for (i, w) in ws.iter().enumerate() {
        if w.codim() > max_codim {
            continue;
        }
        let (cnt, tot) = &counts[i];
        for (g, &a) in cnt.iter().enumerate() {
            let r = ratio(a, *tot);
            if best.as_ref().map_or(true, |b| r > b.0) {
                best = Some((r, i, g));
            }
        }
    }
    Ok(best.map(|(agreement, i, g)| MaximalPair {
        w: ws[i].clone(),
        g: LinearFunctional::from_basis_values(ws[i].clone(), g as u64),
        agreement,
    }))
}

/// Every `(C, s)`-maximal pair `(W, g)` with respect to `t` on `q` with
/// `codim(W) ≤ max_codim`.
///
/// Zoom-outs are visited in decreasing dimension. A candidate is dropped when
/// some strictly larger zoom-out carries an extension of it with agreement at
/// least `s·C`; pairs tied in agreement are all returned.
pub fn find_maximal_pairs(
    t: &Table,
    q: &F2Subspace,
    c: f64,
    s: f64,
    max_codim: usize,
) -> Result<Vec<MaximalPair>> {
    if !(c > 0.0) || !(s > 0.0 && s <= 1.0) {
        return Err(Error::domain("need C > 0 and 0 < s <= 1"));
    }
    let n = t.n;
    if q.ambient_dim() != n {
        return Err(Error::domain("zoom-in lives in a different ambient space"));
    }
    if q.dim() > t.dim {
        return Ok(Vec::new());
    }
    let (ws, counts) = zoom_out_counts(t, q)?;
    // Pairs strong enough to dominate, as (W', global coefficient vector).
    let strong: Vec<(usize, u64)> = ws
        .iter()
        .enumerate()
        .flat_map(|(i, w)| {
            let (cnt, tot) = &counts[i];
            cnt.iter()
                .enumerate()
                .filter(move |(_, &a)| a as f64 >= s * c * *tot as f64)
                .map(move |(g, _)| (i, LinearFunctional::from_basis_values(w.clone(), g as u64).coeff()))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut out = Vec::new();
    for (i, w) in ws.iter().enumerate() {
        if w.codim() > max_codim {
            continue;
        }
        let (cnt, tot) = &counts[i];
        for (gv, &a) in cnt.iter().enumerate() {
            if (a as f64) < c * *tot as f64 {
                continue;
            }
            let g = LinearFunctional::from_basis_values(w.clone(), gv as u64);
            let dominated = strong.iter().any(|&(j, coeff)| {
                let wp = &ws[j];
                wp.dim() > w.dim()
                    && wp.contains_unchecked(w)
                    && w.basis().iter().all(|&b| f2la::parity(coeff & b) == g.eval(b))
            });
            if !dominated {
                out.push(MaximalPair { w: w.clone(), g, agreement: ratio(a, *tot) });
            }
        }
    }
    Ok(out)
}

/// Re-checks both clauses of maximality by direct enumeration.
pub fn verify_maximal(t: &Table, q: &F2Subspace, pair: &MaximalPair, c: f64, s: f64) -> Result<bool> {
    let a = agreement(t, q, &pair.w, &pair.g)?;
    if a != pair.agreement || a.to_f64().unwrap_or(0.0) < c {
        return Ok(false);
    }
    let n = t.n;
    for d in pair.w.dim() + 1..=n {
        for wp in enumerate_superspaces(&pair.w, d)? {
            for ext in pair.g.extensions(&wp)? {
                if agreement(t, q, &wp, &ext)?.to_f64().unwrap_or(0.0) >= s * c {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Random linear function experiment
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BksMode {
    /// Every one of the `2ⁿ` global functionals.
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BksSample {
    pub f: u64,
    pub s_l: usize,
    pub s_r: usize,
    /// `|E_k(S_L, S_R)|`: tuples `(R, L₁..L_k)` with `R ∈ S_R`, `Lᵢ ⊇ R`, `Lᵢ ∈ S_L`.
    pub edges: BigUint,
    pub mu_r: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BksReport {
    pub samples: Vec<BksSample>,
    /// Mean of `μ(S_R)` over the functionals visited.
    pub mean_mu_r: Rational,
    /// `2^{−dim_bot}`, the exact value of `E_f[μ(S_R)]`.
    pub expected_mu_r: Rational,
    /// Mean of `|E_k| / (qbin(n, bot)·sup^k)`.
    pub mean_edge_density: f64,
    /// Standard error of the sampled `μ(S_R)` values.
    pub mu_r_stderr: f64,
}

/// For each chosen global `f`, the sets of subspaces on which the tables agree
/// with `f` and the number of test hyperedges inside them.
pub fn bks_experiment(tp: &TablePair, k: u32, mode: BksMode) -> Result<BksReport> {
    let fs: Vec<u64> = match mode {
        BksMode::Exhaustive => (0..1u64 << tp.n).collect(),
        BksMode::Sampled { samples, seed } => {
            if samples == 0 {
                return Err(Error::domain("need samples >= 1"));
            }
            let mut rng = child_rng(seed, "bks-functionals");
            (0..samples).map(|_| f2la::random_vector(tp.n, &mut rng)).collect()
        }
    };
    let rs = enumerate_grassmann(tp.n, tp.dim_bot)?;
    let ls = enumerate_grassmann(tp.n, tp.dim_top)?;
    let index: BTreeMap<&F2Subspace, usize> = ls.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let ups: Vec<Vec<usize>> = rs
        .iter()
        .map(|r| Ok(enumerate_superspaces(r, tp.dim_top)?.iter().map(|l| index[l]).collect()))
        .collect::<Result<_>>()?;
    let sup = superspace_count(tp);
    let n_r = rs.len();
    let samples: Vec<BksSample> = fs
        .par_iter()
        .map(|&f| {
            let gf = LinearFunctional::from_global(F2Subspace::full(tp.n), f);
            let in_l: Vec<bool> = ls.iter().map(|l| tp.t1.matches(l, &gf)).collect();
            let mut s_r = 0;
            let mut edges = BigUint::zero();
            for (r, up) in rs.iter().zip(&ups) {
                if !tp.t2.matches(r, &gf) {
                    continue;
                }
                s_r += 1;
                let cnt = up.iter().filter(|&&i| in_l[i]).count();
                edges += BigUint::from(cnt).pow(k);
            }
            BksSample {
                f,
                s_l: in_l.iter().filter(|&&b| b).count(),
                s_r,
                edges,
                mu_r: s_r as f64 / n_r as f64,
            }
        })
        .collect();
    let cnt = samples.len();
    let sum_sr: usize = samples.iter().map(|s| s.s_r).sum();
    let mean_mu_r = ratio(sum_sr, cnt * n_r);
    let mean = mean_mu_r.to_f64().unwrap_or(0.0);
    let var = samples.iter().map(|s| (s.mu_r - mean).powi(2)).sum::<f64>() / (cnt.max(2) - 1) as f64;
    let denom = (BigUint::from(n_r) * sup.pow(k)).to_f64().unwrap_or(f64::INFINITY);
    let mean_edge_density =
        samples.iter().map(|s| s.edges.to_f64().unwrap_or(0.0) / denom).sum::<f64>() / cnt as f64;
    Ok(BksReport {
        samples,
        mean_mu_r,
        expected_mu_r: Rational::inv_pow2(tp.dim_bot as u32),
        mean_edge_density,
        mu_r_stderr: (var / cnt as f64).sqrt(),
    })
}
