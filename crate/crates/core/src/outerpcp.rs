//! 3Lin instances, the smooth parallel-repetition game with advice, and the
//! covering experiments comparing first- and second-prover question
//! distributions.
//!
//! In the game, `U` and `V` are sets of variables and advice vectors are
//! indexed by the sorted variable lists. The covering experiments work in
//! block coordinates instead: block `i` holds the three variables of `e_i` as
//! coordinates `3i, 3i+1, 3i+2` of F₂^{3J}, the typical case of `J` disjoint
//! equations.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::f2la::{coord_bit, enumerate_between, enumerate_grassmann, qbin_u64, random_vector, sample_between, F2Subspace};
use crate::rng::{child_rng, indexed_seed, rng_from_seed, Rng as ChaRng};
use crate::stats::{tv_half_width, Proportion};

pub const MAX_VAR_DEGREE: usize = 10;
pub const CONFIDENCE: f64 = 0.99;

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinEquation {
    /// Sorted, distinct.
    pub vars: [usize; 3],
    pub rhs: bool,
}

impl LinEquation {
    pub fn satisfied_by(&self, value: impl Fn(usize) -> bool) -> bool {
        (value(self.vars[0]) ^ value(self.vars[1]) ^ value(self.vars[2])) == self.rhs
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap3LinInstance {
    pub n_vars: usize,
    pub equations: Vec<LinEquation>,
}

impl Gap3LinInstance {
    pub fn new(n_vars: usize, mut equations: Vec<LinEquation>) -> Result<Self> {
        for e in &mut equations {
            e.vars.sort_unstable();
        }
        let inst = Gap3LinInstance { n_vars, equations };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let mut deg = vec![0usize; self.n_vars];
        let mut pairs = HashSet::new();
        for (i, e) in self.equations.iter().enumerate() {
            let [a, b, c] = e.vars;
            if !(a < b && b < c) || c >= self.n_vars {
                return Err(Error::domain(format!("equation {i} needs three distinct variables in range")));
            }
            for v in e.vars {
                deg[v] += 1;
                if deg[v] > MAX_VAR_DEGREE {
                    return Err(Error::domain(format!("variable {v} appears in more than {MAX_VAR_DEGREE} equations")));
                }
            }
            for p in [(a, b), (a, c), (b, c)] {
                if !pairs.insert(p) {
                    return Err(Error::domain(format!("equation {i} shares two variables with an earlier equation")));
                }
            }
        }
        Ok(())
    }

    pub fn satisfied_count(&self, sigma: &[bool]) -> usize {
        self.equations.iter().filter(|e| e.satisfied_by(|v| sigma[v])).count()
    }

    pub fn value_of(&self, sigma: &[bool]) -> f64 {
        self.satisfied_count(sigma) as f64 / self.equations.len().max(1) as f64
    }

    /// `{n_vars, equations: [{vars, rhs}]}` with `rhs` as 0/1.
    pub fn to_json(&self) -> Value {
        json!({
            "n_vars": self.n_vars,
            "equations": self.equations.iter().map(|e| json!({"vars": e.vars, "rhs": u8::from(e.rhs)})).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("3Lin JSON: {m}"));
        let n_vars = v.get("n_vars").and_then(Value::as_u64).ok_or_else(|| bad("missing n_vars"))? as usize;
        let eqs = v.get("equations").and_then(Value::as_array).ok_or_else(|| bad("missing equations"))?;
        let mut out = Vec::with_capacity(eqs.len());
        for e in eqs {
            let vars: Vec<usize> = serde_json::from_value(e.get("vars").cloned().ok_or_else(|| bad("equation without vars"))?)?;
            let vars: [usize; 3] = vars.try_into().map_err(|_| bad("equation must have three variables"))?;
            let rhs = match e.get("rhs") {
                Some(Value::Bool(b)) => *b,
                Some(x) => match x.as_u64() {
                    Some(0) => false,
                    Some(1) => true,
                    _ => return Err(bad("rhs must be 0 or 1")),
                },
                None => return Err(bad("equation without rhs")),
            };
            out.push(LinEquation { vars, rhs });
        }
        Gap3LinInstance::new(n_vars, out)
    }
}

/// Random instance consistent with a planted assignment, with exactly
/// `round(eta * n_eqs)` right-hand sides flipped at random positions.
pub fn gen_3lin(n_vars: usize, n_eqs: usize, eta: f64, seed: u64) -> Result<(Gap3LinInstance, Vec<bool>)> {
    if n_vars < 3 {
        return Err(Error::domain("need at least three variables"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain("eta must lie in [0, 1]"));
    }
    let mut rng = child_rng(seed, "3lin");
    let planted: Vec<bool> = (0..n_vars).map(|_| rng.gen()).collect();
    let mut deg = vec![0usize; n_vars];
    let mut pairs = HashSet::new();
    let mut equations = Vec::with_capacity(n_eqs);
    let max_attempts = 1000 * (n_eqs as u64 + 1);
    let mut attempts = 0u64;
    while equations.len() < n_eqs {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::resource("3Lin rejection sampling attempts", attempts, max_attempts));
        }
        let mut vars: [usize; 3] = sample_indices(&mut rng, n_vars, 3).into_vec().try_into().expect("three indices");
        vars.sort_unstable();
        let [a, b, c] = vars;
        let new_pairs = [(a, b), (a, c), (b, c)];
        if vars.iter().any(|&v| deg[v] >= MAX_VAR_DEGREE) || new_pairs.iter().any(|p| pairs.contains(p)) {
            continue;
        }
        for v in vars {
            deg[v] += 1;
        }
        pairs.extend(new_pairs);
        let rhs = planted[a] ^ planted[b] ^ planted[c];
        equations.push(LinEquation { vars, rhs });
    }
    let flips = (eta * n_eqs as f64).round() as usize;
    for i in sample_indices(&mut rng, n_eqs, flips.min(n_eqs)) {
        equations[i].rhs = !equations[i].rhs;
    }
    Ok((Gap3LinInstance::new(n_vars, equations)?, planted))
}

// ---------------------------------------------------------------------------
// The game
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterConfig {
    pub j: usize,
    pub beta: f64,
    pub r: usize,
}

impl OuterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.j == 0 || self.j > 21 {
            return Err(Error::domain("J must lie in 1..=21 (3J block coordinates fit a machine word)"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::domain("beta must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Per block: `None` when `V_i = U_i`, `Some(p)` when `V_i` is the single
/// variable at position `p` of `e_i`.
pub type VChoice = Vec<Option<u8>>;

pub fn sample_v_choice<R: Rng + ?Sized>(j: usize, beta: f64, rng: &mut R) -> VChoice {
    (0..j)
        .map(|_| if rng.gen_bool(beta) { Some(rng.gen_range(0..3u8)) } else { None })
        .collect()
}

/// Mask of the block coordinates kept in `V`.
pub fn v_mask(choice: &[Option<u8>]) -> u64 {
    let n = 3 * choice.len();
    let mut m = 0;
    for (i, c) in choice.iter().enumerate() {
        match c {
            None => (0..3).for_each(|p| m |= coord_bit(n, 3 * i + p)),
            Some(p) => m |= coord_bit(n, 3 * i + *p as usize),
        }
    }
    m
}

/// Coordinate subspace F₂^V inside F₂^{3J}.
pub fn coordinate_subspace(mask: u64, n: usize) -> F2Subspace {
    let rows = (0..n).map(|j| coord_bit(n, j)).filter(|b| mask & b != 0).collect();
    F2Subspace::from_rows(rows, n)
}

/// Zero-fills a vector over the `|V|` coordinates of `mask` (in order) to F₂^{3J}.
pub fn lift(v: u64, mask: u64, n: usize) -> u64 {
    let k = mask.count_ones() as usize;
    let mut out = 0;
    let mut idx = 0;
    for j in 0..n {
        let b = coord_bit(n, j);
        if mask & b != 0 {
            if v & coord_bit(k, idx) != 0 {
                out |= b;
            }
            idx += 1;
        }
    }
    out
}

/// Inverse of [`lift`] on vectors supported in `mask`.
pub fn project(u: u64, mask: u64, n: usize) -> u64 {
    let k = mask.count_ones() as usize;
    let mut out = 0;
    let mut idx = 0;
    for j in 0..n {
        let b = coord_bit(n, j);
        if mask & b != 0 {
            if u & b != 0 {
                out |= coord_bit(k, idx);
            }
            idx += 1;
        }
    }
    out
}

/// Mask over F₂^{vars} of the positions holding `sub` (both sorted).
pub fn var_mask(vars: &[usize], sub: &[usize]) -> u64 {
    let n = vars.len();
    sub.iter()
        .map(|v| coord_bit(n, vars.binary_search(v).expect("sub is a subset")))
        .fold(0, |a, b| a | b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuestionPair {
    pub equations: Vec<usize>,
    pub v_choice: VChoice,
    /// Distinct variables of `U`, sorted.
    pub u_vars: Vec<usize>,
    /// Distinct variables of `V`, sorted.
    pub v_vars: Vec<usize>,
    /// Advice over F₂^U, coordinates in the order of `u_vars`.
    pub advice_u: Vec<u64>,
    /// Advice over F₂^V, coordinates in the order of `v_vars`.
    pub advice_v: Vec<u64>,
}

impl QuestionPair {
    /// Positions of `V` inside `U`, as a mask over F₂^U.
    pub fn v_mask(&self) -> u64 {
        var_mask(&self.u_vars, &self.v_vars)
    }

    /// Every `u_j` agrees with `v_j` on `V` and vanishes elsewhere.
    pub fn advice_consistent(&self) -> bool {
        let n = self.u_vars.len();
        let m = self.v_mask();
        self.advice_u.len() == self.advice_v.len()
            && self
                .advice_u
                .iter()
                .zip(&self.advice_v)
                .all(|(&u, &v)| u & !m == 0 && project(u, m, n) == v)
    }
}

pub fn sample_question<R: Rng + ?Sized>(inst: &Gap3LinInstance, cfg: &OuterConfig, rng: &mut R) -> Result<QuestionPair> {
    cfg.validate()?;
    if inst.equations.is_empty() {
        return Err(Error::domain("instance has no equations"));
    }
    let equations: Vec<usize> = (0..cfg.j).map(|_| rng.gen_range(0..inst.equations.len())).collect();
    let v_choice = sample_v_choice(cfg.j, cfg.beta, rng);
    let mut u_vars: Vec<usize> = equations.iter().flat_map(|&e| inst.equations[e].vars).collect();
    let mut v_vars: Vec<usize> = equations
        .iter()
        .zip(&v_choice)
        .flat_map(|(&e, c)| {
            let vars = inst.equations[e].vars;
            match c {
                None => vars.to_vec(),
                Some(p) => vec![vars[*p as usize]],
            }
        })
        .collect();
    u_vars.sort_unstable();
    u_vars.dedup();
    v_vars.sort_unstable();
    v_vars.dedup();
    let m = var_mask(&u_vars, &v_vars);
    let advice_v: Vec<u64> = (0..cfg.r).map(|_| random_vector(v_vars.len(), rng)).collect();
    let advice_u = advice_v.iter().map(|&v| lift(v, m, u_vars.len())).collect();
    Ok(QuestionPair { equations, v_choice, u_vars, v_vars, advice_u, advice_v })
}

/// What a prover sees: the equations (first prover only), the variables to
/// assign, and the advice.
#[derive(Clone, Copy, Debug)]
pub struct ProverView<'a> {
    pub equations: Option<&'a [usize]>,
    pub vars: &'a [usize],
    pub advice: &'a [u64],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    /// One bit per entry of `vars`.
    Assign(Vec<bool>),
    GiveUp,
}

pub trait ProverStrategy: Sync {
    fn answer(&self, inst: &Gap3LinInstance, view: ProverView<'_>, rng: &mut ChaRng) -> Answer;
}

/// Answers with a fixed global assignment.
#[derive(Clone, Debug)]
pub struct Planted(pub Vec<bool>);

impl ProverStrategy for Planted {
    fn answer(&self, _: &Gap3LinInstance, view: ProverView<'_>, _: &mut ChaRng) -> Answer {
        Answer::Assign(view.vars.iter().map(|&v| self.0[v]).collect())
    }
}

/// Answers with the complement of a fixed global assignment.
#[derive(Clone, Debug)]
pub struct Complement(pub Vec<bool>);

impl ProverStrategy for Complement {
    fn answer(&self, _: &Gap3LinInstance, view: ProverView<'_>, _: &mut ChaRng) -> Answer {
        Answer::Assign(view.vars.iter().map(|&v| !self.0[v]).collect())
    }
}

/// Uniformly random bits.
#[derive(Clone, Debug)]
pub struct RandomProver;

impl ProverStrategy for RandomProver {
    fn answer(&self, _: &Gap3LinInstance, view: ProverView<'_>, rng: &mut ChaRng) -> Answer {
        Answer::Assign(view.vars.iter().map(|_| rng.gen()).collect())
    }
}

/// A fixed assignment, patched so every asked equation holds: the variable
/// at `position` of each violated equation is flipped.
#[derive(Clone, Debug)]
pub struct Patching {
    pub base: Vec<bool>,
    pub position: usize,
}

impl ProverStrategy for Patching {
    fn answer(&self, inst: &Gap3LinInstance, view: ProverView<'_>, _: &mut ChaRng) -> Answer {
        let mut local: HashMap<usize, bool> = view.vars.iter().map(|&v| (v, self.base[v])).collect();
        for &e in view.equations.unwrap_or(&[]) {
            let eq = inst.equations[e];
            if !eq.satisfied_by(|v| local[&v]) {
                let v = eq.vars[self.position % 3];
                local.insert(v, !local[&v]);
            }
        }
        Answer::Assign(view.vars.iter().map(|v| local[v]).collect())
    }
}

pub struct GiveUp;

impl ProverStrategy for GiveUp {
    fn answer(&self, _: &Gap3LinInstance, _: ProverView<'_>, _: &mut ChaRng) -> Answer {
        Answer::GiveUp
    }
}

/// Verifier's decision on one question.
pub fn accepts(inst: &Gap3LinInstance, q: &QuestionPair, a1: &Answer, a2: &Answer) -> bool {
    let (Answer::Assign(x), Answer::Assign(y)) = (a1, a2) else {
        return false;
    };
    if x.len() != q.u_vars.len() || y.len() != q.v_vars.len() {
        return false;
    }
    let val = |v: usize| x[q.u_vars.binary_search(&v).expect("variable of U")];
    let agree = q.v_vars.iter().zip(y).all(|(&v, &b)| val(v) == b);
    agree && q.equations.iter().all(|&e| inst.equations[e].satisfied_by(val))
}

/// Monte-Carlo win rate with a 99% Clopper–Pearson interval.
pub fn play_game(
    inst: &Gap3LinInstance,
    cfg: &OuterConfig,
    s1: &dyn ProverStrategy,
    s2: &dyn ProverStrategy,
    trials: u64,
    seed: u64,
) -> Result<Proportion> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    if inst.equations.is_empty() {
        return Err(Error::domain("instance has no equations"));
    }
    let wins = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(indexed_seed(seed, "game-trial", t));
            let q = sample_question(inst, cfg, &mut rng).expect("validated configuration");
            let a1 = s1.answer(inst, ProverView { equations: Some(&q.equations), vars: &q.u_vars, advice: &q.advice_u }, &mut rng);
            let a2 = s2.answer(inst, ProverView { equations: None, vars: &q.v_vars, advice: &q.advice_v }, &mut rng);
            u64::from(accepts(inst, &q, &a1, &a2))
        })
        .sum();
    Ok(Proportion::new(wins, trials, CONFIDENCE))
}

/// Win rates of a few fixed strategy pairs built from `base`, best first.
pub fn strategy_search(
    inst: &Gap3LinInstance,
    cfg: &OuterConfig,
    base: &[bool],
    trials: u64,
    seed: u64,
) -> Result<Vec<(String, Proportion)>> {
    let planted = Planted(base.to_vec());
    let candidates: Vec<(String, Box<dyn ProverStrategy>, Box<dyn ProverStrategy>)> = vec![
        ("planted/planted".into(), Box::new(planted.clone()), Box::new(planted.clone())),
        ("patch0/planted".into(), Box::new(Patching { base: base.to_vec(), position: 0 }), Box::new(planted.clone())),
        ("patch2/planted".into(), Box::new(Patching { base: base.to_vec(), position: 2 }), Box::new(planted.clone())),
        ("random/random".into(), Box::new(RandomProver), Box::new(RandomProver)),
    ];
    let mut out = Vec::new();
    for (i, (name, a, b)) in candidates.into_iter().enumerate() {
        out.push((name, play_game(inst, cfg, a.as_ref(), b.as_ref(), trials, indexed_seed(seed, "strategy", i as u64))?));
    }
    out.sort_by(|a, b| b.1.estimate.total_cmp(&a.1.estimate));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Covering experiments
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimation {
    /// Exact distributions, computed by enumerating subspaces and all `4^J`
    /// choices of `V` (floating point).
    Exact,
    Sampled { samples: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SdReport {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: f64,
    /// Whether the bound is checked (only when it is below 1).
    pub asserted: bool,
    /// `ci_low <= bound`; vacuously true when not asserted.
    pub holds: bool,
    pub exact: bool,
    pub cells: u64,
}

impl SdReport {
    fn new(estimate: f64, half: f64, bound: f64, exact: bool, cells: u64, always_assert: bool) -> Self {
        let ci_low = (estimate - half).max(0.0);
        let asserted = always_assert || bound < 1.0;
        SdReport {
            estimate,
            ci_low,
            ci_high: (estimate + half).min(1.0),
            bound,
            asserted,
            holds: !asserted || ci_low <= bound,
            exact,
            cells,
        }
    }
}

/// All `4^J` choices of `V` with their probabilities.
pub fn v_choices(j: usize, beta: f64) -> Result<Vec<(u64, f64)>> {
    let count = 4u64.checked_pow(j as u32).unwrap_or(u64::MAX);
    let cap = Caps::get().enumeration;
    if count > cap {
        return Err(Error::resource("choices of V", count, cap));
    }
    let mut out = Vec::with_capacity(count as usize);
    for code in 0..count {
        let choice: VChoice = (0..j)
            .map(|i| match (code >> (2 * i)) & 3 {
                0 => None,
                p => Some(p as u8 - 1),
            })
            .collect();
        let p: f64 = choice.iter().map(|c| if c.is_none() { 1.0 - beta } else { beta / 3.0 }).product();
        if p > 0.0 {
            out.push((v_mask(&choice), p));
        }
    }
    Ok(out)
}

fn support(s: &F2Subspace) -> u64 {
    s.basis().iter().fold(0, |a, &b| a | b)
}

fn qbin_f64(n: usize, k: usize) -> f64 {
    qbin_u64(n, k).map(|x| x as f64).unwrap_or(f64::INFINITY)
}

/// Total variation between the exact distribution `p` (over `cells` outcomes)
/// and an empirical histogram of `draws` from the other side.
fn empirical_tv(hist: &BTreeMap<F2Subspace, u64>, draws: u64, p: impl Fn(&F2Subspace) -> f64, support_mass_seen: f64) -> f64 {
    let mut s = 0.0;
    for (q, &c) in hist {
        s += (c as f64 / draws as f64 - p(q)).abs();
    }
    // Outcomes never drawn contribute their full exact mass.
    s += (1.0 - support_mass_seen).max(0.0);
    s / 2.0
}

/// SD between a uniform `r1`-dimensional subspace of F₂^{3J} and one drawn
/// uniformly inside F₂^V (for a random `V`) and zero-filled. Draws of `V`
/// with `|V| < r1` are discarded.
pub fn covering_sd_advice(j: usize, r1: usize, beta: f64, mode: Estimation) -> Result<SdReport> {
    OuterConfig { j, beta, r: 0 }.validate()?;
    let n = 3 * j;
    if r1 > n {
        return Err(Error::domain("r1 exceeds 3J"));
    }
    let bound = beta * (j as f64).sqrt() * 2f64.powi(r1 as i32 + 4);
    let cells = qbin_u64(n, r1).ok_or_else(|| Error::resource("Grassmann cells", "overflow", u64::MAX))?;
    let uniform = 1.0 / cells as f64;
    match mode {
        Estimation::Exact => {
            let choices = v_choices(j, beta)?;
            let grass = enumerate_grassmann(n, r1)?;
            let valid: f64 = choices.iter().filter(|(m, _)| m.count_ones() as usize >= r1).map(|c| c.1).sum();
            let sd: f64 = grass
                .par_iter()
                .map(|q| {
                    let s = support(q);
                    let p2: f64 = choices
                        .iter()
                        .filter(|(m, _)| s & !m == 0 && m.count_ones() as usize >= r1)
                        .map(|(m, p)| p / qbin_f64(m.count_ones() as usize, r1))
                        .sum::<f64>()
                        / valid;
                    (p2 - uniform).max(0.0)
                })
                .collect::<Vec<f64>>()
                .iter()
                .sum();
            Ok(SdReport::new(sd, 0.0, bound, true, cells, true))
        }
        Estimation::Sampled { samples, seed } => {
            if samples == 0 {
                return Err(Error::domain("need at least one sample"));
            }
            let draws: Vec<F2Subspace> = (0..samples)
                .into_par_iter()
                .map(|t| {
                    let mut rng = rng_from_seed(indexed_seed(seed, "advice-cover", t));
                    loop {
                        let m = v_mask(&sample_v_choice(j, beta, &mut rng));
                        if m.count_ones() as usize >= r1 {
                            let fv = coordinate_subspace(m, n);
                            return sample_between(&F2Subspace::zero(n), &fv, r1, &mut rng).expect("r1 <= |V|");
                        }
                    }
                })
                .collect();
            let mut hist = BTreeMap::new();
            for d in draws {
                *hist.entry(d).or_insert(0u64) += 1;
            }
            let seen = hist.len() as f64 * uniform;
            let est = empirical_tv(&hist, samples, |_| uniform, seen);
            let half = tv_half_width(cells as usize, samples, 1.0 - CONFIDENCE);
            Ok(SdReport::new(est, half, bound, false, cells, true))
        }
    }
}

/// Bound on the zoom covering distance for `dim Q = r`, `codim W = r'`.
pub fn covering_zoom_bound(beta: f64, j: usize, ell2: usize, r: usize, r_prime: usize) -> f64 {
    beta.sqrt() * (j as f64).powf(0.25) * 2f64.powi(ell2 as i32 + 5) * 2f64.powi((r_prime * (ell2 - r)) as i32 + 5)
}

/// SD between a uniform `ell2`-space `L` with `Q ⊆ L ⊆ W` and one drawn as a
/// uniform superspace of `Q` inside F₂^V (random `V`), zero-filled and
/// conditioned on `L ⊆ W`.
pub fn covering_sd_zoom(j: usize, q: &F2Subspace, w: &F2Subspace, ell2: usize, beta: f64, mode: Estimation) -> Result<SdReport> {
    OuterConfig { j, beta, r: 0 }.validate()?;
    let n = 3 * j;
    if q.ambient_dim() != n || w.ambient_dim() != n || !w.contains(q)? {
        return Err(Error::domain("need Q ⊆ W ⊆ F₂^{3J}"));
    }
    if ell2 < q.dim() || ell2 > w.dim() {
        return Err(Error::domain("need dim Q <= 2l <= dim W"));
    }
    let bound = covering_zoom_bound(beta, j, ell2, q.dim(), w.codim());
    let between = enumerate_between(q, w, ell2)?;
    let cells = between.len() as u64;
    let uniform = 1.0 / cells as f64;
    let sq = support(q);
    let choices = v_choices(j, beta)?;
    // Weight of a draw from F₂^V landing on a particular L ⊇ Q.
    let per_v: Vec<(u64, f64)> = choices
        .iter()
        .filter(|(m, _)| sq & !m == 0 && m.count_ones() as usize >= ell2)
        .map(|&(m, p)| (m, p / qbin_f64(m.count_ones() as usize - q.dim(), ell2 - q.dim())))
        .collect();
    let weight = |l: &F2Subspace| -> f64 {
        let s = support(l);
        per_v.iter().filter(|(m, _)| s & !m == 0).map(|c| c.1).sum()
    };
    match mode {
        Estimation::Exact => {
            let weights: Vec<f64> = between.par_iter().map(weight).collect();
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return Err(Error::domain("the lifted distribution never lands in the zoom"));
            }
            let sd = weights.iter().map(|w| (w / total - uniform).max(0.0)).sum();
            Ok(SdReport::new(sd, 0.0, bound, true, cells, false))
        }
        Estimation::Sampled { samples, seed } => {
            if samples == 0 {
                return Err(Error::domain("need at least one sample"));
            }
            if per_v.is_empty() {
                return Err(Error::domain("the lifted distribution never lands in the zoom"));
            }
            let max_attempts = 10_000u64;
            let draws: Vec<Option<F2Subspace>> = (0..samples)
                .into_par_iter()
                .map(|t| {
                    let mut rng = rng_from_seed(indexed_seed(seed, "zoom-cover", t));
                    for _ in 0..max_attempts {
                        let m = v_mask(&sample_v_choice(j, beta, &mut rng));
                        if sq & !m != 0 || (m.count_ones() as usize) < ell2 {
                            continue;
                        }
                        let l = sample_between(q, &coordinate_subspace(m, n), ell2, &mut rng).expect("Q ⊆ F₂^V");
                        if w.contains_unchecked(&l) {
                            return Some(l);
                        }
                    }
                    None
                })
                .collect();
            let accepted: Vec<F2Subspace> = draws.into_iter().flatten().collect();
            if accepted.is_empty() {
                return Err(Error::resource("rejection sampling attempts", max_attempts * samples, max_attempts * samples));
            }
            let total = accepted.len() as u64;
            let mut hist = BTreeMap::new();
            for d in accepted {
                *hist.entry(d).or_insert(0u64) += 1;
            }
            let seen = hist.len() as f64 * uniform;
            let est = empirical_tv(&hist, total, |_| uniform, seen);
            let half = tv_half_width(cells as usize, total, 1.0 - CONFIDENCE);
            Ok(SdReport::new(est, half, bound, false, cells, false))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZoomSurvey {
    pub subspaces: u64,
    pub passing: Proportion,
    /// `1 - sqrt(beta) J^{1/4}`.
    pub required_fraction: f64,
    pub holds: bool,
}

/// Samples `n_q` uniform `r`-dimensional `Q` and, for each, one uniform `W ⊇ Q`
/// of codimension `r'`; counts the `Q` whose exact distance is within the bound.
pub fn covering_zoom_survey(j: usize, r: usize, r_prime: usize, ell2: usize, beta: f64, n_q: u64, seed: u64) -> Result<ZoomSurvey> {
    let n = 3 * j;
    if r_prime > n || n - r_prime < ell2 || r > ell2 {
        return Err(Error::domain("need r <= 2l <= 3J - r'"));
    }
    let results: Vec<bool> = (0..n_q)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let mut rng = rng_from_seed(indexed_seed(seed, "zoom-survey", t));
            let q = sample_between(&F2Subspace::zero(n), &F2Subspace::full(n), r, &mut rng)?;
            let w = sample_between(&q, &F2Subspace::full(n), n - r_prime, &mut rng)?;
            let rep = covering_sd_zoom(j, &q, &w, ell2, beta, Estimation::Exact)?;
            Ok(rep.estimate <= rep.bound)
        })
        .collect::<Result<_>>()?;
    let passing = results.iter().filter(|&&b| b).count() as u64;
    let prop = Proportion::new(passing, n_q, CONFIDENCE);
    let required = 1.0 - beta.sqrt() * (j as f64).powf(0.25);
    Ok(ZoomSurvey { subspaces: n_q, holds: prop.ci_high >= required, passing: prop, required_fraction: required })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RetainReport {
    pub failure: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: f64,
    pub holds: bool,
    pub exact: bool,
}

/// Probability over `V` that `dim(W ∩ F₂^V) != |V| - codim W`.
pub fn retain_codim_experiment(j: usize, w: &F2Subspace, beta: f64, mode: Estimation) -> Result<RetainReport> {
    OuterConfig { j, beta, r: 0 }.validate()?;
    let n = 3 * j;
    if w.ambient_dim() != n {
        return Err(Error::domain("W must live in F₂^{3J}"));
    }
    let s = w.codim();
    let bound = 2f64.powi(s as i32 + 3) * beta * beta * j as f64;
    let fails = |m: u64| -> bool {
        let fv = coordinate_subspace(m, n);
        let meet = w.intersect(&fv).expect("same ambient");
        meet.dim() + s != fv.dim()
    };
    match mode {
        Estimation::Exact => {
            let failure: f64 = v_choices(j, beta)?.into_iter().filter(|&(m, _)| fails(m)).map(|c| c.1).sum();
            Ok(RetainReport { failure, ci_low: failure, ci_high: failure, bound, holds: failure <= bound + 1e-12, exact: true })
        }
        Estimation::Sampled { samples, seed } => {
            let bad = (0..samples)
                .into_par_iter()
                .filter(|&t| {
                    let mut rng = rng_from_seed(indexed_seed(seed, "retain", t));
                    fails(v_mask(&sample_v_choice(j, beta, &mut rng)))
                })
                .count() as u64;
            let p = Proportion::new(bad, samples, CONFIDENCE);
            Ok(RetainReport { failure: p.estimate, ci_low: p.ci_low, ci_high: p.ci_high, bound, holds: p.ci_low <= bound, exact: false })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_generation() {
        let (inst, sigma) = gen_3lin(60, 100, 0.0, 1).unwrap();
        assert_eq!(inst.satisfied_count(&sigma), 100);
        let (inst, sigma) = gen_3lin(60, 100, 0.1, 1).unwrap();
        assert_eq!(inst.satisfied_count(&sigma), 90);
        inst.validate().unwrap();
        assert_eq!(Gap3LinInstance::from_json(&inst.to_json()).unwrap(), inst);
    }

    #[test]
    fn smoothness_extremes() {
        let (inst, _) = gen_3lin(30, 20, 0.0, 2).unwrap();
        let mut rng = rng_from_seed(3);
        for beta in [0.0, 1.0] {
            let cfg = OuterConfig { j: 3, beta, r: 2 };
            for _ in 0..50 {
                let q = sample_question(&inst, &cfg, &mut rng).unwrap();
                assert!(q.advice_consistent());
                assert!(q.v_choice.iter().all(|c| c.is_some() == (beta == 1.0)));
            }
        }
    }

    #[test]
    fn game_extremes() {
        let (inst, sigma) = gen_3lin(40, 30, 0.0, 4).unwrap();
        let cfg = OuterConfig { j: 3, beta: 0.2, r: 1 };
        let p = play_game(&inst, &cfg, &Planted(sigma.clone()), &Planted(sigma.clone()), 200, 5).unwrap();
        assert_eq!(p.successes, 200);
        let p = play_game(&inst, &cfg, &Planted(sigma.clone()), &Complement(sigma.clone()), 200, 5).unwrap();
        assert_eq!(p.successes, 0);
        let p = play_game(&inst, &cfg, &GiveUp, &Planted(sigma), 20, 5).unwrap();
        assert_eq!(p.successes, 0);
    }

    #[test]
    fn covering_degenerate_cases() {
        let r = covering_sd_advice(2, 1, 0.0, Estimation::Exact).unwrap();
        assert!(r.estimate.abs() < 1e-12);
        let r = covering_sd_advice(2, 0, 0.3, Estimation::Exact).unwrap();
        assert!(r.estimate.abs() < 1e-12);
        let n = 6;
        let r = covering_sd_zoom(2, &F2Subspace::zero(n), &F2Subspace::full(n), 2, 0.0, Estimation::Exact).unwrap();
        assert!(r.estimate.abs() < 1e-12);
        let w = F2Subspace::from_rows(vec![0b100000, 0b010000, 0b001000, 0b000111, 0b000011], n);
        let rep = retain_codim_experiment(2, &w, 0.0, Estimation::Exact).unwrap();
        assert_eq!(rep.failure, 0.0);
        let rep = retain_codim_experiment(2, &F2Subspace::full(n), 0.7, Estimation::Exact).unwrap();
        assert_eq!(rep.failure, 0.0);
    }

    #[test]
    fn advice_cover_sampled_matches_exact() {
        let exact = covering_sd_advice(2, 1, 0.1, Estimation::Exact).unwrap();
        let mc = covering_sd_advice(2, 1, 0.1, Estimation::Sampled { samples: 50_000, seed: 9 }).unwrap();
        assert!(mc.ci_low <= exact.estimate && exact.estimate <= mc.ci_high);
        assert!(exact.holds);
    }
}
