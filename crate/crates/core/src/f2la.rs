//! Bit-packed linear algebra over F₂ and exact Grassmann combinatorics.
//!
//! Vectors of `F₂ⁿ` (n ≤ 64) are stored in a `u64` with coordinate `j` at bit
//! `n-1-j`. With that layout numeric order on rows is lexicographic order on
//! their binary strings, which is what the canonical enumeration order uses.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, PrimInt, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};

pub const MAX_DIM: usize = 64;

/// Mask of the low `n` bits.
#[inline]
pub fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// The bit holding coordinate `j` of a vector in `F₂ⁿ`.
#[inline]
pub fn coord_bit(n: usize, j: usize) -> u64 {
    1u64 << (n - 1 - j)
}

#[inline]
pub fn parity(x: u64) -> bool {
    x.count_ones() & 1 == 1
}

pub fn vec_to_string(v: u64, n: usize) -> String {
    (0..n)
        .map(|j| if v & coord_bit(n, j) != 0 { '1' } else { '0' })
        .collect()
}

pub fn vec_from_str(s: &str) -> Result<u64> {
    if s.len() > MAX_DIM {
        return Err(Error::Parse(format!("bit string longer than {MAX_DIM}: {s}")));
    }
    let mut v = 0u64;
    for c in s.chars() {
        v <<= 1;
        match c {
            '0' => {}
            '1' => v |= 1,
            _ => return Err(Error::Parse(format!("not a bit string: {s:?}"))),
        }
    }
    Ok(v)
}

/// Reduced row-echelon form of `rows` seen as `width`-bit vectors, highest bit
/// being the first column. Zero rows are dropped; the result is sorted by
/// pivot (so it is strictly decreasing as integers).
pub fn rref<T: PrimInt>(mut rows: Vec<T>, width: usize) -> Vec<T> {
    let mut r = 0;
    for col in 0..width {
        let bit = T::one() << (width - 1 - col);
        let Some(p) = (r..rows.len()).find(|&i| rows[i] & bit != T::zero()) else {
            continue;
        };
        rows.swap(r, p);
        let piv = rows[r];
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && *row & bit != T::zero() {
                *row = *row ^ piv;
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    rows
}

/// Position (column index) of the leading one of a nonzero `width`-bit row.
#[inline]
fn lead_col(row: u64, width: usize) -> usize {
    width - 1 - (63 - row.leading_zeros() as usize)
}

// ---------------------------------------------------------------------------
// Matrices
// ---------------------------------------------------------------------------

/// A dense matrix over F₂ with at most 64 columns.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct F2Matrix {
    n_cols: usize,
    rows: Vec<u64>,
}

impl F2Matrix {
    pub fn new(rows: Vec<u64>, n_cols: usize) -> Result<Self> {
        if n_cols > MAX_DIM {
            return Err(Error::domain(format!("at most {MAX_DIM} columns supported, got {n_cols}")));
        }
        if rows.iter().any(|&r| r & !mask(n_cols) != 0) {
            return Err(Error::domain("row has bits beyond n_cols"));
        }
        Ok(F2Matrix { n_cols, rows })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        F2Matrix { n_cols, rows: vec![0; n_rows] }
    }

    pub fn identity(n: usize) -> Self {
        F2Matrix {
            n_cols: n,
            rows: (0..n).map(|i| coord_bit(n, i)).collect(),
        }
    }

    pub fn from_strings<S: AsRef<str>>(rows: &[S], n_cols: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for r in rows {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::Parse(format!("row {r:?} does not have {n_cols} bits")));
            }
            out.push(vec_from_str(r)?);
        }
        F2Matrix::new(out, n_cols)
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.rows.iter().map(|&r| vec_to_string(r, self.n_cols)).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i] & coord_bit(self.n_cols, j) != 0
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        let b = coord_bit(self.n_cols, j);
        if v {
            self.rows[i] |= b;
        } else {
            self.rows[i] &= !b;
        }
    }

    pub fn rank(&self) -> usize {
        rref(self.rows.clone(), self.n_cols).len()
    }

    pub fn transpose(&self) -> F2Matrix {
        let mut t = F2Matrix::zeros(self.n_cols, self.n_rows());
        for i in 0..self.n_rows() {
            for j in 0..self.n_cols {
                if self.get(i, j) {
                    t.set(j, i, true);
                }
            }
        }
        t
    }

    /// Matrix product over F₂.
    pub fn mul(&self, other: &F2Matrix) -> Result<F2Matrix> {
        if self.n_cols != other.n_rows() {
            return Err(Error::domain("matrix shapes do not compose"));
        }
        let rows = self
            .rows
            .iter()
            .map(|&r| {
                (0..self.n_cols)
                    .filter(|&j| r & coord_bit(self.n_cols, j) != 0)
                    .fold(0u64, |acc, j| acc ^ other.rows[j])
            })
            .collect();
        Ok(F2Matrix { n_cols: other.n_cols, rows })
    }
}

impl fmt::Debug for F2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_strings()).finish()
    }
}

impl Serialize for F2Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

// ---------------------------------------------------------------------------
// Subspaces
// ---------------------------------------------------------------------------

/// A subspace of `F₂ⁿ` held by its reduced row-echelon basis.
///
/// The representation is unique, so derived equality, hashing and ordering
/// are those of the subspace itself. Ordering between subspaces of equal
/// ambient space and dimension is lexicographic on the concatenated basis rows.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct F2Subspace {
    ambient_dim: usize,
    basis: Vec<u64>,
}

impl F2Subspace {
    /// Canonical form of the row span of `rows` inside `F₂^ambient_dim`.
    pub fn from_rows(rows: Vec<u64>, ambient_dim: usize) -> Self {
        debug_assert!(ambient_dim <= MAX_DIM);
        debug_assert!(rows.iter().all(|&r| r & !mask(ambient_dim) == 0));
        F2Subspace { ambient_dim, basis: rref(rows, ambient_dim) }
    }

    pub fn canonicalize(m: &F2Matrix) -> Self {
        F2Subspace::from_rows(m.rows.clone(), m.n_cols)
    }

    pub fn zero(ambient_dim: usize) -> Self {
        F2Subspace { ambient_dim, basis: Vec::new() }
    }

    pub fn full(ambient_dim: usize) -> Self {
        F2Subspace { ambient_dim, basis: F2Matrix::identity(ambient_dim).rows }
    }

    pub fn span_of(v: u64, ambient_dim: usize) -> Self {
        F2Subspace::from_rows(vec![v], ambient_dim)
    }

    pub fn from_strings<S: AsRef<str>>(rows: &[S], ambient_dim: usize) -> Result<Self> {
        Ok(F2Subspace::canonicalize(&F2Matrix::from_strings(rows, ambient_dim)?))
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn codim(&self) -> usize {
        self.ambient_dim - self.basis.len()
    }

    pub fn basis(&self) -> &[u64] {
        &self.basis
    }

    pub fn basis_matrix(&self) -> F2Matrix {
        F2Matrix { n_cols: self.ambient_dim, rows: self.basis.clone() }
    }

    /// Pivot columns, increasing.
    pub fn pivots(&self) -> Vec<usize> {
        self.basis.iter().map(|&r| lead_col(r, self.ambient_dim)).collect()
    }

    /// Bitmask with the pivot bits of the basis set.
    pub fn pivot_mask(&self) -> u64 {
        self.basis
            .iter()
            .fold(0, |acc, &r| acc | (1u64 << (63 - r.leading_zeros())))
    }

    /// Residue of `v` after clearing every pivot bit with the basis.
    #[inline]
    pub fn reduce(&self, mut v: u64) -> u64 {
        for &r in &self.basis {
            let lead = 1u64 << (63 - r.leading_zeros());
            if v & lead != 0 {
                v ^= r;
            }
        }
        v
    }

    #[inline]
    pub fn contains_vector(&self, v: u64) -> bool {
        self.reduce(v) == 0
    }

    /// Coordinates of `v` in the canonical basis: bit `i` (from the low end)
    /// is the coefficient of basis row `i`. Only meaningful for members.
    pub fn coords(&self, v: u64) -> u64 {
        self.basis.iter().enumerate().fold(0, |acc, (i, &r)| {
            let lead = 1u64 << (63 - r.leading_zeros());
            if v & lead != 0 {
                acc | (1 << i)
            } else {
                acc
            }
        })
    }

    /// The member with canonical coordinates `c`.
    pub fn combine(&self, c: u64) -> u64 {
        self.basis
            .iter()
            .enumerate()
            .filter(|(i, _)| c >> i & 1 == 1)
            .fold(0, |acc, (_, &r)| acc ^ r)
    }

    /// All `2^dim` members, in coordinate order.
    pub fn vectors(&self) -> impl Iterator<Item = u64> + '_ {
        (0..1u64 << self.dim()).map(move |c| self.combine(c))
    }

    fn check_ambient(&self, other: &F2Subspace) -> Result<()> {
        if self.ambient_dim != other.ambient_dim {
            return Err(Error::domain(format!(
                "ambient dimension mismatch: {} vs {}",
                self.ambient_dim, other.ambient_dim
            )));
        }
        Ok(())
    }

    /// Whether `other ⊆ self`.
    pub fn contains(&self, other: &F2Subspace) -> Result<bool> {
        self.check_ambient(other)?;
        Ok(self.contains_unchecked(other))
    }

    pub fn contains_unchecked(&self, other: &F2Subspace) -> bool {
        other.dim() <= self.dim() && other.basis.iter().all(|&v| self.contains_vector(v))
    }

    pub fn sum(&self, other: &F2Subspace) -> Result<F2Subspace> {
        self.check_ambient(other)?;
        Ok(self.sum_unchecked(other))
    }

    pub fn sum_unchecked(&self, other: &F2Subspace) -> F2Subspace {
        let mut rows = self.basis.clone();
        rows.extend_from_slice(&other.basis);
        F2Subspace::from_rows(rows, self.ambient_dim)
    }

    /// Intersection via the Zassenhaus construction on doubled rows.
    pub fn intersect(&self, other: &F2Subspace) -> Result<F2Subspace> {
        self.check_ambient(other)?;
        let n = self.ambient_dim;
        let mut rows: Vec<u128> = Vec::with_capacity(self.dim() + other.dim());
        for &a in &self.basis {
            rows.push(((a as u128) << n) | a as u128);
        }
        for &b in &other.basis {
            rows.push((b as u128) << n);
        }
        let red = rref(rows, 2 * n);
        let low = if n == 0 { 0 } else { (1u128 << n) - 1 };
        let inter: Vec<u64> = red
            .into_iter()
            .filter(|r| r >> n == 0)
            .map(|r| (r & low) as u64)
            .collect();
        Ok(F2Subspace::from_rows(inter, n))
    }

    pub fn trivial_intersection(&self, other: &F2Subspace) -> Result<bool> {
        self.check_ambient(other)?;
        Ok(self.dim() + other.dim() == self.sum_unchecked(other).dim())
    }

    /// Orthogonal complement under the standard dot product.
    pub fn annihilator(&self) -> F2Subspace {
        let n = self.ambient_dim;
        let piv = self.pivot_mask();
        let mut rows = Vec::with_capacity(self.codim());
        for j in 0..n {
            let b = coord_bit(n, j);
            if piv & b != 0 {
                continue;
            }
            let mut v = b;
            for &r in &self.basis {
                if r & b != 0 {
                    v |= 1u64 << (63 - r.leading_zeros());
                }
            }
            rows.push(v);
        }
        F2Subspace::from_rows(rows, n)
    }

    /// Vectors of `self` extending a basis of `inner` to one of `self`,
    /// chosen greedily from the canonical basis of `self`.
    pub fn complement_basis(&self, inner: &F2Subspace) -> Vec<u64> {
        let mut acc = inner.clone();
        let mut out = Vec::new();
        for &r in &self.basis {
            if !acc.contains_vector(r) {
                out.push(r);
                acc = F2Subspace::from_rows(
                    acc.basis.iter().copied().chain(std::iter::once(r)).collect(),
                    self.ambient_dim,
                );
            }
        }
        out
    }

    /// Image under the coordinate map sending the canonical basis vector `e_j`
    /// of `F₂^dim` to `images[j]`.
    pub fn map_coords(&self, images: &[u64], target_dim: usize) -> F2Subspace {
        let d = self.ambient_dim;
        let rows = self
            .basis
            .iter()
            .map(|&r| {
                (0..d)
                    .filter(|&j| r & coord_bit(d, j) != 0)
                    .fold(0u64, |acc, j| acc ^ images[j])
            })
            .collect();
        F2Subspace::from_rows(rows, target_dim)
    }
}

impl fmt::Debug for F2Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F2Subspace(n={}, ", self.ambient_dim)?;
        f.debug_list()
            .entries(self.basis.iter().map(|&r| vec_to_string(r, self.ambient_dim)))
            .finish()?;
        write!(f, ")")
    }
}

#[derive(Serialize, Deserialize)]
struct SubspaceRepr {
    ambient_dim: usize,
    basis: Vec<String>,
}

impl Serialize for F2Subspace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SubspaceRepr {
            ambient_dim: self.ambient_dim,
            basis: self.basis_matrix().to_strings(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for F2Subspace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SubspaceRepr::deserialize(d)?;
        F2Subspace::from_strings(&r.basis, r.ambient_dim).map_err(serde::de::Error::custom)
    }
}

/// A zoom-in `q` together with a zoom-out `w ⊇ q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ZoomPair {
    pub q: F2Subspace,
    pub w: F2Subspace,
}

impl ZoomPair {
    pub fn new(q: F2Subspace, w: F2Subspace) -> Result<Self> {
        if !w.contains(&q)? {
            return Err(Error::domain("zoom-in is not contained in zoom-out"));
        }
        Ok(ZoomPair { q, w })
    }

    pub fn size(&self) -> usize {
        self.q.dim() + self.w.codim()
    }

    /// Whether `q ⊆ l ⊆ w`.
    pub fn admits(&self, l: &F2Subspace) -> bool {
        l.contains_unchecked(&self.q) && self.w.contains_unchecked(l)
    }
}

// ---------------------------------------------------------------------------
// Counting and enumeration
// ---------------------------------------------------------------------------

/// Number of `l`-dimensional subspaces of `F₂ⁿ`.
pub fn gaussian_binomial(n: usize, l: usize) -> Result<BigUint> {
    if l > n {
        return Err(Error::domain(format!("gaussian_binomial: l={l} > n={n}")));
    }
    let two = BigUint::from(2u32);
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..l {
        num *= two.pow(n as u32) - two.pow(i as u32);
        den *= two.pow(l as u32) - two.pow(i as u32);
    }
    Ok(num / den)
}

/// `gaussian_binomial` as a `u64`, or `None` when it does not fit.
pub fn qbin_u64(n: usize, l: usize) -> Option<u64> {
    gaussian_binomial(n, l).ok().and_then(|b| b.to_u64())
}

fn check_cap(what: &'static str, needed: &BigUint) -> Result<()> {
    let cap = Caps::get().enumeration;
    if *needed > BigUint::from(cap) {
        return Err(Error::resource(what, needed, cap));
    }
    Ok(())
}

/// All RREF bases of `l`-dimensional subspaces of `F₂ⁿ`, unsorted.
fn rref_bases(n: usize, l: usize, out: &mut Vec<F2Subspace>) {
    // Choose the pivot set, then fill the free entries of each row.
    fn pick(n: usize, l: usize, start: usize, piv: &mut Vec<usize>, out: &mut Vec<F2Subspace>) {
        if piv.len() == l {
            let piv_mask: u64 = piv.iter().fold(0, |a, &p| a | coord_bit(n, p));
            let free: Vec<Vec<u64>> = piv
                .iter()
                .map(|&p| {
                    (p + 1..n)
                        .map(|j| coord_bit(n, j))
                        .filter(|b| b & piv_mask == 0)
                        .collect()
                })
                .collect();
            let total_free: usize = free.iter().map(Vec::len).sum();
            for assign in 0..1u64 << total_free {
                let mut shift = 0;
                let basis = piv
                    .iter()
                    .zip(&free)
                    .map(|(&p, fr)| {
                        let mut row = coord_bit(n, p);
                        for (t, &b) in fr.iter().enumerate() {
                            if assign >> (shift + t) & 1 == 1 {
                                row |= b;
                            }
                        }
                        shift += fr.len();
                        row
                    })
                    .collect();
                out.push(F2Subspace { ambient_dim: n, basis });
            }
            return;
        }
        for p in start..n {
            if n - p < l - piv.len() {
                break;
            }
            piv.push(p);
            pick(n, l, p + 1, piv, out);
            piv.pop();
        }
    }
    pick(n, l, 0, &mut Vec::with_capacity(l), out);
}

/// Every `l`-dimensional subspace of `F₂ⁿ`, in lexicographic RREF order.
pub fn enumerate_grassmann(n: usize, l: usize) -> Result<Vec<F2Subspace>> {
    let count = gaussian_binomial(n, l)?;
    if n > MAX_DIM {
        return Err(Error::domain(format!("ambient dimension {n} exceeds {MAX_DIM}")));
    }
    check_cap("Grassmann enumeration", &count)?;
    let mut out = Vec::with_capacity(count.to_usize().unwrap_or(0));
    rref_bases(n, l, &mut out);
    out.sort_unstable();
    Ok(out)
}

/// Every `L` with `q ⊆ L ⊆ w` and `dim L = l`, in lexicographic RREF order.
pub fn enumerate_zoom(z: &ZoomPair, l: usize) -> Result<Vec<F2Subspace>> {
    enumerate_between(&z.q, &z.w, l)
}

pub fn enumerate_between(q: &F2Subspace, w: &F2Subspace, l: usize) -> Result<Vec<F2Subspace>> {
    if !w.contains(q)? {
        return Err(Error::domain("zoom-in is not contained in zoom-out"));
    }
    if l < q.dim() || l > w.dim() {
        return Err(Error::domain(format!(
            "need dim(q)={} <= l={l} <= dim(w)={}",
            q.dim(),
            w.dim()
        )));
    }
    let comp = w.complement_basis(q);
    let t = comp.len();
    check_cap("zoom enumeration", &gaussian_binomial(t, l - q.dim())?)?;
    let mut quot = Vec::new();
    rref_bases(t, l - q.dim(), &mut quot);
    let n = q.ambient_dim;
    let mut out: Vec<F2Subspace> = quot
        .iter()
        .map(|s| {
            let lifted = s.map_coords(&comp, n);
            let mut rows = q.basis.clone();
            rows.extend_from_slice(&lifted.basis);
            F2Subspace::from_rows(rows, n)
        })
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// All superspaces of `q` of dimension `l` in `F₂ⁿ`.
pub fn enumerate_superspaces(q: &F2Subspace, l: usize) -> Result<Vec<F2Subspace>> {
    enumerate_between(q, &F2Subspace::full(q.ambient_dim), l)
}

/// All `l`-dimensional subspaces of `w`.
pub fn enumerate_subspaces_of(w: &F2Subspace, l: usize) -> Result<Vec<F2Subspace>> {
    enumerate_between(&F2Subspace::zero(w.ambient_dim), w, l)
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Uniform `L` with `q ⊆ L ⊆ w` and `dim L = l`.
///
/// Random members of `w` are drawn until they extend `q` to dimension `l`;
/// every ordered completion is equally likely, hence so is every `L`.
pub fn sample_between<R: rand::Rng + ?Sized>(
    q: &F2Subspace,
    w: &F2Subspace,
    l: usize,
    rng: &mut R,
) -> Result<F2Subspace> {
    if !w.contains(q)? || l < q.dim() || l > w.dim() {
        return Err(Error::domain("sample_between: need q ⊆ w and dim(q) <= l <= dim(w)"));
    }
    let mut cur = q.clone();
    let wm = mask(w.dim());
    while cur.dim() < l {
        let v = w.combine(rng.gen::<u64>() & wm);
        if !cur.contains_vector(v) {
            let mut rows = cur.basis;
            rows.push(v);
            cur = F2Subspace::from_rows(rows, q.ambient_dim);
        }
    }
    Ok(cur)
}

pub fn sample_subspace<R: rand::Rng + ?Sized>(n: usize, l: usize, rng: &mut R) -> Result<F2Subspace> {
    if l > n {
        return Err(Error::domain(format!("sample_subspace: l={l} > n={n}")));
    }
    sample_between(&F2Subspace::zero(n), &F2Subspace::full(n), l, rng)
}

pub fn sample_superspace<R: rand::Rng + ?Sized>(
    r: &F2Subspace,
    l: usize,
    rng: &mut R,
) -> Result<F2Subspace> {
    sample_between(r, &F2Subspace::full(r.ambient_dim), l, rng)
}

pub fn random_vector<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> u64 {
    rng.gen::<u64>() & mask(n)
}

// ---------------------------------------------------------------------------
// Affine systems
// ---------------------------------------------------------------------------

/// Solution set `{particular + span(kernel)}` of an F₂ linear system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineSolution {
    pub n_vars: usize,
    pub particular: u128,
    pub kernel: Vec<u128>,
}

impl AffineSolution {
    pub fn count_log2(&self) -> usize {
        self.kernel.len()
    }

    /// Every solution, as bitmasks with variable `i` at bit `i`.
    pub fn solutions(&self) -> impl Iterator<Item = u128> + '_ {
        (0..1u64 << self.kernel.len()).map(move |c| {
            self.kernel
                .iter()
                .enumerate()
                .filter(|(i, _)| c >> i & 1 == 1)
                .fold(self.particular, |acc, (_, &k)| acc ^ k)
        })
    }
}

/// A single equation `Σ_{i ∈ coeffs} x_i = rhs`, variable `i` at bit `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Equation {
    pub coeffs: u128,
    pub rhs: bool,
}

/// Solves a system in at most 127 unknowns; `None` when inconsistent.
pub fn solve_affine(n_vars: usize, eqs: &[Equation]) -> Result<Option<AffineSolution>> {
    if n_vars > 127 {
        return Err(Error::domain(format!("affine solver supports at most 127 unknowns, got {n_vars}")));
    }
    // Column order: variables n_vars-1 .. 0 then the right-hand side as the
    // lowest column, so a pivot in the rhs column means inconsistency.
    let width = n_vars + 1;
    let rows: Vec<u128> = eqs
        .iter()
        .map(|e| (e.coeffs << 1) | e.rhs as u128)
        .collect();
    let red = rref(rows, width);
    let mut pivot_vars = Vec::with_capacity(red.len());
    for &r in &red {
        let top = 127 - r.leading_zeros() as usize;
        if top == 0 {
            return Ok(None);
        }
        pivot_vars.push(top - 1);
    }
    let mut particular = 0u128;
    for (&r, &p) in red.iter().zip(&pivot_vars) {
        if r & 1 == 1 {
            particular |= 1u128 << p;
        }
    }
    let piv_mask: u128 = pivot_vars.iter().fold(0, |a, &p| a | 1u128 << p);
    let mut kernel = Vec::new();
    for f in (0..n_vars).rev() {
        if piv_mask >> f & 1 == 1 {
            continue;
        }
        let mut v = 1u128 << f;
        for (&r, &p) in red.iter().zip(&pivot_vars) {
            if (r >> 1) >> f & 1 == 1 {
                v |= 1u128 << p;
            }
        }
        kernel.push(v);
    }
    Ok(Some(AffineSolution { n_vars, particular, kernel }))
}

// ---------------------------------------------------------------------------
// Linear functionals
// ---------------------------------------------------------------------------

/// A linear map `domain → F₂`.
///
/// Stored as the unique global coefficient vector supported on the pivot
/// columns of the domain's canonical basis; the pivot bit of basis row `i`
/// holds the value on that row. Two functionals are therefore equal exactly
/// when they have the same domain and agree on it.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearFunctional {
    domain: F2Subspace,
    coeff: u64,
}

impl LinearFunctional {
    /// The restriction of `x ↦ ⟨g, x⟩` to `domain`.
    pub fn from_global(domain: F2Subspace, g: u64) -> Self {
        let coeff = domain.basis.iter().fold(0u64, |acc, &r| {
            if parity(g & r) {
                acc | 1u64 << (63 - r.leading_zeros())
            } else {
                acc
            }
        });
        LinearFunctional { domain, coeff }
    }

    /// Functional taking value bit `i` of `values` on basis row `i`.
    pub fn from_basis_values(domain: F2Subspace, values: u64) -> Self {
        let coeff = domain.combine_pivots(values);
        LinearFunctional { domain, coeff }
    }

    /// The functional on `span(pairs.0)` prescribed by `pairs`, or `None` when
    /// the prescriptions are inconsistent.
    pub fn from_pairs(ambient_dim: usize, pairs: &[(u64, bool)]) -> Option<Self> {
        let rows: Vec<u128> = pairs
            .iter()
            .map(|&(v, b)| ((v as u128) << 1) | b as u128)
            .collect();
        let red = rref(rows, ambient_dim + 1);
        if red.iter().any(|&r| r == 1) {
            return None;
        }
        let basis: Vec<u64> = red.iter().map(|&r| (r >> 1) as u64).collect();
        let coeff = basis.iter().zip(&red).fold(0u64, |acc, (&b, &r)| {
            if r & 1 == 1 {
                acc | 1u64 << (63 - b.leading_zeros())
            } else {
                acc
            }
        });
        Some(LinearFunctional { domain: F2Subspace { ambient_dim, basis }, coeff })
    }

    /// Every functional on `domain`, in coefficient order.
    pub fn all_on(domain: &F2Subspace) -> impl Iterator<Item = LinearFunctional> + '_ {
        (0..1u64 << domain.dim()).map(move |v| LinearFunctional::from_basis_values(domain.clone(), v))
    }

    pub fn zero(domain: F2Subspace) -> Self {
        LinearFunctional { domain, coeff: 0 }
    }

    pub fn domain(&self) -> &F2Subspace {
        &self.domain
    }

    /// The canonical global coefficient vector.
    pub fn coeff(&self) -> u64 {
        self.coeff
    }

    /// Values on the canonical basis rows, row `i` at bit `i`.
    pub fn basis_values(&self) -> u64 {
        self.domain.coords(self.coeff)
    }

    #[inline]
    pub fn eval(&self, x: u64) -> bool {
        parity(self.coeff & x)
    }

    /// Restriction to a subspace of the domain.
    pub fn restrict(&self, sub: &F2Subspace) -> Result<LinearFunctional> {
        if !self.domain.contains(sub)? {
            return Err(Error::domain("restriction target is not inside the domain"));
        }
        Ok(LinearFunctional::from_global(sub.clone(), self.coeff))
    }

    /// Whether `self|_sub == other` where `other.domain() == sub`.
    pub fn restricts_to(&self, other: &LinearFunctional) -> bool {
        other.domain.basis.iter().all(|&r| self.eval(r) == other.eval(r))
    }

    /// Whether the two functionals agree on the intersection of their domains
    /// given that `other`'s domain is inside `self`'s.
    pub fn agrees_on(&self, other: &LinearFunctional, on: &F2Subspace) -> bool {
        on.basis.iter().all(|&r| self.eval(r) == other.eval(r))
    }

    /// All extensions of `self` to a superspace `w` of its domain.
    pub fn extensions(&self, w: &F2Subspace) -> Result<Vec<LinearFunctional>> {
        if !w.contains(&self.domain)? {
            return Err(Error::domain("extension target does not contain the domain"));
        }
        let comp = w.complement_basis(&self.domain);
        let base: Vec<(u64, bool)> = self.domain.basis.iter().map(|&r| (r, self.eval(r))).collect();
        Ok((0..1u64 << comp.len())
            .map(|a| {
                let mut pairs = base.clone();
                pairs.extend(comp.iter().enumerate().map(|(j, &c)| (c, a >> j & 1 == 1)));
                LinearFunctional::from_pairs(w.ambient_dim, &pairs).expect("independent prescriptions")
            })
            .collect())
    }
}

impl F2Subspace {
    /// Sum of pivot bits selected by `values` (bit `i` selects row `i`).
    fn combine_pivots(&self, values: u64) -> u64 {
        self.basis.iter().enumerate().fold(0u64, |acc, (i, &r)| {
            if values >> i & 1 == 1 {
                acc | 1u64 << (63 - r.leading_zeros())
            } else {
                acc
            }
        })
    }
}

impl fmt::Debug for LinearFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "LinearFunctional({:?}, coeff={})",
            self.domain,
            vec_to_string(self.coeff, self.domain.ambient_dim)
        )
    }
}
