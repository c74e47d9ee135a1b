//! Fourier analysis on the bilinear scheme `F₂^{n×m}`.
//!
//! A matrix `M` is indexed by its row-major bit pattern: the rows of `M`, each
//! an `m`-bit string, are concatenated with row 0 first and read as one binary
//! number, so entry `(i, j)` sits at bit `nm-1-(i·m+j)`. The entrywise inner
//! product `⟨S, M⟩` is then the parity of `s & m` on indices.

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::f2la::{self, mask, parity, rref, Equation, F2Matrix, F2Subspace};
use crate::scalar::Scalar;

/// A real-valued table on `F₂^{n×m}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearFn<T> {
    n: usize,
    m: usize,
    values: Vec<T>,
}

/// Fourier coefficients of a [`BilinearFn`], indexed like the function.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierView<T> {
    n: usize,
    m: usize,
    coeffs: Vec<T>,
}

fn check_bits(n: usize, m: usize) -> Result<usize> {
    let bits = n * m;
    let cap = Caps::get().table_bits as usize;
    if bits > cap || bits >= usize::BITS as usize {
        return Err(Error::resource("bilinear table", format!("2^{bits} entries"), format!("2^{cap}")));
    }
    Ok(bits)
}

/// Row `i` of the matrix with index `idx`.
#[inline]
pub fn row_of(idx: usize, n: usize, m: usize, i: usize) -> u64 {
    ((idx >> (m * (n - 1 - i))) as u64) & mask(m)
}

/// Column `j` of the matrix with index `idx`, as a vector of `F₂ⁿ`.
#[inline]
pub fn col_of(idx: usize, n: usize, m: usize, j: usize) -> u64 {
    let mut v = 0u64;
    for i in 0..n {
        v = (v << 1) | ((idx >> (n * m - 1 - (i * m + j))) & 1) as u64;
    }
    v
}

/// Index of the matrix with the given rows.
pub fn index_of_rows(rows: &[u64], m: usize) -> usize {
    rows.iter().fold(0usize, |acc, &r| (acc << m) | r as usize)
}

pub fn index_of(mat: &F2Matrix) -> usize {
    index_of_rows(mat.rows(), mat.n_cols())
}

pub fn matrix_of(idx: usize, n: usize, m: usize) -> F2Matrix {
    F2Matrix::new((0..n).map(|i| row_of(idx, n, m, i)).collect(), m).expect("rows fit")
}

pub fn rank_of_index(idx: usize, n: usize, m: usize) -> usize {
    rref((0..n).map(|i| row_of(idx, n, m, i)).collect(), m).len()
}

/// Column span of the matrix with index `idx`, inside `F₂ⁿ`.
pub fn column_space(idx: usize, n: usize, m: usize) -> F2Subspace {
    F2Subspace::from_rows((0..m).map(|j| col_of(idx, n, m, j)).collect(), n)
}

/// `(−1)^{⟨S,M⟩}`.
pub fn character_eval(s: &F2Matrix, mat: &F2Matrix) -> Result<i8> {
    if s.n_rows() != mat.n_rows() || s.n_cols() != mat.n_cols() {
        return Err(Error::domain("character and argument shapes differ"));
    }
    let dot = s
        .rows()
        .iter()
        .zip(mat.rows())
        .fold(0u32, |acc, (a, b)| acc + (a & b).count_ones());
    Ok(if dot % 2 == 0 { 1 } else { -1 })
}

/// Unnormalized Walsh–Hadamard transform in place.
pub fn fwht<T: Scalar>(x: &mut [T]) {
    let len = x.len();
    let mut h = 1;
    while h < len {
        for i in (0..len).step_by(2 * h) {
            for j in i..i + h {
                let a = x[j].clone();
                let b = x[j + h].clone();
                x[j] = a.clone() + b.clone();
                x[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

impl<T: Scalar> BilinearFn<T> {
    pub fn new(n: usize, m: usize, values: Vec<T>) -> Result<Self> {
        let bits = check_bits(n, m)?;
        if values.len() != 1 << bits {
            return Err(Error::domain(format!(
                "table for {n}x{m} matrices needs {} values, got {}",
                1usize << bits,
                values.len()
            )));
        }
        Ok(BilinearFn { n, m, values })
    }

    pub fn from_fn(n: usize, m: usize, f: impl FnMut(usize) -> T) -> Result<Self> {
        let bits = check_bits(n, m)?;
        Ok(BilinearFn { n, m, values: (0..1usize << bits).map(f).collect() })
    }

    pub fn constant(n: usize, m: usize, c: T) -> Result<Self> {
        Self::from_fn(n, m, |_| c.clone())
    }

    /// The character `χ_S` for `S` given by its index.
    pub fn character(n: usize, m: usize, s: usize) -> Result<Self> {
        Self::from_fn(n, m, |idx| if parity((s & idx) as u64) { -T::one() } else { T::one() })
    }

    /// A basis-invariant function `M ↦ g(im M)`.
    pub fn from_column_space(n: usize, m: usize, g: impl Fn(&F2Subspace) -> T) -> Result<Self> {
        Self::from_fn(n, m, |idx| g(&column_space(idx, n, m)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, idx: usize) -> &T {
        &self.values[idx]
    }

    pub fn is_boolean(&self) -> bool {
        self.values.iter().all(|v| v.is_zero() || v.is_one())
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.m != other.m {
            return Err(Error::domain("functions live on different matrix spaces"));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(&T) -> T) -> Self {
        BilinearFn { n: self.n, m: self.m, values: self.values.iter().map(f).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(&T, &T) -> T) -> Result<Self> {
        self.same_shape(other)?;
        Ok(BilinearFn {
            n: self.n,
            m: self.m,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.clone() - b.clone())
    }

    pub fn pow(&self, k: u32) -> Self {
        self.map(|v| num_traits::pow(v.clone(), k as usize))
    }

    pub fn mean(&self) -> T {
        let total = self.values.iter().fold(T::zero(), |acc, v| acc + v.clone());
        total / T::from_usize_exact(self.values.len())
    }

    /// `E_M[f(M) g(M)]`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.same_shape(other)?;
        let total = self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
        Ok(total / T::from_usize_exact(self.values.len()))
    }

    /// `‖f‖₂² = E_M[f(M)²]`.
    pub fn norm2_sq(&self) -> T {
        self.inner(self).expect("same shape")
    }

    /// `(E_M |f(M)|ᵗ)^{1/t}`, computed in floating point.
    pub fn t_norm(&self, t: f64) -> Result<f64> {
        if t < 1.0 {
            return Err(Error::domain("t-norm needs t >= 1"));
        }
        let s: f64 = self.values.iter().map(|v| v.approx().abs().powf(t)).sum();
        Ok((s / self.values.len() as f64).powf(1.0 / t))
    }

    pub fn to_f64(&self) -> BilinearFn<f64> {
        BilinearFn { n: self.n, m: self.m, values: self.values.iter().map(|v| v.approx()).collect() }
    }

    pub fn fourier_transform(&self) -> FourierView<T> {
        let mut coeffs = self.values.clone();
        fwht(&mut coeffs);
        let size = T::from_usize_exact(coeffs.len());
        for c in coeffs.iter_mut() {
            *c = c.clone() / size.clone();
        }
        FourierView { n: self.n, m: self.m, coeffs }
    }

    /// `f^{=d}`: the part of `f` supported on characters of rank `d`.
    pub fn level_projection(&self, d: usize) -> Result<Self> {
        if d > self.n.min(self.m) {
            return Err(Error::domain(format!("level {d} exceeds min(n, m)")));
        }
        let mut fv = self.fourier_transform();
        for (s, c) in fv.coeffs.iter_mut().enumerate() {
            if rank_of_index(s, self.n, self.m) != d {
                *c = T::zero();
            }
        }
        Ok(fv.inverse_transform())
    }

    /// All levels `f^{=0}, …, f^{=min(n,m)}` from a single transform.
    pub fn levels(&self) -> Vec<Self> {
        let fv = self.fourier_transform();
        let ranks: Vec<usize> = (0..fv.coeffs.len()).map(|s| rank_of_index(s, self.n, self.m)).collect();
        (0..=self.n.min(self.m))
            .map(|d| {
                let coeffs = fv
                    .coeffs
                    .iter()
                    .zip(&ranks)
                    .map(|(c, &r)| if r == d { c.clone() } else { T::zero() })
                    .collect();
                FourierView { n: self.n, m: self.m, coeffs }.inverse_transform()
            })
            .collect()
    }

    /// `𝒯f(M) = E_V f([M, V])` over the `2^{nc}` ways to append `c` columns.
    pub fn apply_t(&self, c: usize) -> Result<Self> {
        if c > self.m {
            return Err(Error::domain(format!("cannot drop {c} of {} columns", self.m)));
        }
        let (n, m) = (self.n, self.m);
        let mb = m - c;
        let ext = 1usize << (n * c);
        let norm = T::from_usize_exact(ext);
        Self::from_fn(n, mb, |idx| {
            let mut acc = T::zero();
            for v in 0..ext {
                let mut full = 0usize;
                for i in 0..n {
                    let lo = row_of(idx, n, mb, i) as usize;
                    let hi = (v >> (c * (n - 1 - i))) & ((1 << c) - 1);
                    full = (full << m) | (lo << c) | hi;
                }
                acc = acc + self.values[full].clone();
            }
            acc / norm.clone()
        })
    }

    /// `Φf(M) = E_{B,C} f(M + BC)` with `B` uniform in `F₂^{n×c}` and `C`
    /// uniform among rank-`c` matrices in `F₂^{c×m}`.
    ///
    /// `BC` is uniform over matrices whose rows lie in the row space `Y` of
    /// `C`, and `Y` is uniform in `Grass(m, c)`; the inner average is taken by
    /// halving over the `n·c` generators of that group.
    pub fn apply_phi(&self, c: usize) -> Result<Self> {
        if c > self.m {
            return Err(Error::domain(format!("rank {c} exceeds m = {}", self.m)));
        }
        let (n, m) = (self.n, self.m);
        let ys = f2la::enumerate_grassmann(m, c)?;
        let half = T::from_ratio(1, 2);
        let mut acc = vec![T::zero(); self.values.len()];
        for y in &ys {
            let mut h = self.values.clone();
            for i in 0..n {
                for &b in y.basis() {
                    let g = (b as usize) << (m * (n - 1 - i));
                    let next: Vec<T> = (0..h.len())
                        .map(|idx| (h[idx].clone() + h[idx ^ g].clone()) * half.clone())
                        .collect();
                    h = next;
                }
            }
            for (a, v) in acc.iter_mut().zip(h) {
                *a = a.clone() + v;
            }
        }
        let cnt = T::from_usize_exact(ys.len());
        Ok(BilinearFn { n, m, values: acc.into_iter().map(|v| v / cnt.clone()).collect() })
    }

    /// Restriction to a matrix zoom together with its squared 2-norm under the
    /// uniform measure on the zoom set.
    pub fn restrict(&self, z: &MatrixZoom) -> Result<Restriction<T>> {
        let Some(sol) = z.solve(self.n, self.m)? else {
            return Ok(Restriction::Empty);
        };
        let indices: Vec<usize> = sol.solutions().map(|x| x as usize).collect();
        let values: Vec<T> = indices.iter().map(|&i| self.values[i].clone()).collect();
        let total = values.iter().fold(T::zero(), |a, v| a + v.clone() * v.clone());
        let norm_sq = total / T::from_usize_exact(values.len());
        Ok(Restriction::Zoomed(Restricted { indices, values, norm_sq }))
    }

    /// Mean of `f²` over a zoom set, without materializing it.
    fn zoom_norm(&self, sol: &f2la::AffineSolution) -> T {
        let total = sol.solutions().fold(T::zero(), |a, x| {
            let v = &self.values[x as usize];
            a + v.clone() * v.clone()
        });
        total / T::from_usize_exact(1usize << sol.kernel.len())
    }

    /// Largest restricted squared norm over all nonempty zooms of size `d`,
    /// with a witness.
    ///
    /// Zoom-ins range over full-column-rank `U` (one canonical `U` per column
    /// space) with every `V`; zoom-outs over full-row-rank `X` with every `Y`.
    pub fn pseudorandomness(&self, d: usize) -> Result<PseudorandomReport<T>> {
        let (n, m) = (self.n, self.m);
        let mut total: u128 = 0;
        for d1 in 0..=d.min(m) {
            let d2 = d - d1;
            if d2 > n {
                continue;
            }
            let g1 = f2la::qbin_u64(m, d1).unwrap_or(u64::MAX) as u128;
            let g2 = f2la::qbin_u64(n, d2).unwrap_or(u64::MAX) as u128;
            total = total.saturating_add(g1 * g2 << (n * d1 + m * d2));
        }
        let cap = Caps::get().enumeration as u128;
        if total > cap {
            return Err(Error::resource("bilinear zoom enumeration", total, cap));
        }
        let mut best: Option<(T, MatrixZoom)> = None;
        for d1 in 0..=d.min(m) {
            let d2 = d - d1;
            if d2 > n {
                continue;
            }
            let us = f2la::enumerate_grassmann(m, d1)?;
            let xs = f2la::enumerate_grassmann(n, d2)?;
            let mut shapes = Vec::with_capacity(us.len() * xs.len());
            for u in &us {
                for x in &xs {
                    shapes.push((u, x));
                }
            }
            let local: Option<(T, MatrixZoom)> = shapes
                .par_iter()
                .map(|(u, x)| {
                    let umat = F2Matrix::new(u.basis().to_vec(), m).expect("fits").transpose();
                    let xmat = x.basis_matrix();
                    let mut best: Option<(T, MatrixZoom)> = None;
                    for vi in 0..1usize << (n * d1) {
                        let vmat = matrix_of(vi, n, d1);
                        for yi in 0..1usize << (d2 * m) {
                            let z = MatrixZoom {
                                u: umat.clone(),
                                v: vmat.clone(),
                                x: xmat.clone(),
                                y: matrix_of(yi, d2, m),
                            };
                            let Some(sol) = z.solve(n, m).expect("shapes agree") else {
                                continue;
                            };
                            let val = self.zoom_norm(&sol);
                            if best.as_ref().is_none_or(|(b, _)| val > *b) {
                                best = Some((val, z));
                            }
                        }
                    }
                    best
                })
                .reduce(|| None, pick_better);
            best = pick_better(best, local);
        }
        let (epsilon, witness) = best.ok_or_else(|| Error::domain(format!("no nonempty zoom of size {d}")))?;
        Ok(PseudorandomReport { d, epsilon, witness })
    }

    /// Whether `(d, ε)`-pseudo-randomness holds.
    pub fn is_pseudorandom(&self, d: usize, eps: &T) -> Result<(bool, PseudorandomReport<T>)> {
        let rep = self.pseudorandomness(d)?;
        Ok((rep.epsilon <= *eps, rep))
    }

    /// Whether `f(M) = f(MA)` for every invertible `A ∈ F₂^{m×m}`.
    pub fn is_basis_invariant(&self) -> bool {
        let (n, m) = (self.n, self.m);
        let gl: Vec<Vec<u64>> = (0..1usize << (m * m))
            .filter(|&a| rank_of_index(a, m, m) == m)
            .map(|a| (0..m).map(|i| row_of(a, m, m, i)).collect())
            .collect();
        (0..self.values.len()).all(|idx| {
            gl.iter().all(|a| {
                let rows: Vec<u64> = (0..n)
                    .map(|i| {
                        let r = row_of(idx, n, m, i);
                        (0..m)
                            .filter(|&j| r & f2la::coord_bit(m, j) != 0)
                            .fold(0, |acc, j| acc ^ a[j])
                    })
                    .collect();
                self.values[index_of_rows(&rows, m)] == self.values[idx]
            })
        })
    }
}

fn pick_better<T: PartialOrd>(a: Option<(T, MatrixZoom)>, b: Option<(T, MatrixZoom)>) -> Option<(T, MatrixZoom)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            // Keep the earlier witness on ties so results do not depend on scheduling.
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                Some(b)
            } else {
                Some(a)
            }
        }
    }
}

impl<T: Scalar> FourierView<T> {
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, s: usize) -> &T {
        &self.coeffs[s]
    }

    pub fn inverse_transform(&self) -> BilinearFn<T> {
        let mut values = self.coeffs.clone();
        fwht(&mut values);
        BilinearFn { n: self.n, m: self.m, values }
    }

    /// `Σ_S f̂(S)²`.
    pub fn energy(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |a, c| a + c.clone() * c.clone())
    }

    /// Energy carried by characters of rank `d`.
    pub fn level_energy(&self, d: usize) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(s, _)| rank_of_index(*s, self.n, self.m) == d)
            .fold(T::zero(), |a, (_, c)| a + c.clone() * c.clone())
    }
}

/// A zoom-in `MU = V` intersected with a zoom-out `XM = Y`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct MatrixZoom {
    /// `m × d₁`.
    pub u: F2Matrix,
    /// `n × d₁`.
    pub v: F2Matrix,
    /// `d₂ × n`.
    pub x: F2Matrix,
    /// `d₂ × m`.
    pub y: F2Matrix,
}

impl MatrixZoom {
    /// The unconstrained zoom.
    pub fn trivial(n: usize, m: usize) -> Self {
        MatrixZoom {
            u: F2Matrix::zeros(m, 0),
            v: F2Matrix::zeros(n, 0),
            x: F2Matrix::zeros(0, n),
            y: F2Matrix::zeros(0, m),
        }
    }

    /// `dim(U) + codim(X)`.
    pub fn size(&self) -> usize {
        self.u.n_cols() + self.x.n_rows()
    }

    /// The zoom set as an affine space of table indices.
    pub fn solve(&self, n: usize, m: usize) -> Result<Option<f2la::AffineSolution>> {
        let d1 = self.u.n_cols();
        let d2 = self.x.n_rows();
        if self.u.n_rows() != m
            || self.v.n_rows() != n
            || self.v.n_cols() != d1
            || self.x.n_cols() != n
            || self.y.n_rows() != d2
            || self.y.n_cols() != m
        {
            return Err(Error::domain("zoom matrices do not match the matrix space"));
        }
        let nm = n * m;
        let var = |i: usize, j: usize| 1u128 << (nm - 1 - (i * m + j));
        let mut eqs = Vec::with_capacity(n * d1 + d2 * m);
        for i in 0..n {
            for k in 0..d1 {
                let coeffs = (0..m).filter(|&j| self.u.get(j, k)).fold(0u128, |a, j| a | var(i, j));
                eqs.push(Equation { coeffs, rhs: self.v.get(i, k) });
            }
        }
        for a in 0..d2 {
            for j in 0..m {
                let coeffs = (0..n).filter(|&i| self.x.get(a, i)).fold(0u128, |acc, i| acc | var(i, j));
                eqs.push(Equation { coeffs, rhs: self.y.get(a, j) });
            }
        }
        f2la::solve_affine(nm, &eqs)
    }
}

/// A function restricted to a zoom set.
#[derive(Clone, Debug, PartialEq)]
pub struct Restricted<T> {
    pub indices: Vec<usize>,
    pub values: Vec<T>,
    pub norm_sq: T,
}

/// Result of [`BilinearFn::restrict`]; an unsolvable zoom is reported as
/// `Empty`, never as a zero norm.
#[derive(Clone, Debug, PartialEq)]
pub enum Restriction<T> {
    Empty,
    Zoomed(Restricted<T>),
}

impl<T> Restriction<T> {
    pub fn norm_sq(&self) -> Option<&T> {
        match self {
            Restriction::Empty => None,
            Restriction::Zoomed(r) => Some(&r.norm_sq),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudorandomReport<T> {
    pub d: usize,
    pub epsilon: T,
    pub witness: MatrixZoom,
}

/// `Φχ_S = λ_S χ_S`; `λ_S` computed as the exact average of `χ_S(BC)` over
/// every `B ∈ F₂^{n×c}` and every rank-`c` matrix `C ∈ F₂^{c×m}`.
pub fn phi_eigenvalue(n: usize, m: usize, s: usize, c: usize) -> BigRational {
    let cs: Vec<Vec<u64>> = (0..1usize << (c * m))
        .filter(|&ci| rank_of_index(ci, c, m) == c)
        .map(|ci| (0..c).map(|b| row_of(ci, c, m, b)).collect())
        .collect();
    let mut sum: i64 = 0;
    for crow in &cs {
        for bi in 0..1usize << (n * c) {
            let rows: Vec<u64> = (0..n)
                .map(|i| {
                    let brow = row_of(bi, n, c, i);
                    (0..c)
                        .filter(|&b| brow & f2la::coord_bit(c, b) != 0)
                        .fold(0, |acc, b| acc ^ crow[b])
                })
                .collect();
            let bc = index_of_rows(&rows, m);
            sum += if parity((s & bc) as u64) { -1 } else { 1 };
        }
    }
    BigRational::new(sum.into(), ((cs.len() as i64) << (n * c)).into())
}

/// `2^{−d(c−1)} + 3·2^{d−n}`, the eigenvalue and norm-decay bound.
pub fn decay_bound<T: Scalar>(d: usize, c: usize, n: usize) -> T {
    let first = T::inv_pow2((d * c.saturating_sub(1)) as u32);
    let second = if d >= n {
        T::from_usize_exact(3usize << (d - n))
    } else {
        T::from_usize_exact(3) * T::inv_pow2((n - d) as u32)
    };
    first + second
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ValuesRepr {
    Bits(String),
    Floats(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
struct FnRepr {
    n: usize,
    m: usize,
    values: ValuesRepr,
}

impl BilinearFn<f64> {
    /// JSON form: boolean tables as a base64 bitstream (entry `idx` is bit
    /// `idx % 8` of byte `idx / 8`), everything else as a float array.
    pub fn to_json(&self) -> serde_json::Value {
        use base64::Engine as _;
        let values = if self.is_boolean() {
            let mut bytes = vec![0u8; self.values.len().div_ceil(8)];
            for (i, v) in self.values.iter().enumerate() {
                if *v == 1.0 {
                    bytes[i / 8] |= 1 << (i % 8);
                }
            }
            ValuesRepr::Bits(base64::engine::general_purpose::STANDARD.encode(bytes))
        } else {
            ValuesRepr::Floats(self.values.clone())
        };
        serde_json::to_value(FnRepr { n: self.n, m: self.m, values }).expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        use base64::Engine as _;
        let r: FnRepr = serde_json::from_value(v.clone())?;
        let len = 1usize << check_bits(r.n, r.m)?;
        let values = match r.values {
            ValuesRepr::Bits(s) => {
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(s)
                    .map_err(|e| Error::Parse(format!("bad base64 table: {e}")))?;
                if bytes.len() != len.div_ceil(8) {
                    return Err(Error::Parse("bit table has the wrong length".into()));
                }
                (0..len).map(|i| ((bytes[i / 8] >> (i % 8)) & 1) as f64).collect()
            }
            ValuesRepr::Floats(v) => v,
        };
        BilinearFn::new(r.n, r.m, values)
    }
}
