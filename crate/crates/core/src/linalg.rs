//! Dense complex matrices, Haar-random column-orthonormal matrices, and the
//! permanent and determinant kernels.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, too_large, Error, Result};
use crate::outcomes::Outcome;
use crate::rng::RngStream;

/// Largest matrix accepted by [`permanent_ryser`].
pub const MAX_RYSER_DIM: usize = 32;
/// Largest matrix accepted by the `n!`-term [`permanent_naive`] oracle.
pub const MAX_NAIVE_DIM: usize = 9;
/// Tolerance used when validating column orthonormality.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

// Gray-code ranges longer than this are split into fixed chunks so the
// summation order never depends on the thread count.
const RYSER_CHUNK_BITS: usize = 16;

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            ));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid(format!("non-finite entry at row-major index {pos}"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Real-valued matrix from row-major entries.
    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::new(rows, cols, values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return invalid("ragged rows");
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn scale_row(&mut self, i: usize, c: Complex64) {
        for z in self.row_mut(i) {
            *z *= c;
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * c).collect() }
    }

    /// Matrix made of the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (k, &j) in cols.iter().enumerate() {
                out[(i, k)] = self[(i, j)];
            }
        }
        out
    }

    /// Entrywise squared moduli `|a_ij|^2` as a real matrix.
    pub fn abs_squared(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect(),
        }
    }

    /// `max |(A^dagger A - I)_jk|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.cols {
            for k in j..self.cols {
                let mut dot = Complex64::new(0.0, 0.0);
                for i in 0..self.rows {
                    dot += self[(i, j)].conj() * self[(i, k)];
                }
                if j == k {
                    dot -= 1.0;
                }
                worst = worst.max(dot.norm());
            }
        }
        worst
    }

    pub fn validate_column_orthonormal(&self, tol: f64) -> Result<()> {
        if self.rows < self.cols {
            return invalid(format!(
                "a {}x{} matrix cannot have orthonormal columns",
                self.rows, self.cols
            ));
        }
        let err = self.orthonormality_error();
        if err > tol {
            return invalid(format!("columns not orthonormal: max |A^dagger A - I| = {err:.3e}"));
        }
        Ok(())
    }

    /// SHA-256 over the shape and the little-endian bit patterns of all entries.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.rows as u64).to_le_bytes());
        h.update((self.cols as u64).to_le_bytes());
        for z in &self.data {
            h.update(z.re.to_bits().to_le_bytes());
            h.update(z.im.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MatrixJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: MatrixJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// On-disk matrix layout: `{"rows":m,"cols":n,"re":[...],"im":[...]}`, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&ComplexMatrix> for MatrixJson {
    fn from(m: &ComplexMatrix) -> Self {
        Self {
            rows: m.rows,
            cols: m.cols,
            re: m.data.iter().map(|z| z.re).collect(),
            im: m.data.iter().map(|z| z.im).collect(),
        }
    }
}

impl TryFrom<MatrixJson> for ComplexMatrix {
    type Error = Error;

    fn try_from(raw: MatrixJson) -> Result<Self> {
        if raw.re.len() != raw.im.len() {
            return invalid(format!(
                "re has {} entries but im has {}",
                raw.re.len(),
                raw.im.len()
            ));
        }
        let data = raw.re.iter().zip(&raw.im).map(|(&re, &im)| Complex64::new(re, im)).collect();
        ComplexMatrix::new(raw.rows, raw.cols, data)
    }
}

/// Matrix of iid standard complex Gaussians (`E[x] = 0`, `E[|x|^2] = 1`).
pub fn sample_gaussian_matrix(n_rows: usize, n_cols: usize, rng: &mut RngStream) -> Result<ComplexMatrix> {
    if n_rows == 0 || n_cols == 0 {
        return invalid(format!("gaussian matrix needs positive dimensions, got {n_rows}x{n_cols}"));
    }
    let data = (0..n_rows * n_cols).map(|_| rng.complex_normal()).collect();
    Ok(ComplexMatrix { rows: n_rows, cols: n_cols, data })
}

/// Thin Householder QR of an `m x n` matrix with `m >= n`.
///
/// Returns `(Q, R)` with `Q` of shape `m x n` having orthonormal columns and
/// `R` upper triangular `n x n`. The diagonal of `R` carries arbitrary phases.
pub fn householder_qr(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let (m, n) = (a.rows, a.cols);
    if m < n {
        return invalid(format!("thin QR needs rows >= cols, got {m}x{n}"));
    }
    let mut work = a.clone();
    let mut reflectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for j in 0..n {
        let norm = (j..m).map(|i| work[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        let x0 = work[(j, j)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (j..m).map(|i| work[(i, j)]).collect();
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm > 0.0 {
            for z in &mut v {
                *z /= vnorm;
            }
            for k in j..n {
                let mut dot = Complex64::new(0.0, 0.0);
                for (t, vi) in v.iter().enumerate() {
                    dot += vi.conj() * work[(j + t, k)];
                }
                for (t, vi) in v.iter().enumerate() {
                    work[(j + t, k)] -= 2.0 * dot * vi;
                }
            }
        }
        reflectors.push(v);
    }
    let mut r = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for k in i..n {
            r[(i, k)] = work[(i, k)];
        }
    }
    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of the identity.
    let mut q = ComplexMatrix::zeros(m, n);
    for k in 0..n {
        q[(k, k)] = Complex64::new(1.0, 0.0);
    }
    for (j, v) in reflectors.iter().enumerate().rev() {
        for k in 0..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for (t, vi) in v.iter().enumerate() {
                dot += vi.conj() * q[(j + t, k)];
            }
            for (t, vi) in v.iter().enumerate() {
                q[(j + t, k)] -= 2.0 * dot * vi;
            }
        }
    }
    Ok((q, r))
}

/// First `n` columns of a Haar-random `m x m` unitary.
///
/// QR of an `m x n` Gaussian matrix; column `j` of `Q` is multiplied by
/// `r_jj / |r_jj|` so that `R` has a positive diagonal, which makes the
/// factorization unique and `Q` exactly Haar distributed.
pub fn haar_column_orthonormal(m: usize, n: usize, rng: &mut RngStream) -> Result<ComplexMatrix> {
    if n == 0 || m < n {
        return invalid(format!("Haar column-orthonormal matrix needs m >= n >= 1, got m={m}, n={n}"));
    }
    let g = sample_gaussian_matrix(m, n, rng)?;
    let (mut q, r) = householder_qr(&g)?;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = d / d.norm();
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

fn check_square(x: &ComplexMatrix, what: &str) -> Result<usize> {
    if !x.is_square() {
        return invalid(format!("{what} needs a square matrix, got {}x{}", x.rows, x.cols));
    }
    Ok(x.rows)
}

/// Permanent by Ryser's inclusion-exclusion formula with Gray-code updates.
///
/// Costs about `2^(n+1) n` flops. Long ranges are cut into fixed chunks of
/// `2^16` subsets evaluated in parallel and summed in chunk order.
pub fn permanent_ryser(x: &ComplexMatrix) -> Result<Complex64> {
    let n = check_square(x, "permanent")?;
    if n > MAX_RYSER_DIM {
        return too_large(format!("permanent of a {n}x{n} matrix exceeds the n <= {MAX_RYSER_DIM} cap"));
    }
    Ok(ryser_unchecked(x))
}

pub(crate) fn ryser_unchecked(x: &ComplexMatrix) -> Complex64 {
    let n = x.rows;
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let total: u64 = 1u64 << n;
    let sum = if n <= RYSER_CHUNK_BITS {
        ryser_range(x, 0, total)
    } else {
        let chunk = 1u64 << RYSER_CHUNK_BITS;
        let partials: Vec<Complex64> = (0..total / chunk)
            .into_par_iter()
            .map(|c| ryser_range(x, c * chunk, (c + 1) * chunk))
            .collect();
        partials.into_iter().fold(Complex64::new(0.0, 0.0), |acc, z| acc + z)
    };
    if n % 2 == 1 {
        -sum
    } else {
        sum
    }
}

// Sum over Gray-code indices k in [start, end) of (-1)^|g(k)| prod_i rowsum_i(g(k)).
fn ryser_range(x: &ComplexMatrix, start: u64, end: u64) -> Complex64 {
    let n = x.rows;
    let mut sums = [Complex64::new(0.0, 0.0); MAX_RYSER_DIM];
    let sums = &mut sums[..n];
    let mut gray = start ^ (start >> 1);
    for j in 0..n {
        if gray >> j & 1 == 1 {
            for (i, s) in sums.iter_mut().enumerate() {
                *s += x.data[i * n + j];
            }
        }
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let signed_product = |gray: u64, sums: &[Complex64]| {
        let mut prod = Complex64::new(1.0, 0.0);
        for s in sums {
            prod *= s;
        }
        if gray.count_ones() % 2 == 1 {
            -prod
        } else {
            prod
        }
    };
    // At k = 0 the subset is empty and the product vanishes.
    acc += signed_product(gray, sums);
    for k in start + 1..end {
        let j = k.trailing_zeros() as usize;
        gray ^= 1 << j;
        if gray >> j & 1 == 1 {
            for (i, s) in sums.iter_mut().enumerate() {
                *s += x.data[i * n + j];
            }
        } else {
            for (i, s) in sums.iter_mut().enumerate() {
                *s -= x.data[i * n + j];
            }
        }
        acc += signed_product(gray, sums);
    }
    acc
}

/// Permanent by direct summation over all `n!` permutations. Test oracle.
pub fn permanent_naive(x: &ComplexMatrix) -> Result<Complex64> {
    let n = check_square(x, "permanent")?;
    if n > MAX_NAIVE_DIM {
        return too_large(format!("naive permanent limited to n <= {MAX_NAIVE_DIM}, got {n}"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = Complex64::new(0.0, 0.0);
    // Heap's algorithm, iterative form.
    let term = |p: &[usize]| p.iter().enumerate().fold(Complex64::new(1.0, 0.0), |acc, (i, &j)| acc * x[(i, j)]);
    total += term(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            total += term(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(total)
}

/// Determinant by LU factorization with partial pivoting.
pub fn determinant(x: &ComplexMatrix) -> Result<Complex64> {
    let n = check_square(x, "determinant")?;
    let mut a = x.data.clone();
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&p, &q| a[p * n + k].norm().total_cmp(&a[q * n + k].norm()))
            .unwrap_or(k);
        let pv = a[pivot * n + k];
        if pv.norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if pivot != k {
            for j in 0..n {
                a.swap(k * n + j, pivot * n + j);
            }
            det = -det;
        }
        det *= pv;
        for i in k + 1..n {
            let f = a[i * n + k] / pv;
            if f.norm() == 0.0 {
                continue;
            }
            for j in k + 1..n {
                let upd = f * a[k * n + j];
                a[i * n + j] -= upd;
            }
        }
    }
    Ok(det)
}

/// `|Det(X)|^2` as the product of squared norms of the rows after sequential
/// projection onto the orthogonal complement of the rows above.
pub fn det_abs_sq_by_projection(x: &ComplexMatrix) -> Result<f64> {
    let n = check_square(x, "determinant")?;
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut product = 1.0;
    for i in 0..n {
        let mut w = x.row(i).to_vec();
        // Two Gram-Schmidt passes keep w orthogonal to the basis in floating point.
        for _ in 0..2 {
            for b in &basis {
                let bb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
                let dot: Complex64 = b.iter().zip(&w).map(|(bk, wk)| bk.conj() * wk).sum();
                let c = dot / bb;
                for (wk, bk) in w.iter_mut().zip(b) {
                    *wk -= c * bk;
                }
            }
        }
        let norm_sq: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        product *= norm_sq;
        if norm_sq == 0.0 {
            return Ok(0.0);
        }
        basis.push(w);
    }
    Ok(product)
}

/// Squared 2-norm of every row.
pub fn row_squared_norms(x: &ComplexMatrix) -> Vec<f64> {
    (0..x.rows).map(|i| x.row(i).iter().map(|z| z.norm_sqr()).sum()).collect()
}

/// The `n x n` matrix `A_S`: row `i` of `A` repeated `s_i` times, in mode order.
pub fn submatrix_for_outcome(a: &ComplexMatrix, s: &Outcome) -> Result<ComplexMatrix> {
    if s.m() != a.rows {
        return invalid(format!("outcome has {} modes but matrix has {} rows", s.m(), a.rows));
    }
    if s.n() > MAX_RYSER_DIM {
        return too_large(format!("outcome has {} photons, cap is {MAX_RYSER_DIM}", s.n()));
    }
    let mut data = Vec::with_capacity(s.n() * a.cols);
    for (i, &count) in s.occupations().iter().enumerate() {
        for _ in 0..count {
            data.extend_from_slice(a.row(i));
        }
    }
    Ok(ComplexMatrix { rows: s.n(), cols: a.cols, data })
}
