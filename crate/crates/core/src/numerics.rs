//! Dense/sparse linear algebra, stable softmax, multi-gold cross entropy,
//! and a central-difference oracle.
//!
//! Everything runs in f64; gradient checking against finite differences is
//! not meaningful at single precision. Dimension mismatches and out-of-range
//! indices are contract violations and panic.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Dense real vector of embedding dimension `d`.
pub type DenseVec = Vec<f64>;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        DenseMat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        DenseMat::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self * x` for dense `x` of length `cols`.
    pub fn matvec(&self, x: &[f64]) -> DenseVec {
        assert_eq!(x.len(), self.cols, "matvec: length mismatch");
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            out[r] = acc;
        }
        out
    }

    /// `self^T * y` for dense `y` of length `rows`.
    pub fn matvec_t(&self, y: &[f64]) -> DenseVec {
        assert_eq!(y.len(), self.rows, "matvec_t: length mismatch");
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let yr = y[r];
            for (o, a) in out.iter_mut().zip(row.iter()) {
                *o += yr * a;
            }
        }
        out
    }

    /// `self += scale * u v^T` with dense `u` (rows) and `v` (cols).
    pub fn add_outer(&mut self, scale: f64, u: &[f64], v: &[f64]) {
        assert_eq!(u.len(), self.rows);
        assert_eq!(v.len(), self.cols);
        for r in 0..self.rows {
            let su = scale * u[r];
            if su == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (o, b) in row.iter_mut().zip(v.iter()) {
                *o += su * b;
            }
        }
    }

    /// `self += scale * u phi^T` with sparse `phi` over the columns.
    pub fn add_outer_sparse(&mut self, scale: f64, u: &[f64], phi: &SparseVec) {
        assert_eq!(u.len(), self.rows);
        assert_eq!(phi.dim(), self.cols, "add_outer_sparse: feature dim mismatch");
        if scale == 0.0 {
            return;
        }
        for r in 0..self.rows {
            let su = scale * u[r];
            let base = r * self.cols;
            for &(idx, w) in phi.entries() {
                self.data[base + idx as usize] += su * w;
            }
        }
    }

    /// `self += scale * other`, elementwise.
    pub fn add_scaled(&mut self, scale: f64, other: &DenseMat) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.data.iter_mut() {
            *a *= s;
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|a| *a = v);
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum()
    }
}

/// Sparse bag-of-words feature vector over a dictionary of size `dim`.
///
/// Entries are strictly increasing in index with finite nonzero weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVec {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl SparseVec {
    pub fn new(dim: usize, entries: Vec<(u32, f64)>) -> Self {
        let mut prev: Option<u32> = None;
        for &(idx, w) in &entries {
            assert!((idx as usize) < dim, "sparse index {idx} out of range for dim {dim}");
            assert!(w.is_finite() && w != 0.0, "sparse weight must be finite and nonzero");
            if let Some(p) = prev {
                assert!(idx > p, "sparse indices must be strictly increasing");
            }
            prev = Some(idx);
        }
        SparseVec { dim, entries }
    }

    pub fn empty(dim: usize) -> Self {
        SparseVec { dim, entries: Vec::new() }
    }

    /// Bag-of-words from raw id occurrences; weights are occurrence counts.
    pub fn from_counts(dim: usize, ids: impl IntoIterator<Item = u32>) -> Self {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for id in ids {
            assert!((id as usize) < dim, "token id {id} out of range for dim {dim}");
            *counts.entry(id).or_insert(0.0) += 1.0;
        }
        SparseVec { dim, entries: counts.into_iter().collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    /// Elementwise sum, used to collapse a (key, value) pair into one bag.
    pub fn merged(&self, other: &SparseVec) -> SparseVec {
        assert_eq!(self.dim, other.dim, "merged: dim mismatch");
        let mut counts: BTreeMap<u32, f64> = self.entries.iter().copied().collect();
        for &(idx, w) in &other.entries {
            let e = counts.entry(idx).or_insert(0.0);
            *e += w;
            if *e == 0.0 {
                counts.remove(&idx);
            }
        }
        SparseVec { dim: self.dim, entries: counts.into_iter().collect() }
    }
}

/// `M * phi` exploiting sparsity; cost is `nnz(phi) * rows`.
pub fn embed(m: &DenseMat, phi: &SparseVec) -> DenseVec {
    assert_eq!(phi.dim(), m.cols(), "embed: feature dim {} != matrix cols {}", phi.dim(), m.cols());
    let mut out = vec![0.0; m.rows()];
    for (r, o) in out.iter_mut().enumerate() {
        let row = m.row(r);
        let mut acc = 0.0;
        for &(idx, w) in phi.entries() {
            acc += w * row[idx as usize];
        }
        *o = acc;
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    assert_eq!(y.len(), x.len(), "axpy: length mismatch");
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += a * xi;
    }
}

/// Numerically stable softmax (max subtraction); output sums to 1.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    assert!(!z.is_empty(), "softmax over an empty slice");
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&v| math::exp(v - m)).collect();
    let sum: f64 = out.iter().sum();
    for o in out.iter_mut() {
        *o /= sum;
    }
    out
}

/// `-ln(sum of gold probabilities)`. `gold` holds indices into `dist` and
/// must be nonempty; multiple gold answers share the mass.
pub fn cross_entropy_loss(dist: &[f64], gold: &[usize]) -> f64 {
    assert!(!gold.is_empty(), "cross_entropy_loss: empty gold set");
    let mut s = 0.0;
    for &g in gold {
        assert!(g < dist.len(), "gold index {g} out of range for {} candidates", dist.len());
        s += dist[g];
    }
    -math::ln(s)
}

/// Central finite differences of `f` at `x`, one coordinate at a time.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], epsilon: f64) -> Vec<f64> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + epsilon;
        let plus = f(&probe);
        probe[i] = orig - epsilon;
        let minus = f(&probe);
        probe[i] = orig;
        grad[i] = (plus - minus) / (2.0 * epsilon);
    }
    grad
}

/// Gradients for every model parameter; shapes mirror the parameter set.
#[derive(Clone, Debug)]
pub struct GradientSet {
    pub a: DenseMat,
    pub b: DenseMat,
    pub r: Vec<DenseMat>,
}

impl GradientSet {
    pub fn zeros(d: usize, dim: usize, hops: usize) -> Self {
        GradientSet {
            a: DenseMat::zeros(d, dim),
            b: DenseMat::zeros(d, dim),
            r: (0..hops).map(|_| DenseMat::zeros(d, d)).collect(),
        }
    }

    pub fn clear(&mut self) {
        self.a.fill(0.0);
        self.b.fill(0.0);
        for r in self.r.iter_mut() {
            r.fill(0.0);
        }
    }

    pub fn global_norm(&self) -> f64 {
        let mut s = self.a.norm_sq() + self.b.norm_sq();
        for r in &self.r {
            s += r.norm_sq();
        }
        math::sqrt(s)
    }

    pub fn scale(&mut self, s: f64) {
        self.a.scale(s);
        self.b.scale(s);
        for r in self.r.iter_mut() {
            r.scale(s);
        }
    }
}

/// Relative error with an absolute floor, for gradient comparisons.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let denom = math::abs(a).max(math::abs(b)).max(1e-6);
    math::abs(a - b) / denom
}
