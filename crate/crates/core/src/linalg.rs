//! Dense complex linear algebra shared by the models and constructions.
//!
//! Everything here works on small `DMatrix<Complex64>` values; the systems in
//! this crate never exceed a few hundred rows.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

/// The PRNG used for every sampled check: ChaCha with 8 rounds, seeded from a
/// single `u64`. Identical seeds give identical samples on every platform.
pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_real(a: &RMat, b: &RMat) -> RMat {
    a.kronecker(b)
}

pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

pub fn trace(m: &CMat) -> C64 {
    m.trace()
}

/// `Tr[a b]` without forming the product.
pub fn trace_prod(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_real(m: &RMat) -> f64 {
    m.iter().map(|z| z.abs()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn hermitian_residual(h: &CMat) -> f64 {
    max_abs(&(h - h.adjoint()))
}

pub fn is_hermitian(h: &CMat, tol: f64) -> bool {
    h.is_square() && hermitian_residual(h) <= tol
}

pub fn projector(ket: &CVec) -> CMat {
    ket * ket.adjoint()
}

pub fn basis_ket(d: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(d);
    v[i] = c(1.0, 0.0);
    v
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order.
///
/// Degenerate eigenspaces are resolved deterministically: the eigenspace is
/// re-diagonalised against `diag(0, 1, .., d-1)` and, if that is still
/// degenerate, against a fixed generic Hermitian operator. Each eigenvector
/// is rephased so its first non-negligible component is real and positive.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `values`.
    pub vectors: CMat,
}

const DEGENERACY_TOL: f64 = 1e-9;

pub fn eigh(h: &CMat) -> HermitianEigen {
    let n = h.nrows();
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = DEGENERACY_TOL * scale;
    let mut values = Vec::with_capacity(n);
    let mut vectors = CMat::zeros(n, n);
    let mut col = 0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n
            && (eig.eigenvalues[order[end - 1]] - eig.eigenvalues[order[end]]).abs() <= tol
        {
            end += 1;
        }
        let mut block = CMat::zeros(n, end - start);
        for (k, &idx) in order[start..end].iter().enumerate() {
            block.set_column(k, &eig.eigenvectors.column(idx));
        }
        let block = if end - start > 1 {
            refine_degenerate(&block, 0)
        } else {
            block
        };
        let mean = order[start..end]
            .iter()
            .map(|&i| eig.eigenvalues[i])
            .sum::<f64>()
            / (end - start) as f64;
        for k in 0..block.ncols() {
            let mut v = block.column(k).into_owned();
            fix_phase(&mut v);
            vectors.set_column(col, &v);
            values.push(if end - start > 1 {
                mean
            } else {
                eig.eigenvalues[order[start]]
            });
            col += 1;
        }
        start = end;
    }
    HermitianEigen { values, vectors }
}

fn tie_breaker(n: usize, level: usize) -> CMat {
    match level {
        0 => CMat::from_fn(n, n, |i, j| {
            if i == j {
                c(i as f64, 0.0)
            } else {
                c(0.0, 0.0)
            }
        }),
        _ => CMat::from_fn(n, n, |i, j| {
            if i == j {
                c(((i + 2) as f64).sqrt(), 0.0)
            } else {
                let (a, b) = (i.min(j) as f64, i.max(j) as f64);
                let z = c(1.0 / (1.0 + a + b), 1.0 / (2.0 + a * b + b));
                if i < j {
                    z
                } else {
                    z.conj()
                }
            }
        }),
    }
}

fn refine_degenerate(block: &CMat, level: usize) -> CMat {
    if level > 1 || block.ncols() < 2 {
        return block.clone();
    }
    let n = block.nrows();
    let k = tie_breaker(n, level);
    let reduced = block.adjoint() * &k * block;
    let reduced = (&reduced + reduced.adjoint()).scale(0.5);
    let eig = reduced.symmetric_eigen();
    let m = block.ncols();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let rotated = block * &eig.eigenvectors;
    let mut out = CMat::zeros(n, m);
    let mut col = 0;
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m
            && (eig.eigenvalues[order[end - 1]] - eig.eigenvalues[order[end]]).abs() <= 1e-7
        {
            end += 1;
        }
        let mut sub = CMat::zeros(n, end - start);
        for (k, &idx) in order[start..end].iter().enumerate() {
            sub.set_column(k, &rotated.column(idx));
        }
        let sub = if end - start > 1 {
            refine_degenerate(&sub, level + 1)
        } else {
            sub
        };
        for k in 0..sub.ncols() {
            out.set_column(col, &sub.column(k));
            col += 1;
        }
        start = end;
    }
    out
}

/// Rephase so the first component with modulus above 1e-6 is real positive.
pub fn fix_phase(v: &mut CVec) {
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-6).copied() {
        let phase = z / z.norm();
        *v /= phase;
    }
}

/// Eigenvalues only, descending.
pub fn eigvalsh(h: &CMat) -> Vec<f64> {
    let sym = (h + h.adjoint()).scale(0.5);
    let mut vals: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// Singular values, descending.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn real_singular_values(m: &RMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank: number of singular values above `tol` times the largest.
pub fn real_rank(m: &RMat, tol: f64) -> usize {
    let s = real_singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol * top.max(1.0)).count()
}

/// Unitary factor of the polar decomposition `m = W P`.
///
/// For rank-deficient `m` the factor is completed arbitrarily on the kernel,
/// which is harmless for the orthogonal Procrustes problem it serves.
pub fn polar_unitary(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    u * v_t
}

/// Thin SVD `m ≈ u diag(s) v_t` keeping only the leading `rank` triples.
pub fn thin_svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let svd = m.clone().svd(true, true);
    (
        svd.u.expect("svd u"),
        svd.singular_values.iter().copied().collect(),
        svd.v_t.expect("svd v_t"),
    )
}

pub fn is_unitary(u: &CMat, tol: f64) -> bool {
    u.is_square() && max_abs(&(u.adjoint() * u - identity(u.nrows()))) <= tol
}

/// Standard complex Gaussian sample.
pub fn complex_gaussian(rng: &mut Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) / std::f64::consts::SQRT_2
}

/// Haar-random unit vector: a normalised complex Gaussian vector.
pub fn haar_ket(rng: &mut Rng, d: usize) -> CVec {
    let v = CVec::from_fn(d, |_, _| complex_gaussian(rng));
    let n = v.norm();
    v / c(n, 0.0)
}

/// Haar-random unitary: Gram-Schmidt orthonormalisation of the columns of a
/// complex Ginibre matrix.
pub fn haar_unitary(rng: &mut Rng, d: usize) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| complex_gaussian(rng));
    gram_schmidt(&g)
}

/// Orthonormalises the columns of `m` in order (modified Gram-Schmidt).
pub fn gram_schmidt(m: &CMat) -> CMat {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        for k in 0..j {
            let qk = q.column(k).into_owned();
            let proj = qk.dotc(&q.column(j));
            let upd = q.column(j) - qk * proj;
            q.set_column(j, &upd);
        }
        let n = q.column(j).norm();
        let col = q.column(j) / c(n, 0.0);
        q.set_column(j, &col);
    }
    q
}

/// Extends orthonormal columns `first` to a full orthonormal basis of
/// `C^d`, appending computational basis vectors in order and skipping those
/// already (numerically) in the span.
pub fn complete_basis(first: &CMat) -> CMat {
    let d = first.nrows();
    let mut cols: Vec<CVec> = (0..first.ncols())
        .map(|j| first.column(j).into_owned())
        .collect();
    for i in 0..d {
        if cols.len() == d {
            break;
        }
        let mut v = basis_ket(d, i);
        for q in &cols {
            let proj = q.dotc(&v);
            v -= q * proj;
        }
        let n = v.norm();
        if n > 1e-6 {
            cols.push(v / c(n, 0.0));
        }
    }
    CMat::from_columns(&cols)
}

/// Random density matrix of the given rank, built as `G G† / Tr` from a
/// `d × rank` Ginibre matrix.
pub fn random_density(rng: &mut Rng, d: usize, rank: usize) -> CMat {
    let g = CMat::from_fn(d, rank, |_, _| complex_gaussian(rng));
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian(rng: &mut Rng, d: usize) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| complex_gaussian(rng));
    (&g + g.adjoint()).scale(0.5)
}

/// Random probability vector, uniform on the simplex.
pub fn random_probabilities(rng: &mut Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| -rng.random_range(f64::EPSILON..1.0).ln())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Random Kraus family `{K_i}` with `Σ K_i† K_i = I`, obtained by slicing a
/// Haar isometry `C^d → C^{d·n}`.
pub fn random_kraus(rng: &mut Rng, d_in: usize, d_out: usize, n: usize) -> Vec<CMat> {
    let big = haar_unitary(rng, d_out * n);
    let iso = big.columns(0, d_in).into_owned();
    (0..n)
        .map(|k| iso.rows(k * d_out, d_out).into_owned())
        .collect()
}

/// Matrix square root of a positive semidefinite Hermitian matrix.
pub fn psd_sqrt(h: &CMat) -> CMat {
    let e = eigh(h);
    let n = h.nrows();
    let mut out = CMat::zeros(n, n);
    for (k, &val) in e.values.iter().enumerate() {
        let v = e.vectors.column(k).into_owned();
        out += projector(&v) * c(val.max(0.0).sqrt(), 0.0);
    }
    out
}

/// Distance between two angles on the unit circle.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// Canonical representative of an angle in `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(std::f64::consts::TAU);
    if w >= std::f64::consts::TAU {
        0.0
    } else {
        w
    }
}
