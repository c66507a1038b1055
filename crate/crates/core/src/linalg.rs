//! Dense complex linear algebra used throughout the crate.
//!
//! Everything here works on [`CMatrix`], a plain `ndarray` matrix of
//! `Complex64`. Eigendecompositions and factorizations go through LAPACK
//! (`ndarray-linalg`); the matrix exponential is implemented here with
//! scaling-and-squaring and a degree-13 Padé approximant.

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{Eig, EigVals, Eigh, FactorizeInto, Solve, SVD, UPLO};
use num_complex::Complex64;

use crate::error::{QbeError, Result};

pub type C64 = Complex64;
pub type CMatrix = Array2<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(d: usize) -> CMatrix {
    Array2::eye(d)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.dot(b) - b.dot(a)
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diag().sum()
}

/// Largest element modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute column sum.
pub fn one_norm(a: &CMatrix) -> f64 {
    a.axis_iter(Axis(1))
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `max |M - M†| / max |M|`, zero for the zero matrix.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let scale = max_abs(a);
    if scale == 0.0 {
        return 0.0;
    }
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst / scale
}

/// Absolute Hermiticity defect `max |M - M†|`.
pub fn hermiticity_defect_abs(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

/// `(M + M†) / 2`.
pub fn hermitize(a: &CMatrix) -> CMatrix {
    (a + &dagger(a)).mapv(|z| z * 0.5)
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending.
pub fn eigh(a: &CMatrix) -> Result<(Array1<f64>, CMatrix)> {
    // LAPACK sees a row-major matrix as its transpose, which for a
    // Hermitian matrix is the conjugate; undo that on the eigenvectors.
    let h = hermitize(a);
    let (vals, vecs) = h.eigh(UPLO::Lower)?;
    let vecs = if h.is_standard_layout() {
        vecs.mapv(|z| z.conj())
    } else {
        vecs
    };
    Ok((vals, vecs))
}

pub fn eigvalsh(a: &CMatrix) -> Result<Array1<f64>> {
    Ok(eigh(a)?.0)
}

/// Eigenvalues of a general complex matrix.
pub fn eigvals(a: &CMatrix) -> Result<Array1<C64>> {
    Ok(a.eigvals()?)
}

/// Eigenpairs of a general complex matrix.
pub fn eig(a: &CMatrix) -> Result<(Array1<C64>, CMatrix)> {
    Ok(a.eig()?)
}

pub fn singular_values(a: &CMatrix) -> Result<Array1<f64>> {
    let (_, s, _) = a.svd(false, false)?;
    Ok(s)
}

/// Sum of singular values.
pub fn trace_norm(a: &CMatrix) -> Result<f64> {
    Ok(singular_values(a)?.sum())
}

/// `U diag(f(λ)) U†` for a Hermitian decomposition `(λ, U)`.
pub fn reconstruct<F: Fn(f64) -> C64>(vals: &Array1<f64>, vecs: &CMatrix, f: F) -> CMatrix {
    let mut scaled = vecs.clone();
    for (mut col, &v) in scaled.axis_iter_mut(Axis(1)).zip(vals.iter()) {
        let fv = f(v);
        col.mapv_inplace(|z| z * fv);
    }
    scaled.dot(&dagger(vecs))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[[i * rb + k, j * cb + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Trace out every factor except `keep` from a matrix on the product space
/// with factor dimensions `dims` (first factor most significant, matching
/// [`kron`]).
pub fn partial_trace_keep(m: &CMatrix, dims: &[usize], keep: usize) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(QbeError::DimensionMismatch(format!(
            "matrix is {}x{}, product of factor dimensions is {}",
            m.nrows(),
            m.ncols(),
            total
        )));
    }
    if keep >= dims.len() {
        return Err(QbeError::DimensionMismatch(format!(
            "keep index {} out of range for {} factors",
            keep,
            dims.len()
        )));
    }
    let dk = dims[keep];
    let inner: usize = dims[keep + 1..].iter().product();
    let outer: usize = dims[..keep].iter().product();
    let mut out = Array2::zeros((dk, dk));
    for a in 0..dk {
        for b in 0..dk {
            let mut acc = ZERO;
            for o in 0..outer {
                for r in 0..inner {
                    let i = (o * dk + a) * inner + r;
                    let j = (o * dk + b) * inner + r;
                    acc += m[[i, j]];
                }
            }
            out[[a, b]] = acc;
        }
    }
    Ok(out)
}

/// Column-stacking vectorization: `vec(A)[i + j d] = A[i, j]`.
pub fn vectorize(a: &CMatrix) -> Array1<C64> {
    let (r, cols) = a.dim();
    let mut v = Array1::zeros(r * cols);
    for j in 0..cols {
        for i in 0..r {
            v[i + j * r] = a[[i, j]];
        }
    }
    v
}

/// Inverse of [`vectorize`] for a `d x d` matrix.
pub fn unvectorize(v: &Array1<C64>, d: usize) -> CMatrix {
    let mut a = Array2::zeros((d, d));
    for j in 0..d {
        for i in 0..d {
            a[[i, j]] = v[i + j * d];
        }
    }
    a
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling-and-squaring with a [13/13] Padé
/// approximant (Higham 2005).
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(QbeError::Overflow { norm });
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a.mapv(|z| z * 0.5_f64.powi(s));
    let id = identity(n);
    let a2 = scaled.dot(&scaled);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let b = PADE13;

    let w1 = &a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]);
    let w2 = &a6 * c(b[7]) + &a4 * c(b[5]) + &a2 * c(b[3]) + &id * c(b[1]);
    let u = scaled.dot(&(a6.dot(&w1) + w2));
    let z1 = &a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]);
    let z2 = &a6 * c(b[6]) + &a4 * c(b[4]) + &a2 * c(b[2]) + &id * c(b[0]);
    let v = a6.dot(&z1) + z2;

    let p = &v + &u;
    let q = &v - &u;
    let lu = q.factorize_into()?;
    let mut r = Array2::zeros((n, n));
    for (j, col) in p.axis_iter(Axis(1)).enumerate() {
        let x = lu.solve(&col.to_owned())?;
        r.column_mut(j).assign(&x);
    }
    for _ in 0..s {
        r = r.dot(&r);
    }
    if r.iter().any(|z| !z.is_finite()) {
        return Err(QbeError::Overflow { norm });
    }
    Ok(r)
}
