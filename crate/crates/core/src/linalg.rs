//! Dense complex matrix arithmetic underpinning the rest of the crate:
//! Kronecker products, commutators, traces, the matrix exponential, and
//! general (non-Hermitian) eigendecomposition.
//!
//! Matrices are stored as [`ndarray::Array2`] of `Complex64` in standard
//! (row-major) layout; entry `(i, j)` is row `i`, column `j`.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use thiserror::Error;

// System LAPACK (reference implementation shipped with the distribution).
// Complex64 is layout-compatible with Fortran COMPLEX*16.
#[link(name = "lapack")]
extern "C" {
    fn zgeev_(
        jobvl: *const u8,
        jobvr: *const u8,
        n: *const i32,
        a: *mut C64,
        lda: *const i32,
        w: *mut C64,
        vl: *mut C64,
        ldvl: *const i32,
        vr: *mut C64,
        ldvr: *const i32,
        work: *mut C64,
        lwork: *const i32,
        rwork: *mut f64,
        info: *mut i32,
    );
    fn zgesv_(
        n: *const i32,
        nrhs: *const i32,
        a: *mut C64,
        lda: *const i32,
        ipiv: *mut i32,
        b: *mut C64,
        ldb: *const i32,
        info: *mut i32,
    );
}

/// Column-major copy for LAPACK.
fn to_col_major(m: &CMat) -> Vec<C64> {
    let (r, c) = m.dim();
    let mut buf = Vec::with_capacity(r * c);
    for j in 0..c {
        for i in 0..r {
            buf.push(m[[i, j]]);
        }
    }
    buf
}

fn from_col_major(buf: &[C64], rows: usize, cols: usize) -> CMat {
    Array2::from_shape_fn((rows, cols), |(i, j)| buf[j * rows + i])
}

/// Eigenvalues and right eigenvectors via LAPACK `zgeev`.
fn lapack_eig(m: &CMat) -> Result<(CVec, CMat), LinalgError> {
    let n = m.nrows() as i32;
    let mut a = to_col_major(m);
    let mut w = vec![C64::new(0.0, 0.0); n as usize];
    let mut vr = vec![C64::new(0.0, 0.0); (n * n) as usize];
    let mut rwork = vec![0.0f64; (2 * n) as usize];
    let lwork = 4 * n.max(1);
    let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
    let mut info = 0i32;
    let mut vl = [C64::new(0.0, 0.0)];
    unsafe {
        zgeev_(
            b"N".as_ptr(),
            b"V".as_ptr(),
            &n,
            a.as_mut_ptr(),
            &n,
            w.as_mut_ptr(),
            vl.as_mut_ptr(),
            &1,
            vr.as_mut_ptr(),
            &n,
            work.as_mut_ptr(),
            &lwork,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::EigFailure(info));
    }
    Ok((Array1::from(w), from_col_major(&vr, n as usize, n as usize)))
}

/// Matrix inverse via LAPACK `zgesv` with an identity right-hand side.
fn lapack_inv(m: &CMat) -> Result<CMat, i32> {
    let n = m.nrows() as i32;
    let mut a = to_col_major(m);
    let mut b = to_col_major(&eye(n as usize));
    let mut ipiv = vec![0i32; n as usize];
    let mut info = 0i32;
    unsafe {
        zgesv_(&n, &n, a.as_mut_ptr(), &n, ipiv.as_mut_ptr(), b.as_mut_ptr(), &n, &mut info);
    }
    if info != 0 {
        return Err(info);
    }
    Ok(from_col_major(&b, n as usize, n as usize))
}

/// Maximum absolute column sum (operator 1-norm).
pub fn opnorm_one(m: &CMat) -> f64 {
    let (r, c) = m.dim();
    (0..c)
        .map(|j| (0..r).map(|i| m[[i, j]].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense complex matrix, the carrier for states, operators and
/// superoperators.
pub type CMat = Array2<C64>;

/// Dense complex vector (vectorized states, eigenvectors).
pub type CVec = Array1<C64>;

/// Maximum dimension accepted by [`eig_general`]. Larger inputs are
/// rejected; the superoperator dimension for the 5-site chain (1024) is
/// handled best-effort below this bound.
pub const EIG_DIM_LIMIT: usize = 1024;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension {0} exceeds eigensolver limit {EIG_DIM_LIMIT}")]
    DimensionOverLimit(usize),
    #[error("eigendecomposition failed to converge (LAPACK info {0})")]
    EigFailure(i32),
    #[error("matrix is defective or near-defective (eigenvector condition estimate {cond:.3e})")]
    NearDefective { cond: f64 },
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Identity matrix of dimension `n`.
pub fn eye(n: usize) -> CMat {
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
    })
}

/// Conjugate transpose.
pub fn dagger(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

/// Kronecker product `A ⊗ B`, block `(i, j)` equal to `a[i,j] * B`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            let mut block = out.slice_mut(ndarray::s![i * rb..(i + 1) * rb, j * cb..(j + 1) * cb]);
            block.zip_mut_with(b, |o, &bkl| *o = aij * bkl);
        }
    }
    out
}

/// `AB - BA`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}

/// `AB + BA`.
pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) + b.dot(a)
}

pub fn trace(m: &CMat) -> C64 {
    m.diag().sum()
}

/// Frobenius inner product `Tr[A† B]`.
pub fn frobenius_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Largest entrywise modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Entrywise deviation from Hermiticity, `max |M - M†|`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let d = m - &dagger(m);
    max_abs(&d)
}

/// Matrix exponential `e^M` by scaling-and-squaring with a truncated
/// Taylor core. Accurate to ~1e-13 relative for `‖M‖ ≤ 1e2`.
pub fn expm(m: &CMat) -> Result<CMat, LinalgError> {
    let (r, cdim) = m.dim();
    if r != cdim {
        return Err(LinalgError::NotSquare { rows: r, cols: cdim });
    }
    let norm = opnorm_one(m);
    // scale so the series argument has norm <= 0.5
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = m.mapv(|z| z / C64::new((1u64 << s) as f64, 0.0));

    let mut result = eye(r);
    let mut term = eye(r);
    for k in 1..60 {
        term = term.dot(&scaled).mapv(|z| z / C64::new(k as f64, 0.0));
        result = result + &term;
        if max_abs(&term) < 1e-20 {
            break;
        }
    }
    for _ in 0..s {
        result = result.dot(&result);
    }
    Ok(result)
}

/// Spectral decomposition of a general (non-Hermitian) matrix.
///
/// Right vectors are the columns of `right`; left vectors are the columns
/// of `left` and satisfy `left[:,m]† · M = eigenvalue[m] · left[:,m]†`.
/// The two sets are biorthogonally normalized (`left[:,m]† · right[:,n]
/// = δ_mn`) when the matrix is diagonalizable; `cond` estimates the
/// conditioning of the eigenvector basis.
#[derive(Debug, Clone)]
pub struct EigGeneral {
    pub eigenvalues: CVec,
    pub right: CMat,
    pub left: CMat,
    pub cond: f64,
}

/// General eigendecomposition with biorthogonal left/right vectors.
///
/// Left vectors are obtained from the inverse of the right eigenvector
/// matrix, so biorthonormality holds by construction. A defective or
/// near-defective input makes that inverse ill-conditioned and is
/// reported as an error with the condition estimate.
pub fn eig_general(m: &CMat) -> Result<EigGeneral, LinalgError> {
    let (r, cdim) = m.dim();
    if r != cdim {
        return Err(LinalgError::NotSquare { rows: r, cols: cdim });
    }
    if r > EIG_DIM_LIMIT {
        return Err(LinalgError::DimensionOverLimit(r));
    }
    let (eigenvalues, right) = lapack_eig(m)?;
    let right_inv =
        lapack_inv(&right).map_err(|_| LinalgError::NearDefective { cond: f64::INFINITY })?;
    let cond = opnorm_one(&right) * opnorm_one(&right_inv);
    // 1e12 leaves room for the degenerate-but-diagonalizable Liouvillian
    // zero mode while still flagging Jordan-block inputs.
    if !cond.is_finite() || cond > 1e12 {
        return Err(LinalgError::NearDefective { cond });
    }
    // rows of right_inv are the biorthogonal left vectors (conjugated)
    let left = dagger(&right_inv);
    Ok(EigGeneral { eigenvalues, right, left, cond })
}

/// Pauli matrices and the 2x2 identity.
pub fn pauli(idx: usize) -> CMat {
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match idx {
        0 => ndarray::array![[one, o], [o, one]],
        1 => ndarray::array![[o, one], [one, o]],
        2 => ndarray::array![[o, -i], [i, o]],
        3 => ndarray::array![[one, o], [o, -one]],
        _ => panic!("pauli index must be 0..=3"),
    }
}
