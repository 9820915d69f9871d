//! Small dense helpers shared by the solvers.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

pub const EPS: f64 = f64::EPSILON;

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc: f64, &s| acc.max(s))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Eigenvalues of a symmetric matrix in ascending order, with eigenvectors
/// as matching columns.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = symmetrize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Spectral abscissa `max Re λ(A)` read off the real Schur form.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Option<f64> {
    let t = a.clone().try_schur(EPS, 10_000)?.unpack().1;
    Some(quasi_triangular_abscissa(&t))
}

pub(crate) fn quasi_triangular_abscissa(t: &DMatrix<f64>) -> f64 {
    let n = t.nrows();
    let mut best = f64::NEG_INFINITY;
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let (p, q) = (t[(i, i)], t[(i, i + 1)]);
            let (r, s) = (t[(i + 1, i)], t[(i + 1, i + 1)]);
            let mean = 0.5 * (p + s);
            let disc = 0.25 * (p - s) * (p - s) + q * r;
            let re = if disc >= 0.0 { mean + disc.sqrt() } else { mean };
            best = best.max(re);
            i += 2;
        } else {
            best = best.max(t[(i, i)]);
            i += 1;
        }
    }
    best
}

/// `A ⊗ B` (column-major vectorization convention: vec(B X Aᵀ) = (A ⊗ B) vec X).
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
        }
    }
    out
}

/// Block-diagonal `diag(a, b)`.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Stack `a` on top of `b` (equal column counts).
pub fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

/// `[a, b]` (equal row counts).
pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// are clipped to zero.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen_sorted(m);
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        scaled.column_mut(j).scale_mut(s);
    }
    scaled * vecs.transpose()
}

// Padé(13) coefficients for the scaling-and-squaring exponential.
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

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    if n == 0 {
        return ident;
    }
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-squarings);
    let c = &PADE13;
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * c[13] + &a4 * c[11] + &a2 * c[9])
        + &a6 * c[7]
        + &a4 * c[5]
        + &a2 * c[3]
        + &ident * c[1];
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * c[12] + &a4 * c[10] + &a2 * c[8])
        + &a6 * c[6]
        + &a4 * c[4]
        + &a2 * c[2]
        + &ident * c[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}
