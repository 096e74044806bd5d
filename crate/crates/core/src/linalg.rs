//! Dense complex kernels shared by every other module.
//!
//! Matrices are column-major `nalgebra` matrices of `Complex<f64>`. Products go
//! through `matrixmultiply::zgemm`, which is an order of magnitude faster than
//! the generic complex product for the sizes used here (n up to a few hundred).

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Unit roundoff of IEEE double precision, 2^-53.
pub const UNIT_ROUNDOFF: f64 = 1.1102230246251565e-16;

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn ensure_square(a: &CMat) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

pub fn ensure_dim(a: &CMat, n: usize) -> Result<()> {
    let m = ensure_square(a)?;
    if m != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m,
        });
    }
    Ok(())
}

fn is_real(a: &CMat) -> bool {
    a.iter().all(|z| z.im == 0.0)
}

fn real_part(a: &CMat) -> DMatrix<f64> {
    a.map(|z| z.re)
}

/// `a * b` through the packed GEMM kernels; real operands (common for
/// discretised differential operators) take the cheaper real kernel.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul: inner dimensions differ");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut out = CMat::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return out;
    }
    if is_real(a) && is_real(b) {
        let (ar, br) = (real_part(a), real_part(b));
        let mut prod = DMatrix::<f64>::zeros(m, n);
        // SAFETY: column-major buffers with the strides given; no aliasing.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                ar.as_ptr(),
                1,
                m as isize,
                br.as_ptr(),
                1,
                k as isize,
                0.0,
                prod.as_mut_ptr(),
                1,
                m as isize,
            );
        }
        return prod.map(c);
    }
    // SAFETY: Complex<f64> is repr(C) {re, im}, layout-identical to [f64; 2].
    // All three buffers are column-major with the strides given below, and
    // `out` does not alias the inputs.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            out.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    out
}

/// `a * b * c`, associating to the left.
pub fn matmul3(a: &CMat, b: &CMat, c: &CMat) -> CMat {
    matmul(&matmul(a, b), c)
}

/// Scale row `i` by `left[i]` and column `j` by `right[j]`.
pub fn scale_rows_cols(a: &CMat, left: &[f64], right: &[f64]) -> CMat {
    let mut out = a.clone();
    for j in 0..out.ncols() {
        for i in 0..out.nrows() {
            out[(i, j)] *= left[i] * right[j];
        }
    }
    out
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * c(0.5)
}

/// Relative Hermiticity defect ‖A − Aᴴ‖_F / ‖A‖_F.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let scale = a.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (a - a.adjoint()).norm() / scale
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(a: &CMat) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_hermitian_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigen(a).0.first().copied().unwrap_or(f64::INFINITY)
}

/// Solve `a x = b` by partial-pivoting LU.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    if is_real(a) && is_real(b) {
        return real_part(a)
            .lu()
            .solve(&real_part(b))
            .map(|x| x.map(c))
            .ok_or_else(|| Error::Invalid("singular linear system".into()));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Invalid("singular linear system".into()))
}

// Degree thresholds θ_m for backward error ≤ 2^-53 and the [m/m] Padé
// numerator coefficients (Higham 2005).
#[allow(clippy::excessive_precision)]
const THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
];

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
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

/// Matrix exponential by scaling and squaring with a variable-degree Padé
/// approximant.
///
/// The degree/scaling choice bounds the relative backward error by the unit
/// roundoff, so every `tolerance >= UNIT_ROUNDOFF` is honoured.
pub fn expm(a: &CMat, tolerance: f64) -> Result<CMat> {
    let n = ensure_square(a)?;
    if !(UNIT_ROUNDOFF..1.0).contains(&tolerance) {
        return Err(Error::OutOfRange {
            name: "expTolerance",
            value: tolerance,
            range: format!("[{UNIT_ROUNDOFF:e}, 1)"),
        });
    }
    if !is_finite(a) {
        return Err(Error::NonFinite("matrix exponential argument"));
    }
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let norm = norm1(a);
    if norm == 0.0 {
        return Ok(identity(n));
    }

    for &(m, theta) in &THETA[..4] {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(a, coeffs);
        }
    }

    let theta13 = THETA[4].1;
    let squarings = (norm / theta13).log2().ceil().max(0.0) as i32;
    let scaled = a * c(2f64.powi(-squarings));
    let mut x = pade13(&scaled)?;
    for _ in 0..squarings {
        x = matmul(&x, &x);
    }
    if !is_finite(&x) {
        return Err(Error::NonFinite("matrix exponential"));
    }
    Ok(x)
}

fn pade_low(a: &CMat, b: &[f64]) -> Result<CMat> {
    let n = a.nrows();
    let eye = identity(n);
    let a2 = matmul(a, a);
    // powers A^0, A^2, A^4, ...
    let mut even = vec![eye];
    for _ in 1..b.len() / 2 {
        let next = matmul(even.last().expect("nonempty"), &a2);
        even.push(next);
    }
    let mut u_inner = CMat::zeros(n, n);
    let mut v = CMat::zeros(n, n);
    for (k, p) in even.iter().enumerate() {
        u_inner += p * c(b[2 * k + 1]);
        v += p * c(b[2 * k]);
    }
    let u = matmul(a, &u_inner);
    solve(&(&v - &u), &(&v + &u))
}

fn pade13(a: &CMat) -> Result<CMat> {
    let b = &PADE13;
    let n = a.nrows();
    let eye = identity(n);
    let a2 = matmul(a, a);
    let a4 = matmul(&a2, &a2);
    let a6 = matmul(&a4, &a2);

    let w1 = &a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]);
    let w = matmul(&a6, &w1) + &a6 * c(b[7]) + &a4 * c(b[5]) + &a2 * c(b[3]) + &eye * c(b[1]);
    let u = matmul(a, &w);

    let z1 = &a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]);
    let v = matmul(&a6, &z1) + &a6 * c(b[6]) + &a4 * c(b[4]) + &a2 * c(b[2]) + &eye * c(b[0]);

    solve(&(&v - &u), &(&v + &u))
}

/// Principal square root via the complex Schur form.
///
/// Requires every eigenvalue to lie in the open right half-plane, which is
/// the situation for operators associated with coercive forms.
pub fn sqrtm_principal(a: &CMat) -> Result<CMat> {
    let n = ensure_square(a)?;
    if !is_finite(a) {
        return Err(Error::NonFinite("square root argument"));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::NoConvergence("Schur decomposition".into()))?;
    let (q, t) = schur.unpack();

    let min_re = (0..n).map(|i| t[(i, i)].re).fold(f64::INFINITY, f64::min);
    let scale = norm1(a).max(f64::MIN_POSITIVE);
    if !(min_re > 1e-14 * scale) {
        return Err(Error::SpectrumNotSectorial { min_re });
    }

    let mut r = CMat::zeros(n, n);
    for j in 0..n {
        r[(j, j)] = t[(j, j)].sqrt();
        for i in (0..j).rev() {
            let mut acc = t[(i, j)];
            for k in i + 1..j {
                acc -= r[(i, k)] * r[(k, j)];
            }
            r[(i, j)] = acc / (r[(i, i)] + r[(j, j)]);
        }
    }
    Ok(matmul3(&q, &r, &q.adjoint()))
}
