use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;

use super::{check_square, NumError, Operator};

pub fn ensure_square(m: &Operator) -> Result<usize, NumError> {
    check_square(m)
}

pub fn hermitian_part(m: &Operator) -> Operator {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &Operator) -> (Vec<f64>, Operator) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), m.clone());
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = Operator::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &Operator) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut v: Vec<f64> = hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Smallest eigenvalue of the Hermitian part (`+∞` for an empty matrix).
pub fn min_eig(m: &Operator) -> f64 {
    hermitian_eigenvalues(m)
        .first()
        .copied()
        .unwrap_or(f64::INFINITY)
}

/// Largest eigenvalue of the Hermitian part (`−∞` for an empty matrix).
pub fn max_eig(m: &Operator) -> f64 {
    hermitian_eigenvalues(m)
        .last()
        .copied()
        .unwrap_or(f64::NEG_INFINITY)
}

/// Condition number of a positive definite Hermitian matrix.
pub fn cond_pd(m: &Operator) -> Result<f64, NumError> {
    let ev = hermitian_eigenvalues(m);
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if !(lo > 0.0) {
        return Err(NumError::NotPositiveDefinite { min_eig: lo });
    }
    Ok(hi / lo)
}

/// Largest singular value.
pub fn op_norm(m: &Operator) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0f64, |a, &s| a.max(s))
}

/// Complex Schur form `m = Q R Q*` with `R` upper triangular.
///
/// Shift-like matrices can stall the QR iteration; those are retried on a fixed
/// unitary conjugate `V*mV`, returning `Q = VQ'`.
pub fn schur(m: &Operator) -> Result<(Operator, Operator), NumError> {
    let n = check_square(m)?;
    let (q, mut r) = match Schur::try_new(m.clone(), f64::EPSILON, 2_000) {
        Some(s) => s.unpack(),
        None => {
            let v = scrambler(n);
            let s = Schur::try_new(v.adjoint() * m * &v, f64::EPSILON, 20_000)
                .ok_or(NumError::NoConvergence)?;
            let (q, r) = s.unpack();
            (v * q, r)
        }
    };
    for j in 0..r.ncols() {
        for i in j + 1..r.nrows() {
            r[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok((q, r))
}

/// Deterministic dense unitary (QR factor of a fixed complex matrix).
fn scrambler(n: usize) -> Operator {
    let g = Operator::from_fn(n, n, |i, j| {
        let x = ((i * 7 + j * 13 + 3) % 17) as f64 / 17.0 - 0.5;
        let y = ((i * 11 + j * 5 + 1) % 19) as f64 / 19.0 - 0.5;
        Complex64::new(x + if i == j { 2.0 } else { 0.0 }, y)
    });
    g.qr().q()
}

pub fn eigenvalues(m: &Operator) -> Result<Vec<Complex64>, NumError> {
    let (_, r) = schur(m)?;
    Ok((0..r.nrows()).map(|i| r[(i, i)]).collect())
}

pub fn spectral_radius(m: &Operator) -> Result<f64, NumError> {
    Ok(eigenvalues(m)?.iter().fold(0.0f64, |a, z| a.max(z.norm())))
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(m: &Operator) -> Result<f64, NumError> {
    Ok(eigenvalues(m)?
        .iter()
        .fold(f64::NEG_INFINITY, |a, z| a.max(z.re)))
}

/// Largest eigenvalue of the Hermitian part, i.e. the growth rate of `e^{tA}` at zero.
pub fn numerical_abscissa(m: &Operator) -> f64 {
    max_eig(m)
}

/// `a·b` through real products of the real and imaginary parts; purely real
/// factors skip the imaginary work.
pub fn matmul(a: &Operator, b: &Operator) -> Operator {
    let (ar, ai) = split_parts(a);
    let (br, bi) = split_parts(b);
    let (re, im) = match (ai, bi) {
        (None, None) => (&ar * &br, None),
        (Some(ai), None) => (&ar * &br, Some(&ai * &br)),
        (None, Some(bi)) => (&ar * &br, Some(&ar * &bi)),
        (Some(ai), Some(bi)) => (&ar * &br - &ai * &bi, Some(&ar * &bi + &ai * &br)),
    };
    match im {
        Some(im) => re.zip_map(&im, Complex64::new),
        None => re.map(|x| Complex64::new(x, 0.0)),
    }
}

fn split_parts(m: &Operator) -> (DMatrix<f64>, Option<DMatrix<f64>>) {
    let re = m.map(|z| z.re);
    let im = m.iter().any(|z| z.im != 0.0).then(|| m.map(|z| z.im));
    (re, im)
}

pub fn kron(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

pub fn kron_all(ops: &[Operator]) -> Operator {
    let mut it = ops.iter();
    let first = it
        .next()
        .cloned()
        .unwrap_or_else(|| Operator::identity(1, 1));
    it.fold(first, |acc, m| acc.kronecker(m))
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn matexp(a: &Operator) -> Result<Operator, NumError> {
    check_square(a)?;
    let e = a.exp();
    if e.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(NumError::NonFinite);
    }
    Ok(e)
}

pub fn matrix_power(m: &Operator, k: u64) -> Operator {
    let n = m.nrows();
    let mut result = Operator::identity(n, n);
    let mut base = m.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

pub fn inverse(m: &Operator) -> Result<Operator, NumError> {
    check_square(m)?;
    m.clone().try_inverse().ok_or(NumError::Singular)
}

/// Solve `B* X + X B = −W` by Bartels–Stewart on the complex Schur form of `B`.
pub fn lyap_solve(b: &Operator, w: &Operator) -> Result<Operator, NumError> {
    let n = check_square(b)?;
    if w.nrows() != n || w.ncols() != n {
        return Err(NumError::DimensionMismatch {
            expected: n,
            got: w.nrows(),
        });
    }
    let (q, r) = schur(b)?;
    let abscissa = (0..n)
        .map(|i| r[(i, i)].re)
        .fold(f64::NEG_INFINITY, f64::max);
    if abscissa >= 0.0 {
        return Err(NumError::Unstable { abscissa });
    }
    let cmat = q.adjoint() * w * &q;
    let scale = r.norm().max(1.0);
    let mut y = Operator::zeros(n, n);
    for j in 0..n {
        let mut rhs: DVector<Complex64> = -cmat.column(j).into_owned();
        for k in 0..j {
            let rkj = r[(k, j)];
            for i in 0..n {
                rhs[i] -= y[(i, k)] * rkj;
            }
        }
        for i in 0..n {
            let mut acc = rhs[i];
            for l in 0..i {
                acc -= r[(l, i)].conj() * y[(l, j)];
            }
            let d = r[(i, i)].conj() + r[(j, j)];
            if d.norm() <= 1e-14 * scale {
                return Err(NumError::SingularPencil { gap: d.norm() });
            }
            y[(i, j)] = acc / d;
        }
    }
    Ok(hermitian_part_if_square(&(&q * y * q.adjoint()), w))
}

/// Solve `X − T* X T = W` on the complex Schur form of `T`.
pub fn stein_solve(t: &Operator, w: &Operator) -> Result<Operator, NumError> {
    let n = check_square(t)?;
    if w.nrows() != n || w.ncols() != n {
        return Err(NumError::DimensionMismatch {
            expected: n,
            got: w.nrows(),
        });
    }
    let (q, r) = schur(t)?;
    let cmat = q.adjoint() * w * &q;
    let mut y = Operator::zeros(n, n);
    for j in 0..n {
        let mut acc_col = DVector::<Complex64>::zeros(n);
        for k in 0..j {
            let rkj = r[(k, j)];
            for i in 0..n {
                acc_col[i] += y[(i, k)] * rkj;
            }
        }
        // rhs = c_j + R* acc_col
        let mut rhs: DVector<Complex64> = cmat.column(j).into_owned();
        for i in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for l in 0..=i {
                s += r[(l, i)].conj() * acc_col[l];
            }
            rhs[i] += s;
        }
        let rjj = r[(j, j)];
        for i in 0..n {
            let mut acc = rhs[i];
            for l in 0..i {
                acc += rjj * r[(l, i)].conj() * y[(l, j)];
            }
            let d = Complex64::new(1.0, 0.0) - rjj * r[(i, i)].conj();
            if d.norm() <= 1e-14 {
                return Err(NumError::SingularPencil { gap: d.norm() });
            }
            y[(i, j)] = acc / d;
        }
    }
    Ok(hermitian_part_if_square(&(&q * y * q.adjoint()), w))
}

fn hermitian_part_if_square(x: &Operator, w: &Operator) -> Operator {
    if (w - w.adjoint()).norm() <= 1e-12 * w.norm().max(1.0) {
        hermitian_part(x)
    } else {
        x.clone()
    }
}

/// Orthonormal basis (columns) of the null space of a real matrix.
pub fn real_null_space(g: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (rows, cols) = g.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    let padded_rows = rows.max(cols);
    let mut a = DMatrix::<f64>::zeros(padded_rows, cols);
    a.view_mut((0, 0), (rows, cols)).copy_from(g);
    let svd = SVD::new(a, false, true);
    let vt = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let cut = rel_tol * smax.max(1.0);
    let keep: Vec<usize> = (0..cols)
        .filter(|&k| svd.singular_values[k] <= cut)
        .collect();
    DMatrix::from_fn(cols, keep.len(), |i, j| vt[(keep[j], i)])
}

/// Orthonormal basis (columns) of the null space of a complex square matrix.
pub fn complex_null_space(m: &Operator, abs_tol: f64) -> Operator {
    let n = m.ncols();
    let svd = SVD::new(m.clone(), false, true);
    let vt = svd.v_t.expect("requested V");
    let keep: Vec<usize> = (0..n)
        .filter(|&k| svd.singular_values[k] <= abs_tol)
        .collect();
    Operator::from_fn(n, keep.len(), |i, j| vt[(keep[j], i)].conj())
}

/// Unit vector spanning the column of `q` orthogonal complement; returns an orthonormal
/// basis of the complement of the column span of `v` (columns assumed orthonormal).
pub fn orthogonal_complement(v: &Operator) -> Operator {
    let n = v.nrows();
    let p = v.ncols();
    if p == 0 {
        return Operator::identity(n, n);
    }
    let proj = Operator::identity(n, n) - v * v.adjoint();
    let (vals, vecs) = hermitian_eigen(&proj);
    let keep: Vec<usize> = (0..n).filter(|&k| vals[k] > 0.5).collect();
    Operator::from_fn(n, keep.len(), |i, j| vecs[(i, keep[j])])
}

/// `max |a_ij − b_ij|`.
pub fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}
