//! Log-det barrier engine for the metric LMIs.
//!
//! The unknown is a Hermitian `P = Σ y_i B_i` over a (usually sparse) basis plus
//! a few scalar variables. Every block is affine:
//! `F(y, z) = C + Σ_e a_e z_e I + Σ_k c_k X_k* P Y_k`.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::numkit::{hermitian_eigen, hermitian_part, matmul, Operator};

type Entry = (usize, usize, Complex64);

/// Orthonormal (Frobenius) basis of a subspace of Hermitian `n×n` matrices.
#[derive(Debug, Clone)]
pub(crate) struct HermBasis {
    pub n: usize,
    pub elems: Vec<Vec<Entry>>,
}

impl HermBasis {
    /// Hermitian matrices supported on pairs with equal class label.
    pub fn structured(n: usize, real: bool, class: &[usize]) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut elems = Vec::new();
        for a in 0..n {
            for b in a..n {
                if class[a] != class[b] {
                    continue;
                }
                if a == b {
                    elems.push(vec![(a, a, Complex64::new(1.0, 0.0))]);
                } else {
                    elems.push(vec![
                        (a, b, Complex64::new(s, 0.0)),
                        (b, a, Complex64::new(s, 0.0)),
                    ]);
                    if !real {
                        elems.push(vec![
                            (a, b, Complex64::new(0.0, s)),
                            (b, a, Complex64::new(0.0, -s)),
                        ]);
                    }
                }
            }
        }
        HermBasis { n, elems }
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn assemble(&self, y: &[f64]) -> Operator {
        let mut p = Operator::zeros(self.n, self.n);
        for (e, &w) in self.elems.iter().zip(y) {
            if w == 0.0 {
                continue;
            }
            for &(r, c, u) in e {
                p[(r, c)] += u * w;
            }
        }
        p
    }

    /// Coordinates of the orthogonal projection of `p` onto the span.
    pub fn coords(&self, p: &Operator) -> Vec<f64> {
        self.elems.iter().map(|e| trace_with(e, p).re).collect()
    }

    /// Sub-basis spanned by the columns of `null` (coordinates in this basis).
    pub fn restrict(&self, null: &DMatrix<f64>) -> HermBasis {
        let mut elems = Vec::with_capacity(null.ncols());
        for k in 0..null.ncols() {
            let mut m = Operator::zeros(self.n, self.n);
            for (i, e) in self.elems.iter().enumerate() {
                let w = null[(i, k)];
                if w == 0.0 {
                    continue;
                }
                for &(r, c, u) in e {
                    m[(r, c)] += u * w;
                }
            }
            let mut entries = Vec::new();
            for r in 0..self.n {
                for c in 0..self.n {
                    if m[(r, c)].norm() > 1e-15 {
                        entries.push((r, c, m[(r, c)]));
                    }
                }
            }
            elems.push(entries);
        }
        HermBasis { n: self.n, elems }
    }

    fn is_real(&self) -> bool {
        self.elems.iter().flatten().all(|e| e.2.im == 0.0)
    }

    fn max_nnz(&self) -> usize {
        self.elems.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// `tr(B M)` for sparse `B`.
fn trace_with(b: &[Entry], m: &Operator) -> Complex64 {
    b.iter().fold(Complex64::new(0.0, 0.0), |acc, &(p, q, u)| {
        acc + u * m[(q, p)]
    })
}

/// `c · X* P Y`; `None` stands for the identity.
#[derive(Debug, Clone)]
pub(crate) struct Term {
    pub coef: f64,
    pub x: Option<Operator>,
    pub y: Option<Operator>,
}

impl Term {
    pub fn new(coef: f64, x: Option<Operator>, y: Option<Operator>) -> Self {
        Term { coef, x, y }
    }

    fn apply(&self, p: &Operator) -> Operator {
        let py = match &self.y {
            Some(y) => matmul(p, y),
            None => p.clone(),
        };
        let xpy = match &self.x {
            Some(x) => matmul(&x.adjoint(), &py),
            None => py,
        };
        xpy * Complex64::new(self.coef, 0.0)
    }

    /// Right-multiply both factors by `q`, compressing the block to `q* F q`.
    pub fn compressed(&self, q: &Operator) -> Term {
        let fold = |m: &Option<Operator>| {
            Some(match m {
                Some(m) => m * q,
                None => q.clone(),
            })
        };
        Term {
            coef: self.coef,
            x: fold(&self.x),
            y: fold(&self.y),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub dim: usize,
    pub terms: Vec<Term>,
    pub constant: Operator,
    pub extra: Vec<f64>,
}

impl Block {
    pub fn linear_part(&self, p: &Operator) -> Operator {
        let mut f = Operator::zeros(self.dim, self.dim);
        for t in &self.terms {
            f += t.apply(p);
        }
        hermitian_part(&f)
    }

    fn value(&self, p: &Operator, z: &[f64]) -> Operator {
        let mut f = &self.linear_part(p) + &self.constant;
        let shift: f64 = self.extra.iter().zip(z).map(|(a, v)| a * v).sum();
        for i in 0..self.dim {
            f[(i, i)] += Complex64::new(shift, 0.0);
        }
        f
    }
}

/// Scalar constraint `a·y + e·z + b ≥ 0`.
#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub on_basis: Vec<f64>,
    pub on_extra: Vec<f64>,
    pub constant: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub basis: HermBasis,
    pub blocks: Vec<Block>,
    pub linear: Vec<Linear>,
    pub n_extra: usize,
    /// Objective coefficients on the scalar variables (minimized).
    pub objective: Vec<f64>,
}

fn is_real(m: &Operator) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

fn logdet_from_diag(diag: impl Iterator<Item = f64>) -> Option<f64> {
    let mut logdet = 0.0;
    for d in diag {
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        logdet += 2.0 * d.ln();
    }
    Some(logdet)
}

fn logdet(f: &Operator) -> Option<f64> {
    if is_real(f) {
        let l = Cholesky::new(f.map(|z| z.re))?.unpack();
        logdet_from_diag(l.diagonal().iter().copied())
    } else {
        let l = Cholesky::new(f.clone())?.unpack();
        logdet_from_diag(l.diagonal().iter().map(|z| z.re))
    }
}

/// `F⁻¹` for positive definite `F`.
fn pd_inverse(f: &Operator) -> Option<Operator> {
    if is_real(f) {
        let ch = Cholesky::new(f.map(|z| z.re))?;
        logdet_from_diag(ch.l_dirty().diagonal().iter().copied())?;
        Some(ch.inverse().map(|x| Complex64::new(x, 0.0)))
    } else {
        let ch = Cholesky::new(f.clone())?;
        logdet_from_diag(ch.l_dirty().diagonal().iter().map(|z| z.re))?;
        Some(ch.inverse())
    }
}

impl Problem {
    pub fn n_vars(&self) -> usize {
        self.basis.len() + self.n_extra
    }

    /// Barrier parameter: total barrier degree.
    pub fn nu(&self) -> f64 {
        (self.blocks.iter().map(|b| b.dim).sum::<usize>() + self.linear.len()) as f64
    }

    pub fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], &'x [f64]) {
        x.split_at(self.basis.len())
    }

    pub fn block_values(&self, x: &[f64]) -> Vec<Operator> {
        let (y, z) = self.split(x);
        let p = self.basis.assemble(y);
        self.blocks.iter().map(|b| b.value(&p, z)).collect()
    }

    fn linear_values(&self, x: &[f64]) -> Vec<f64> {
        let (y, z) = self.split(x);
        self.linear
            .iter()
            .map(|l| {
                l.constant
                    + l.on_basis.iter().zip(y).map(|(a, v)| a * v).sum::<f64>()
                    + l.on_extra.iter().zip(z).map(|(a, v)| a * v).sum::<f64>()
            })
            .collect()
    }

    fn objective_value(&self, x: &[f64]) -> f64 {
        let (_, z) = self.split(x);
        self.objective.iter().zip(z).map(|(a, v)| a * v).sum()
    }

    /// `t·obj − Σ log det F_j − Σ log s_l`, or `None` outside the domain.
    fn merit(&self, x: &[f64], t: f64) -> Option<f64> {
        let mut phi = t * self.objective_value(x);
        for f in self.block_values(x) {
            phi -= logdet(&f)?;
        }
        for s in self.linear_values(x) {
            if !(s > 0.0) {
                return None;
            }
            phi -= s.ln();
        }
        phi.is_finite().then_some(phi)
    }

    /// Gradient and Hessian of the barrier (without the objective term).
    fn derivatives(&self, x: &[f64]) -> Option<(DVector<f64>, DMatrix<f64>, Vec<Operator>)> {
        let m = self.basis.len();
        let nv = self.n_vars();
        let mut g = DVector::<f64>::zeros(nv);
        let mut h = DMatrix::<f64>::zeros(nv, nv);
        let values = self.block_values(x);
        let sparse = self.basis.max_nnz() <= 8;
        let mut inverses = Vec::with_capacity(values.len());
        for (block, f) in self.blocks.iter().zip(&values) {
            let w = pd_inverse(f)?;
            let nt = block.terms.len();
            // yw[k] = Y_k W, xs[k] = X_k* (as n×d and d×n)
            let yw: Vec<Operator> = block
                .terms
                .iter()
                .map(|t| match &t.y {
                    Some(y) => matmul(y, &w),
                    None => w.clone(),
                })
                .collect();
            let xa: Vec<Operator> = block
                .terms
                .iter()
                .map(|t| match &t.x {
                    Some(x) => x.adjoint(),
                    None => Operator::identity(block.dim, block.dim),
                })
                .collect();
            let mut mm: Vec<Vec<Operator>> = Vec::with_capacity(nt);
            for k in 0..nt {
                mm.push((0..nt).map(|k2| matmul(&yw[k], &xa[k2])).collect());
            }
            let coefs: Vec<f64> = block.terms.iter().map(|t| t.coef).collect();
            // gradient on basis
            for (i, e) in self.basis.elems.iter().enumerate() {
                let mut s = 0.0;
                for k in 0..nt {
                    s += coefs[k] * trace_with(e, &mm[k][k]).re;
                }
                g[i] -= s;
            }
            // basis × basis
            let real = self.basis.is_real() && mm.iter().flatten().all(is_real);
            if sparse && real {
                let mr: Vec<Vec<DMatrix<f64>>> = mm
                    .iter()
                    .map(|row| row.iter().map(|a| a.map(|z| z.re)).collect())
                    .collect();
                let elems: Vec<Vec<(usize, usize, f64)>> = self
                    .basis
                    .elems
                    .iter()
                    .map(|e| e.iter().map(|&(p, q, u)| (p, q, u.re)).collect())
                    .collect();
                for k in 0..nt {
                    for k2 in 0..nt {
                        let cc = coefs[k] * coefs[k2];
                        let a = &mr[k][k2];
                        let b = &mr[k2][k];
                        for i in 0..m {
                            let ei = &elems[i];
                            for l in i..m {
                                let mut acc = 0.0;
                                for &(p, q, u) in ei {
                                    for &(r, s, v) in &elems[l] {
                                        acc += u * a[(q, r)] * v * b[(s, p)];
                                    }
                                }
                                h[(i, l)] += cc * acc;
                            }
                        }
                    }
                }
            } else if sparse {
                for k in 0..nt {
                    for k2 in 0..nt {
                        let cc = coefs[k] * coefs[k2];
                        let a = &mm[k][k2];
                        let b = &mm[k2][k];
                        for i in 0..m {
                            let ei = &self.basis.elems[i];
                            for l in i..m {
                                let el = &self.basis.elems[l];
                                let mut acc = Complex64::new(0.0, 0.0);
                                for &(p, q, u) in ei {
                                    for &(r, s, v) in el {
                                        acc += u * a[(q, r)] * v * b[(s, p)];
                                    }
                                }
                                h[(i, l)] += cc * acc.re;
                            }
                        }
                    }
                }
            } else {
                for i in 0..m {
                    let bi = sparse_to_dense(&self.basis.elems[i], self.basis.n);
                    let mut z = Operator::zeros(self.basis.n, self.basis.n);
                    for k in 0..nt {
                        for k2 in 0..nt {
                            let cc = coefs[k] * coefs[k2];
                            z += matmul(&matmul(&mm[k2][k], &bi), &mm[k][k2])
                                * Complex64::new(cc, 0.0);
                        }
                    }
                    for l in i..m {
                        h[(i, l)] += trace_with(&self.basis.elems[l], &z).re;
                    }
                }
            }
            // extras
            if block.extra.iter().any(|&a| a != 0.0) {
                let w2 = matmul(&w, &w);
                let nk: Vec<Operator> = (0..nt)
                    .map(|k| matmul(&matmul(&yw[k], &w), &xa[k]))
                    .collect();
                let trw = w.trace().re;
                let trw2 = w2.trace().re;
                for (e_idx, &a) in block.extra.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let col = m + e_idx;
                    g[col] -= a * trw;
                    for i in 0..m {
                        let mut s = 0.0;
                        for k in 0..nt {
                            s += coefs[k] * trace_with(&self.basis.elems[i], &nk[k]).re;
                        }
                        h[(i, col)] += a * s;
                    }
                    for (f_idx, &b) in block.extra.iter().enumerate() {
                        if f_idx >= e_idx && b != 0.0 {
                            h[(col, m + f_idx)] += a * b * trw2;
                        }
                    }
                }
            }
            inverses.push(w);
        }
        for (l, s) in self.linear.iter().zip(self.linear_values(x)) {
            if !(s > 0.0) {
                return None;
            }
            let a: Vec<f64> = l
                .on_basis
                .iter()
                .chain(l.on_extra.iter())
                .copied()
                .collect();
            for i in 0..nv {
                g[i] -= a[i] / s;
                for j in i..nv {
                    h[(i, j)] += a[i] * a[j] / (s * s);
                }
            }
        }
        for i in 0..nv {
            for j in 0..i {
                h[(i, j)] = h[(j, i)];
            }
        }
        Some((g, h, inverses))
    }
}

fn sparse_to_dense(e: &[Entry], n: usize) -> Operator {
    let mut m = Operator::zeros(n, n);
    for &(r, c, u) in e {
        m[(r, c)] += u;
    }
    m
}

/// Solve `H d = r` for symmetric positive (semi)definite `H` with Jacobi scaling.
fn spd_solve(h: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let d: Vec<f64> = (0..n)
        .map(|i| 1.0 / h[(i, i)].abs().max(1e-300).sqrt())
        .collect();
    let mut hs = DMatrix::from_fn(n, n, |i, j| h[(i, j)] * d[i] * d[j]);
    let rs = DVector::from_fn(n, |i, _| r[i] * d[i]);
    let mut shift = 0.0;
    for _ in 0..8 {
        if let Some(ch) = Cholesky::new(hs.clone()) {
            let sol = ch.solve(&rs);
            if sol.iter().all(|v| v.is_finite()) {
                return Some(DVector::from_fn(n, |i, _| sol[i] * d[i]));
            }
        }
        let next = if shift == 0.0 { 1e-12 } else { shift * 100.0 };
        for i in 0..n {
            hs[(i, i)] += next - shift;
        }
        shift = next;
    }
    None
}

pub(crate) struct CenterReport {
    pub steps: usize,
    pub stalled: bool,
}

/// Path-following state for one problem.
pub(crate) struct Barrier<'a> {
    pub prob: &'a Problem,
    pub x: Vec<f64>,
    pub t: f64,
    pub newton_steps: usize,
    pub inverses: Vec<Operator>,
}

impl<'a> Barrier<'a> {
    pub fn new(prob: &'a Problem, x: Vec<f64>) -> Self {
        Barrier {
            prob,
            x,
            t: 1.0,
            newton_steps: 0,
            inverses: Vec::new(),
        }
    }

    /// Pick `t` minimizing the Newton decrement at the current point.
    pub fn initial_t(&mut self, floor: f64) {
        let Some((g, h, _)) = self.prob.derivatives(&self.x) else {
            return;
        };
        let m = self.prob.basis.len();
        let mut c = DVector::<f64>::zeros(self.prob.n_vars());
        for (e, &a) in self.prob.objective.iter().enumerate() {
            c[m + e] = a;
        }
        let (Some(hc), Some(hg)) = (spd_solve(&h, &c), spd_solve(&h, &g)) else {
            return;
        };
        let t = -c.dot(&hg) / c.dot(&hc);
        self.t = if t.is_finite() { t.max(floor) } else { floor };
    }

    /// Damped Newton centering; `stop` is consulted after each step.
    pub fn center(
        &mut self,
        max_steps: usize,
        stop: &mut dyn FnMut(&[f64]) -> bool,
    ) -> CenterReport {
        let m = self.prob.basis.len();
        let nv = self.prob.n_vars();
        let mut steps = 0;
        while steps < max_steps {
            let Some((g, h, inv)) = self.prob.derivatives(&self.x) else {
                return CenterReport {
                    steps,
                    stalled: true,
                };
            };
            self.inverses = inv;
            let mut grad = g;
            for (e, &a) in self.prob.objective.iter().enumerate() {
                grad[m + e] += self.t * a;
            }
            let Some(dx) = spd_solve(&h, &(-&grad)) else {
                return CenterReport {
                    steps,
                    stalled: true,
                };
            };
            let dec2 = -grad.dot(&dx);
            if !(dec2 > 0.0) || dec2 < 1e-9 {
                return CenterReport {
                    steps,
                    stalled: false,
                };
            }
            let phi0 = match self.prob.merit(&self.x, self.t) {
                Some(v) => v,
                None => {
                    return CenterReport {
                        steps,
                        stalled: true,
                    }
                }
            };
            let mut alpha = if dec2.sqrt() > 0.25 {
                1.0 / (1.0 + dec2.sqrt())
            } else {
                1.0
            };
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = (0..nv).map(|i| self.x[i] + alpha * dx[i]).collect();
                if let Some(phi) = self.prob.merit(&trial, self.t) {
                    if phi <= phi0 - 0.1 * alpha * dec2 || (phi <= phi0 && alpha < 1e-6) {
                        self.x = trial;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            steps += 1;
            self.newton_steps += 1;
            if !accepted {
                return CenterReport {
                    steps,
                    stalled: true,
                };
            }
            if stop(&self.x) {
                return CenterReport {
                    steps,
                    stalled: false,
                };
            }
            if dec2 < 1e-7 {
                return CenterReport {
                    steps,
                    stalled: false,
                };
            }
        }
        CenterReport {
            steps,
            stalled: false,
        }
    }
}

/// `(tr Λ−, tr Λ+)` of a Hermitian matrix.
pub(crate) fn signed_traces(m: &Operator) -> (f64, f64) {
    let (vals, _) = hermitian_eigen(m);
    let neg = vals.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    let pos = vals.iter().filter(|&&v| v > 0.0).sum();
    (neg, pos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structured_basis_is_orthonormal() {
        let b = HermBasis::structured(3, false, &[0, 0, 0]);
        assert_eq!(b.len(), 9);
        for i in 0..b.len() {
            for j in 0..b.len() {
                let bj = b.assemble(
                    &(0..b.len())
                        .map(|k| if k == j { 1.0 } else { 0.0 })
                        .collect::<Vec<_>>(),
                );
                let ip = trace_with(&b.elems[i], &bj).re;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn coords_recover_member() {
        let b = HermBasis::structured(3, true, &[0, 1, 0]);
        let y: Vec<f64> = (0..b.len()).map(|k| k as f64 + 0.5).collect();
        let p = b.assemble(&y);
        let back = b.coords(&p);
        for (u, v) in y.iter().zip(back) {
            assert!((u - v).abs() < 1e-14);
        }
        assert_eq!(p[(0, 1)], Complex64::new(0.0, 0.0));
    }
}
