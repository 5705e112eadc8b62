//! Minimal condition number of a contraction metric.
//!
//! For a slack map `L` (discrete: `P − T*PT`, continuous: `−B*P − PB`) the
//! search is `min κ` subject to `I ≼ P ≼ κI`, `L(P) ≽ 0`. The barrier engine
//! follows the central path; every centered iterate gives a certified upper
//! bound (the condition number of `P`) and a dual lower bound built from the
//! inverse slack.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::lmi::{signed_traces, Barrier, Block, HermBasis, Linear, Problem, Term};
use super::symmetry::{is_real, symmetry_classes};
use crate::numkit::{
    complex_null_space, cond_pd, eigenvalues, hermitian_eigen, hermitian_part, min_eig, op_norm,
    orthogonal_complement, real_null_space, Operator,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Dynamics {
    Discrete,
    /// Generator shifted by the rate: `L(P) = −(B*P + PB)`, `B = A − aI`.
    Continuous,
}

#[derive(Debug)]
pub(crate) enum StructureError {
    /// A unimodular (or imaginary-axis) eigenvalue with a nontrivial Jordan block.
    DefectivePeriphery,
}

/// The LMI family of one operator, with symmetry and facial reduction applied.
pub(crate) struct MetricLmi {
    pub n: usize,
    terms: Vec<Term>,
    compressed_terms: Vec<Term>,
    compression: Option<Operator>,
    pub basis: HermBasis,
}

impl MetricLmi {
    pub fn new(op: &Operator, dynamics: Dynamics) -> Result<Self, StructureError> {
        let n = op.nrows();
        let terms = match dynamics {
            Dynamics::Discrete => vec![
                Term::new(1.0, None, None),
                Term::new(-1.0, Some(op.clone()), Some(op.clone())),
            ],
            Dynamics::Continuous => vec![
                Term::new(-1.0, Some(op.clone()), None),
                Term::new(-1.0, None, Some(op.clone())),
            ],
        };
        let class = symmetry_classes(op, dynamics == Dynamics::Discrete);
        let mut basis = HermBasis::structured(n, is_real(op), &class);
        let periph = peripheral_eigenvectors(op, dynamics)?;
        let mut compression = None;
        let mut compressed_terms = terms.clone();
        if !periph.is_empty() {
            // L(P) x = 0 for every peripheral eigenvector x: K P x = 0.
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for (k, x) in &periph {
                let cols: Vec<nalgebra::DVector<Complex64>> = basis
                    .elems
                    .iter()
                    .map(|e| {
                        let mut bx = nalgebra::DVector::<Complex64>::zeros(n);
                        for &(r, c, u) in e {
                            bx[r] += u * x[c];
                        }
                        k * bx
                    })
                    .collect();
                for i in 0..n {
                    rows.push(cols.iter().map(|v| v[i].re).collect());
                    rows.push(cols.iter().map(|v| v[i].im).collect());
                }
            }
            let g = DMatrix::from_fn(rows.len(), basis.len(), |i, j| rows[i][j]);
            let null = real_null_space(&g, 1e-9);
            basis = basis.restrict(&null);
            let mut vp = Operator::zeros(n, periph.len());
            for (j, (_, x)) in periph.iter().enumerate() {
                vp.set_column(j, x);
            }
            let vp = orthonormalize(&vp);
            let q = orthogonal_complement(&vp);
            compressed_terms = terms.iter().map(|t| t.compressed(&q)).collect();
            compression = Some(q);
        }
        Ok(MetricLmi {
            n,
            terms,
            compressed_terms,
            compression,
            basis,
        })
    }

    #[cfg(test)]
    pub fn has_face(&self) -> bool {
        self.compression.is_some()
    }

    fn slack_dim(&self) -> usize {
        self.compression.as_ref().map_or(self.n, |q| q.ncols())
    }

    /// Full slack `L(P)`.
    #[cfg(test)]
    pub fn slack(&self, p: &Operator) -> Operator {
        let block = Block {
            dim: self.n,
            terms: self.terms.clone(),
            constant: Operator::zeros(self.n, self.n),
            extra: vec![],
        };
        block.linear_part(p)
    }

    fn slack_block(&self, extra: Vec<f64>) -> Block {
        let d = self.slack_dim();
        Block {
            dim: d,
            terms: self.compressed_terms.clone(),
            constant: Operator::zeros(d, d),
            extra,
        }
    }

    fn with_slack(&self, mut blocks: Vec<Block>, extra: Vec<f64>) -> Vec<Block> {
        if self.slack_dim() > 0 {
            blocks.push(self.slack_block(extra));
        }
        blocks
    }

    fn compressed_slack(&self, p: &Operator) -> Operator {
        self.slack_block(vec![]).linear_part(p)
    }

    /// Rigorous lower bound on the optimal κ from a PSD dual matrix `z` on the slack.
    fn dual_bound(&self, w: &Operator) -> f64 {
        let z = match &self.compression {
            Some(q) => q * w * q.adjoint(),
            None => w.clone(),
        };
        let mut g = Operator::zeros(self.n, self.n);
        for t in &self.terms {
            let yz = match &t.y {
                Some(y) => y * &z,
                None => z.clone(),
            };
            let yzx = match &t.x {
                Some(x) => yz * x.adjoint(),
                None => yz,
            };
            g += yzx * Complex64::new(t.coef, 0.0);
        }
        let (neg, pos) = signed_traces(&hermitian_part(&g));
        if pos > 0.0 {
            (neg / pos).max(1.0)
        } else {
            f64::INFINITY
        }
    }
}

fn orthonormalize(v: &Operator) -> Operator {
    let (vals, vecs) = hermitian_eigen(&(v * v.adjoint()));
    let top = vals.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..vals.len())
        .filter(|&k| vals[k] > 1e-10 * top.max(1e-300))
        .collect();
    Operator::from_fn(v.nrows(), keep.len(), |i, j| vecs[(i, keep[j])])
}

/// Peripheral eigenvectors paired with the map `K` such that feasibility forces `K P x = 0`.
fn peripheral_eigenvectors(
    op: &Operator,
    dynamics: Dynamics,
) -> Result<Vec<(Operator, nalgebra::DVector<Complex64>)>, StructureError> {
    let n = op.nrows();
    let Ok(ev) = eigenvalues(op) else {
        return Ok(Vec::new());
    };
    let scale = op_norm(op).max(1.0);
    let on_boundary = |z: &Complex64| match dynamics {
        Dynamics::Discrete => (z.norm() - 1.0).abs() <= 1e-9 * scale,
        Dynamics::Continuous => z.re.abs() <= 1e-9 * scale,
    };
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for z in ev.iter().filter(|z| on_boundary(z)) {
        match clusters
            .iter_mut()
            .find(|(c, _)| (c - z).norm() < 1e-6 * scale)
        {
            Some((_, m)) => *m += 1,
            None => clusters.push((*z, 1)),
        }
    }
    let mut out = Vec::new();
    for (lambda, mult) in clusters {
        let shifted = op - Operator::identity(n, n) * lambda;
        let null = complex_null_space(&shifted, 1e-7 * scale);
        if null.ncols() < mult {
            return Err(StructureError::DefectivePeriphery);
        }
        let k = match dynamics {
            Dynamics::Discrete => Operator::identity(n, n) - op.adjoint() * lambda,
            Dynamics::Continuous => op.adjoint() + Operator::identity(n, n) * lambda,
        };
        for j in 0..null.ncols() {
            out.push((k.clone(), null.column(j).into_owned()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RunStatus {
    Converged,
    Accepted,
    Rejected,
    Infeasible,
    IterationLimit,
    Stalled,
}

#[derive(Debug, Clone)]
pub(crate) struct KappaOptions {
    pub tol_gap: f64,
    pub max_newton: usize,
    /// Stop as soon as a certificate with condition number at most this is found.
    pub accept_at: Option<f64>,
    /// Stop as soon as the lower bound exceeds this.
    pub reject_above: Option<f64>,
    pub initial: Option<Operator>,
}

impl KappaOptions {
    pub fn new(tol_gap: f64, max_newton: usize) -> Self {
        KappaOptions {
            tol_gap,
            max_newton,
            accept_at: None,
            reject_above: None,
            initial: None,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct KappaRun {
    /// Normalized certificate (`λmin = 1`) and its condition number.
    pub best: Option<(Operator, f64)>,
    pub lower: f64,
    pub status: RunStatus,
    pub newton_steps: usize,
}

const MU: f64 = 12.0;

/// Find a strictly feasible point of `P ≻ 0`, `L(P) ≻ 0` by maximizing a common margin.
fn phase_one(
    lmi: &MetricLmi,
    start: &Operator,
    budget: usize,
    used: &mut usize,
) -> Result<Vec<f64>, RunStatus> {
    let n = lmi.n;
    let m = lmi.basis.len();
    if m == 0 {
        return Err(RunStatus::Infeasible);
    }
    let prob = Problem {
        basis: lmi.basis.clone(),
        blocks: lmi.with_slack(
            vec![Block {
                dim: n,
                terms: vec![Term::new(1.0, None, None)],
                constant: Operator::zeros(n, n),
                extra: vec![-1.0],
            }],
            vec![-1.0],
        ),
        linear: vec![Linear {
            on_basis: lmi
                .basis
                .elems
                .iter()
                .map(|e| {
                    -e.iter()
                        .filter(|(r, c, _)| r == c)
                        .map(|(_, _, u)| u.re)
                        .sum::<f64>()
                })
                .collect(),
            on_extra: vec![0.0],
            constant: n as f64,
        }],
        n_extra: 1,
        objective: vec![-1.0],
    };
    let mut y = lmi.basis.coords(start);
    let mut p = lmi.basis.assemble(&y);
    let mut tr = p.trace().re;
    if !(tr > 1e-12) {
        y = lmi.basis.coords(&Operator::identity(n, n));
        p = lmi.basis.assemble(&y);
        tr = p.trace().re;
        if !(tr > 1e-12) {
            return Err(RunStatus::Infeasible);
        }
    }
    let scale = 0.5 * n as f64 / tr;
    y.iter_mut().for_each(|v| *v *= scale);
    p *= Complex64::new(scale, 0.0);
    let margin = min_eig(&p).min(min_eig(&lmi.compressed_slack(&p)));
    if margin > 0.0 {
        return Ok(y);
    }
    let mut x = y;
    x.push(margin - 0.1 * (1.0 + margin.abs()));
    let mut bar = Barrier::new(&prob, x);
    bar.initial_t(1e-8);
    let nu = prob.nu();
    loop {
        let mut found = false;
        let report = bar.center(60, &mut |x: &[f64]| {
            found = x[m] > 0.0;
            found
        });
        *used += report.steps;
        if found || bar.x[m] > 0.0 {
            return Ok(bar.x[..m].to_vec());
        }
        if bar.x[m] + nu / bar.t < 0.0 {
            return Err(RunStatus::Infeasible);
        }
        if report.stalled {
            return Err(RunStatus::Stalled);
        }
        if *used >= budget {
            return Err(RunStatus::IterationLimit);
        }
        if bar.t > 1e16 {
            return Err(RunStatus::Stalled);
        }
        bar.t *= MU;
    }
}

/// Barrier path-following on `min κ`.
pub(crate) fn minimize_kappa(lmi: &MetricLmi, opts: &KappaOptions) -> KappaRun {
    let n = lmi.n;
    let m = lmi.basis.len();
    let mut used = 0usize;
    let mut run = KappaRun {
        best: None,
        lower: 1.0,
        status: RunStatus::Stalled,
        newton_steps: 0,
    };
    let start = opts
        .initial
        .clone()
        .unwrap_or_else(|| Operator::identity(n, n));
    let y0 = match phase_one(lmi, &start, opts.max_newton, &mut used) {
        Ok(y) => y,
        Err(status) => {
            run.status = status;
            run.newton_steps = used;
            if status == RunStatus::Infeasible {
                run.lower = f64::INFINITY;
            }
            return run;
        }
    };
    let p0 = lmi.basis.assemble(&y0);
    let lo = min_eig(&p0);
    let s = 2.0 / lo;
    let mut x: Vec<f64> = y0.iter().map(|v| v * s).collect();
    let tau0 = 1.5 * crate::numkit::max_eig(&p0) * s;
    x.push(tau0);
    record(lmi, &p0, &mut run);
    if decided(&mut run, opts) {
        run.newton_steps = used;
        return run;
    }
    let prob = Problem {
        basis: lmi.basis.clone(),
        blocks: lmi.with_slack(
            vec![
                Block {
                    dim: n,
                    terms: vec![Term::new(1.0, None, None)],
                    constant: -Operator::identity(n, n),
                    extra: vec![0.0],
                },
                Block {
                    dim: n,
                    terms: vec![Term::new(-1.0, None, None)],
                    constant: Operator::zeros(n, n),
                    extra: vec![1.0],
                },
            ],
            vec![0.0],
        ),
        linear: vec![],
        n_extra: 1,
        objective: vec![1.0],
    };
    let nu = prob.nu();
    let mut bar = Barrier::new(&prob, x);
    bar.initial_t(1e-6 / tau0);
    let mut stalls = 0;
    loop {
        let report = bar.center(80, &mut |_| false);
        used += report.steps;
        let p = lmi.basis.assemble(&bar.x[..m]);
        record(lmi, &p, &mut run);
        let slack = prob
            .block_values(&bar.x)
            .pop()
            .filter(|_| lmi.slack_dim() > 0);
        if let Some(ch) = slack.and_then(nalgebra::Cholesky::new) {
            let w = ch.inverse();
            let lb = lmi.dual_bound(&w);
            if lb.is_finite() && lb > run.lower {
                run.lower = lb;
            }
        }
        if decided(&mut run, opts) {
            break;
        }
        let best = run.best.as_ref().map_or(f64::INFINITY, |b| b.1);
        if nu / bar.t <= opts.tol_gap * best || (best - run.lower) <= opts.tol_gap * best {
            run.status = RunStatus::Converged;
            break;
        }
        if report.stalled {
            stalls += 1;
            if stalls >= 2 {
                run.status = RunStatus::Stalled;
                break;
            }
        }
        if used >= opts.max_newton {
            run.status = RunStatus::IterationLimit;
            break;
        }
        bar.t *= MU;
    }
    run.newton_steps = used;
    run
}

fn record(lmi: &MetricLmi, p: &Operator, run: &mut KappaRun) {
    let lo = min_eig(p);
    if !(lo > 0.0) {
        return;
    }
    if min_eig(&lmi.compressed_slack(p)) < 0.0 {
        return;
    }
    let pn = p / Complex64::new(lo, 0.0);
    let Ok(k) = cond_pd(&pn) else { return };
    if run.best.as_ref().is_none_or(|b| k < b.1) {
        run.best = Some((hermitian_part(&pn), k));
    }
}

fn decided(run: &mut KappaRun, opts: &KappaOptions) -> bool {
    if let (Some(a), Some(b)) = (opts.accept_at, run.best.as_ref()) {
        if b.1 <= a {
            run.status = RunStatus::Accepted;
            return true;
        }
    }
    if let Some(r) = opts.reject_above {
        if run.lower > r {
            run.status = RunStatus::Rejected;
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::from_real_rows;

    fn solve(t: &Operator) -> KappaRun {
        let lmi = MetricLmi::new(t, Dynamics::Discrete).unwrap();
        minimize_kappa(&lmi, &KappaOptions::new(1e-9, 400))
    }

    #[test]
    fn nilpotent_two_by_two() {
        let t = from_real_rows(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        let run = solve(&t);
        let (_, k) = run.best.unwrap();
        assert!((k - 4.0).abs() < 1e-6, "kappa {k}");
        assert!(run.lower <= k + 1e-9);
        assert!(run.lower > 4.0 - 1e-6, "lower {}", run.lower);
    }

    #[test]
    fn rotation_face_is_handled() {
        // conjugated rotation: periphery on the unit circle
        let r = from_real_rows(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let s = from_real_rows(2, 2, &[1.0, 3.0, 0.0, 1.0]);
        let si = crate::numkit::inverse(&s).unwrap();
        let t = &s * r * si;
        let run = solve(&t);
        let (p, k) = run.best.expect("certificate");
        let lmi = MetricLmi::new(&t, Dynamics::Discrete).unwrap();
        assert!(lmi.has_face());
        assert!(min_eig(&lmi.slack(&p)) > -1e-9 * k);
        // norm of powers bounds from below
        let mut best_pow = 1.0f64;
        let mut pw = t.clone();
        for _ in 0..8 {
            best_pow = best_pow.max(op_norm(&pw));
            pw = &pw * &t;
        }
        assert!(k >= best_pow * best_pow - 1e-6);
    }

    #[test]
    fn jordan_at_one_is_defective() {
        let t = from_real_rows(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(MetricLmi::new(&t, Dynamics::Discrete).is_err());
    }
}
