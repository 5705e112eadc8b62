//! Single operators: `T*PT ≼ P`.

use nalgebra::DVector;
use num_complex::Complex64;

use super::solver::{minimize_kappa, Dynamics, KappaOptions, MetricLmi, RunStatus};
use super::{ConstantResult, MetricCertificate, SimError, Verdict};
use crate::numkit::{
    check_square, op_norm, spectral_radius, stein_solve, HermitianForm, Operator, TolerancePolicy,
};

/// `max_{1≤n≤N} ‖Tⁿ‖`.
pub fn power_lower_bound(t: &Operator, n: usize) -> Result<f64, SimError> {
    check_square(t)?;
    if n == 0 {
        return Err(SimError::InvalidArgument("N must be at least 1".into()));
    }
    let mut best = 0.0f64;
    let mut pw = t.clone();
    for k in 1..=n {
        let v = op_norm(&pw);
        best = best.max(v);
        if v == 0.0 {
            break;
        }
        if k < n {
            pw = &pw * t;
        }
    }
    Ok(best)
}

/// Lower bracket `sup_n ‖Tⁿ‖` used internally: exact once some power has norm
/// at most one, otherwise probed along `n = 2^j` to catch polynomial growth.
pub(crate) fn power_bracket(t: &Operator) -> f64 {
    let mut best = 1.0f64;
    let mut pw = t.clone();
    for _ in 0..64 {
        let v = op_norm(&pw);
        if !v.is_finite() {
            return f64::INFINITY;
        }
        best = best.max(v);
        if v <= 1.0 {
            return best;
        }
        pw = &pw * t;
    }
    // pw = T^65; continue along T^{65·2^j}
    for _ in 0..34 {
        pw = &pw * &pw;
        let v = op_norm(&pw);
        if !v.is_finite() {
            return f64::INFINITY;
        }
        best = best.max(v);
        if v <= 1.0 {
            break;
        }
    }
    best
}

/// `P = Σ_{n<N} (T*)ⁿTⁿ` summed by doubling until `‖T^N‖² ≤ tol_psd`.
pub fn neumann_certificate(
    t: &Operator,
    tol: &TolerancePolicy,
) -> Result<MetricCertificate, SimError> {
    let n = check_square(t)?;
    let r = spectral_radius(t)?;
    if r >= 1.0 {
        return Err(SimError::RadiusNotLessThanOne { radius: r });
    }
    let mut p = Operator::identity(n, n);
    let mut tk = t.clone();
    for _ in 0..80 {
        let nrm = op_norm(&tk);
        if nrm * nrm <= tol.tol_psd {
            break;
        }
        p = &p + tk.adjoint() * &p * &tk;
        tk = &tk * &tk;
        if !p.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(SimError::Num(crate::numkit::NumError::NonFinite));
        }
    }
    MetricCertificate::discrete(&p, t)
}

fn discrete_lmi(t: &Operator) -> Option<MetricLmi> {
    MetricLmi::new(t, Dynamics::Discrete).ok()
}

fn initial_metric(t: &Operator, r: f64) -> Option<Operator> {
    if r < 1.0 - 1e-6 {
        stein_solve(t, &Operator::identity(t.nrows(), t.nrows())).ok()
    } else {
        None
    }
}

/// Search for `P` with `I ≼ P ≼ κI` and `T*PT ≼ P`.
///
/// `Ok(None)` means infeasible (certified by a dual bound or a spectral/Jordan
/// obstruction) or a stalled search; `BudgetExceeded` means the Newton budget ran
/// out first.
pub fn contraction_feasible(
    t: &Operator,
    kappa: f64,
    tol: &TolerancePolicy,
) -> Result<Option<HermitianForm>, SimError> {
    let n = check_square(t)?;
    tol.validate()?;
    if !(kappa >= 1.0) {
        return Err(SimError::InvalidArgument(format!(
            "kappa must be at least 1, got {kappa}"
        )));
    }
    let nrm = op_norm(t);
    if nrm * nrm - 1.0 <= tol.tol_psd {
        return Ok(Some(HermitianForm::identity(n)));
    }
    let r = spectral_radius(t)?;
    if r > 1.0 + tol.tol_rel {
        return Ok(None);
    }
    let lower = power_bracket(t);
    if lower > kappa * (1.0 + tol.tol_psd) {
        return Ok(None);
    }
    let Some(lmi) = discrete_lmi(t) else {
        return Ok(None);
    };
    let mut opts = KappaOptions::new(tol.tol_psd * 0.1, tol.max_iter);
    opts.accept_at = Some(kappa * (1.0 + tol.tol_psd));
    opts.reject_above = Some(kappa * (1.0 + tol.tol_psd));
    opts.initial = initial_metric(t, r);
    let run = minimize_kappa(&lmi, &opts);
    match run.status {
        RunStatus::Accepted => {
            let (p, _) = run.best.expect("accepted run carries a certificate");
            Ok(Some(HermitianForm::from_hermitian_part(&p)))
        }
        RunStatus::IterationLimit => Err(SimError::BudgetExceeded {
            iterations: run.newton_steps,
        }),
        _ => Ok(None),
    }
}

/// `C(T) = √κ*` with the minimal condition number of a contraction metric.
pub fn similarity_constant(
    t: &Operator,
    kappa_max: f64,
    tol: &TolerancePolicy,
) -> Result<ConstantResult, SimError> {
    let n = check_square(t)?;
    tol.validate()?;
    if !(kappa_max >= 1.0) {
        return Err(SimError::InvalidArgument(format!(
            "kappa_max must be at least 1, got {kappa_max}"
        )));
    }
    let r = spectral_radius(t)?;
    if r > 1.0 + tol.tol_rel {
        return Ok(ConstantResult {
            lower_bound: f64::INFINITY,
            ..ConstantResult::refuted(Verdict::SpectralObstruction, f64::INFINITY)
        });
    }
    let nrm = op_norm(t);
    if nrm * nrm - 1.0 <= tol.tol_psd {
        let cert = MetricCertificate::discrete(&Operator::identity(n, n), t)?;
        return Ok(ConstantResult::similar(cert, 1.0));
    }
    let growth = power_bracket(t);
    if growth * growth > kappa_max {
        return Ok(ConstantResult::refuted(
            Verdict::NotSimilarWithinBudget,
            growth,
        ));
    }
    let Some(lmi) = discrete_lmi(t) else {
        return Ok(ConstantResult::refuted(
            Verdict::NotSimilarWithinBudget,
            growth,
        ));
    };
    let mut opts = KappaOptions::new(tol.tol_rel, tol.max_iter);
    opts.reject_above = Some(kappa_max);
    opts.initial = initial_metric(t, r);
    let run = minimize_kappa(&lmi, &opts);
    let lower = run.lower.max(growth * growth);
    match run.best {
        Some((p, k)) if k <= kappa_max * (1.0 + tol.tol_rel) => {
            let cert = MetricCertificate::discrete(&p, t)?;
            Ok(ConstantResult::similar(cert, lower))
        }
        _ => Ok(ConstantResult::refuted(
            Verdict::NotSimilarWithinBudget,
            lower.sqrt(),
        )),
    }
}

/// `max_p ‖p(T)‖ / max_k |p(z_k)|` over `z_k` equally spaced on the unit circle.
///
/// Coefficients are in ascending degree.
pub fn poly_lower_bound(
    t: &Operator,
    coeffs: &[Vec<Complex64>],
    boundary_samples: usize,
) -> Result<f64, SimError> {
    let n = check_square(t)?;
    if boundary_samples < 16 {
        return Err(SimError::InvalidArgument(format!(
            "need at least 16 boundary samples, got {boundary_samples}"
        )));
    }
    let mut best = 0.0f64;
    for (idx, p) in coeffs.iter().enumerate() {
        if p.iter().all(|c| c.norm() == 0.0) {
            return Err(SimError::ZeroPolynomial { index: idx });
        }
        let mut pt = Operator::zeros(n, n);
        for c in p.iter().rev() {
            pt = &pt * t + Operator::identity(n, n) * *c;
        }
        let circle_max = (0..boundary_samples)
            .map(|k| {
                let z = Complex64::from_polar(
                    1.0,
                    2.0 * std::f64::consts::PI * k as f64 / boundary_samples as f64,
                );
                p.iter()
                    .rev()
                    .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
                    .norm()
            })
            .fold(0.0f64, f64::max);
        if circle_max > 0.0 {
            best = best.max(op_norm(&pt) / circle_max);
        }
    }
    Ok(best)
}

/// Unit eigenvector for an eigenvalue of maximal modulus; its orbit satisfies
/// `‖Tⁿx‖ = r(T)ⁿ ≥ 1/2` for every `n ≤ n0` once `r(T) ≥ 1 − tol_rel`.
pub fn peripheral_vector(
    t: &Operator,
    n0: usize,
    tol: &TolerancePolicy,
) -> Result<DVector<Complex64>, SimError> {
    let n = check_square(t)?;
    let ev = crate::numkit::eigenvalues(t)?;
    let lambda = ev
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("nonempty spectrum");
    let r = lambda.norm();
    if r < 1.0 - tol.tol_rel {
        return Err(SimError::RadiusBelowOne { radius: r });
    }
    let shifted = t - Operator::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let k = (0..n)
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .expect("n > 0");
    let mut x = DVector::from_fn(n, |i, _| vt[(k, i)].conj());
    // fix the phase so the largest entry is real positive
    let (imax, _) = x
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .expect("n > 0");
    let phase = x[imax] / x[imax].norm();
    x /= phase;
    let _ = n0;
    Ok(x)
}
