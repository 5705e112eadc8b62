//! Generators: `(A − aI)*P + P(A − aI) ≼ 0`.

use super::discrete::similarity_constant;
use super::solver::{minimize_kappa, Dynamics, KappaOptions, MetricLmi, RunStatus};
use super::{ConstantResult, MetricCertificate, SimError, Verdict};
use crate::numkit::{
    check_square, lyap_solve, matexp, min_eig, numerical_abscissa, op_norm, real,
    spectral_abscissa, Operator, TolerancePolicy,
};

fn shifted(a: &Operator, s: f64) -> Operator {
    let n = a.nrows();
    a - Operator::identity(n, n) * real(s)
}

/// Lower bracket `sup_t ‖e^{tA}‖` over a uniform grid followed by a doubling sweep.
pub fn semigroup_power_bound(a: &Operator) -> Result<f64, SimError> {
    check_square(a)?;
    let h = 1.0 / (8.0 * op_norm(a).max(1.0));
    let step = matexp(&(a * real(h)))?;
    let mut best = 1.0f64;
    let mut pw = step.clone();
    for _ in 0..256 {
        let v = op_norm(&pw);
        if !v.is_finite() {
            return Ok(f64::INFINITY);
        }
        best = best.max(v);
        if v <= 1.0 && best > 1.0 {
            return Ok(best);
        }
        pw = &pw * &step;
    }
    for _ in 0..40 {
        pw = &pw * &pw;
        let v = op_norm(&pw);
        if !v.is_finite() {
            return Ok(f64::INFINITY);
        }
        best = best.max(v);
        if v <= 1.0 {
            break;
        }
    }
    Ok(best)
}

/// `C(𝒯) = √κ*` for `𝒯 = (e^{tA})`, minimizing `κ` subject to `A*P + PA ≼ 0`.
pub fn semigroup_constant(
    a: &Operator,
    kappa_max: f64,
    tol: &TolerancePolicy,
) -> Result<ConstantResult, SimError> {
    let n = check_square(a)?;
    tol.validate()?;
    let scale = op_norm(a).max(1.0);
    let alpha = spectral_abscissa(a)?;
    if alpha > tol.tol_rel * scale {
        return Ok(ConstantResult {
            lower_bound: f64::INFINITY,
            ..ConstantResult::refuted(Verdict::SpectralObstruction, f64::INFINITY)
        });
    }
    if numerical_abscissa(a) <= tol.tol_psd * 0.5 {
        let cert = MetricCertificate::continuous(&Operator::identity(n, n), a, 0.0)?;
        return Ok(ConstantResult::similar(cert, 1.0));
    }
    let growth = semigroup_power_bound(a)?;
    if growth * growth > kappa_max {
        return Ok(ConstantResult::refuted(
            Verdict::NotSimilarWithinBudget,
            growth,
        ));
    }
    let Ok(lmi) = MetricLmi::new(a, Dynamics::Continuous) else {
        return Ok(ConstantResult::refuted(
            Verdict::NotSimilarWithinBudget,
            growth,
        ));
    };
    let mut opts = KappaOptions::new(tol.tol_rel, tol.max_iter);
    opts.reject_above = Some(kappa_max);
    if alpha < -1e-6 * scale {
        opts.initial = lyap_solve(a, &Operator::identity(n, n)).ok();
    }
    let run = minimize_kappa(&lmi, &opts);
    let lower = run.lower.max(growth * growth);
    match run.best {
        Some((p, k)) if k <= kappa_max * (1.0 + tol.tol_rel) => {
            let cert = MetricCertificate::continuous(&p, a, 0.0)?;
            Ok(ConstantResult::similar(cert, lower))
        }
        _ => Ok(ConstantResult::refuted(
            Verdict::NotSimilarWithinBudget,
            lower.sqrt(),
        )),
    }
}

/// Whether some `P` with `κ(P) ≤ budget` certifies rate `a`.
fn rate_feasible(a: &Operator, rate: f64, budget: f64, tol: &TolerancePolicy) -> bool {
    let n = a.nrows();
    let b = shifted(a, rate);
    if numerical_abscissa(&b) <= 0.0 {
        return true;
    }
    let scale = op_norm(&b).max(1.0);
    match spectral_abscissa(&b) {
        Ok(al) if al < -1e-9 * scale => {}
        _ => return false,
    }
    let Ok(lmi) = MetricLmi::new(&b, Dynamics::Continuous) else {
        return false;
    };
    let mut opts = KappaOptions::new(tol.tol_rel, tol.max_iter);
    opts.accept_at = Some(budget * (1.0 + tol.tol_rel));
    opts.reject_above = Some(budget * (1.0 + tol.tol_rel));
    opts.initial = lyap_solve(&b, &Operator::identity(n, n)).ok();
    minimize_kappa(&lmi, &opts).status == RunStatus::Accepted
}

/// Smallest rate `a` admitting a metric with condition number at most `kappa_budget`.
///
/// Bisection between the spectral and numerical abscissas; the returned rate is feasible.
pub fn quasi_rate(a: &Operator, kappa_budget: f64, tol: &TolerancePolicy) -> Result<f64, SimError> {
    check_square(a)?;
    tol.validate()?;
    if !(kappa_budget >= 1.0) {
        return Err(SimError::InvalidArgument(format!(
            "kappa budget must be at least 1, got {kappa_budget}"
        )));
    }
    let mut lo = spectral_abscissa(a)?;
    let mut hi = numerical_abscissa(a);
    if hi < lo {
        hi = lo;
    }
    while hi - lo > tol.tol_rel {
        let mid = 0.5 * (lo + hi);
        if rate_feasible(a, mid, kappa_budget, tol) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Metric certifying `‖e^{tA}‖_Q ≤ e^{at}` for a rate `a` above the spectral abscissa.
///
/// With a base metric `P₀` for which `A − dI` is dissipative (`P₀ = I` when `A`
/// itself is dissipative) the form is `Q = P₀ − 2(a − d)X` where
/// `(A − aI)*X + X(A − aI) = −P₀`; for `a ≥ d` the base metric already works.
pub fn rota_renorm(
    a: &Operator,
    rate: f64,
    tol: &TolerancePolicy,
) -> Result<MetricCertificate, SimError> {
    let n = check_square(a)?;
    tol.validate()?;
    let alpha = spectral_abscissa(a)?;
    if rate <= alpha {
        return Err(SimError::RateBelowAbscissa {
            rate,
            abscissa: alpha,
        });
    }
    let d = if alpha >= 0.0 {
        0.5 * (alpha + rate)
    } else {
        0.0
    };
    let base_gen = shifted(a, d);
    let id = Operator::identity(n, n);
    let p0 = if numerical_abscissa(&base_gen) <= 0.0 {
        id.clone()
    } else {
        lyap_solve(&base_gen, &id)?
    };
    let excess = rate - d;
    let q = if excess >= 0.0 {
        p0
    } else {
        let x = lyap_solve(&shifted(a, rate), &p0)?;
        &p0 - x * real(2.0 * excess)
    };
    let lo = min_eig(&q);
    if !(lo > 0.0) {
        return Err(SimError::Num(
            crate::numkit::NumError::NotPositiveDefinite { min_eig: lo },
        ));
    }
    MetricCertificate::continuous(&q, a, rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CrsimVerdict {
    Consistent,
    Inconsistent,
}

impl std::fmt::Display for CrsimVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CrsimVerdict::Consistent => "Consistent",
            CrsimVerdict::Inconsistent => "Inconsistent",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CrsimProfile {
    pub times: Vec<f64>,
    pub samples: Vec<ConstantResult>,
    pub semigroup: ConstantResult,
    pub verdict: CrsimVerdict,
    /// Absolute slack used in the monotonicity and supremum comparisons.
    pub slack: f64,
}

pub const CRSIM_SLACK: f64 = 1e-6;

/// `C(e^{tA})` along `t_grid`, compared with `C(𝒯)` and checked for `C(e^{2tA}) ≤ C(e^{tA})`.
pub fn crsim_profile(
    a: &Operator,
    t_grid: &[f64],
    kappa_max: f64,
    tol: &TolerancePolicy,
) -> Result<CrsimProfile, SimError> {
    check_square(a)?;
    if t_grid.is_empty() {
        return Err(SimError::InvalidArgument("time grid is empty".into()));
    }
    if t_grid.iter().any(|&t| !(t > 0.0)) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::InvalidArgument(
            "time grid must be positive and increasing".into(),
        ));
    }
    let samples = t_grid
        .iter()
        .map(|&t| similarity_constant(&matexp(&(a * real(t)))?, kappa_max, tol))
        .collect::<Result<Vec<_>, _>>()?;
    let semigroup = semigroup_constant(a, kappa_max, tol)?;
    let slack = CRSIM_SLACK;
    let mut ok = samples
        .iter()
        .all(|s| s.constant <= semigroup.constant + slack || !s.is_similar());
    for (i, &t) in t_grid.iter().enumerate() {
        if let Some(j) = t_grid
            .iter()
            .position(|&s| (s - 2.0 * t).abs() <= 1e-12 * s)
        {
            let (c1, c2) = (samples[i].constant, samples[j].constant);
            if c1.is_finite() && !(c2 <= c1 + slack) {
                ok = false;
            }
        }
    }
    let verdict = if ok {
        CrsimVerdict::Consistent
    } else {
        CrsimVerdict::Inconsistent
    };
    Ok(CrsimProfile {
        times: t_grid.to_vec(),
        samples,
        semigroup,
        verdict,
        slack,
    })
}
