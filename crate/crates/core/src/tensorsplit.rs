//! Tensor products of operators and semigroups: scalings that split a
//! certificate across factors, assembly of the product metric, and the
//! converse extraction of a factor metric from a product metric.

use std::fmt::Write as _;

use nalgebra::DVector;
use num_complex::Complex64;
use thiserror::Error;

use crate::numkit::{
    check_square, format_float, hermitian_part, kron, kron_all, op_norm, real, spectral_abscissa,
    spectral_radius, HermitianForm, NumError, Operator, TolerancePolicy,
};
use crate::simcert::{
    neumann_certificate, peripheral_vector, rota_renorm, semigroup_constant, similarity_constant,
    MetricCertificate, SemigroupSpec, SimError, Verdict,
};

/// Averaging length for the Cesàro fallback in [`extract_factor_certificate`].
pub const CESARO_N: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("factor {index} is the zero operator")]
    ZeroFactor { index: usize },
    #[error("no factors supplied")]
    NoFactors,
    #[error("sampled semigroup has no sample times")]
    EmptySample,
    #[error("factor {index} is sampled; a generator is required")]
    NotGenerator { index: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no peripheral vector: spectral radius {radius} of the other factor is below one")]
    NoPeripheralVector { radius: f64 },
    #[error("extracted form is not a valid certificate (residual {residual:e})")]
    ExtractionFailed { residual: f64 },
}

impl From<NumError> for SplitError {
    fn from(e: NumError) -> Self {
        SplitError::Sim(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ScalingKind {
    /// `α_k` with `∏α_k = 1`, applied as `α_k T_k`.
    Multiplicative,
    /// `d_k` with `Σd_k = 0`, applied as `A_k + d_k I`.
    Additive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub verdict: Verdict,
    pub kind: ScalingKind,
    pub scalings: Vec<f64>,
    pub factor_certificates: Vec<Option<MetricCertificate>>,
    pub tensor_certificate: Option<MetricCertificate>,
    /// First factor whose certification failed within budget.
    pub failed_factor: Option<usize>,
}

impl SplitResult {
    fn obstructed(kind: ScalingKind, m: usize) -> Self {
        SplitResult {
            verdict: Verdict::SpectralObstruction,
            kind,
            scalings: vec![
                if kind == ScalingKind::Multiplicative {
                    1.0
                } else {
                    0.0
                };
                m
            ],
            factor_certificates: vec![None; m],
            tensor_certificate: None,
            failed_factor: None,
        }
    }

    /// Deviation of the scalings from `∏α = 1` or `Σd = 0`.
    pub fn constraint_defect(&self) -> f64 {
        match self.kind {
            ScalingKind::Multiplicative => (self.scalings.iter().product::<f64>() - 1.0).abs(),
            ScalingKind::Additive => self.scalings.iter().sum::<f64>().abs(),
        }
    }

    /// One line per factor `k scaling kappa residual`, then `tensor verdict kappa residual`.
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        for (k, (s, cert)) in self
            .scalings
            .iter()
            .zip(&self.factor_certificates)
            .enumerate()
        {
            let (kap, res) = cert
                .as_ref()
                .map_or((f64::INFINITY, f64::NAN), |c| (c.kappa, c.residual));
            let _ = writeln!(
                out,
                "{} {} {} {}",
                k + 1,
                format_float(*s),
                format_float(kap),
                format_float(res)
            );
        }
        let (kap, res) = self
            .tensor_certificate
            .as_ref()
            .map_or((f64::INFINITY, f64::NAN), |c| (c.kappa, c.residual));
        let _ = writeln!(
            out,
            "tensor {} {} {}",
            self.verdict,
            format_float(kap),
            format_float(res)
        );
        out
    }
}

/// `ω₀`: spectral abscissa of a generator, or `log r(T(t))/t` at the last sample time.
pub fn growth_bound(s: &SemigroupSpec) -> Result<f64, SplitError> {
    match s {
        SemigroupSpec::Generator(a) => Ok(spectral_abscissa(a)?),
        SemigroupSpec::Sampled { times, samples } => {
            let (Some(&t), Some(last)) = (times.last(), samples.last()) else {
                return Err(SplitError::EmptySample);
            };
            if times.len() != samples.len() {
                return Err(SplitError::DimensionMismatch {
                    expected: times.len(),
                    got: samples.len(),
                });
            }
            let r = spectral_radius(last)?;
            Ok(if r == 0.0 {
                f64::NEG_INFINITY
            } else {
                r.ln() / t
            })
        }
    }
}

/// Certify each scaled factor: Neumann series below radius one, the optimal
/// metric otherwise or when the series exceeds the budget.
fn certify_factor(
    t: &Operator,
    kappa_max: f64,
    tol: &TolerancePolicy,
) -> Result<Option<MetricCertificate>, SplitError> {
    if spectral_radius(t)? < 1.0 - tol.tol_rel {
        let cert = neumann_certificate(t, tol)?;
        if cert.kappa <= kappa_max && cert.validates_discrete(t, tol.tol_psd) {
            return Ok(Some(cert));
        }
    }
    let res = similarity_constant(t, kappa_max, tol)?;
    let ok = res.is_similar();
    Ok(res.certificate.filter(|_| ok))
}

/// Spectral radius with nilpotent factors detected exactly through `T^n`, since
/// Schur eigenvalues of a nilpotent block scatter at size `ε^{1/n}`.
pub fn factor_radius(t: &Operator) -> Result<f64, SplitError> {
    let n = check_square(t)?;
    let scale = op_norm(t);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let pw = crate::numkit::matrix_power(&(t * real(1.0 / scale)), n as u64);
    if op_norm(&pw) <= 1e-13 {
        return Ok(0.0);
    }
    Ok(spectral_radius(t)?)
}

fn check_factors(factors: &[Operator]) -> Result<Vec<f64>, SplitError> {
    if factors.is_empty() {
        return Err(SplitError::NoFactors);
    }
    let mut radii = Vec::with_capacity(factors.len());
    for (k, t) in factors.iter().enumerate() {
        check_square(t)?;
        if op_norm(t) == 0.0 {
            return Err(SplitError::ZeroFactor { index: k });
        }
        radii.push(factor_radius(t)?);
    }
    Ok(radii)
}

/// Scalings `α_k` with `∏α_k = 1` making every `α_k T_k` similar to a contraction.
///
/// With `∏r_k = 1` each factor is normalized to radius one. Below one, factors
/// with positive radius share the common radius `(∏r_k)^{1/m}`; when some
/// radii vanish the others are normalized to radius one (retrying at one half
/// if that exceeds the budget) and the zero-radius factors absorb the balance.
pub fn split_scaling_discrete(
    factors: &[Operator],
    kappa_max: f64,
    tol: &TolerancePolicy,
) -> Result<SplitResult, SplitError> {
    tol.validate()?;
    let radii = check_factors(factors)?;
    let m = factors.len();
    let prod: f64 = radii.iter().product();
    if prod > 1.0 + tol.tol_rel {
        return Ok(SplitResult::obstructed(ScalingKind::Multiplicative, m));
    }
    let attempts: Vec<Vec<f64>> = if prod >= 1.0 - tol.tol_rel {
        vec![radii.iter().map(|r| 1.0 / r).collect()]
    } else if radii.iter().all(|&r| r > 0.0) {
        let g = prod.powf(1.0 / m as f64);
        vec![radii.iter().map(|r| g / r).collect()]
    } else {
        [1.0, 0.5]
            .iter()
            .map(|&target| {
                let zeros = radii.iter().filter(|&&r| r == 0.0).count() as f64;
                let nz: Vec<f64> = radii
                    .iter()
                    .map(|&r| if r > 0.0 { target / r } else { 1.0 })
                    .collect();
                let balance = nz.iter().product::<f64>().recip().powf(1.0 / zeros);
                radii
                    .iter()
                    .zip(nz)
                    .map(|(&r, a)| if r > 0.0 { a } else { balance })
                    .collect()
            })
            .collect()
    };
    let mut last = None;
    for alphas in attempts {
        let alphas = balance_product(alphas);
        let scaled: Vec<Operator> = factors
            .iter()
            .zip(&alphas)
            .map(|(t, &a)| t * real(a))
            .collect();
        let mut certs = Vec::with_capacity(m);
        let mut failed = None;
        for (k, t) in scaled.iter().enumerate() {
            let cert = certify_factor(t, kappa_max, tol)?;
            if cert.is_none() && failed.is_none() {
                failed = Some(k);
            }
            certs.push(cert);
        }
        if failed.is_none() {
            let all: Vec<MetricCertificate> = certs.iter().flatten().cloned().collect();
            let tensor = assemble_certificate(&all, factors)?;
            return Ok(SplitResult {
                verdict: Verdict::Similar,
                kind: ScalingKind::Multiplicative,
                scalings: alphas,
                factor_certificates: certs,
                tensor_certificate: Some(tensor),
                failed_factor: None,
            });
        }
        last = Some(SplitResult {
            verdict: Verdict::NotSimilarWithinBudget,
            kind: ScalingKind::Multiplicative,
            scalings: alphas,
            factor_certificates: certs,
            tensor_certificate: None,
            failed_factor: failed,
        });
    }
    Ok(last.expect("at least one scaling attempt"))
}

/// Spread the rounding error of `∏α` evenly so the product is one to machine precision.
fn balance_product(mut alphas: Vec<f64>) -> Vec<f64> {
    let fix = alphas
        .iter()
        .product::<f64>()
        .powf(-1.0 / alphas.len() as f64);
    for a in &mut alphas {
        *a *= fix;
    }
    alphas
}

/// Shifts `d_k` with `Σd_k = 0` making every `e^{t(A_k + d_k I)}` similar to a contraction semigroup.
pub fn split_scaling_semigroup(
    factors: &[SemigroupSpec],
    kappa_max: f64,
    tol: &TolerancePolicy,
) -> Result<SplitResult, SplitError> {
    tol.validate()?;
    if factors.is_empty() {
        return Err(SplitError::NoFactors);
    }
    let gens: Vec<&Operator> = factors
        .iter()
        .enumerate()
        .map(|(k, s)| match s {
            SemigroupSpec::Generator(a) => Ok(a),
            SemigroupSpec::Sampled { .. } => Err(SplitError::NotGenerator { index: k }),
        })
        .collect::<Result<_, _>>()?;
    let m = gens.len();
    let omegas = gens
        .iter()
        .map(|a| spectral_abscissa(a))
        .collect::<Result<Vec<_>, _>>()?;
    let total: f64 = omegas.iter().sum();
    let scale = gens.iter().map(|a| op_norm(a)).fold(1.0, f64::max);
    if total > tol.tol_rel * scale {
        return Ok(SplitResult::obstructed(ScalingKind::Additive, m));
    }
    let interior = total < -tol.tol_rel * scale;
    let mean = total / m as f64;
    let mut shifts: Vec<f64> = omegas
        .iter()
        .map(|w| if interior { mean - w } else { -w })
        .collect();
    let drift = shifts.iter().sum::<f64>() / m as f64;
    for d in &mut shifts {
        *d -= drift;
    }
    let mut certs = Vec::with_capacity(m);
    let mut failed = None;
    for (k, (a, &d)) in gens.iter().zip(&shifts).enumerate() {
        let n = a.nrows();
        let shifted = *a + Operator::identity(n, n) * real(d);
        let mut cert = None;
        if interior {
            if let Ok(q) = rota_renorm(&shifted, 0.5 * mean, tol) {
                if q.kappa <= kappa_max {
                    cert = Some(q);
                }
            }
        }
        if cert.is_none() {
            let res = semigroup_constant(&shifted, kappa_max, tol)?;
            let ok = res.is_similar();
            cert = res.certificate.filter(|_| ok);
        }
        if cert.is_none() && failed.is_none() {
            failed = Some(k);
        }
        certs.push(cert);
    }
    if failed.is_some() {
        return Ok(SplitResult {
            verdict: Verdict::NotSimilarWithinBudget,
            kind: ScalingKind::Additive,
            scalings: shifts,
            factor_certificates: certs,
            tensor_certificate: None,
            failed_factor: failed,
        });
    }
    let all: Vec<MetricCertificate> = certs.iter().flatten().cloned().collect();
    let owned: Vec<Operator> = gens.iter().map(|a| (*a).clone()).collect();
    let tensor = assemble_semigroup_certificate(&all, &owned)?;
    Ok(SplitResult {
        verdict: Verdict::Similar,
        kind: ScalingKind::Additive,
        scalings: shifts,
        factor_certificates: certs,
        tensor_certificate: Some(tensor),
        failed_factor: None,
    })
}

fn check_cert_dims(certs: &[MetricCertificate], ops: &[Operator]) -> Result<(), SplitError> {
    if certs.len() != ops.len() {
        return Err(SplitError::DimensionMismatch {
            expected: ops.len(),
            got: certs.len(),
        });
    }
    for (c, t) in certs.iter().zip(ops) {
        if c.p.dim() != t.nrows() || t.nrows() != t.ncols() {
            return Err(SplitError::DimensionMismatch {
                expected: t.nrows(),
                got: c.p.dim(),
            });
        }
    }
    Ok(())
}

/// `P = ⊗P_k` with `κ = ∏κ_k`, residual measured against `⊗T_k`.
pub fn assemble_certificate(
    certs: &[MetricCertificate],
    factors: &[Operator],
) -> Result<MetricCertificate, SplitError> {
    check_cert_dims(certs, factors)?;
    let p = kron_all(
        &certs
            .iter()
            .map(|c| c.p.matrix().clone())
            .collect::<Vec<_>>(),
    );
    let t = kron_all(factors);
    let residual = crate::numkit::max_eig(&hermitian_part(&(t.adjoint() * &p * &t - &p)));
    Ok(MetricCertificate {
        p: HermitianForm::from_hermitian_part(&p),
        kappa: certs.iter().map(|c| c.kappa).product(),
        rate: 0.0,
        residual,
    })
}

/// Kronecker sum `Σ I⊗…⊗A_k⊗…⊗I`, the generator of `t ↦ ⊗e^{tA_k}`.
pub fn kronecker_sum(gens: &[Operator]) -> Operator {
    let dims: Vec<usize> = gens.iter().map(|a| a.nrows()).collect();
    let total: usize = dims.iter().product();
    let mut out = Operator::zeros(total, total);
    for (k, a) in gens.iter().enumerate() {
        let before: usize = dims[..k].iter().product();
        let after: usize = dims[k + 1..].iter().product();
        let term = kron(
            &kron(&Operator::identity(before, before), a),
            &Operator::identity(after, after),
        );
        out += term;
    }
    out
}

/// Semigroup analogue of [`assemble_certificate`]: rates add along the Kronecker sum.
pub fn assemble_semigroup_certificate(
    certs: &[MetricCertificate],
    gens: &[Operator],
) -> Result<MetricCertificate, SplitError> {
    check_cert_dims(certs, gens)?;
    let p = kron_all(
        &certs
            .iter()
            .map(|c| c.p.matrix().clone())
            .collect::<Vec<_>>(),
    );
    let g = kronecker_sum(gens);
    let rate: f64 = certs.iter().map(|c| c.rate).sum();
    let n = g.nrows();
    let b = &g - Operator::identity(n, n) * real(rate);
    let residual = crate::numkit::max_eig(&hermitian_part(&(b.adjoint() * &p + &p * &b)));
    Ok(MetricCertificate {
        p: HermitianForm::from_hermitian_part(&p),
        kappa: certs.iter().map(|c| c.kappa).product(),
        rate,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorIndex {
    First,
    Second,
}

/// Compress `P` (a certificate for `T1⊗T2`) to a certificate for one factor.
///
/// A peripheral unit eigenvector `h` of the other factor gives the constant
/// Cesàro sequence `(h⊗I)*P(h⊗I)`; if that form does not validate, averages over
/// the orbit `T^k h`, `k ≤ CESARO_N`, are tried and the best one is kept.
pub fn extract_factor_certificate(
    p: &MetricCertificate,
    t1: &Operator,
    t2: &Operator,
    index: FactorIndex,
    tol: &TolerancePolicy,
) -> Result<MetricCertificate, SplitError> {
    let n1 = check_square(t1)?;
    let n2 = check_square(t2)?;
    if p.p.dim() != n1 * n2 {
        return Err(SplitError::DimensionMismatch {
            expected: n1 * n2,
            got: p.p.dim(),
        });
    }
    let (target, other) = match index {
        FactorIndex::First => (t1, t2),
        FactorIndex::Second => (t2, t1),
    };
    let r = spectral_radius(other)?;
    if r < 1.0 - tol.tol_rel {
        return Err(SplitError::NoPeripheralVector { radius: r });
    }
    let h = peripheral_vector(other, 1, tol)?;
    let embed = |v: &DVector<Complex64>| -> Operator {
        let col = Operator::from_column_slice(v.len(), 1, v.as_slice());
        match index {
            FactorIndex::First => kron(&Operator::identity(n1, n1), &col),
            FactorIndex::Second => kron(&col, &Operator::identity(n2, n2)),
        }
    };
    let compress = |v: &DVector<Complex64>| -> Operator {
        let e = embed(v);
        e.adjoint() * p.p.matrix() * e
    };
    let defect = |form: &Operator| -> Option<(MetricCertificate, f64)> {
        let cert = MetricCertificate::discrete(form, target).ok()?;
        let d = cert.residual / cert.kappa.max(1.0);
        Some((cert, d))
    };
    let direct = compress(&h);
    let mut best = defect(&direct);
    if best
        .as_ref()
        .is_some_and(|(c, _)| c.validates_discrete(target, tol.tol_psd))
    {
        return Ok(best.expect("checked").0);
    }
    let mut acc = direct;
    let mut orbit = h.clone();
    for k in 1..=CESARO_N {
        orbit = other * &orbit;
        acc += compress(&orbit);
        let avg = &acc * real(1.0 / (k + 1) as f64);
        if let Some(cand) = defect(&avg) {
            if best.as_ref().is_none_or(|b| cand.1 < b.1) {
                best = Some(cand);
            }
        }
    }
    match best {
        Some((cert, _)) if cert.validates_discrete(target, tol.tol_psd) => Ok(cert),
        Some((cert, _)) => Err(SplitError::ExtractionFailed {
            residual: cert.residual,
        }),
        None => Err(SplitError::ExtractionFailed {
            residual: f64::INFINITY,
        }),
    }
}

/// Whether `𝒯 ⊗ 𝒮` is similar to a contraction semigroup for every such `𝒮`:
/// `𝒯` itself is, with zero growth bound.
pub fn tensorially_preserves(
    s: &SemigroupSpec,
    kappa_max: f64,
    tol: &TolerancePolicy,
) -> Result<bool, SplitError> {
    let SemigroupSpec::Generator(a) = s else {
        return Err(SplitError::NotGenerator { index: 0 });
    };
    let omega = growth_bound(s)?;
    if omega.abs() > tol.tol_rel * op_norm(a).max(1.0) {
        return Ok(false);
    }
    Ok(semigroup_constant(a, kappa_max, tol)?.is_similar())
}
