//! Similarity-to-contraction certificates and constants.
//!
//! A certificate is a Hermitian `P ≻ 0` whose norm `‖x‖_P² = x*Px` makes the
//! operator (or semigroup) a contraction; its condition number `κ` squares the
//! similarity constant `C = ‖R‖‖R⁻¹‖` of `R = P^{1/2}`.

mod continuous;
mod discrete;
mod lmi;
mod solver;
mod symmetry;

pub use continuous::{
    crsim_profile, quasi_rate, rota_renorm, semigroup_constant, semigroup_power_bound,
    CrsimProfile, CrsimVerdict,
};
pub use discrete::{
    contraction_feasible, neumann_certificate, peripheral_vector, poly_lower_bound,
    power_lower_bound, similarity_constant,
};

use thiserror::Error;

use crate::numkit::{
    format_matrix, hermitian_part, max_eig, parse_matrix, HermitianForm, NumError, Operator,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("spectral radius {radius} is not below one")]
    RadiusNotLessThanOne { radius: f64 },
    #[error("spectral radius {radius} is below one")]
    RadiusBelowOne { radius: f64 },
    #[error("generator is not stable (spectral abscissa {abscissa})")]
    Unstable { abscissa: f64 },
    #[error("rate {rate} does not exceed the spectral abscissa {abscissa}")]
    RateBelowAbscissa { rate: f64, abscissa: f64 },
    #[error("iteration budget exhausted after {iterations} Newton steps without a decision")]
    BudgetExceeded { iterations: usize },
    #[error("polynomial {index} is identically zero")]
    ZeroPolynomial { index: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Verdict {
    Similar,
    NotSimilarWithinBudget,
    SpectralObstruction,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Similar => "Similar",
            Verdict::NotSimilarWithinBudget => "NotSimilarWithinBudget",
            Verdict::SpectralObstruction => "SpectralObstruction",
        })
    }
}

/// A metric `P` with `I ≼ P ≼ κI` certifying contractivity (rate 0) or
/// quasi-contractivity with the given rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCertificate {
    pub p: HermitianForm,
    pub kappa: f64,
    pub rate: f64,
    /// Largest eigenvalue of the defect block; nonpositive for an exact certificate.
    pub residual: f64,
}

impl MetricCertificate {
    /// Certificate for `T*PT ≼ P`; `p` is normalized to `λmin = 1`.
    pub fn discrete(p: &Operator, t: &Operator) -> Result<Self, SimError> {
        let p = HermitianForm::from_hermitian_part(p).normalized()?;
        let kappa = p.cond()?;
        let residual = discrete_defect(p.matrix(), t);
        Ok(MetricCertificate {
            p,
            kappa,
            rate: 0.0,
            residual,
        })
    }

    /// Certificate for `(A − aI)*P + P(A − aI) ≼ 0`; `p` is rescaled only if `λmin < 1`.
    pub fn continuous(p: &Operator, a: &Operator, rate: f64) -> Result<Self, SimError> {
        let form = HermitianForm::from_hermitian_part(p);
        let lo = form.min_eig();
        if !(lo > 0.0) {
            return Err(NumError::NotPositiveDefinite { min_eig: lo }.into());
        }
        let form = if lo < 1.0 { form.normalized()? } else { form };
        let kappa = form.cond()?;
        let residual = continuous_defect(form.matrix(), a, rate);
        Ok(MetricCertificate {
            p: form,
            kappa,
            rate,
            residual,
        })
    }

    pub fn identity(n: usize) -> Self {
        MetricCertificate {
            p: HermitianForm::identity(n),
            kappa: 1.0,
            rate: 0.0,
            residual: 0.0,
        }
    }

    /// Recompute the discrete defect and test it against `tol_psd · κ`.
    pub fn validates_discrete(&self, t: &Operator, tol_psd: f64) -> bool {
        self.p.min_eig() >= 1.0 - tol_psd
            && discrete_defect(self.p.matrix(), t) <= tol_psd * self.kappa.max(1.0)
    }

    pub fn validates_continuous(&self, a: &Operator, tol_psd: f64) -> bool {
        self.p.min_eig() >= 1.0 - tol_psd
            && continuous_defect(self.p.matrix(), a, self.rate) <= tol_psd * self.kappa.max(1.0)
    }

    /// Header line followed by `P` in the matrix text format.
    pub fn to_text(&self) -> String {
        format!(
            "kappa={} rate={} residual={}\n{}",
            crate::numkit::format_float(self.kappa),
            crate::numkit::format_float(self.rate),
            crate::numkit::format_float(self.residual),
            format_matrix(self.p.matrix())
        )
    }

    pub fn from_text(text: &str) -> Result<Self, SimError> {
        let (header, body) = text
            .split_once('\n')
            .ok_or_else(|| SimError::MalformedCertificate("missing header".into()))?;
        let mut fields = [None; 3];
        for tok in header.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| SimError::MalformedCertificate(format!("bad field {tok:?}")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| SimError::MalformedCertificate(format!("bad value {v:?}")))?;
            match k {
                "kappa" => fields[0] = Some(v),
                "rate" => fields[1] = Some(v),
                "residual" => fields[2] = Some(v),
                _ => {
                    return Err(SimError::MalformedCertificate(format!(
                        "unknown field {k:?}"
                    )))
                }
            }
        }
        let [Some(kappa), Some(rate), Some(residual)] = fields else {
            return Err(SimError::MalformedCertificate(
                "header needs kappa, rate and residual".into(),
            ));
        };
        let p = parse_matrix(body).map_err(|e| match e {
            NumError::Parse { line, message } => NumError::Parse {
                line: line + 1,
                message,
            },
            other => other,
        })?;
        let p = HermitianForm::new(p, 1e-10)?;
        Ok(MetricCertificate {
            p,
            kappa,
            rate,
            residual,
        })
    }
}

pub(crate) fn discrete_defect(p: &Operator, t: &Operator) -> f64 {
    max_eig(&hermitian_part(&(t.adjoint() * p * t - p)))
}

pub(crate) fn continuous_defect(p: &Operator, a: &Operator, rate: f64) -> f64 {
    let n = a.nrows();
    let b = a - Operator::identity(n, n) * crate::numkit::real(rate);
    max_eig(&hermitian_part(&(b.adjoint() * p + p * &b)))
}

/// Generator form or time samples of a matrix semigroup.
#[derive(Debug, Clone, PartialEq)]
pub enum SemigroupSpec {
    Generator(Operator),
    /// Increasing positive times with `T(t)` at each.
    Sampled {
        times: Vec<f64>,
        samples: Vec<Operator>,
    },
}

impl SemigroupSpec {
    pub fn dim(&self) -> usize {
        match self {
            SemigroupSpec::Generator(a) => a.nrows(),
            SemigroupSpec::Sampled { samples, .. } => samples.first().map_or(0, |s| s.nrows()),
        }
    }

    pub fn sample(&self, t: f64) -> Result<Operator, SimError> {
        match self {
            SemigroupSpec::Generator(a) => {
                Ok(crate::numkit::matexp(&(a * crate::numkit::real(t)))?)
            }
            SemigroupSpec::Sampled { times, samples } => times
                .iter()
                .position(|&s| s == t)
                .map(|k| samples[k].clone())
                .ok_or_else(|| {
                    SimError::InvalidArgument(format!("time {t} is not on the sample grid"))
                }),
        }
    }
}

/// Similarity constant with its bracket; `constant` is `+∞` unless the verdict is `Similar`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantResult {
    pub verdict: Verdict,
    pub constant: f64,
    pub certificate: Option<MetricCertificate>,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

impl ConstantResult {
    pub(crate) fn similar(cert: MetricCertificate, lower_kappa: f64) -> Self {
        let c = cert.kappa.sqrt();
        ConstantResult {
            verdict: Verdict::Similar,
            constant: c,
            lower_bound: lower_kappa.max(1.0).sqrt().min(c),
            upper_bound: c,
            certificate: Some(cert),
        }
    }

    pub(crate) fn refuted(verdict: Verdict, lower_const: f64) -> Self {
        ConstantResult {
            verdict,
            constant: f64::INFINITY,
            certificate: None,
            lower_bound: lower_const.max(1.0),
            upper_bound: f64::INFINITY,
        }
    }

    pub fn is_similar(&self) -> bool {
        self.verdict == Verdict::Similar
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::from_real_rows;

    #[test]
    fn certificate_text_round_trip() {
        let t = from_real_rows(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        let p = from_real_rows(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let cert = MetricCertificate::discrete(&p, &t).unwrap();
        assert_eq!(cert.kappa, 4.0);
        assert_eq!(cert.residual, 0.0);
        let text = cert.to_text();
        assert!(text.starts_with("kappa=4 rate=0 residual=0\n2 2\n"));
        assert_eq!(MetricCertificate::from_text(&text).unwrap(), cert);
    }

    #[test]
    fn malformed_certificate_header() {
        assert!(matches!(
            MetricCertificate::from_text("kappa=1\n1 1\n1:0\n"),
            Err(SimError::MalformedCertificate(_))
        ));
        assert!(matches!(
            MetricCertificate::from_text("kappa=1 rate=0 residual=0\n1 1\n1;0\n"),
            Err(SimError::Num(NumError::Parse { line: 3, .. }))
        ));
    }
}
