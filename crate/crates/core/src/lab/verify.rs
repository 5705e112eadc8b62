//! Named invariant suites run with fixed seeds.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bhatskeide::{
    bs_check_interpolation, bs_extract_certificate, bs_matrix, bs_norm, bs_semigroup_residual,
    CircleGrid, InterpolatedSemigroup, PowerTable,
};
use crate::gallery::{
    benchimol_generator, build_model, foguel_operator, triadic_positions, ModelName, ModelSpec,
};
use crate::numkit::{
    cond_pd, eigenvalues, hermitian_part, kron, lyap_solve, matexp, max_abs_diff, min_eig, op_norm,
    real, spectral_abscissa, spectral_radius, Operator, TolerancePolicy,
};
use crate::simcert::{
    neumann_certificate, power_lower_bound, quasi_rate, rota_renorm, semigroup_constant,
    similarity_constant, MetricCertificate, SemigroupSpec, Verdict,
};
use crate::tensorsplit::{
    extract_factor_certificate, split_scaling_discrete, split_scaling_semigroup, FactorIndex,
};

use super::LabError;

pub const SUITES: [&str; 5] = [
    "product-laws",
    "certificates",
    "splitting",
    "interpolation",
    "gallery-trends",
];

/// Foguel truncations whose similarity constants must increase strictly.
pub const FOGUEL_SIZES: [usize; 3] = [9, 27, 81];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub checks: Vec<CheckOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Suite {
    name: String,
    checks: Vec<CheckOutcome>,
}

impl Suite {
    fn new(name: &str) -> Self {
        Suite {
            name: name.into(),
            checks: Vec::new(),
        }
    }

    fn record(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckOutcome {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            name: self.name,
            checks: self.checks,
        }
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Operator {
    Operator::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn with_radius(m: Operator, r: f64) -> Operator {
    let cur = spectral_radius(&m).unwrap_or(0.0);
    if cur > 0.0 {
        m * real(r / cur)
    } else {
        m
    }
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> Operator {
    random_matrix(rng, n).qr().q()
}

fn random_stable(rng: &mut ChaCha8Rng, n: usize, abscissa: f64) -> Operator {
    let a = random_matrix(rng, n);
    let shift = spectral_abscissa(&a).unwrap_or(0.0) - abscissa;
    a - Operator::identity(n, n) * real(shift)
}

/// `R C R⁻¹` with `C` a contraction carrying the unimodular eigenvalue `e^{iθ}`.
fn conjugated_contraction(rng: &mut ChaCha8Rng, n: usize) -> Operator {
    let mut c = Operator::zeros(n, n);
    c[(0, 0)] = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
    if n > 1 {
        let d = random_matrix(rng, n - 1);
        let d = &d * real(rng.gen_range(0.3..0.95) / op_norm(&d));
        c.view_mut((1, 1), (n - 1, n - 1)).copy_from(&d);
    }
    let u = random_unitary(rng, n);
    let c = &u * c * u.adjoint();
    let r = Operator::identity(n, n) + random_matrix(rng, n) * real(0.3);
    let r_inv = r
        .clone()
        .try_inverse()
        .expect("near-identity conjugator is invertible");
    r * c * r_inv
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn product_laws(tol: &TolerancePolicy) -> Result<SuiteReport, LabError> {
    let mut suite = Suite::new("product-laws");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0001);
    let (mut norm_err, mut radius_err, mut spectrum_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..60 {
        let (n1, n2) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let a = random_matrix(&mut rng, n1);
        let b = random_matrix(&mut rng, n2);
        let k = kron(&a, &b);
        norm_err = norm_err.max(rel(op_norm(&k), op_norm(&a) * op_norm(&b)));
        let (ra, rb) = (spectral_radius(&a)?, spectral_radius(&b)?);
        radius_err = radius_err.max((spectral_radius(&k)? - ra * rb).abs() / (ra * rb).max(1.0));
        let (ea, eb) = (eigenvalues(&a)?, eigenvalues(&b)?);
        for z in eigenvalues(&k)? {
            let d = ea
                .iter()
                .flat_map(|x| eb.iter().map(move |y| (x * y - z).norm()))
                .fold(f64::INFINITY, f64::min);
            spectrum_err = spectrum_err.max(d / z.norm().max(1.0));
        }
    }
    suite.record(
        "norm-multiplicativity",
        norm_err <= tol.tol_rel,
        format!("max relative error {norm_err:e}"),
    );
    suite.record(
        "radius-multiplicativity",
        radius_err <= tol.tol_rel,
        format!("max error {radius_err:e}"),
    );
    suite.record(
        "spectrum-product",
        spectrum_err <= tol.tol_rel,
        format!("max matching distance {spectrum_err:e}"),
    );

    let (mut lyap_err, mut herm_err) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let n = rng.gen_range(1..=5);
        let level = -rng.gen_range(0.1..1.0);
        let b = random_stable(&mut rng, n, level);
        let w = Operator::identity(n, n);
        let x = lyap_solve(&b, &w)?;
        let res = b.adjoint() * &x + &x * &b + &w;
        lyap_err = lyap_err.max(op_norm(&res) / (op_norm(&b) * op_norm(&x)).max(1.0));
        herm_err = herm_err.max(max_abs_diff(&x, &x.adjoint()));
    }
    suite.record(
        "lyapunov-residual",
        lyap_err <= tol.tol_rel,
        format!("max scaled residual {lyap_err:e}"),
    );
    suite.record(
        "lyapunov-hermitian",
        herm_err <= tol.tol_herm,
        format!("max asymmetry {herm_err:e}"),
    );

    let mut exp_err = 0.0f64;
    let mut zero_err = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(1..=5);
        let a = random_matrix(&mut rng, n);
        let (s, t) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let lhs = matexp(&(&a * real(s + t)))?;
        let rhs = matexp(&(&a * real(s)))? * matexp(&(&a * real(t)))?;
        exp_err = exp_err.max(max_abs_diff(&lhs, &rhs) / op_norm(&lhs).max(1.0));
        zero_err = zero_err.max(max_abs_diff(
            &matexp(&(&a * real(0.0)))?,
            &Operator::identity(n, n),
        ));
    }
    suite.record(
        "exponential-semigroup-law",
        exp_err <= tol.tol_rel,
        format!("max error {exp_err:e}"),
    );
    suite.record(
        "exponential-at-zero",
        zero_err <= tol.tol_rel,
        format!("max error {zero_err:e}"),
    );
    Ok(suite.finish())
}

/// `P ≽ I` and `P − T*PT ≽ 0` up to `tol_psd`, recomputed from scratch.
fn certificate_holds(cert: &MetricCertificate, t: &Operator, tol_psd: f64) -> bool {
    let p = cert.p.matrix();
    let defect = hermitian_part(&(p - t.adjoint() * p * t));
    min_eig(p) >= 1.0 - tol_psd && min_eig(&defect) >= -tol_psd * cert.kappa.max(1.0)
}

fn certificates(tol: &TolerancePolicy) -> Result<SuiteReport, LabError> {
    let mut suite = Suite::new("certificates");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0002);
    let (mut sound, mut sandwich) = (true, true);
    let mut worst = String::new();
    for k in 0..20 {
        let n = rng.gen_range(2..=4);
        let t = with_radius(random_matrix(&mut rng, n), rng.gen_range(0.3..0.95));
        let res = similarity_constant(&t, tol.kappa_max, tol)?;
        let Some(cert) = res.certificate.as_ref() else {
            sound = false;
            worst = format!("instance {k}: no certificate ({})", res.verdict);
            continue;
        };
        if !certificate_holds(cert, &t, tol.tol_psd) {
            sound = false;
            worst = format!("instance {k}: certificate fails recomputation");
        }
        let lower = power_lower_bound(&t, 32)?;
        let upper = cond_pd(neumann_certificate(&t, tol)?.p.matrix())?.sqrt();
        if !(lower <= res.constant * (1.0 + tol.tol_rel)
            && res.constant <= upper * (1.0 + tol.tol_rel))
        {
            sandwich = false;
            worst = format!(
                "instance {k}: {lower} <= {} <= {upper} violated",
                res.constant
            );
        }
    }
    suite.record("certificate-soundness", sound, worst.clone());
    suite.record("sandwich", sandwich, worst);

    let mut inv_err = 0.0f64;
    for _ in 0..5 {
        let n = rng.gen_range(2..=3);
        let t = with_radius(random_matrix(&mut rng, n), 0.8);
        let u = random_unitary(&mut rng, n);
        let a = similarity_constant(&t, tol.kappa_max, tol)?.constant;
        let b = similarity_constant(&(u.adjoint() * &t * &u), tol.kappa_max, tol)?.constant;
        inv_err = inv_err.max(rel(a, b));
    }
    suite.record(
        "unitary-invariance",
        inv_err <= tol.tol_rel,
        format!("max relative difference {inv_err:e}"),
    );

    let mut rota_worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let n = rng.gen_range(1..=5);
        let level = -rng.gen_range(0.1..1.0);
        let a = random_stable(&mut rng, n, level);
        let abscissa = spectral_abscissa(&a)?;
        let rate = abscissa * rng.gen_range(0.05..0.95);
        let cert = rota_renorm(&a, rate, tol)?;
        rota_worst = rota_worst.max(cert.residual);
    }
    suite.record(
        "rota-feasibility",
        rota_worst <= 1e-9,
        format!("largest residual {rota_worst:e}"),
    );

    let mut monotone = true;
    let mut detail = String::new();
    for _ in 0..3 {
        let a = random_stable(&mut rng, 3, -0.5);
        let abscissa = spectral_abscissa(&a)?;
        let rates = [1.0, 10.0, 100.0, 1e4]
            .iter()
            .map(|&k| quasi_rate(&a, k, tol))
            .collect::<Result<Vec<_>, _>>()?;
        if rates.windows(2).any(|w| w[1] > w[0] + tol.tol_rel)
            || rates.iter().any(|&r| r < abscissa - tol.tol_rel)
        {
            monotone = false;
        }
        detail = format!("abscissa {abscissa:.6}, rates {rates:.6?}");
    }
    suite.record("quasi-rate-monotone", monotone, detail);
    Ok(suite.finish())
}

fn splitting(tol: &TolerancePolicy) -> Result<SuiteReport, LabError> {
    let mut suite = Suite::new("splitting");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0003);
    let (mut round_trip, mut worst_kappa, mut worst_extract) = (true, 0.0f64, f64::NEG_INFINITY);
    let mut ineq_gap = f64::NEG_INFINITY;
    for _ in 0..8 {
        let (n1, n2) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let t1 = conjugated_contraction(&mut rng, n1);
        let t2 = conjugated_contraction(&mut rng, n2);
        let res = split_scaling_discrete(&[t1.clone(), t2.clone()], tol.kappa_max, tol)?;
        let (Some(tc), Some(Some(c1)), Some(Some(c2))) = (
            res.tensor_certificate.as_ref(),
            res.factor_certificates.first(),
            res.factor_certificates.get(1),
        ) else {
            round_trip = false;
            continue;
        };
        round_trip &= res.verdict == Verdict::Similar && res.constraint_defect() <= tol.tol_rel;
        worst_kappa = worst_kappa.max(rel(tc.kappa, c1.kappa * c2.kappa));
        let s1 = &t1 * real(res.scalings[0]);
        let s2 = &t2 * real(res.scalings[1]);
        for index in [FactorIndex::First, FactorIndex::Second] {
            let e = extract_factor_certificate(tc, &s1, &s2, index, tol)?;
            worst_extract = worst_extract.max(e.kappa - tc.kappa);
        }
        let whole = similarity_constant(&kron(&s1, &s2), tol.kappa_max, tol)?;
        let parts = [
            similarity_constant(&s1, tol.kappa_max, tol)?,
            similarity_constant(&s2, tol.kappa_max, tol)?,
        ];
        ineq_gap = ineq_gap.max(parts[0].constant.max(parts[1].constant) - whole.constant);
    }
    suite.record("round-trip-similar", round_trip, "");
    suite.record(
        "tensor-kappa-product",
        worst_kappa <= 1e-8,
        format!("max relative error {worst_kappa:e}"),
    );
    suite.record(
        "extracted-kappa-bound",
        worst_extract <= 1e-8,
        format!("max excess {worst_extract:e}"),
    );
    suite.record(
        "factor-constant-bound",
        ineq_gap <= 1e-6,
        format!("max excess {ineq_gap:e}"),
    );

    let mut defect = 0.0f64;
    for _ in 0..20 {
        let a = with_radius(random_matrix(&mut rng, 2), rng.gen_range(0.1..1.5));
        let b = with_radius(random_matrix(&mut rng, 2), rng.gen_range(0.05..0.6));
        let res = split_scaling_discrete(&[a, b], tol.kappa_max, tol)?;
        defect = defect.max(res.constraint_defect());
    }
    suite.record(
        "scaling-constraint",
        defect <= tol.tol_rel,
        format!("max defect {defect:e}"),
    );

    let mut false_positives = 0;
    for _ in 0..30 {
        let r1 = rng.gen_range(0.2..3.0);
        let r2 = rng.gen_range(1.05 / r1..4.0 / r1);
        let (n1, n2) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let a = with_radius(random_matrix(&mut rng, n1), r1);
        let b = with_radius(random_matrix(&mut rng, n2), r2);
        let res = split_scaling_discrete(&[a, b], tol.kappa_max, tol)?;
        if res.verdict != Verdict::SpectralObstruction
            || res.tensor_certificate.is_some()
            || res.factor_certificates.iter().any(Option::is_some)
        {
            false_positives += 1;
        }
    }
    for _ in 0..10 {
        let w1 = rng.gen_range(-1.0..1.0);
        let w2 = rng.gen_range(-w1 + 0.05..-w1 + 1.0);
        let a = random_stable(&mut rng, 2, w1);
        let b = random_stable(&mut rng, 2, w2);
        let res = split_scaling_semigroup(
            &[SemigroupSpec::Generator(a), SemigroupSpec::Generator(b)],
            tol.kappa_max,
            tol,
        )?;
        if res.verdict != Verdict::SpectralObstruction || res.tensor_certificate.is_some() {
            false_positives += 1;
        }
    }
    suite.record(
        "obstruction-soundness",
        false_positives == 0,
        format!("{false_positives} false positives"),
    );
    Ok(suite.finish())
}

fn interpolation(tol: &TolerancePolicy) -> Result<SuiteReport, LabError> {
    let mut suite = Suite::new("interpolation");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0004);
    let grid = CircleGrid::new(8)?;
    let times = grid.times_up_to(2.0);
    let (mut law, mut identity, mut contractive, mut transfer) = (0.0f64, 0.0f64, true, true);
    let mut extract_residual = f64::NEG_INFINITY;
    for _ in 0..5 {
        let n = rng.gen_range(2..=3);
        let base = with_radius(random_matrix(&mut rng, n), 0.9);
        let s = InterpolatedSemigroup::new(base.clone(), grid)?;
        for &t1 in &times {
            for &t2 in &times {
                law = law.max(bs_semigroup_residual(&s, t1, t2)?);
            }
        }
        for k in 0..=8 {
            identity = identity.max(bs_check_interpolation(&s, k));
        }
        let table = PowerTable::with_max(&base, 9);
        let sup = |last: u64| {
            (0..=last)
                .map(|k| op_norm(table.get(k)))
                .fold(0.0, f64::max)
        };
        let grid_sup = grid
            .times_up_to(8.0)
            .iter()
            .map(|&t| bs_norm(&s, t))
            .collect::<Result<Vec<_>, _>>()?;
        let grid_sup = grid_sup.into_iter().fold(0.0, f64::max);
        transfer &= grid_sup <= sup(9) && grid_sup >= sup(8);

        let contraction = &base * real(0.95 / op_norm(&base));
        let sc = InterpolatedSemigroup::new(contraction.clone(), grid)?;
        for t in grid.times_up_to(4.0) {
            contractive &= op_norm(&bs_matrix(&sc, t)?) <= 1.0 + 1e-12;
        }
        let res = similarity_constant(&base, tol.kappa_max, tol)?;
        if let Some(cert) = res.certificate {
            let m = grid.arcs();
            let p_eq = MetricCertificate::discrete(
                &kron(&Operator::identity(m, m), cert.p.matrix()),
                &bs_matrix(&s, grid.weight())?,
            )?;
            let extracted = bs_extract_certificate(&p_eq, &s, tol)?;
            extract_residual = extract_residual.max(extracted.residual);
        } else {
            extract_residual = f64::INFINITY;
        }
    }
    suite.record(
        "semigroup-law-exact",
        law == 0.0,
        format!("max residual {law:e}"),
    );
    suite.record(
        "integer-times-exact",
        identity == 0.0,
        format!("max residual {identity:e}"),
    );
    suite.record("contractivity-preserved", contractive, "");
    suite.record(
        "certificate-extraction",
        extract_residual <= 1e-9,
        format!("max residual {extract_residual:e}"),
    );
    suite.record("boundedness-transfer", transfer, "");
    Ok(suite.finish())
}

fn gallery_trends(tol: &TolerancePolicy) -> Result<SuiteReport, LabError> {
    let mut suite = Suite::new("gallery-trends");
    let mut constants = Vec::new();
    for n in FOGUEL_SIZES {
        let f = foguel_operator(n, 1.0);
        let res = similarity_constant(&f, tol.kappa_max, tol)?;
        constants.push(res.constant);
        let lower_left = f.view((0, n), (n, n)).iter().all(|z| z.norm() == 0.0)
            || f.view((n, 0), (n, n)).iter().all(|z| z.norm() == 0.0);
        let mut power = Operator::identity(2 * n, 2 * n);
        let mut sup = 1.0f64;
        for _ in 0..64 {
            power = &power * &f;
            sup = sup.max(op_norm(&power));
        }
        let coupled = triadic_positions(n).len() as f64;
        suite.record(&format!("foguel-{n}-block-triangular"), lower_left, "");
        suite.record(
            &format!("foguel-{n}-power-bounded"),
            sup <= 1.0 + coupled,
            format!("sup norm {sup:.6}"),
        );
    }
    let increasing = constants.windows(2).all(|w| w[1] > w[0]);
    suite.record(
        "foguel-constant-increasing",
        increasing,
        format!("{constants:.6?}"),
    );

    let counter = build_model(
        &ModelSpec::new(ModelName::CounterNilpotent)
            .with("M", 8usize)
            .with("N", 8usize),
    )?;
    let zero = [1.0, 1.5, 2.0].iter().all(|&t| {
        counter
            .sample(t)
            .is_ok_and(|s| s.iter().all(|z| *z == Complex64::new(0.0, 0.0)))
    });
    suite.record(
        "counter-nilpotent-vanishes",
        zero,
        "sample(t) = 0 for t in {1, 1.5, 2}",
    );
    let factors = counter.factors(0.5)?.unwrap_or_default();
    let nil = similarity_constant(&factors[0], tol.kappa_max, tol)?;
    suite.record(
        "nilpotent-factor-certified",
        nil.is_similar(),
        format!("C = {:.6}", nil.constant),
    );
    let lemerdy = counter
        .lemerdy_factor_generator()
        .expect("counter model carries a Le Merdy factor");
    let lm = semigroup_constant(&lemerdy, 1e6, tol)?;
    suite.record(
        "lemerdy-factor-exceeds-budget",
        lm.verdict == Verdict::NotSimilarWithinBudget,
        format!("verdict {} C = {:.6}", lm.verdict, lm.constant),
    );

    let inner = benchimol_generator(1, 1, 1.0);
    let mut rates = Vec::new();
    for count in 1..=3usize {
        let model = build_model(
            &ModelSpec::new(ModelName::ChernoffSum)
                .with("A_inner", inner.clone())
                .with("N_sum", count),
        )?;
        rates.push(quasi_rate(
            &model.generator().expect("chernoff sum has a generator"),
            4.0,
            tol,
        )?);
    }
    let nondecreasing = rates.windows(2).all(|w| w[1] >= w[0] - tol.tol_rel);
    suite.record(
        "chernoff-rate-nondecreasing",
        nondecreasing,
        format!("{rates:.6?}"),
    );

    let eck = build_model(
        &ModelSpec::new(ModelName::Eckstein)
            .with("N", 9usize)
            .with("N_shift", 2usize),
    )?;
    let parts = eck.factors(1.0)?.unwrap_or_default();
    let res = split_scaling_discrete(&parts, 2.0, tol)?;
    suite.record(
        "eckstein-foguel-budget-failure",
        res.verdict == Verdict::NotSimilarWithinBudget && res.failed_factor == Some(0),
        format!(
            "verdict {} failed factor {:?}",
            res.verdict, res.failed_factor
        ),
    );
    Ok(suite.finish())
}

/// Run one named suite with default tolerances.
pub fn verify_suite(name: &str) -> Result<SuiteReport, LabError> {
    let tol = TolerancePolicy::default();
    match name {
        "product-laws" => product_laws(&tol),
        "certificates" => certificates(&tol),
        "splitting" => splitting(&tol),
        "interpolation" => interpolation(&tol),
        "gallery-trends" => gallery_trends(&tol),
        other => Err(LabError::UnknownSuite(other.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_suite(name: &str) {
        let report = verify_suite(name).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{name}/{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn product_laws_pass() {
        assert_suite("product-laws");
    }

    #[test]
    fn certificates_pass() {
        assert_suite("certificates");
    }

    #[test]
    fn splitting_passes() {
        assert_suite("splitting");
    }

    #[test]
    fn interpolation_passes() {
        assert_suite("interpolation");
    }

    #[test]
    fn unknown_suite() {
        assert!(matches!(
            verify_suite("nope"),
            Err(LabError::UnknownSuite(_))
        ));
    }
}
