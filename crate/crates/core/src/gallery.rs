//! Finite truncations of the classical examples and counterexamples, addressed
//! by name through a small registry.
//!
//! | name | dim | generator |
//! |---|---|---|
//! | `foguel` | `2N` | no (sample `t ∈ ℕ` gives `Fᵗ`) |
//! | `eckstein` | `2N·S²` (`S = N_shift`, default `N`) | no |
//! | `benchimol` | `2q(3^K + 1)` | yes |
//! | `packel_vj` | `2q(3^K + 1)` | no (`t·q ∈ ℤ`) |
//! | `riemann_liouville` | `M` | no (any `t ≥ 0`) |
//! | `nilshift` | `M` | no (`t·M ∈ ℤ`) |
//! | `lemerdy` | `rows(B)` | yes |
//! | `chernoff_sum` | `N_sum·dim(A_inner)` | yes |
//! | `counter_nilpotent` | `M·rows(B)` | no (`t·M ∈ ℤ`) |
//!
//! Shift-based models live on the cells `(j/q, (j+1)/q]` of `[0, 3^K + 1]` and
//! act on cell values; with uniform cells this is an isometric copy of the
//! step functions in `L²`.
//!
//! The default Le Merdy basis `B_N` (columns `e_k + ½Σ_{j<k}(−1)^j e_j/(k−j)`)
//! only has slowly growing condition number and serves growth-trend
//! experiments; pass `B` explicitly for anything quantitative.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::numkit::{
    check_square, inverse, kron, kron_all, matexp, matrix_power, op_norm, real, NumError, Operator,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GalleryError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("bad parameter {field}: {message}")]
    BadParams { field: String, message: String },
    #[error("time {t} is not on the model grid (step {step})")]
    NotGridAligned { t: f64, step: f64 },
    #[error("time {t} is negative")]
    NegativeTime { t: f64 },
    #[error("1 is in the spectrum (distance {distance:e})")]
    OneInSpectrum { distance: f64 },
}

fn bad(field: &str, message: impl Into<String>) -> GalleryError {
    GalleryError::BadParams {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelName {
    Foguel,
    Benchimol,
    PackelVj,
    RiemannLiouville,
    Nilshift,
    Lemerdy,
    ChernoffSum,
    Eckstein,
    CounterNilpotent,
}

impl ModelName {
    pub const ALL: [ModelName; 9] = [
        ModelName::Foguel,
        ModelName::Benchimol,
        ModelName::PackelVj,
        ModelName::RiemannLiouville,
        ModelName::Nilshift,
        ModelName::Lemerdy,
        ModelName::ChernoffSum,
        ModelName::Eckstein,
        ModelName::CounterNilpotent,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelName::Foguel => "foguel",
            ModelName::Benchimol => "benchimol",
            ModelName::PackelVj => "packel_vj",
            ModelName::RiemannLiouville => "riemann_liouville",
            ModelName::Nilshift => "nilshift",
            ModelName::Lemerdy => "lemerdy",
            ModelName::ChernoffSum => "chernoff_sum",
            ModelName::Eckstein => "eckstein",
            ModelName::CounterNilpotent => "counter_nilpotent",
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelName {
    type Err = GalleryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| GalleryError::UnknownModel(s.into()))
    }
}

/// Registered model names.
pub fn model_names() -> Vec<&'static str> {
    ModelName::ALL.iter().map(|m| m.as_str()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Number(f64),
    Label(String),
    Matrix(Operator),
}

impl From<f64> for ParamValue {
    fn from(x: f64) -> Self {
        ParamValue::Number(x)
    }
}

impl From<usize> for ParamValue {
    fn from(x: usize) -> Self {
        ParamValue::Number(x as f64)
    }
}

impl From<&str> for ParamValue {
    fn from(s: &str) -> Self {
        ParamValue::Label(s.into())
    }
}

impl From<Operator> for ParamValue {
    fn from(m: Operator) -> Self {
        ParamValue::Matrix(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: ModelName,
    pub params: BTreeMap<String, ParamValue>,
}

impl ModelSpec {
    pub fn new(name: ModelName) -> Self {
        ModelSpec {
            name,
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    fn number(&self, key: &str) -> Result<Option<f64>, GalleryError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(ParamValue::Number(x)) if x.is_finite() => Ok(Some(*x)),
            Some(_) => Err(bad(key, "expected a finite number")),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>, GalleryError> {
        match self.number(key)? {
            None => Ok(None),
            Some(x) if x >= 1.0 && x.fract() == 0.0 && x <= 1e9 => Ok(Some(x as usize)),
            Some(x) => Err(bad(key, format!("expected a positive integer, got {x}"))),
        }
    }

    fn required_count(&self, key: &str) -> Result<usize, GalleryError> {
        self.count(key)?.ok_or_else(|| bad(key, "missing"))
    }

    fn matrix(&self, key: &str) -> Result<Option<&Operator>, GalleryError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(ParamValue::Matrix(m)) => {
                check_square(m).map_err(|e| bad(key, e.to_string()))?;
                Ok(Some(m))
            }
            Some(_) => Err(bad(key, "expected a matrix")),
        }
    }

    fn label(&self, key: &str) -> Result<Option<&str>, GalleryError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(ParamValue::Label(s)) => Ok(Some(s)),
            Some(_) => Err(bad(key, "expected a label")),
        }
    }
}

/// Index set of the reflected bands of `V_J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandSet {
    Z,
    ZPlus,
    ZMinus,
}

impl std::str::FromStr for BandSet {
    type Err = GalleryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Z" => Ok(BandSet::Z),
            "Z+" => Ok(BandSet::ZPlus),
            "Z-" => Ok(BandSet::ZMinus),
            other => Err(bad("J", format!("expected Z, Z+ or Z-, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Discrete(Operator),
    Generator(Operator),
    Diagonalized {
        basis: Operator,
        basis_inv: Operator,
        rates: Vec<f64>,
    },
    Packel {
        k: u32,
        q: usize,
        bands: BandSet,
    },
    RiemannLiouville {
        m: usize,
    },
    Nilshift {
        m: usize,
    },
    Counter {
        m: usize,
        basis: Operator,
        basis_inv: Operator,
        rates: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub spec: ModelSpec,
    pub dim: usize,
    pub has_generator: bool,
    kind: Kind,
}

/// Forward shift `e_i ↦ e_{i+1}` on `n` coordinates.
pub fn shift(n: usize) -> Operator {
    Operator::from_fn(n, n, |i, j| real(if i == j + 1 { 1.0 } else { 0.0 }))
}

/// Coupling positions `3, 9, 27, … ≤ n` (one-based).
pub fn triadic_positions(n: usize) -> Vec<usize> {
    std::iter::successors(Some(3usize), |p| p.checked_mul(3))
        .take_while(|&p| p <= n)
        .collect()
}

/// `[[S*, εP], [0, S]]` with `P` the diagonal projection onto [`triadic_positions`].
pub fn foguel_operator(n: usize, eps: f64) -> Operator {
    let mut f = Operator::zeros(2 * n, 2 * n);
    let s = shift(n);
    f.view_mut((0, 0), (n, n)).copy_from(&s.adjoint());
    f.view_mut((n, n), (n, n)).copy_from(&s);
    for p in triadic_positions(n) {
        f[(p - 1, n + p - 1)] = real(eps);
    }
    f
}

/// `F ⊗ S ⊗ S*`.
pub fn eckstein_operator(n: usize, n_shift: usize, eps: f64) -> Operator {
    let s = shift(n_shift);
    kron_all(&[foguel_operator(n, eps), s.clone(), s.adjoint()])
}

fn cells(k: u32, q: usize) -> usize {
    q * (3usize.pow(k) + 1)
}

/// Upwind right-shift generator `(Df)_j = −q(f_j − f_{j−1})` on `[0, 3^K + 1]`.
pub fn right_shift_generator(k: u32, q: usize) -> Operator {
    let n = cells(k, q);
    let qf = q as f64;
    Operator::from_fn(n, n, |i, j| {
        if i == j {
            real(-qf)
        } else if i == j + 1 {
            real(qf)
        } else {
            real(0.0)
        }
    })
}

/// Diagonal projection onto the cells of `Δ = ∪_{n≥1}[3ⁿ − 1, 3ⁿ]` inside `[0, 3^K + 1]`.
pub fn delta_projection(k: u32, q: usize) -> Operator {
    let n = cells(k, q);
    let mut p = Operator::zeros(n, n);
    for e in 1..=k {
        let top = 3usize.pow(e);
        for j in q * (top - 1)..q * top {
            p[(j, j)] = real(1.0);
        }
    }
    p
}

/// `[[D*, εP], [0, D]]`.
pub fn benchimol_generator(k: u32, q: usize, eps: f64) -> Operator {
    let d = right_shift_generator(k, q);
    let n = d.nrows();
    let mut a = Operator::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&d.adjoint());
    a.view_mut((0, n), (n, n))
        .copy_from(&(delta_projection(k, q) * real(eps)));
    a.view_mut((n, n), (n, n)).copy_from(&d);
    a
}

/// Cell shift: cell `j` receives cell `j − s` (`s > 0` moves right), zero outside.
fn cell_shift(n: usize, s: i64) -> Operator {
    Operator::from_fn(n, n, |i, j| {
        real(if i as i64 - j as i64 == s { 1.0 } else { 0.0 })
    })
}

/// The integer `n` with `3ⁿ < s/q ≤ 3ⁿ⁺¹`.
fn triadic_index(s: u64, q: u64) -> i32 {
    let below = |n: i32| -> bool {
        // 3ⁿ < s/q
        if n >= 0 {
            (3u128.pow(n as u32)) * (q as u128) < s as u128
        } else {
            (q as u128) < (s as u128) * 3u128.pow((-n) as u32)
        }
    };
    let mut n = 0i32;
    while !below(n) {
        n -= 1;
    }
    while below(n + 1) {
        n += 1;
    }
    n
}

/// `V_J(t)` for `t = s/q` on the cells of `[0, 3^K + 1]`.
pub fn packel_reflection(
    k: u32,
    q: usize,
    bands: BandSet,
    s: u64,
) -> Result<Operator, GalleryError> {
    let n = cells(k, q);
    let mut v = Operator::zeros(n, n);
    if s == 0 {
        return Ok(v);
    }
    let t = s as f64 / q as f64;
    let star = triadic_index(s, q as u64);
    let n0 = match bands {
        BandSet::Z => Some(star),
        BandSet::ZPlus => (star >= 0).then_some(star),
        BandSet::ZMinus => Some(star.min(0)),
    };
    let first = n0.map_or(0, |x| x + 1);
    let last = match bands {
        BandSet::ZMinus => 0,
        _ => k as i32 + 1,
    };
    // positions are integers in units of 1/(q·3^a)
    let a = n0.map_or(0, |x| (-x).max(0)) as u32;
    let unit = 3i128.pow(a);
    let qi = q as i128;
    let si = s as i128;
    let pow3 = |e: i32| -> i128 { 3i128.pow((e + a as i32) as u32) };
    let mut bands_list: Vec<(i128, i128, i128)> = Vec::new();
    if let Some(n0) = n0 {
        let hi = 2 * pow3(n0) * qi - si * unit;
        if hi > 0 {
            bands_list.push((0, hi, hi));
        }
    }
    for e in first..=last {
        let top = pow3(e) * qi;
        let lo = top - si * unit;
        bands_list.push((lo, top, 2 * top - si * unit));
    }
    let total = n as i128 * unit;
    for j in 0..n {
        let (c0, c1) = (j as i128 * unit, (j as i128 + 1) * unit);
        for &(lo, hi, centre) in &bands_list {
            let inside = c0 >= lo && c1 <= hi;
            let overlaps = c1 > lo && c0 < hi;
            if !inside {
                if overlaps && lo < total {
                    return Err(GalleryError::NotGridAligned {
                        t,
                        step: 1.0 / q as f64,
                    });
                }
                continue;
            }
            let src = centre - c1;
            if src.rem_euclid(unit) != 0 {
                return Err(GalleryError::NotGridAligned {
                    t,
                    step: 1.0 / q as f64,
                });
            }
            let src = src / unit;
            if (0..n as i128).contains(&src) {
                v[(j, src as usize)] = real(1.0);
            }
            break;
        }
    }
    Ok(v)
}

/// `[[L(t), V_J(t)], [0, R(t)]]` for `t = s/q`.
pub fn packel_operator(k: u32, q: usize, bands: BandSet, s: u64) -> Result<Operator, GalleryError> {
    let n = cells(k, q);
    let mut out = Operator::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n))
        .copy_from(&cell_shift(n, -(s as i64)));
    out.view_mut((0, n), (n, n))
        .copy_from(&packel_reflection(k, q, bands, s)?);
    out.view_mut((n, n), (n, n))
        .copy_from(&cell_shift(n, s as i64));
    Ok(out)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `Γ(x)` by the Lanczos approximation (`g = 7`), with reflection below `½`.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS[0];
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// Fractional integral of order `t` on `M` cells of `[0, 1]`, collocated at cell
/// midpoints with the kernel `(x − y)^{t−1}/Γ(t)` integrated exactly per cell.
pub fn riemann_liouville_operator(m: usize, t: f64) -> Result<Operator, GalleryError> {
    if t < 0.0 {
        return Err(GalleryError::NegativeTime { t });
    }
    if t == 0.0 {
        return Ok(Operator::identity(m, m));
    }
    let h = 1.0 / m as f64;
    let scale = 1.0 / gamma(t + 1.0);
    // lower-triangular Toeplitz: entry depends only on d = i − j
    let w: Vec<f64> = (0..m)
        .map(|d| {
            let near = (d as f64 + 0.5) * h;
            if d == 0 {
                near.powf(t) * scale
            } else {
                ((near).powf(t) - (near - h).powf(t)) * scale
            }
        })
        .collect();
    Ok(Operator::from_fn(m, m, |i, j| {
        if i >= j {
            real(w[i - j])
        } else {
            real(0.0)
        }
    }))
}

/// Default conditional-basis stand-in `B_N`.
pub fn lemerdy_basis(n: usize) -> Operator {
    Operator::from_fn(n, n, |row, col| {
        let (j, k) = (row + 1, col + 1);
        if j == k {
            real(1.0)
        } else if j < k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            real(0.5 * sign / (k - j) as f64)
        } else {
            real(0.0)
        }
    })
}

/// Decay rates `2ⁿ`, `n = 1..=N`.
fn lemerdy_rates(n: usize) -> Vec<f64> {
    (1..=n).map(|k| 2f64.powi(k as i32)).collect()
}

fn diagonalized(basis: &Operator, basis_inv: &Operator, values: &[f64]) -> Operator {
    let mut scaled = basis.clone();
    for (k, v) in values.iter().enumerate() {
        let mut col = scaled.column_mut(k);
        col *= real(*v);
    }
    scaled * basis_inv
}

/// `B diag(−2ⁿ) B⁻¹`.
pub fn lemerdy_generator(basis: &Operator) -> Result<Operator, GalleryError> {
    let inv = inverse(basis)?;
    let rates: Vec<f64> = lemerdy_rates(basis.nrows()).iter().map(|r| -r).collect();
    Ok(diagonalized(basis, &inv, &rates))
}

/// Cayley transform `(A + I)(A − I)⁻¹ = I + 2(A − I)⁻¹`.
pub fn cogenerator(a: &Operator) -> Result<Operator, GalleryError> {
    let n = check_square(a)?;
    let id = Operator::identity(n, n);
    let shifted = a - &id;
    let sv = shifted.singular_values();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin <= 1e-12 * op_norm(a).max(1.0) {
        return Err(GalleryError::OneInSpectrum { distance: smin });
    }
    let inv = inverse(&shifted)?;
    Ok(&id + inv * real(2.0))
}

fn lemerdy_parts(spec: &ModelSpec) -> Result<(Operator, Operator, Vec<f64>), GalleryError> {
    let basis = match (spec.matrix("B")?, spec.count("N")?) {
        (Some(b), _) => b.clone(),
        (None, Some(n)) => lemerdy_basis(n),
        (None, None) => return Err(bad("B", "give a basis matrix B or a size N")),
    };
    let inv = inverse(&basis).map_err(|_| bad("B", "basis matrix is singular"))?;
    let rates = lemerdy_rates(basis.nrows());
    Ok((basis, inv, rates))
}

/// Build a model from its spec; parameter problems name the offending field.
pub fn build_model(spec: &ModelSpec) -> Result<ModelInstance, GalleryError> {
    let eps = spec.number("eps")?.unwrap_or(1.0);
    let (kind, dim) = match spec.name {
        ModelName::Foguel => {
            let n = spec.required_count("N")?;
            (Kind::Discrete(foguel_operator(n, eps)), 2 * n)
        }
        ModelName::Eckstein => {
            let n = spec.required_count("N")?;
            let ns = spec.count("N_shift")?.unwrap_or(n);
            let d = 2 * n * ns * ns;
            if d > 4096 {
                return Err(bad("N", format!("dimension {d} exceeds 4096")));
            }
            (Kind::Discrete(eckstein_operator(n, ns, eps)), d)
        }
        ModelName::Benchimol => {
            let k = spec.required_count("K")? as u32;
            let q = spec.required_count("q")?;
            if k > 8 {
                return Err(bad("K", "at most 8"));
            }
            (
                Kind::Generator(benchimol_generator(k, q, eps)),
                2 * cells(k, q),
            )
        }
        ModelName::PackelVj => {
            let k = spec.required_count("K")? as u32;
            let q = spec.required_count("q")?;
            if k > 8 {
                return Err(bad("K", "at most 8"));
            }
            let bands: BandSet = spec
                .label("J")?
                .ok_or_else(|| bad("J", "missing"))?
                .parse()?;
            (Kind::Packel { k, q, bands }, 2 * cells(k, q))
        }
        ModelName::RiemannLiouville => {
            let m = spec.required_count("M")?;
            (Kind::RiemannLiouville { m }, m)
        }
        ModelName::Nilshift => {
            let m = spec.required_count("M")?;
            (Kind::Nilshift { m }, m)
        }
        ModelName::Lemerdy => {
            let (basis, basis_inv, rates) = lemerdy_parts(spec)?;
            let n = basis.nrows();
            (
                Kind::Diagonalized {
                    basis,
                    basis_inv,
                    rates,
                },
                n,
            )
        }
        ModelName::ChernoffSum => {
            let inner = spec
                .matrix("A_inner")?
                .ok_or_else(|| bad("A_inner", "missing"))?;
            let count = spec.required_count("N_sum")?;
            let d = inner.nrows();
            let mut a = Operator::zeros(count * d, count * d);
            for k in 0..count {
                a.view_mut((k * d, k * d), (d, d))
                    .copy_from(&(inner * real((k + 1) as f64)));
            }
            (Kind::Generator(a), count * d)
        }
        ModelName::CounterNilpotent => {
            let m = spec.required_count("M")?;
            let (basis, basis_inv, rates) = lemerdy_parts(spec)?;
            let n = basis.nrows();
            (
                Kind::Counter {
                    m,
                    basis,
                    basis_inv,
                    rates,
                },
                m * n,
            )
        }
    };
    let has_generator = matches!(kind, Kind::Generator(_) | Kind::Diagonalized { .. });
    Ok(ModelInstance {
        spec: spec.clone(),
        dim,
        has_generator,
        kind,
    })
}

fn grid_steps(t: f64, per_unit: usize) -> Result<u64, GalleryError> {
    if t < 0.0 {
        return Err(GalleryError::NegativeTime { t });
    }
    let x = t * per_unit as f64;
    let s = x.round();
    if (x - s).abs() > 1e-9 * x.max(1.0) {
        return Err(GalleryError::NotGridAligned {
            t,
            step: 1.0 / per_unit as f64,
        });
    }
    Ok(s as u64)
}

impl ModelInstance {
    pub fn name(&self) -> ModelName {
        self.spec.name
    }

    pub fn generator(&self) -> Option<Operator> {
        match &self.kind {
            Kind::Generator(a) => Some(a.clone()),
            Kind::Diagonalized {
                basis,
                basis_inv,
                rates,
            } => Some(diagonalized(
                basis,
                basis_inv,
                &rates.iter().map(|r| -r).collect::<Vec<_>>(),
            )),
            _ => None,
        }
    }

    /// The operator itself for discrete models.
    pub fn operator(&self) -> Option<&Operator> {
        match &self.kind {
            Kind::Discrete(t) => Some(t),
            _ => None,
        }
    }

    /// Spacing of admissible sample times, `None` when any `t ≥ 0` is accepted.
    pub fn time_step(&self) -> Option<f64> {
        match &self.kind {
            Kind::Discrete(_) => Some(1.0),
            Kind::Packel { q, .. } => Some(1.0 / *q as f64),
            Kind::Nilshift { m } | Kind::Counter { m, .. } => Some(1.0 / *m as f64),
            _ => None,
        }
    }

    /// `T(t)`.
    pub fn sample(&self, t: f64) -> Result<Operator, GalleryError> {
        if t < 0.0 {
            return Err(GalleryError::NegativeTime { t });
        }
        match &self.kind {
            Kind::Discrete(op) => Ok(matrix_power(op, grid_steps(t, 1)?)),
            Kind::Generator(a) => Ok(matexp(&(a * real(t)))?),
            Kind::Diagonalized {
                basis,
                basis_inv,
                rates,
            } => {
                let decay: Vec<f64> = rates.iter().map(|r| (-r * t).exp()).collect();
                Ok(diagonalized(basis, basis_inv, &decay))
            }
            Kind::Packel { k, q, bands } => packel_operator(*k, *q, *bands, grid_steps(t, *q)?),
            Kind::RiemannLiouville { m } => riemann_liouville_operator(*m, t),
            Kind::Nilshift { m } => Ok(cell_shift(*m, grid_steps(t, *m)? as i64)),
            Kind::Counter {
                m,
                basis,
                basis_inv,
                rates,
            } => {
                let s = grid_steps(t, *m)?;
                let nil = riemann_liouville_operator(*m, t)? * cell_shift(*m, s as i64);
                let decay: Vec<f64> = rates.iter().map(|r| (-r * t).exp()).collect();
                Ok(kron(&nil, &diagonalized(basis, basis_inv, &decay)))
            }
        }
    }

    /// Tensor factors at time `t` where the model is a product.
    pub fn factors(&self, t: f64) -> Result<Option<Vec<Operator>>, GalleryError> {
        match (&self.kind, self.spec.name) {
            (Kind::Discrete(_), ModelName::Eckstein) => {
                let n = self.spec.required_count("N")?;
                let ns = self.spec.count("N_shift")?.unwrap_or(n);
                let eps = self.spec.number("eps")?.unwrap_or(1.0);
                let s = shift(ns);
                let k = grid_steps(t, 1)?;
                let parts = [foguel_operator(n, eps), s.clone(), s.adjoint()];
                Ok(Some(parts.iter().map(|p| matrix_power(p, k)).collect()))
            }
            (
                Kind::Counter {
                    m,
                    basis,
                    basis_inv,
                    rates,
                },
                _,
            ) => {
                let s = grid_steps(t, *m)?;
                let nil = riemann_liouville_operator(*m, t)? * cell_shift(*m, s as i64);
                let decay: Vec<f64> = rates.iter().map(|r| (-r * t).exp()).collect();
                Ok(Some(vec![nil, diagonalized(basis, basis_inv, &decay)]))
            }
            _ => Ok(None),
        }
    }

    /// Generator of the Le Merdy factor of `counter_nilpotent` (or of `lemerdy` itself).
    pub fn lemerdy_factor_generator(&self) -> Option<Operator> {
        match &self.kind {
            Kind::Counter {
                basis,
                basis_inv,
                rates,
                ..
            }
            | Kind::Diagonalized {
                basis,
                basis_inv,
                rates,
            } => Some(diagonalized(
                basis,
                basis_inv,
                &rates.iter().map(|r| -r).collect::<Vec<_>>(),
            )),
            _ => None,
        }
    }
}
