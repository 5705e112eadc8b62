//! Interpolation of a matrix `T` by a semigroup on `L²(𝕋) ⊗ H`, discretized on
//! `M` equal arcs of the circle.
//!
//! The grid space is ordered arc-major: coordinate `j·n + i` is component `i` of
//! the value on arc `j`. With arc weights `1/M` the constant function is the unit
//! vector `χ = M^{-1/2}(1, …, 1) ⊗ ·`.
//!
//! At a grid time `t = s/M` the operator rotates arcs by `s` and applies
//! `T^{⌊t⌋+1}` on the first `{t}·M` arcs and `T^{⌊t⌋}` on the rest. Operators are
//! held structurally (a shift plus one integer power per arc), so composition is
//! exact index arithmetic and every materialization of a given power reuses the
//! same floating-point matrix.

use std::fmt::Write as _;

use thiserror::Error;

use crate::numkit::{
    check_square, format_sig17, kron, max_abs_diff, op_norm, real, NumError, Operator,
    TolerancePolicy,
};
use crate::simcert::{MetricCertificate, SimError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BsError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("time {t} is not a multiple of 1/{arcs}")]
    NotGridAligned { t: f64, arcs: usize },
    #[error("time {t} is negative")]
    NegativeTime { t: f64 },
    #[error("grid needs at least one arc")]
    EmptyGrid,
    #[error("bases {first} and {second} do not commute (defect {defect:e})")]
    NonCommuting {
        first: usize,
        second: usize,
        defect: f64,
    },
    #[error("certificate does not validate at grid time {t}")]
    CertificateInvalid { t: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("factor index {index} out of range for {count} factors")]
    BadFactor { index: usize, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircleGrid {
    arcs: usize,
}

impl CircleGrid {
    pub fn new(arcs: usize) -> Result<Self, BsError> {
        if arcs == 0 {
            return Err(BsError::EmptyGrid);
        }
        Ok(CircleGrid { arcs })
    }

    pub fn arcs(&self) -> usize {
        self.arcs
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.arcs as f64
    }

    /// Steps `s` with `t = s/M`, or an error when `t·M` is not an integer.
    pub fn steps(&self, t: f64) -> Result<u64, BsError> {
        if t < 0.0 {
            return Err(BsError::NegativeTime { t });
        }
        let x = t * self.arcs as f64;
        let s = x.round();
        if (x - s).abs() > 1e-9 * x.max(1.0) {
            return Err(BsError::NotGridAligned { t, arcs: self.arcs });
        }
        Ok(s as u64)
    }

    /// Nearest grid time to `t`.
    pub fn snap(&self, t: f64) -> Result<Snapped, BsError> {
        if t < 0.0 {
            return Err(BsError::NegativeTime { t });
        }
        let steps = (t * self.arcs as f64).round() as u64;
        let used = steps as f64 / self.arcs as f64;
        Ok(Snapped {
            requested: t,
            used,
            steps,
            perturbation: used - t,
        })
    }

    /// All grid times `k/M` in `[0, t_max]`.
    pub fn times_up_to(&self, t_max: f64) -> Vec<f64> {
        let last = (t_max * self.arcs as f64 + 1e-9).floor() as u64;
        (0..=last).map(|s| s as f64 / self.arcs as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapped {
    pub requested: f64,
    pub used: f64,
    pub steps: u64,
    pub perturbation: f64,
}

/// Arc `j` receives arc `(j − shift) mod M`, multiplied by `T^{powers[j]}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BsOperator {
    pub shift: usize,
    pub powers: Vec<u64>,
}

impl BsOperator {
    pub fn at_steps(grid: CircleGrid, steps: u64) -> Self {
        let m = grid.arcs as u64;
        let (whole, frac) = (steps / m, steps % m);
        let powers = (0..m).map(|j| whole + u64::from(j < frac)).collect();
        BsOperator {
            shift: frac as usize,
            powers,
        }
    }

    pub fn arcs(&self) -> usize {
        self.powers.len()
    }

    pub fn source(&self, j: usize) -> usize {
        let m = self.arcs();
        (j + m - self.shift) % m
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &BsOperator) -> BsOperator {
        let m = self.arcs();
        let powers = (0..m)
            .map(|j| self.powers[j] + other.powers[self.source(j)])
            .collect();
        BsOperator {
            shift: (self.shift + other.shift) % m,
            powers,
        }
    }

    pub fn max_power(&self) -> u64 {
        self.powers.iter().copied().max().unwrap_or(0)
    }

    pub fn materialize(&self, table: &PowerTable) -> Operator {
        let n = table.dim();
        let m = self.arcs();
        let mut out = Operator::zeros(m * n, m * n);
        for j in 0..m {
            let src = self.source(j);
            out.view_mut((j * n, src * n), (n, n))
                .copy_from(table.get(self.powers[j]));
        }
        out
    }
}

/// `T⁰, T¹, …` built by repeated right multiplication.
#[derive(Debug, Clone)]
pub struct PowerTable {
    base: Operator,
    powers: Vec<Operator>,
}

impl PowerTable {
    pub fn new(base: &Operator) -> Self {
        let n = base.nrows();
        PowerTable {
            base: base.clone(),
            powers: vec![Operator::identity(n, n)],
        }
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    pub fn extend_to(&mut self, k: u64) {
        while (self.powers.len() as u64) <= k {
            let next = self.powers.last().expect("nonempty") * &self.base;
            self.powers.push(next);
        }
    }

    pub fn with_max(base: &Operator, k: u64) -> Self {
        let mut t = PowerTable::new(base);
        t.extend_to(k);
        t
    }

    pub fn get(&self, k: u64) -> &Operator {
        &self.powers[k as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedSemigroup {
    base: Operator,
    grid: CircleGrid,
}

impl InterpolatedSemigroup {
    pub fn new(base: Operator, grid: CircleGrid) -> Result<Self, BsError> {
        check_square(&base)?;
        Ok(InterpolatedSemigroup { base, grid })
    }

    pub fn base(&self) -> &Operator {
        &self.base
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    /// Dimension `M·n` of the grid space.
    pub fn dim(&self) -> usize {
        self.grid.arcs * self.base.nrows()
    }

    pub fn structure(&self, t: f64) -> Result<BsOperator, BsError> {
        Ok(BsOperator::at_steps(self.grid, self.grid.steps(t)?))
    }

    fn table_for(&self, op: &BsOperator) -> PowerTable {
        PowerTable::with_max(&self.base, op.max_power())
    }
}

/// `T(t)` for a grid-aligned `t`.
pub fn bs_matrix(s: &InterpolatedSemigroup, t: f64) -> Result<Operator, BsError> {
    let op = s.structure(t)?;
    Ok(op.materialize(&s.table_for(&op)))
}

/// `T(t)` at the nearest grid time, with the rounding recorded.
pub fn bs_matrix_snapped(
    s: &InterpolatedSemigroup,
    t: f64,
) -> Result<(Operator, Snapped), BsError> {
    let snap = s.grid.snap(t)?;
    let op = BsOperator::at_steps(s.grid, snap.steps);
    Ok((op.materialize(&s.table_for(&op)), snap))
}

/// `‖T(n) − I_M ⊗ Tⁿ‖` (largest entry).
pub fn bs_check_interpolation(s: &InterpolatedSemigroup, n: u64) -> f64 {
    let op = BsOperator::at_steps(s.grid, n * s.grid.arcs as u64);
    let table = PowerTable::with_max(&s.base, n);
    let m = s.grid.arcs;
    let expected = kron(&Operator::identity(m, m), table.get(n));
    max_abs_diff(&op.materialize(&table), &expected)
}

/// `‖T(s+t) − T(s)∘T(t)‖` with the composition carried out on the structure.
pub fn bs_semigroup_residual(s: &InterpolatedSemigroup, t1: f64, t2: f64) -> Result<f64, BsError> {
    let a = s.structure(t1)?;
    let b = s.structure(t2)?;
    let sum = BsOperator::at_steps(s.grid, s.grid.steps(t1)? + s.grid.steps(t2)?);
    let composed = a.compose(&b);
    let table = PowerTable::with_max(&s.base, sum.max_power().max(composed.max_power()));
    Ok(max_abs_diff(
        &composed.materialize(&table),
        &sum.materialize(&table),
    ))
}

/// `‖T(t)‖`, the largest norm among the powers present on the arcs.
pub fn bs_norm(s: &InterpolatedSemigroup, t: f64) -> Result<f64, BsError> {
    let op = s.structure(t)?;
    let table = s.table_for(&op);
    let mut powers = op.powers.clone();
    powers.sort_unstable();
    powers.dedup();
    Ok(powers
        .iter()
        .map(|&k| op_norm(table.get(k)))
        .fold(0.0, f64::max))
}

/// Unit constant function `χ ⊗ I_n` as an `(M·n) × n` isometry.
pub fn constant_embedding(grid: CircleGrid, n: usize) -> Operator {
    let m = grid.arcs;
    let chi = Operator::from_element(m, 1, real(grid.weight().sqrt()));
    kron(&chi, &Operator::identity(n, n))
}

/// Compress a certificate for the interpolating semigroup to one for the base:
/// `P_H = (χ⊗I)* P (χ⊗I)`.
pub fn bs_extract_certificate(
    p_eq: &MetricCertificate,
    s: &InterpolatedSemigroup,
    tol: &TolerancePolicy,
) -> Result<MetricCertificate, BsError> {
    if p_eq.p.dim() != s.dim() {
        return Err(BsError::DimensionMismatch {
            expected: s.dim(),
            got: p_eq.p.dim(),
        });
    }
    for t in s.grid.times_up_to(1.0) {
        let m = bs_matrix(s, t)?;
        if !p_eq.validates_discrete(&m, tol.tol_psd) {
            return Err(BsError::CertificateInvalid { t });
        }
    }
    let e = constant_embedding(s.grid, s.base.nrows());
    let ph = e.adjoint() * p_eq.p.matrix() * &e;
    Ok(MetricCertificate::discrete(&ph, &s.base)?)
}

/// `T_k(t)` on `L²(𝕋^m) ⊗ H` for a family of commuting bases: rotates circle
/// coordinate `k` only, applying powers of base `k` arc by arc.
pub fn bs_multifactor(
    bases: &[Operator],
    grids: &[CircleGrid],
    t: f64,
    k: usize,
    tol: &TolerancePolicy,
) -> Result<Operator, BsError> {
    if bases.len() != grids.len() {
        return Err(BsError::DimensionMismatch {
            expected: bases.len(),
            got: grids.len(),
        });
    }
    if k >= bases.len() {
        return Err(BsError::BadFactor {
            index: k,
            count: bases.len(),
        });
    }
    let n = check_square(&bases[0])?;
    for b in bases {
        if check_square(b)? != n {
            return Err(BsError::DimensionMismatch {
                expected: n,
                got: b.nrows(),
            });
        }
    }
    for i in 0..bases.len() {
        for j in i + 1..bases.len() {
            let comm = &bases[i] * &bases[j] - &bases[j] * &bases[i];
            let scale = (op_norm(&bases[i]) * op_norm(&bases[j])).max(1.0);
            let defect = op_norm(&comm);
            if defect > tol.tol_rel * scale {
                return Err(BsError::NonCommuting {
                    first: i,
                    second: j,
                    defect,
                });
            }
        }
    }
    let grid = grids[k];
    let op = BsOperator::at_steps(grid, grid.steps(t)?);
    let table = PowerTable::with_max(&bases[k], op.max_power());
    let before: usize = grids[..k].iter().map(|g| g.arcs).product();
    let after: usize = grids[k + 1..].iter().map(|g| g.arcs).product();
    let m = grid.arcs;
    let total = before * m * after * n;
    let mut out = Operator::zeros(total, total);
    for a in 0..before {
        for j in 0..m {
            let src = op.source(j);
            let block = table.get(op.powers[j]);
            for c in 0..after {
                let row = ((a * m + j) * after + c) * n;
                let col = ((a * m + src) * after + c) * n;
                out.view_mut((row, col), (n, n)).copy_from(block);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsSample {
    pub t: f64,
    pub norm: f64,
    pub floor_t: u64,
    pub frac_t: f64,
}

/// `‖T(t)‖` with `⌊t⌋` and `{t}` for each grid time.
pub fn bs_norm_series(s: &InterpolatedSemigroup, times: &[f64]) -> Result<Vec<BsSample>, BsError> {
    let m = s.grid.arcs as u64;
    times
        .iter()
        .map(|&t| {
            let steps = s.grid.steps(t)?;
            Ok(BsSample {
                t,
                norm: bs_norm(s, t)?,
                floor_t: steps / m,
                frac_t: (steps % m) as f64 / m as f64,
            })
        })
        .collect()
}

/// CSV with header `t,norm,floor_t,frac_t`.
pub fn norm_series_csv(samples: &[BsSample]) -> String {
    let mut out = String::from("t,norm,floor_t,frac_t\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            format_sig17(s.t),
            format_sig17(s.norm),
            s.floor_t,
            format_sig17(s.frac_t)
        );
    }
    out
}
