#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simlab::numkit::{op_norm, real, spectral_abscissa, spectral_radius, Operator};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Operator {
    Operator::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn with_radius(m: Operator, r: f64) -> Operator {
    let cur = spectral_radius(&m).unwrap();
    if cur > 0.0 {
        m * real(r / cur)
    } else {
        m
    }
}

pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> Operator {
    random_matrix(rng, n).qr().q()
}

/// Random matrix shifted so that its spectral abscissa equals `abscissa`.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize, abscissa: f64) -> Operator {
    let a = random_matrix(rng, n);
    let shift = spectral_abscissa(&a).unwrap() - abscissa;
    a - Operator::identity(n, n) * real(shift)
}

/// `R C R⁻¹` where `C` is a contraction with a unimodular eigenvalue.
pub fn conjugated_contraction(rng: &mut ChaCha8Rng, n: usize) -> Operator {
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
    let r_inv = r.clone().try_inverse().unwrap();
    r * c * r_inv
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Eigenvalues `(low, high)` of the Hermitian `[[p, w], [w̄, q]]` in closed form.
pub fn eig2(p: f64, q: f64, w: Complex64) -> (f64, f64) {
    let mid = 0.5 * (p + q);
    let rad = (0.25 * (p - q) * (p - q) + w.norm_sqr()).sqrt();
    (mid - rad, mid + rad)
}

/// `[[a, z], [z̄, 1]]` as a 2×2 complex matrix.
fn metric(a: f64, z: Complex64) -> [[Complex64; 2]; 2] {
    [
        [Complex64::new(a, 0.0), z],
        [z.conj(), Complex64::new(1.0, 0.0)],
    ]
}

fn mul(x: &[[Complex64; 2]; 2], y: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    out
}

fn adj(x: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    [
        [x[0][0].conj(), x[1][0].conj()],
        [x[0][1].conj(), x[1][1].conj()],
    ]
}

fn lowest(h: &[[Complex64; 2]; 2]) -> f64 {
    let w = 0.5 * (h[0][1] + h[1][0].conj());
    eig2(h[0][0].re, h[1][1].re, w).0
}

fn as_array(m: &Operator) -> [[Complex64; 2]; 2] {
    assert_eq!(m.shape(), (2, 2));
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

/// `P − T*PT ≽ 0`.
pub fn discrete_feasible(t: &Operator) -> impl Fn(&[[Complex64; 2]; 2]) -> bool {
    let t = as_array(t);
    move |p| {
        let tpt = mul(&adj(&t), &mul(p, &t));
        let d = [
            [p[0][0] - tpt[0][0], p[0][1] - tpt[0][1]],
            [p[1][0] - tpt[1][0], p[1][1] - tpt[1][1]],
        ];
        lowest(&d) >= 0.0
    }
}

/// `A*P + PA ≼ 0`.
pub fn continuous_feasible(a: &Operator) -> impl Fn(&[[Complex64; 2]; 2]) -> bool {
    let a = as_array(a);
    move |p| {
        let x = mul(&adj(&a), p);
        let y = mul(p, &a);
        let d = [
            [-(x[0][0] + y[0][0]), -(x[0][1] + y[0][1])],
            [-(x[1][0] + y[1][0]), -(x[1][1] + y[1][1])],
        ];
        lowest(&d) >= 0.0
    }
}

/// Smallest `√cond(P)` over a zooming grid of metrics `P = [[a, z], [z̄, 1]]`,
/// parametrized by `ln a`, `|z|/√a` and `arg z`.
pub fn grid_constant_2x2(feasible: impl Fn(&[[Complex64; 2]; 2]) -> bool) -> f64 {
    const STEPS: usize = 14;
    const LEVELS: usize = 60;
    let mut center = [0.0f64, 0.5, std::f64::consts::PI];
    let mut half = [12.0f64, 0.5, std::f64::consts::PI];
    let mut best = f64::INFINITY;
    for _ in 0..LEVELS {
        let mut found = None;
        for i in 0..=STEPS {
            let u = center[0] + half[0] * (2.0 * i as f64 / STEPS as f64 - 1.0);
            let a = u.exp();
            for j in 0..=STEPS {
                let rho = (center[1] + half[1] * (2.0 * j as f64 / STEPS as f64 - 1.0))
                    .clamp(0.0, 1.0 - 1e-12);
                for k in 0..=STEPS {
                    let phi = center[2] + half[2] * (2.0 * k as f64 / STEPS as f64 - 1.0);
                    let z = Complex64::from_polar(rho * a.sqrt(), phi);
                    let (lo, hi) = eig2(a, 1.0, z);
                    let cond = hi / lo;
                    if cond < best && feasible(&metric(a, z)) {
                        best = cond;
                        found = Some([u, rho, phi]);
                    }
                }
            }
        }
        if let Some(c) = found {
            center = c;
        }
        for h in &mut half {
            *h *= 0.75;
        }
    }
    best.sqrt()
}

/// `R D R⁻¹` with `D` diagonal, eigenvalue real parts in `[-1, -0.1)` and
/// `R = I + spread·G` for a random `G`.
pub fn nonnormal_stable(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Operator {
    let d = Operator::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(-rng.gen_range(0.1..1.0), rng.gen_range(-1.0..1.0))
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let r = Operator::identity(n, n) + random_matrix(rng, n) * real(spread);
    let r_inv = r.clone().try_inverse().unwrap();
    r * d * r_inv
}
