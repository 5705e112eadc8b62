mod common;

use rand::Rng;
use simlab::numkit::{from_real_rows, TolerancePolicy};
use simlab::simcert::{semigroup_constant, similarity_constant};

use common::{
    continuous_feasible, discrete_feasible, grid_constant_2x2, random_matrix, random_stable, rng,
    with_radius,
};

#[test]
fn jordan_generator_matches_grid() {
    let tol = TolerancePolicy::default();
    let a = from_real_rows(2, 2, &[-1.0, 4.0, 0.0, -1.0]);
    let solved = semigroup_constant(&a, tol.kappa_max, &tol).unwrap();
    let grid = grid_constant_2x2(continuous_feasible(&a));
    assert!(
        (solved.constant - grid).abs() <= 1e-2,
        "{} vs {grid}",
        solved.constant
    );
}

#[test]
fn nilpotent_step_matches_grid() {
    let tol = TolerancePolicy::default();
    let t = from_real_rows(2, 2, &[0.5, 1.0, 0.0, 0.5]);
    let solved = similarity_constant(&t, tol.kappa_max, &tol).unwrap();
    let grid = grid_constant_2x2(discrete_feasible(&t));
    assert!(
        (solved.constant - grid).abs() <= 1e-2,
        "{} vs {grid}",
        solved.constant
    );
}

#[test]
fn random_generators_match_grid() {
    let tol = TolerancePolicy::default();
    let mut rng = rng(0x0_2AC1E);
    for _ in 0..10 {
        let level = -rng.gen_range(0.1..1.0);
        let a = random_stable(&mut rng, 2, level);
        let solved = semigroup_constant(&a, tol.kappa_max, &tol).unwrap();
        let grid = grid_constant_2x2(continuous_feasible(&a));
        assert!(
            (solved.constant - grid).abs() <= 1e-2,
            "{} vs {grid}",
            solved.constant
        );
    }
}

#[test]
fn grid_never_beats_solver() {
    let tol = TolerancePolicy::default();
    let mut rng = rng(0x0_2AC1F);
    for _ in 0..10 {
        let t = with_radius(random_matrix(&mut rng, 2), 0.7);
        let solved = similarity_constant(&t, tol.kappa_max, &tol).unwrap();
        let grid = grid_constant_2x2(discrete_feasible(&t));
        assert!(
            grid >= solved.lower_bound * (1.0 - 1e-9),
            "{grid} < {}",
            solved.lower_bound
        );
    }
}
