//! The frictional contact solver on hand-made problems: a block pressed on
//! a plane and pushed sideways, below and above the friction limit.

use frictional_mpm::contact::ContactProblem;
use frictional_mpm::ncp::{solve, AdmmOptions};
use nalgebra::{DMatrix, DVector};

fn main() {
    // Unit Delassus operator: the impulse equals the velocity change.
    // Free velocity: 0.5 m/s sideways, 1 m/s into the plane.
    for mu in [0.2, 0.4, 0.8] {
        let p = ContactProblem {
            delassus: DMatrix::identity(3, 3),
            free_velocity: DVector::from_row_slice(&[0.5, 0.0, -1.0]),
            mu: vec![mu],
        };
        let r = solve(&p, AdmmOptions { tol: 1e-10, max_iters: 5000, ..AdmmOptions::default() });
        let state = if r.sigma[0].abs() > 1e-6 { "slides" } else { "sticks" };
        println!(
            "mu = {mu}: {state}, impulse ({:+.4}, {:+.4}, {:+.4}), velocity ({:+.4}, {:+.4}, {:+.4}), {} iterations",
            r.lambda[0], r.lambda[1], r.lambda[2], r.sigma[0], r.sigma[1], r.sigma[2], r.iterations
        );
    }

    // Two coupled contacts sharing mass, one separating.
    let g = DMatrix::from_row_slice(6, 6, &[
        2.0, 0.0, 0.0, 0.5, 0.0, 0.0,
        0.0, 2.0, 0.0, 0.0, 0.5, 0.0,
        0.0, 0.0, 2.0, 0.0, 0.0, 0.5,
        0.5, 0.0, 0.0, 2.0, 0.0, 0.0,
        0.0, 0.5, 0.0, 0.0, 2.0, 0.0,
        0.0, 0.0, 0.5, 0.0, 0.0, 2.0,
    ]);
    let p = ContactProblem { delassus: g, free_velocity: DVector::from_row_slice(&[0.1, 0.0, -1.0, 0.0, 0.0, 0.4]), mu: vec![0.3, 0.3] };
    let r = solve(&p, AdmmOptions::default());
    println!("coupled pair: residual {:.1e} after {} iterations", r.ncp_residual, r.iterations);
    for c in 0..2 {
        let l = r.lambda.fixed_rows::<3>(3 * c);
        let v = r.sigma.fixed_rows::<3>(3 * c);
        println!("  contact {c}: impulse ({:+.4}, {:+.4}, {:+.4}), velocity ({:+.4}, {:+.4}, {:+.4})", l[0], l[1], l[2], v[0], v[1], v[2]);
    }
}
