//! Isotropic constants and ball intersections of convex bodies.

use locball::analysis::slicing::{isotropic_constant, slicing_report, square_disc_area, Body, Polytope};

fn main() -> locball::Result<()> {
    for (body, n) in [(Body::Cube, 3), (Body::Ball, 2), (Body::Simplex, 3)] {
        let iso = isotropic_constant(&body, n, 0, 0.05, 0)?;
        println!("{} n={n}: L_K = {:.6}, L_f = {:.6}", iso.body, iso.l_k, iso.l_f);
    }
    let poly = isotropic_constant(&Body::Polytope(Polytope::cube(3)?), 3, 1_000_000, 0.05, 1)?;
    println!("cube as polytope: L_K = {:.5} ± {:.5} ({} )", poly.l_k, poly.stderr, poly.method);

    let report = slicing_report(&Body::Cube, 2, &[0.1, 0.5, 1.0], 1_000_000, std::f64::consts::E, 0.05, 2)?;
    for row in &report.rows {
        println!(
            "eps={:<4} radius={:.4} volume={:.5} ± {:.5} exact={:.5}",
            row.epsilon,
            row.radius,
            row.volume,
            row.volume_stderr,
            square_disc_area(0.5, row.radius)
        );
    }
    println!("{}", report.note);
    Ok(())
}
