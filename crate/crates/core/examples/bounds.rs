//! Closed-form small-ball bounds and the eigen-subspace choice.

use locball::analysis::{
    klartag_psi_sq, lee_vempala_bound, paouris_bound, projected_paouris_bound, select_subspace, BoundSpec,
};

fn main() -> locball::Result<()> {
    let spectrum = vec![4.0, 1.0, 1.0, 1.0, 1.0];
    println!("k = {}", select_subspace(&spectrum)?);
    for eps in [0.001, 0.01, 0.02] {
        let spec = BoundSpec::new(spectrum.clone(), 1.0, eps, 1.0)?;
        println!(
            "eps={eps:<6} paouris={:.4e} projected={:.4e} lee-vempala={:.4e}",
            paouris_bound(&spec)?,
            projected_paouris_bound(&spec)?,
            lee_vempala_bound(5, eps, 1.0, klartag_psi_sq(5, 1.0))?
        );
    }
    Ok(())
}
