//! Compact and Kronecker forms of a quadratic operator, and projecting it onto
//! the energy-preserving set.

use ep_opinf::tensor_ops::ConstraintSystem;
use ep_opinf::{
    build_constraint_matrix, ep_violation, extract_submodel, f_to_h, kron_square, vech_square, QuadOpCompact,
};
use nalgebra::{DMatrix, DVector};

fn main() -> Result<(), ep_opinf::Error> {
    let r = 3;
    let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    println!("x ⊗ x has {} entries, the half-vectorized square {}", kron_square(&x).len(), vech_square(&x).len());

    let f = QuadOpCompact::new(DMatrix::from_fn(r, 6, |i, j| ((3 * i + 5 * j) % 7) as f64 - 3.0))?;
    let h = f_to_h(&f);
    println!("F x^[2]   = {:?}", f.apply(&x)?.as_slice());
    println!("H (x ⊗ x) = {:?}", h.apply(&x)?.as_slice());

    let c: ConstraintSystem = build_constraint_matrix(r)?;
    println!("\n{} constraints on the {} entries of F", c.nrows(), c.ncols());
    println!("before projection: violation {:.3e}, xᵀ F x^[2] = {:.3e}", ep_violation(&f), x.dot(&f.apply(&x)?));

    let ep = c.project(&f)?;
    println!("after projection:  violation {:.3e}, xᵀ F x^[2] = {:.3e}", ep_violation(&ep), x.dot(&ep.apply(&x)?));

    for r_sub in 1..=r {
        let (_, f_sub) = extract_submodel(&DMatrix::identity(r, r), &ep, r_sub)?;
        println!("  leading r' = {r_sub} block: violation {:.3e}", ep_violation(&f_sub));
    }
    Ok(())
}
