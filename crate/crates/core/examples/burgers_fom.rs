//! Full-order viscous Burgers' model: assemble, integrate, and watch the energy
//! decay while the convective term exchanges none.

use ep_opinf::{assemble_burgers, burgers_ic, simulate, Grid1D, Scheme};

fn main() -> Result<(), ep_opinf::Error> {
    let grid = Grid1D::new(128, 1.0)?;
    let model = assemble_burgers(&grid, 0.1)?;
    let x0 = burgers_ic(&grid, 1.0, 2, 0.125)?;

    let snaps = simulate(&model, &x0, 1e-4, 1.0, 100, Scheme::SemiImplicitEuler)?;
    println!("{} grid points, {} stored snapshots", snaps.n(), snaps.len());

    println!("\n    t     ½‖x‖²        xᵀ F x^[2]");
    for k in (0..snaps.len()).step_by(10) {
        let x = snaps.states.column(k).into_owned();
        let q = model.quadratic_term(&x);
        println!("{:5.2}  {:.6e}  {:+.2e}", snaps.times[k], 0.5 * x.norm_squared(), x.dot(&q));
    }
    Ok(())
}
