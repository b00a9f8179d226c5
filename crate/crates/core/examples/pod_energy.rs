//! POD basis of Burgers' snapshots and how much energy each truncation keeps.

use ep_opinf::{assemble_burgers, burgers_ic, compute_pod, energy_retained, simulate, Grid1D, Scheme};

fn main() -> Result<(), ep_opinf::Error> {
    let grid = Grid1D::new(128, 1.0)?;
    let model = assemble_burgers(&grid, 0.1)?;
    let mut runs = Vec::new();
    for (amplitude, frequency) in [(0.8, 1), (1.0, 2), (1.2, 3)] {
        let x0 = burgers_ic(&grid, amplitude, frequency, 0.0)?;
        runs.push(simulate(&model, &x0, 1e-4, 1.0, 100, Scheme::SemiImplicitEuler)?);
    }

    let basis = compute_pod(&runs, 10)?;
    println!(" r   sigma_r       retained energy");
    for r in 1..=basis.r_max() {
        let sigma = basis.singular_values[r - 1];
        println!("{r:2}   {sigma:.4e}   {:.10}", energy_retained(&basis.singular_values, r)?);
    }
    Ok(())
}
