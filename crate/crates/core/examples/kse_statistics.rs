//! Autocorrelation statistics of a Kuramoto–Sivashinsky run and of an
//! energy-preserving reduced model learned from it.

use ep_opinf::metrics::{field_autocorrelation, nace};
use ep_opinf::pde::simulate_states;
use ep_opinf::{
    assemble_kse, assemble_lsq, build_constraint_matrix, compute_pod, ep_opinf, kse_ic, project, simulate,
    Grid1D, Scheme,
};

fn main() -> Result<(), ep_opinf::Error> {
    let grid = Grid1D::new(128, 22.0)?;
    let model = assemble_kse(&grid, 1.0)?;
    let (dt, t_end, stride, scheme) = (1e-3, 60.0, 100, Scheme::Cnab2);

    let mut runs = Vec::new();
    for (a, b) in [(0.8, 0.2), (1.0, 0.4), (1.2, 0.6)] {
        runs.push(simulate(&model, &kse_ic(&grid, a, b), dt, t_end, stride, scheme)?);
    }
    let (burn_in, k_max) = (100, 150);

    for r in [6, 10, 14] {
        let basis = compute_pod(&runs, r)?;
        let sys = assemble_lsq(&project(&basis, &runs, r)?)?;
        let rom = ep_opinf(&sys, &build_constraint_matrix(r)?, 0.0)?.to_model();
        let v = basis.leading(r)?;

        let (mut full_rho, mut rom_rho) = (Vec::new(), Vec::new());
        for run in &runs {
            let x = &run.states;
            let xhat = simulate_states(&rom, &v.tr_mul(&x.column(0)), dt, t_end, stride, scheme)?;
            let tail = |m: &nalgebra::DMatrix<f64>| m.columns(burn_in, m.ncols() - burn_in).into_owned();
            full_rho.push(field_autocorrelation(&tail(x), k_max)?);
            rom_rho.push(field_autocorrelation(&(&v * tail(&xhat)), k_max)?);
        }
        let lag = 20;
        println!(
            "r = {r:2}: NACE {:.3e}; ρ at lag {lag} ({:.1} time units): full {:+.4}, reduced {:+.4}",
            nace(&full_rho, &rom_rho)?,
            lag as f64 * dt * stride as f64,
            full_rho[0].rho[lag],
            rom_rho[0].rho[lag]
        );
    }
    Ok(())
}
