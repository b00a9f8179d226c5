//! Standard vs. energy-preserving operator inference on the same Burgers' data.

use ep_opinf::{
    assemble_burgers, assemble_lsq, build_constraint_matrix, burgers_ic, compute_pod, ep_opinf,
    intrusive_reduce, kkt_diagnostics, project, simulate, standard_opinf, Grid1D, Scheme,
};

fn main() -> Result<(), ep_opinf::Error> {
    let grid = Grid1D::new(128, 1.0)?;
    let model = assemble_burgers(&grid, 0.1)?;
    let mut runs = Vec::new();
    for amplitude in [0.8, 1.0, 1.2] {
        for frequency in [1, 2] {
            let x0 = burgers_ic(&grid, amplitude, frequency, 0.0)?;
            runs.push(simulate(&model, &x0, 1e-4, 1.0, 100, Scheme::SemiImplicitEuler)?);
        }
    }

    let r = 6;
    let basis = compute_pod(&runs, r)?;
    let sys = assemble_lsq(&project(&basis, &runs, r)?)?;
    let constraints = build_constraint_matrix(r)?;

    let intrusive = intrusive_reduce(&model, &basis, r)?;
    let opinf = standard_opinf(&sys, 0.0)?;
    let ep = ep_opinf(&sys, &constraints, 0.0)?;

    println!("{} samples, {} unknowns per operator row, {} constraints\n", sys.samples(), sys.width(), constraints.nrows());
    println!("method       residual     EP violation");
    for m in [&intrusive, &opinf, &ep] {
        println!("{:<11}  {:.4e}   {:.3e}", m.method.name(), sys.objective(m, 0.0).sqrt(), m.ep_violation());
    }

    let kkt = kkt_diagnostics(&ep, &sys, &constraints)?;
    println!(
        "\nKKT check: stationarity {:.2e} (gradient scale {:.2e}), feasibility {:.2e}, ‖λ‖∞ {:.3e}",
        kkt.stationarity, kkt.scale, kkt.primal_feasibility, kkt.multiplier_inf_norm
    );
    Ok(())
}
