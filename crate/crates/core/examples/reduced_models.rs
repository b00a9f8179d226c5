//! Fit once at r_max, extract submodels, and predict an unseen Burgers'
//! trajectory with each of them.

use ep_opinf::metrics::TrajectoryPair;
use ep_opinf::pde::simulate_states;
use ep_opinf::{
    assemble_burgers, assemble_lsq, build_constraint_matrix, burgers_ic, compute_pod, ep_opinf,
    intrusive_reduce, project, simulate, standard_opinf, Grid1D, Scheme,
};

fn main() -> Result<(), ep_opinf::Error> {
    let grid = Grid1D::new(128, 1.0)?;
    let model = assemble_burgers(&grid, 0.1)?;
    let (dt, t_end, stride, scheme) = (1e-4, 1.0, 100, Scheme::SemiImplicitEuler);

    let mut training = Vec::new();
    for amplitude in [0.8, 1.0, 1.2] {
        for frequency in [1, 2, 3] {
            for phase in [-0.25, 0.0, 0.25] {
                let x0 = burgers_ic(&grid, amplitude, frequency, phase)?;
                training.push(simulate(&model, &x0, dt, t_end, stride, scheme)?);
            }
        }
    }

    let r_max = 10;
    let basis = compute_pod(&training, r_max)?;
    let sys = assemble_lsq(&project(&basis, &training, r_max)?)?;
    let fits = [
        intrusive_reduce(&model, &basis, r_max)?,
        standard_opinf(&sys, 0.0)?,
        ep_opinf(&sys, &build_constraint_matrix(r_max)?, 0.0)?,
    ];

    let x0 = burgers_ic(&grid, 0.9, 2, 0.1)?;
    let full = simulate_states(&model, &x0, dt, t_end, stride, scheme)?;

    println!(" r   intrusive    opinf        ep-opinf");
    for r in 2..=r_max {
        let v = basis.leading(r)?;
        let mut line = format!("{r:2}");
        for fit in &fits {
            let rom = fit.submodel(r)?.to_model();
            let err = match simulate_states(&rom, &v.tr_mul(&x0), dt, t_end, stride, scheme) {
                Ok(reduced) => format!("{:.4e}", TrajectoryPair::new(&full, &reduced, &v)?.relative_error()?),
                Err(ep_opinf::Error::BlowUp { step }) => format!("blow-up@{step}"),
                Err(e) => return Err(e),
            };
            line.push_str(&format!("   {err:<10}"));
        }
        println!("{line}");
    }
    Ok(())
}
