//! Time-dependent Hartree response to a localized kick: nonlinear versus linearized
//! propagation and the dynamical macroscopic dielectric function.

use std::sync::Arc;

use hartree_crystal::dynamics::frequency::epsilon_m_omega;
use hartree_crystal::dynamics::{
    propagate_hartree, DrivenPotential, DynamicsModel, Envelope, HartreeMode, PropagationOptions,
    TimeGrid,
};
use hartree_crystal::lattice::{Lattice, PlaneWaveBasis};
use hartree_crystal::periodic::gaussian_density;
use hartree_crystal::response::dielectric::DielectricModel;
use hartree_crystal::scf::{scf_solve, ScfParams};

fn main() -> hartree_crystal::Result<()> {
    env_logger::init();
    let lattice = Lattice::cubic(8.0)?;
    let params = ScfParams {
        ecut: 2.0,
        qgrid: [3, 3, 3],
        mixing: 0.3,
        anderson_depth: 6,
        ..ScfParams::default()
    };
    let db = Arc::new(PlaneWaveBasis::new(&lattice, 4.0 * params.ecut)?);
    let gs = Arc::new(scf_solve(
        &lattice,
        &gaussian_density([0.0; 3], 1.0, 0.5, &db),
        1,
        &params,
    )?);

    let model = DynamicsModel::new(gs.clone(), 2.0, 12)?;
    let profile = gaussian_density([2.0, 1.0, 0.0], 1.0, 1.0, &model.density_basis);
    let grid = TimeGrid::new(0.45 / model.max_transition_frequency(), 400)?;
    println!(
        "{} bands, dt {:.3}, {} steps",
        model.nbands(),
        grid.dt,
        grid.nsteps
    );

    for amp in [0.02, 0.01] {
        let drive = DrivenPotential::from_charge(&profile, Envelope::DeltaKick, amp)?;
        let nl = propagate_hartree(
            &model,
            &model.zero_blocks(),
            Some(&drive),
            &grid,
            &PropagationOptions::default(),
        )?;
        let lin_opts = PropagationOptions {
            mode: HartreeMode::Linearized,
            ..PropagationOptions::default()
        };
        let lin = propagate_hartree(&model, &model.zero_blocks(), Some(&drive), &grid, &lin_opts)?;
        let drift = nl
            .trace0
            .iter()
            .map(|t| (t - nl.trace0[0]).abs())
            .fold(0.0, f64::max);
        println!(
            "amplitude {amp:.2}: peak density {:.3e}, nonlinear minus linear {:.3e}, trace drift {drift:.1e}",
            nl.max_density_norm(),
            nl.max_density_distance(&lin)
        );
    }

    let dm = DielectricModel::new(gs, params.ecut, None)?;
    for p in epsilon_m_omega(&dm, &[0.0, 0.02, 0.05, 0.1, 0.2, 0.4], 1e-2)? {
        println!(
            "omega {:.3}: epsM {:>9.5} + {:>8.5}i",
            p.omega, p.tensor_re[0][0], p.tensor_im[0][0]
        );
    }
    Ok(())
}
