//! Small crystals shared by the unit tests.

use std::sync::Arc;

use crate::lattice::{Lattice, PlaneWaveBasis};
use crate::periodic::gaussian_density;
use crate::scf::{scf_solve, GroundState, ScfParams};

/// Simple cubic, two electrons on one Gaussian nucleus, Gamma only.
pub fn cubic_ground_state() -> Arc<GroundState> {
    let lattice = Lattice::cubic(8.0).unwrap();
    let params = ScfParams {
        ecut: 1.2,
        qgrid: [1, 1, 1],
        mixing: 0.5,
        ..ScfParams::default()
    };
    let db = Arc::new(PlaneWaveBasis::new(&lattice, 4.0 * params.ecut).unwrap());
    let rho_nuc = gaussian_density([0.0; 3], 2.0, 0.6, &db);
    Arc::new(scf_solve(&lattice, &rho_nuc, 2, &params).unwrap())
}

/// Sheared cell with two unequal nuclei; no inversion centre, so Bloch vectors are
/// genuinely complex.
pub fn skewed_ground_state() -> Arc<GroundState> {
    let a = 6.0;
    let lattice =
        Lattice::new([[a, 0.0, 0.0], [0.3 * a, a, 0.0], [0.0, 0.1 * a, 1.1 * a]]).unwrap();
    let params = ScfParams {
        ecut: 1.2,
        qgrid: [1, 1, 1],
        mixing: 0.5,
        anderson_depth: 6,
        ..ScfParams::default()
    };
    let db = Arc::new(PlaneWaveBasis::new(&lattice, 4.0 * params.ecut).unwrap());
    let mut rho_nuc = gaussian_density([0.0; 3], 1.5, 0.6, &db);
    rho_nuc.coeffs += &gaussian_density([0.27 * a, 0.19 * a, 0.11 * a], 0.5, 0.5, &db).coeffs;
    Arc::new(scf_solve(&lattice, &rho_nuc, 2, &params).unwrap())
}
