//! Linear screening of a localized charge: the far-field charge seen through the crystal,
//! sampled along several directions as the Bloch wavevector shrinks.

use std::sync::Arc;

use hartree_crystal::lattice::{Lattice, PlaneWaveBasis};
use hartree_crystal::periodic::gaussian_density;
use hartree_crystal::response::dielectric::DielectricModel;
use hartree_crystal::response::screening::{defect_screening, DefectCharge};
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
    let model = DielectricModel::new(gs, params.ecut, None)?;
    let md = model.macroscopic_epsilon()?;

    // The response is linear in the charge, so a unit charge only trips the smallness warning.
    let defect = DefectCharge::gaussian([0.0; 3], 1.0, 1.0);
    let directions = [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 1.0]];
    let report = defect_screening(
        &model,
        &md,
        &defect,
        &[0.04, 0.02, 0.01],
        &directions,
        false,
    )?;
    for w in &report.warnings {
        println!("warning: {w}");
    }
    for row in &report.rows {
        println!(
            "{:<10} eta {:.3} dir {:?}: measured {:.6}, predicted {:.6}",
            row.kind, row.eta, row.direction, row.measured, row.predicted
        );
    }
    for (i, d) in directions.iter().enumerate() {
        println!(
            "{d:?}: screened charge {:.6} (1/epsM {:.6}), rescaled potential {:.6}",
            report.screened_limit[i], report.macroscopic_prediction[i], report.rescaled_limit[i]
        );
    }
    println!("q/(1+L0) = {:.6}", report.renormalized_charge);
    Ok(())
}
