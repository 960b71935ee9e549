use std::sync::Arc;
use std::time::Instant;

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
    let nuclei_basis = Arc::new(PlaneWaveBasis::new(&lattice, 4.0 * params.ecut)?);
    let rho_nuc = gaussian_density([0.0; 3], 1.0, 0.5, &nuclei_basis);
    let t = Instant::now();
    let gs = Arc::new(scf_solve(&lattice, &rho_nuc, 1, &params)?);
    println!(
        "scf: {} iterations, gap {:.6}, {:.1?}",
        gs.iterations,
        gs.gap,
        t.elapsed()
    );
    let t = Instant::now();
    let model = DielectricModel::new(gs, params.ecut, None)?;
    let md = model.macroscopic_epsilon()?;
    println!("L0 = {:.6}, truncation {:.2e}", md.l.l0, md.l.truncation);
    for row in &md.eps_m {
        println!("epsM  {:>12.8} {:>12.8} {:>12.8}", row[0], row[1], row[2]);
    }
    // Local fields pull epsM below the head-only value 1 + L0.
    println!("1 + L0 = {:.6}", 1.0 + md.l.l0);
    println!(
        "body condition {:.3e}, bounds hold: {}, {:.1?}",
        md.body_condition,
        md.bounds_hold(1e-8),
        t.elapsed()
    );
    Ok(())
}
