//! Self-consistent ground state of a cubic crystal with one smeared unit charge per cell.

use std::sync::Arc;
use std::time::Instant;

use hartree_crystal::lattice::{Lattice, PlaneWaveBasis};
use hartree_crystal::periodic::gaussian_density;
use hartree_crystal::scf::{scf_solve, GroundStateCheckpoint, ScfParams};

fn main() -> hartree_crystal::Result<()> {
    env_logger::init();
    let lattice = Lattice::cubic(8.0)?;
    let params = ScfParams {
        ecut: 2.0,
        qgrid: [3, 3, 3],
        mixing: 0.3,
        tol_density: 1e-9,
        anderson_depth: 6,
        ..ScfParams::default()
    };
    let db = Arc::new(PlaneWaveBasis::new(
        &lattice,
        params.density_cutoff_factor * params.ecut,
    )?);
    let rho_nuc = gaussian_density([0.0; 3], 1.0, 0.5, &db);
    let t = Instant::now();
    let gs = scf_solve(&lattice, &rho_nuc, 1, &params)?;
    println!(
        "{} plane waves, {} fibers, {:.1?}",
        gs.basis.len(),
        gs.qgrid.len(),
        t.elapsed()
    );
    for (i, (r, e)) in gs
        .residual_history
        .iter()
        .zip(&gs.energy_history)
        .enumerate()
    {
        println!("iter {:>2}  residual {r:.3e}  energy {e:.10}", i + 1);
    }
    let e = gs.energy();
    println!(
        "kinetic {:.8}, coulomb {:.8}, total {:.8}",
        e.kinetic, e.coulomb, e.total
    );
    println!(
        "occupied [{:.5}, {:.5}], gap {:.5}, fermi level {:.5}",
        gs.edges.occupied_min, gs.edges.occupied_max, gs.gap, gs.fermi
    );
    println!("electrons per cell {:.12}", gs.rho.integral());

    let ckpt = GroundStateCheckpoint::from_state(&gs, None);
    let json = serde_json::to_string(&ckpt)?;
    let back: GroundStateCheckpoint = serde_json::from_str(&json)?;
    let restored = back.restore()?;
    println!(
        "checkpoint: {} bytes, restored gap {:.5}",
        json.len(),
        restored.gap
    );
    Ok(())
}
