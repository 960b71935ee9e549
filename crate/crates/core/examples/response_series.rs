//! Density-matrix response to a static periodic potential: first order by contour
//! integration and by sum over states, then the higher-order terms of the series.

use std::sync::Arc;

use hartree_crystal::bloch::{assemble_bloch_hamiltonian, eigh_sorted};
use hartree_crystal::lattice::{Lattice, PlaneWaveBasis};
use hartree_crystal::periodic::gaussian_density;
use hartree_crystal::response::fibers::EigenFibers;
use hartree_crystal::response::perturbation::{
    q1v_contour, q1v_sum_over_states, qnv_higher_order, ContourSpec,
};
use hartree_crystal::scf::{scf_solve, ScfParams};
use ndarray::{s, Array2};
use num_complex::Complex64 as C64;

fn main() -> hartree_crystal::Result<()> {
    let lattice = Lattice::cubic(8.0)?;
    let params = ScfParams {
        ecut: 1.5,
        qgrid: [3, 3, 3],
        mixing: 0.5,
        anderson_depth: 6,
        ..ScfParams::default()
    };
    let db = Arc::new(PlaneWaveBasis::new(&lattice, 4.0 * params.ecut)?);
    let gs = scf_solve(
        &lattice,
        &gaussian_density([0.0; 3], 1.0, 0.5, &db),
        1,
        &params,
    )?;
    let fibers = EigenFibers::compute(&gs, [0.0; 3], None)?;

    let mut v = gaussian_density([1.0, 0.5, -0.7], 1.0, 1.0, &gs.density_basis);
    v.coeffs[0] = C64::default();

    for n_quad in [16, 32, 64, 128] {
        let spec = ContourSpec {
            n_quad,
            ..ContourSpec::default()
        };
        let sos = q1v_sum_over_states(&gs, &fibers, &fibers, &v.scaled(0.01), [0.0; 3])?;
        let ctr = q1v_contour(&gs, &fibers, &fibers, &v.scaled(0.01), [0.0; 3], spec)?;
        println!(
            "{n_quad:>4} nodes: contour vs sum over states {:.2e}",
            ctr.hs_distance(&sos)
        );
    }

    // Truncating after N terms leaves an error of order amplitude^(N+1).
    for amp in [0.04, 0.02, 0.01] {
        let va = v.scaled(amp);
        let terms = qnv_higher_order(&gs, &fibers, &va, 3, ContourSpec::default())?;
        let perturbed = gs.potential.add(&va)?;
        let mut err = [0.0; 3];
        for (k, q) in gs.qgrid.points.iter().enumerate() {
            let (_, c) = eigh_sorted(&assemble_bloch_hamiltonian(&gs.basis, &perturbed, *q), *q)?;
            let ov = fibers.vectors[k]
                .t()
                .mapv(|x| x.conj())
                .dot(&c.slice(s![.., ..gs.n_occ]));
            let mut exact = ov.dot(&ov.t().mapv(|x| x.conj()));
            for a in 0..gs.n_occ {
                exact[[a, a]] -= 1.0;
            }
            let mut partial = Array2::<C64>::zeros(exact.raw_dim());
            for (n, e) in err.iter_mut().enumerate() {
                partial += &terms[n].blocks[k];
                *e += (&exact - &partial)
                    .iter()
                    .map(|x| x.norm_sqr())
                    .sum::<f64>();
            }
        }
        let nq = gs.qgrid.len() as f64;
        println!(
            "amplitude {amp:.2}: truncation errors {:.2e} {:.2e} {:.2e}",
            (err[0] / nq).sqrt(),
            (err[1] / nq).sqrt(),
            (err[2] / nq).sqrt()
        );
    }
    Ok(())
}
