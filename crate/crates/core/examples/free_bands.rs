//! Free-electron bands of a simple cubic lattice along Gamma-X-M-Gamma, checked against
//! the folded parabolas.

use std::sync::Arc;

use hartree_crystal::bloch::{assemble_bloch_hamiltonian, diagonalize_bloch};
use hartree_crystal::lattice::{add, norm2, Lattice, PlaneWaveBasis, Vec3};
use hartree_crystal::periodic::PeriodicFunction;

fn main() -> hartree_crystal::Result<()> {
    let lattice = Lattice::cubic(8.0)?;
    let basis = Arc::new(PlaneWaveBasis::new(&lattice, 2.0)?);
    let zero = PeriodicFunction::zeros(basis.clone());
    let b = lattice.reciprocal;
    let gamma = [0.0; 3];
    let x: Vec3 = std::array::from_fn(|c| 0.5 * b[0][c]);
    let m: Vec3 = std::array::from_fn(|c| 0.5 * (b[0][c] + b[1][c]));
    let legs = [(gamma, x, "G-X"), (x, m, "X-M"), (m, gamma, "M-G")];
    let nb = 6;
    println!("{} plane waves", basis.len());
    let mut worst = 0.0f64;
    for (from, to, name) in legs {
        for s in 0..=4 {
            let t = s as f64 / 4.0;
            let q: Vec3 = std::array::from_fn(|c| from[c] + t * (to[c] - from[c]));
            let levels = diagonalize_bloch(&assemble_bloch_hamiltonian(&basis, &zero, q), nb, q)?;
            let mut exact: Vec<f64> = basis
                .vectors()
                .iter()
                .map(|k| 0.5 * norm2(add(q, *k)))
                .collect();
            exact.sort_by(f64::total_cmp);
            for n in 0..nb {
                worst = worst.max((levels.energies[n] - exact[n]).abs());
            }
            let row: Vec<String> = levels.energies.iter().map(|e| format!("{e:8.5}")).collect();
            println!("{name} t={t:.2}  {}", row.join(" "));
        }
    }
    println!("largest deviation from the parabolas: {worst:.1e}");
    Ok(())
}
