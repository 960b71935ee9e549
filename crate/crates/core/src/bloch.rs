//! Bloch fibers of a periodic one-body Hamiltonian `-Laplacian/2 + V`.

use std::io::Write;
use std::sync::Arc;

use ndarray::{s, Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{add, norm2, PlaneWaveBasis, QGrid, Vec3};
use crate::linalg::eigh_hermitian;
use crate::periodic::PeriodicFunction;

/// Lowest eigenpairs of one Bloch fiber. Columns of `vectors` are the periodic parts in the
/// orbital basis, each with its largest component real and positive.
#[derive(Debug, Clone)]
pub struct BlochEigenpairs {
    pub q: Vec3,
    pub energies: Array1<f64>,
    pub vectors: Array2<C64>,
}

#[derive(Debug, Clone)]
pub struct BandStructure {
    pub basis: Arc<PlaneWaveBasis>,
    pub qgrid: QGrid,
    pub fibers: Vec<BlochEigenpairs>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct BandEdges {
    pub occupied_min: f64,
    pub occupied_max: f64,
    pub unoccupied_min: f64,
}

/// Index table `K_i - K_j -> position in the potential basis` (or `None`).
pub fn difference_table(
    orbital: &PlaneWaveBasis,
    potential: &PlaneWaveBasis,
) -> Vec<Option<usize>> {
    let n = orbital.len();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mi = orbital.miller(i);
        for j in 0..n {
            let mj = orbital.miller(j);
            out.push(potential.find([mi[0] - mj[0], mi[1] - mj[1], mi[2] - mj[2]]));
        }
    }
    out
}

/// Matrix of multiplication by `v` between plane waves: `|cell|^{-1/2} v_{K-K'}`.
pub fn potential_matrix(orbital: &PlaneWaveBasis, v: &PeriodicFunction) -> Array2<C64> {
    let n = orbital.len();
    let s = 1.0 / v.cell_volume().sqrt();
    let table = difference_table(orbital, &v.basis);
    Array2::from_shape_fn((n, n), |(i, j)| match table[i * n + j] {
        Some(g) => v.coeffs[g] * s,
        None => C64::default(),
    })
}

/// Fiber Hamiltonian `H_{KK'}(q) = |q+K|^2/2 delta + |cell|^{-1/2} v_{K-K'}`.
pub fn assemble_bloch_hamiltonian(
    orbital: &PlaneWaveBasis,
    v: &PeriodicFunction,
    q: Vec3,
) -> Array2<C64> {
    debug_assert!(v.is_real(1e-8), "potential must be real");
    let mut h = potential_matrix(orbital, v);
    for i in 0..orbital.len() {
        h[[i, i]] += 0.5 * norm2(add(q, orbital.vector(i)));
    }
    h
}

/// Makes the largest component of each column real and positive. Near-ties are broken
/// towards the lowest index.
pub fn fix_phases(vectors: &mut Array2<C64>) {
    for mut col in vectors.columns_mut() {
        let amax = col.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if amax == 0.0 {
            continue;
        }
        let pivot = col
            .iter()
            .position(|c| c.norm() >= amax * (1.0 - 1e-9))
            .unwrap_or(0);
        let ph = col[pivot].conj() / col[pivot].norm();
        col.mapv_inplace(|c| c * ph);
    }
}

/// Full Hermitian eigendecomposition, ascending, with the phase convention applied.
pub fn eigh_sorted(h: &Array2<C64>, q: Vec3) -> Result<(Array1<f64>, Array2<C64>)> {
    let (e, mut v) = eigh_hermitian(h).map_err(|err| Error::EigensolverFailure {
        q,
        message: err.to_string(),
    })?;
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigensolverFailure {
            q,
            message: "non-finite eigenvalue".into(),
        });
    }
    fix_phases(&mut v);
    Ok((e, v))
}

pub fn diagonalize_bloch(h: &Array2<C64>, nbands: usize, q: Vec3) -> Result<BlochEigenpairs> {
    let (e, v) = eigh_sorted(h, q)?;
    let nb = nbands.min(e.len());
    Ok(BlochEigenpairs {
        q,
        energies: e.slice(s![..nb]).to_owned(),
        vectors: v.slice(s![.., ..nb]).to_owned(),
    })
}

pub fn band_structure(
    basis: &Arc<PlaneWaveBasis>,
    v: &PeriodicFunction,
    qgrid: &QGrid,
    nbands: usize,
) -> Result<BandStructure> {
    let fibers = qgrid
        .points
        .par_iter()
        .map(|q| diagonalize_bloch(&assemble_bloch_hamiltonian(basis, v, *q), nbands, *q))
        .collect::<Result<Vec<_>>>()?;
    Ok(BandStructure {
        basis: basis.clone(),
        qgrid: qgrid.clone(),
        fibers,
    })
}

pub fn band_edges_and_gap(bs: &BandStructure, n_occ: usize) -> Result<(BandEdges, f64)> {
    if n_occ == 0 || bs.fibers.iter().any(|f| f.energies.len() <= n_occ) {
        return Err(Error::InvalidArgument(format!(
            "need more than {n_occ} bands per fiber to locate the gap"
        )));
    }
    let mut edges = BandEdges {
        occupied_min: f64::INFINITY,
        occupied_max: f64::NEG_INFINITY,
        unoccupied_min: f64::INFINITY,
    };
    for f in &bs.fibers {
        edges.occupied_min = edges.occupied_min.min(f.energies[0]);
        edges.occupied_max = edges.occupied_max.max(f.energies[n_occ - 1]);
        edges.unoccupied_min = edges.unoccupied_min.min(f.energies[n_occ]);
    }
    Ok((edges, edges.unoccupied_min - edges.occupied_max))
}

/// Gaps at or below this are treated as metallic.
pub const MIN_GAP: f64 = 1e-8;

/// Fermi level placed at mid-gap.
pub fn fermi_level(bs: &BandStructure, n_occ: usize) -> Result<f64> {
    let (edges, gap) = band_edges_and_gap(bs, n_occ)?;
    if gap <= MIN_GAP {
        return Err(Error::NotAnInsulator { gap });
    }
    Ok(0.5 * (edges.occupied_max + edges.unoccupied_min))
}

/// Density of the lowest `n_occ` bands averaged over the grid, in `density_basis`.
///
/// `c_G = |cell|^{-1/2} (1/N_q) sum_q sum_n sum_K conj(C_K) C_{K+G}`.
pub fn density_from_bands(
    bs: &BandStructure,
    n_occ: usize,
    density_basis: &Arc<PlaneWaveBasis>,
) -> PeriodicFunction {
    let orb = &bs.basis;
    let n = orb.len();
    // table[i*n + j] = index of K_i - K_j; here we need G = K_j - K_i.
    let table = difference_table(orb, density_basis);
    let nq = bs.fibers.len() as f64;
    let pref = 1.0 / (density_basis.lattice().cell_volume.sqrt() * nq);
    let partial: Vec<Array1<C64>> = bs
        .fibers
        .par_iter()
        .map(|f| {
            let c = f.vectors.slice(s![.., ..n_occ]);
            let mut acc = Array1::<C64>::zeros(density_basis.len());
            for i in 0..n {
                for j in 0..n {
                    if let Some(g) = table[j * n + i] {
                        let mut s = C64::default();
                        for b in 0..n_occ {
                            s += c[[i, b]].conj() * c[[j, b]];
                        }
                        acc[g] += s;
                    }
                }
            }
            acc
        })
        .collect();
    let mut coeffs = Array1::<C64>::zeros(density_basis.len());
    for p in partial {
        coeffs += &p;
    }
    coeffs.mapv_inplace(|c| c * pref);
    PeriodicFunction {
        basis: density_basis.clone(),
        coeffs,
    }
}

/// Writes `q1,q2,q3,n,energy` rows (Cartesian q, 1-based band index).
pub fn write_bands_csv<W: Write>(bs: &BandStructure, mut w: W) -> std::io::Result<()> {
    writeln!(w, "q1,q2,q3,n,energy")?;
    for f in &bs.fibers {
        for (n, e) in f.energies.iter().enumerate() {
            writeln!(
                w,
                "{:.12e},{:.12e},{:.12e},{},{:.15e}",
                f.q[0],
                f.q[1],
                f.q[2],
                n + 1,
                e
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn cubic_basis(a: f64, ecut: f64) -> Arc<PlaneWaveBasis> {
        Arc::new(PlaneWaveBasis::new(&Lattice::cubic(a).unwrap(), ecut).unwrap())
    }

    #[test]
    fn free_electron_bands() {
        // V = 0: eigenvalues are |q+K|^2/2 sorted.
        let b = cubic_basis(2.0 * PI, 4.0);
        let v = PeriodicFunction::zeros(b.clone());
        let q = [0.2, -0.1, 0.35];
        let bands = diagonalize_bloch(&assemble_bloch_hamiltonian(&b, &v, q), 10, q).unwrap();
        let mut exact: Vec<f64> = b
            .vectors()
            .iter()
            .map(|k| 0.5 * norm2(add(q, *k)))
            .collect();
        exact.sort_by(f64::total_cmp);
        for n in 0..10 {
            assert_relative_eq!(bands.energies[n], exact[n], epsilon = 1e-12);
        }
    }

    #[test]
    fn cosine_potential_two_wave_gap() {
        // V = 2 v0 cos(x) at the zone boundary q = 1/2: the two lowest states split by about 2 v0.
        let b = cubic_basis(2.0 * PI, 0.6);
        let v0 = 0.01;
        let mut v = PeriodicFunction::zeros(b.clone());
        let s = b.lattice().cell_volume.sqrt();
        v.coeffs[b.find([1, 0, 0]).unwrap()] = C64::new(v0 * s, 0.0);
        v.coeffs[b.find([-1, 0, 0]).unwrap()] = C64::new(v0 * s, 0.0);
        let q = [0.5, 0.0, 0.0];
        let bands = diagonalize_bloch(&assemble_bloch_hamiltonian(&b, &v, q), 2, q).unwrap();
        // Exact 2x2 block among K = 0 and K = -b1: both have kinetic 1/8.
        assert_relative_eq!(bands.energies[0], 0.125 - v0, epsilon = 1e-4);
        assert_relative_eq!(
            bands.energies[1] - bands.energies[0],
            2.0 * v0,
            epsilon = 2e-4
        );
    }

    #[test]
    fn phase_convention_is_deterministic() {
        let b = cubic_basis(5.0, 3.0);
        let v = crate::periodic::gaussian_density([0.3, 0.1, 0.0], -1.0, 0.5, &b);
        let q = [0.1, 0.0, 0.2];
        let h = assemble_bloch_hamiltonian(&b, &v, q);
        let a = diagonalize_bloch(&h, 4, q).unwrap();
        let c = diagonalize_bloch(&h, 4, q).unwrap();
        assert_eq!(a.vectors, c.vectors);
        for col in a.vectors.columns() {
            let m = col.iter().fold(0.0f64, |m, c| m.max(c.norm()));
            let p = col.iter().find(|c| c.norm() >= m * (1.0 - 1e-9)).unwrap();
            assert!(p.im.abs() < 1e-12 && p.re > 0.0);
        }
    }

    #[test]
    fn free_gas_density_is_uniform() {
        let lat = Lattice::cubic(4.0).unwrap();
        let b = Arc::new(PlaneWaveBasis::new(&lat, 2.0).unwrap());
        let db = Arc::new(PlaneWaveBasis::new(&lat, 8.0).unwrap());
        // A 3x3x3 grid avoids degenerate lowest states at the zone boundary.
        let grid = QGrid::new(&lat, [3, 3, 3]).unwrap();
        let bs = band_structure(&b, &PeriodicFunction::zeros(b.clone()), &grid, 3).unwrap();
        let rho = density_from_bands(&bs, 1, &db);
        assert_relative_eq!(rho.integral(), 1.0, epsilon = 1e-12);
        assert!(rho.coeffs.iter().skip(1).all(|c| c.norm() < 1e-12));
    }
    #[test]
    fn sheared_lattice_hamiltonian_is_hermitian() {
        let lat = Lattice::new([[5.0, 0.0, 0.0], [1.5, 5.0, 0.0], [0.0, 0.0, 5.0]]).unwrap();
        let b = Arc::new(PlaneWaveBasis::new(&lat, 2.0).unwrap());
        let v = crate::periodic::gaussian_density([0.4, 1.1, -0.3], -1.0, 0.5, &b);
        let h = assemble_bloch_hamiltonian(&b, &v, [0.13, -0.07, 0.21]);
        let defect = (&h - &h.t().mapv(|c| c.conj()))
            .iter()
            .fold(0.0f64, |m, c| m.max(c.norm()));
        assert!(defect < 1e-14, "{defect:e}");
    }

    #[test]
    fn time_reversal_pairs_q_and_minus_q() {
        let b = cubic_basis(5.0, 3.0);
        let v = crate::periodic::gaussian_density([0.3, 0.7, -0.2], -1.0, 0.5, &b);
        let q = [0.11, -0.05, 0.3];
        let e1 = diagonalize_bloch(&assemble_bloch_hamiltonian(&b, &v, q), 8, q).unwrap();
        let mq = [-q[0], -q[1], -q[2]];
        let e2 = diagonalize_bloch(&assemble_bloch_hamiltonian(&b, &v, mq), 8, mq).unwrap();
        for n in 0..8 {
            assert_relative_eq!(e1.energies[n], e2.energies[n], epsilon = 1e-11);
        }
    }

    #[test]
    fn constant_shift_moves_levels_and_keeps_density() {
        let lat = Lattice::cubic(5.0).unwrap();
        let b = Arc::new(PlaneWaveBasis::new(&lat, 2.0).unwrap());
        let db = Arc::new(PlaneWaveBasis::new(&lat, 8.0).unwrap());
        let v = crate::periodic::gaussian_density([0.3, 0.7, -0.2], -1.0, 0.5, &db);
        let c = 0.37;
        let shifted = v
            .add(&PeriodicFunction::uniform(db.clone(), c * lat.cell_volume))
            .unwrap();
        let grid = QGrid::new(&lat, [2, 2, 2]).unwrap();
        let bs = band_structure(&b, &v, &grid, 4).unwrap();
        let bs2 = band_structure(&b, &shifted, &grid, 4).unwrap();
        for (f, g) in bs.fibers.iter().zip(&bs2.fibers) {
            for n in 0..4 {
                assert_relative_eq!(g.energies[n] - f.energies[n], c, epsilon = 1e-11);
            }
        }
        let d = &density_from_bands(&bs, 1, &db).coeffs - &density_from_bands(&bs2, 1, &db).coeffs;
        assert!(d.iter().all(|x| x.norm() < 1e-11));
    }

    #[test]
    fn skewed_crystal_fibers_solve_their_hamiltonian() {
        // Complex Hamiltonians exercise the layout-sensitive eigensolver path.
        let gs = crate::testing::skewed_ground_state();
        for f in &gs.bands.fibers {
            let h = assemble_bloch_hamiltonian(&gs.basis, &gs.potential, f.q);
            let r = h.dot(&f.vectors) - &f.vectors * &f.energies.mapv(C64::from);
            assert!(r.iter().all(|x| x.norm() < 1e-11));
        }
        assert!(gs.rho.is_real(1e-12));
        assert_relative_eq!(gs.rho.integral(), 2.0, epsilon = 1e-10);
    }
}
