use ndarray::{s, Array1, Array2, ArrayView2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bloch::{assemble_bloch_hamiltonian, eigh_sorted};
use crate::error::Result;
use crate::lattice::{add, PlaneWaveBasis, Vec3};
use crate::scf::GroundState;

/// Eigenpairs of the ground-state Hamiltonian at the grid points shifted by `shift`.
///
/// Points are not folded back into the zone; the plane-wave set stays the one of the ground
/// state, so `shift` may be any wavevector.
#[derive(Debug, Clone)]
pub struct EigenFibers {
    pub shift: Vec3,
    pub points: Vec<Vec3>,
    pub energies: Vec<Array1<f64>>,
    pub vectors: Vec<Array2<C64>>,
    pub n_occ: usize,
}

impl EigenFibers {
    /// Diagonalizes every fiber, keeping `max_bands` states (all of them when `None`).
    pub fn compute(gs: &GroundState, shift: Vec3, max_bands: Option<usize>) -> Result<Self> {
        let nb = max_bands.unwrap_or(gs.basis.len()).min(gs.basis.len());
        let points: Vec<Vec3> = gs.qgrid.points.iter().map(|k| add(*k, shift)).collect();
        let pairs = points
            .par_iter()
            .map(|k| {
                let h = assemble_bloch_hamiltonian(&gs.basis, &gs.potential, *k);
                let (e, v) = eigh_sorted(&h, *k)?;
                Ok((
                    e.slice(s![..nb]).to_owned(),
                    v.slice(s![.., ..nb]).to_owned(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let (energies, vectors) = pairs.into_iter().unzip();
        Ok(Self {
            shift,
            points,
            energies,
            vectors,
            n_occ: gs.n_occ,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nbands(&self) -> usize {
        self.energies[0].len()
    }

    pub fn occupation(&self, n: usize) -> f64 {
        if n < self.n_occ {
            1.0
        } else {
            0.0
        }
    }

    pub fn min_energy(&self) -> f64 {
        self.energies
            .iter()
            .map(|e| e[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_energy(&self) -> f64 {
        self.energies
            .iter()
            .map(|e| e[e.len() - 1])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Index map for `C -> C(. - G)`: entry `j` holds the position of `K_j - G`.
pub fn shift_map(basis: &PlaneWaveBasis, g: [i32; 3]) -> Vec<Option<usize>> {
    basis
        .millers()
        .iter()
        .map(|m| basis.find([m[0] - g[0], m[1] - g[1], m[2] - g[2]]))
        .collect()
}

/// Matrix elements `M_{ba}(G) = sum_K conj(Cb_{K+G}) Ca_K`; `cb_adjoint` is `Cb^dagger`.
pub fn pair_elements(
    basis: &PlaneWaveBasis,
    cb_adjoint: ArrayView2<C64>,
    ca: ArrayView2<C64>,
    g: [i32; 3],
) -> Array2<C64> {
    let map = shift_map(basis, g);
    // Shifted copy: row j of `moved` holds Ca at K_j - G, so sum_j conj(Cb_j) moved_j matches.
    let mut moved = Array2::<C64>::zeros(ca.raw_dim());
    for (j, src) in map.iter().enumerate() {
        if let Some(i) = src {
            moved.row_mut(j).assign(&ca.row(*i));
        }
    }
    cb_adjoint.dot(&moved)
}

/// Momentum matrix elements `<b|p|a> = sum_K conj(Cb_K) K Ca_K`, one matrix per Cartesian axis.
pub fn momentum_elements(
    basis: &PlaneWaveBasis,
    cb: ArrayView2<C64>,
    ca: ArrayView2<C64>,
) -> [Array2<C64>; 3] {
    let cbh = cb.t().mapv(|c| c.conj());
    std::array::from_fn(|axis| {
        let mut weighted = ca.to_owned();
        for (i, mut row) in weighted.rows_mut().into_iter().enumerate() {
            let k = basis.vector(i)[axis];
            row.mapv_inplace(|c| c * k);
        }
        cbh.dot(&weighted)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::skewed_ground_state;

    #[test]
    fn zero_shift_pair_elements_are_the_overlap() {
        let gs = skewed_ground_state();
        let f = EigenFibers::compute(&gs, [0.0; 3], Some(6)).unwrap();
        let c = &f.vectors[0];
        let m = pair_elements(
            &gs.basis,
            c.t().mapv(|x| x.conj()).view(),
            c.view(),
            [0, 0, 0],
        );
        for ((i, j), x) in m.indexed_iter() {
            let d = if i == j { 1.0 } else { 0.0 };
            assert!((x - d).norm() < 1e-12);
        }
    }

    #[test]
    fn momentum_elements_are_hermitian() {
        let gs = skewed_ground_state();
        let f = EigenFibers::compute(&gs, [0.0; 3], Some(6)).unwrap();
        let c = f.vectors[0].view();
        for p in momentum_elements(&gs.basis, c, c) {
            let d = &p - &p.t().mapv(|x| x.conj());
            assert!(d.iter().all(|x| x.norm() < 1e-12));
        }
    }
}
