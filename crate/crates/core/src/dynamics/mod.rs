//! Time-dependent response of the crystal at `q = 0`.
//!
//! States are density-matrix blocks `Q_k` in the truncated eigenbasis of the ground-state
//! Hamiltonian, one block per grid point. Densities live on a separate (smaller) plane-wave
//! basis so that the pair products stay cheap to store.

pub mod frequency;
pub mod propagation;

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{norm2, PlaneWaveBasis};
use crate::periodic::PeriodicFunction;
use crate::response::fibers::{pair_elements, EigenFibers};
use crate::scf::GroundState;

pub use propagation::{
    free_propagate, propagate_hartree, q1v_time, qnv_time, write_trajectory_csv, HartreeMode,
    PropagationOptions, ResponseTrajectory, SeriesTrajectories,
};

/// Uniform time grid `t_j = j dt`, `j = 0..=nsteps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub nsteps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, nsteps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || nsteps == 0 {
            return Err(Error::InvalidArgument(format!(
                "time grid needs dt > 0 and nsteps >= 1 (got {dt}, {nsteps})"
            )));
        }
        Ok(Self { dt, nsteps })
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nsteps).map(|j| self.time(j)).collect()
    }

    pub fn duration(&self) -> f64 {
        self.time(self.nsteps)
    }
}

/// Temporal shape of a drive; the amplitude is carried by [`DrivenPotential`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    /// `delta(t)`, applied at `t = 0`.
    DeltaKick,
    /// `sin(omega t)`.
    Monochromatic { omega: f64 },
    /// `exp(-(t - center)^2 / (2 width^2))`.
    GaussianPulse { center: f64, width: f64 },
}

impl Envelope {
    /// Value of the regular part; zero for the kick.
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Envelope::DeltaKick => 0.0,
            Envelope::Monochromatic { omega } => (omega * t).sin(),
            Envelope::GaussianPulse { center, width } => {
                (-0.5 * ((t - center) / width).powi(2)).exp()
            }
        }
    }

    pub fn is_kick(&self) -> bool {
        matches!(self, Envelope::DeltaKick)
    }
}

/// External potential `amplitude * envelope(t) * profile(r)` with a lattice-periodic profile.
#[derive(Debug, Clone)]
pub struct DrivenPotential {
    pub profile: PeriodicFunction,
    pub envelope: Envelope,
    pub amplitude: f64,
}

impl DrivenPotential {
    pub fn new(profile: PeriodicFunction, envelope: Envelope, amplitude: f64) -> Result<Self> {
        if !profile.is_real(1e-10) {
            return Err(Error::InvalidArgument(
                "drive profile must be a real function".into(),
            ));
        }
        if !amplitude.is_finite() {
            return Err(Error::InvalidArgument(
                "drive amplitude must be finite".into(),
            ));
        }
        if let Envelope::GaussianPulse { width, .. } = envelope {
            if !(width > 0.0) {
                return Err(Error::InvalidArgument(
                    "pulse width must be positive".into(),
                ));
            }
        }
        Ok(Self {
            profile,
            envelope,
            amplitude,
        })
    }

    /// Potential created by an external charge `m`: `-v_c(m)`, the sign felt by electrons
    /// from a positive charge. The cell average of `m` is dropped (compensating background).
    pub fn from_charge(m: &PeriodicFunction, envelope: Envelope, amplitude: f64) -> Result<Self> {
        let mut profile = PeriodicFunction::zeros(m.basis.clone());
        for i in 1..m.basis.len() {
            profile.coeffs[i] = -m.coeffs[i] * (4.0 * PI / norm2(m.basis.vector(i)));
        }
        Self::new(profile, envelope, amplitude)
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }
}

/// Truncated eigenbasis at `q = 0` together with the pair products that map blocks to
/// densities and potentials to blocks.
#[derive(Debug, Clone)]
pub struct DynamicsModel {
    pub gs: Arc<GroundState>,
    pub fibers: EigenFibers,
    pub density_basis: Arc<PlaneWaveBasis>,
    /// Per grid point, `P[G, a*nb + b] = |cell|^{-1/2} sum_K C_{K+G,a} conj(C_{K,b})`.
    pairs: Vec<Array2<C64>>,
    /// `4 pi / |G|^2`, zero at `G = 0`.
    coulomb: Array1<f64>,
}

impl DynamicsModel {
    pub fn new(gs: Arc<GroundState>, ecut_density: f64, nbands: usize) -> Result<Self> {
        if !(ecut_density > 0.0) {
            return Err(Error::InvalidArgument(
                "density cutoff must be positive".into(),
            ));
        }
        if nbands <= gs.n_occ {
            return Err(Error::InvalidArgument(format!(
                "dynamics needs more than {} bands, got {nbands}",
                gs.n_occ
            )));
        }
        let density_basis = Arc::new(PlaneWaveBasis::new(&gs.lattice, ecut_density)?);
        let fibers = EigenFibers::compute(&gs, [0.0; 3], Some(nbands))?;
        let nb = fibers.nbands();
        let s = 1.0 / gs.lattice.cell_volume.sqrt();
        let pairs = fibers
            .vectors
            .par_iter()
            .map(|c| {
                let ch = c.t().mapv(|x| x.conj());
                let mut p = Array2::<C64>::zeros((density_basis.len(), nb * nb));
                for (gi, g) in density_basis.millers().iter().enumerate() {
                    // pair_elements gives sum_K conj(C_{K+G,a}) C_{K,b} at [a, b].
                    let m = pair_elements(&gs.basis, ch.view(), c.view(), *g);
                    for (dst, src) in p.row_mut(gi).iter_mut().zip(m.iter()) {
                        *dst = src.conj() * s;
                    }
                }
                p
            })
            .collect();
        let coulomb = density_basis
            .vectors()
            .iter()
            .map(|g| {
                let g2 = norm2(*g);
                if g2 > 0.0 {
                    4.0 * PI / g2
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            gs,
            fibers,
            density_basis,
            pairs,
            coulomb,
        })
    }

    pub fn nbands(&self) -> usize {
        self.fibers.nbands()
    }

    pub fn nfibers(&self) -> usize {
        self.fibers.len()
    }

    /// Ground-state blocks `diag(f_n)`.
    pub fn gamma0(&self) -> Vec<Array2<C64>> {
        let nb = self.nbands();
        let occ = Array2::from_shape_fn((nb, nb), |(a, b)| {
            if a == b {
                C64::new(self.fibers.occupation(a), 0.0)
            } else {
                C64::default()
            }
        });
        vec![occ; self.nfibers()]
    }

    pub fn zero_blocks(&self) -> Vec<Array2<C64>> {
        let nb = self.nbands();
        vec![Array2::zeros((nb, nb)); self.nfibers()]
    }

    /// Largest `|e_a - e_b|` over the retained bands.
    pub fn max_transition_frequency(&self) -> f64 {
        self.fibers
            .energies
            .iter()
            .map(|e| e[e.len() - 1] - e[0])
            .fold(0.0, f64::max)
    }

    /// Density on the density basis: `(1/N_q) sum_k P_k vec(Q_k)`.
    pub fn density(&self, blocks: &[Array2<C64>]) -> Array1<C64> {
        let mut rho = Array1::<C64>::zeros(self.density_basis.len());
        for (k, q) in blocks.iter().enumerate() {
            rho += &self.fiber_density(k, q);
        }
        rho / self.nfibers() as f64
    }

    /// Contribution `P_k vec(Q_k)` of one fiber, without the grid average.
    pub fn fiber_density(&self, k: usize, block: &Array2<C64>) -> Array1<C64> {
        let v = block.as_standard_layout();
        self.pairs[k].dot(&ndarray::aview1(v.as_slice().expect("standard layout")))
    }

    /// Matrix elements `<a| v |b>` in every fiber of a potential on the density basis.
    pub fn potential_blocks(&self, v: &Array1<C64>) -> Vec<Array2<C64>> {
        let nb = self.nbands();
        self.pairs
            .iter()
            .map(|p| {
                let w = p.t().mapv(|c| c.conj()).dot(v);
                w.into_shape_with_order((nb, nb)).expect("square block")
            })
            .collect()
    }

    /// Hartree potential `v_c(rho)` of a density on the density basis; the zero mode is dropped.
    pub fn hartree_potential(&self, rho: &Array1<C64>) -> Array1<C64> {
        rho * &self.coulomb.mapv(|c| C64::new(c, 0.0))
    }

    /// Projects a periodic function onto the density basis.
    pub fn on_density_basis(&self, f: &PeriodicFunction) -> Array1<C64> {
        f.project_onto(&self.density_basis).coeffs
    }
}

/// Per-cell trace `(1/N_q) sum_k tr Q_k`.
pub fn trace_per_cell(blocks: &[Array2<C64>]) -> f64 {
    let s: f64 = blocks
        .iter()
        .map(|b| b.diag().iter().map(|c| c.re).sum::<f64>())
        .sum();
    s / blocks.len() as f64
}

/// Grid-averaged Hilbert-Schmidt norm.
pub fn hs_norm(blocks: &[Array2<C64>]) -> f64 {
    let s: f64 = blocks
        .iter()
        .map(|b| b.iter().map(|c| c.norm_sqr()).sum::<f64>())
        .sum();
    (s / blocks.len() as f64).sqrt()
}
