//! Self-consistent ground state of the reduced Hartree model.

use std::sync::Arc;

use ndarray_linalg::Solve;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bloch::{
    band_edges_and_gap, band_structure, density_from_bands, fermi_level, BandEdges, BandStructure,
};
use crate::error::{Error, Result};
use crate::lattice::{add, norm2, Lattice, PlaneWaveBasis, QGrid, Vec3};
use crate::periodic::{coulomb_inner, poisson_solve, PeriodicFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScfParams {
    /// Orbital cutoff: plane waves with `|q+K|^2/2 <= ecut` (K taken at q = 0).
    pub ecut: f64,
    pub qgrid: [usize; 3],
    pub mixing: f64,
    pub max_iter: usize,
    /// Convergence threshold on the Coulomb norm of `rho_out - rho_in`.
    pub tol_density: f64,
    /// Bands computed beyond the occupied ones.
    pub extra_bands: usize,
    /// Density and potential cutoff in units of `ecut`; 4 makes the Hamiltonian exact.
    pub density_cutoff_factor: f64,
    /// Anderson history length; 0 gives plain damped iteration.
    #[serde(default)]
    pub anderson_depth: usize,
}

impl Default for ScfParams {
    fn default() -> Self {
        Self {
            ecut: 2.0,
            qgrid: [2, 2, 2],
            mixing: 0.3,
            max_iter: 300,
            tol_density: 1e-9,
            extra_bands: 4,
            density_cutoff_factor: 4.0,
            anderson_depth: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HartreeEnergy {
    pub kinetic: f64,
    pub coulomb: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub lattice: Lattice,
    pub params: ScfParams,
    pub basis: Arc<PlaneWaveBasis>,
    pub density_basis: Arc<PlaneWaveBasis>,
    pub qgrid: QGrid,
    pub n_occ: usize,
    pub rho_nuc: PeriodicFunction,
    pub rho: PeriodicFunction,
    pub potential: PeriodicFunction,
    pub bands: BandStructure,
    pub edges: BandEdges,
    pub gap: f64,
    pub fermi: f64,
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub energy_history: Vec<f64>,
}

impl GroundState {
    pub fn cell_volume(&self) -> f64 {
        self.lattice.cell_volume
    }

    pub fn energy(&self) -> HartreeEnergy {
        hartree_energy_per_cell(&self.bands, self.n_occ, &self.rho_nuc, &self.rho)
    }

    /// Builds the ground state of a system whose mean-field potential is prescribed.
    ///
    /// The nuclear density is chosen as `rho - (-Laplacian v)/(4 pi)`, which makes the
    /// returned state an exact fixed point of the Hartree map. Used for model problems.
    pub fn from_potential(
        lattice: &Lattice,
        params: &ScfParams,
        n_occ: usize,
        potential: &PeriodicFunction,
    ) -> Result<Self> {
        let basis = Arc::new(PlaneWaveBasis::new(lattice, params.ecut)?);
        let density_basis = Arc::new(PlaneWaveBasis::new(
            lattice,
            params.density_cutoff_factor * params.ecut,
        )?);
        let qgrid = QGrid::new(lattice, params.qgrid)?;
        let mut v = potential.project_onto(&density_basis);
        v.coeffs[0] = C64::default();
        let bands = band_structure(&basis, &v, &qgrid, n_occ + params.extra_bands)?;
        let (edges, gap) = band_edges_and_gap(&bands, n_occ)?;
        let fermi = fermi_level(&bands, n_occ)?;
        let rho = density_from_bands(&bands, n_occ, &density_basis);
        let mut rho_nuc = rho.clone();
        for i in 1..density_basis.len() {
            rho_nuc.coeffs[i] -=
                v.coeffs[i] * (norm2(density_basis.vector(i)) / (4.0 * std::f64::consts::PI));
        }
        let mut gs = Self {
            lattice: lattice.clone(),
            params: params.clone(),
            basis,
            density_basis,
            qgrid,
            n_occ,
            rho_nuc,
            rho,
            potential: v,
            bands,
            edges,
            gap,
            fermi,
            residual: 0.0,
            iterations: 0,
            residual_history: vec![0.0],
            energy_history: Vec::new(),
        };
        gs.energy_history.push(gs.energy().total);
        Ok(gs)
    }
}

/// Per-cell energy: kinetic part of the occupied bands plus half the Coulomb self-energy of
/// the total charge `rho_nuc - rho`.
pub fn hartree_energy_per_cell(
    bands: &BandStructure,
    n_occ: usize,
    rho_nuc: &PeriodicFunction,
    rho: &PeriodicFunction,
) -> HartreeEnergy {
    let basis = &bands.basis;
    let mut kinetic = 0.0;
    for f in &bands.fibers {
        for n in 0..n_occ {
            for (i, c) in f.vectors.column(n).iter().enumerate() {
                kinetic += 0.5 * norm2(add(f.q, basis.vector(i))) * c.norm_sqr();
            }
        }
    }
    kinetic /= bands.fibers.len() as f64;
    let mut total_charge = rho_nuc.sub(rho).expect("densities share a basis");
    total_charge.coeffs[0] = C64::default();
    let coulomb = 0.5
        * rho.cell_volume()
        * coulomb_inner(&total_charge, &total_charge, [0.0; 3]).expect("zero mode removed");
    HartreeEnergy {
        kinetic,
        coulomb,
        total: kinetic + coulomb,
    }
}

/// Coulomb norm of a density, ignoring its mean.
pub fn coulomb_norm(r: &PeriodicFunction) -> f64 {
    let mut r = r.clone();
    r.coeffs[0] = C64::default();
    coulomb_inner(&r, &r, [0.0; 3])
        .expect("zero mode removed")
        .max(0.0)
        .sqrt()
}

/// Mean-field potential felt by an electron: `v_c(rho - rho_nuc)`.
fn hartree_potential(
    rho_nuc: &PeriodicFunction,
    rho: &PeriodicFunction,
) -> Result<PeriodicFunction> {
    let mut total = rho.sub(rho_nuc)?;
    let c0 = total.coeffs[0].norm();
    if c0 > 1e-8 {
        return Err(Error::NonNeutralCell { coefficient: c0 });
    }
    total.coeffs[0] = C64::default();
    poisson_solve(&total)
}

/// Damped fixed-point iteration `rho <- rho + alpha (rho_out[rho] - rho)` from a uniform
/// electron density.
pub fn scf_solve(
    lattice: &Lattice,
    rho_nuc: &PeriodicFunction,
    z: usize,
    params: &ScfParams,
) -> Result<GroundState> {
    scf_solve_from(lattice, rho_nuc, z, params, None)
}

/// As [`scf_solve`], optionally starting from a given electron density.
pub fn scf_solve_from(
    lattice: &Lattice,
    rho_nuc: &PeriodicFunction,
    z: usize,
    params: &ScfParams,
    initial: Option<&PeriodicFunction>,
) -> Result<GroundState> {
    if z == 0 {
        return Err(Error::InvalidArgument(
            "at least one electron per cell is required".into(),
        ));
    }
    if !(params.mixing > 0.0 && params.mixing <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mixing must lie in (0, 1], got {}",
            params.mixing
        )));
    }
    let q_nuc = rho_nuc.integral();
    if (q_nuc - z as f64).abs() > 1e-8 {
        return Err(Error::NonNeutralCell {
            coefficient: (q_nuc - z as f64).abs() / lattice.cell_volume.sqrt(),
        });
    }
    let basis = Arc::new(PlaneWaveBasis::new(lattice, params.ecut)?);
    let density_basis = Arc::new(PlaneWaveBasis::new(
        lattice,
        params.density_cutoff_factor * params.ecut,
    )?);
    let qgrid = QGrid::new(lattice, params.qgrid)?;
    let rho_nuc = rho_nuc.project_onto(&density_basis);
    let nbands = z + params.extra_bands;
    if nbands > basis.len() {
        return Err(Error::InvalidArgument(format!(
            "{nbands} bands requested but the basis has only {} plane waves",
            basis.len()
        )));
    }
    let mut rho = match initial {
        Some(r) => r.project_onto(&density_basis),
        None => PeriodicFunction::uniform(density_basis.clone(), z as f64),
    };

    let mut mixer = Anderson::new(params.anderson_depth);
    let mut residuals = Vec::new();
    let mut energies = Vec::new();
    for it in 0..=params.max_iter {
        let v = hartree_potential(&rho_nuc, &rho)?;
        let bands = band_structure(&basis, &v, &qgrid, nbands)?;
        let rho_out = density_from_bands(&bands, z, &density_basis);
        let r = rho_out.sub(&rho)?;
        let res = coulomb_norm(&r);
        residuals.push(res);
        energies.push(hartree_energy_per_cell(&bands, z, &rho_nuc, &rho_out).total);
        log::debug!("scf iteration {it}: residual {res:.3e}");
        if res < params.tol_density {
            let (edges, gap) = band_edges_and_gap(&bands, z)?;
            let fermi = fermi_level(&bands, z)?;
            log::info!("scf converged after {it} iterations, gap {gap:.6}");
            return Ok(GroundState {
                lattice: lattice.clone(),
                params: params.clone(),
                basis,
                density_basis,
                qgrid,
                n_occ: z,
                rho_nuc,
                rho,
                potential: v,
                bands,
                edges,
                gap,
                fermi,
                residual: res,
                iterations: it,
                residual_history: residuals,
                energy_history: energies,
            });
        }
        rho = mixer.next(&rho, &r, params.mixing);
    }
    Err(Error::ScfNotConverged {
        iterations: params.max_iter,
        last: *residuals.last().unwrap_or(&f64::NAN),
        history: residuals,
    })
}

/// Anderson extrapolation of the density in the Coulomb metric. With depth 0 this is plain
/// damped iteration.
struct Anderson {
    depth: usize,
    history: Vec<(PeriodicFunction, PeriodicFunction)>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self {
            depth,
            history: Vec::new(),
        }
    }

    fn next(
        &mut self,
        rho: &PeriodicFunction,
        r: &PeriodicFunction,
        alpha: f64,
    ) -> PeriodicFunction {
        let step = |x: &PeriodicFunction, dx: &PeriodicFunction| {
            let mut y = x.clone();
            y.coeffs.scaled_add(C64::new(alpha, 0.0), &dx.coeffs);
            y
        };
        if self.depth == 0 {
            return step(rho, r);
        }
        self.history.push((rho.clone(), r.clone()));
        if self.history.len() > self.depth + 1 {
            self.history.remove(0);
        }
        let m = self.history.len();
        if m == 1 {
            return step(rho, r);
        }
        // Minimize |sum c_i r_i| subject to sum c_i = 1 via differences to the latest entry.
        let (rho_n, r_n) = self.history[m - 1].clone();
        let dr: Vec<PeriodicFunction> = self.history[..m - 1]
            .iter()
            .map(|(_, ri)| ri.sub(&r_n).expect("same basis"))
            .collect();
        let inner = |a: &PeriodicFunction, b: &PeriodicFunction| {
            let mut a = a.clone();
            let mut b = b.clone();
            a.coeffs[0] = C64::default();
            b.coeffs[0] = C64::default();
            coulomb_inner(&a, &b, [0.0; 3]).expect("zero mode removed")
        };
        let k = m - 1;
        let mut a = ndarray::Array2::<f64>::zeros((k, k));
        let mut rhs = ndarray::Array1::<f64>::zeros(k);
        for i in 0..k {
            for j in 0..k {
                a[[i, j]] = inner(&dr[i], &dr[j]);
            }
            a[[i, i]] *= 1.0 + 1e-10;
            rhs[i] = -inner(&dr[i], &r_n);
        }
        let coef = match a.solve_into(rhs) {
            Ok(c) => c,
            Err(_) => {
                self.history.clear();
                return step(rho, r);
            }
        };
        let mut rho_bar = rho_n.clone();
        let mut r_bar = r_n.clone();
        for (i, c) in coef.iter().enumerate() {
            let drho = self.history[i].0.sub(&rho_n).expect("same basis");
            rho_bar.coeffs.scaled_add(C64::new(*c, 0.0), &drho.coeffs);
            r_bar.coeffs.scaled_add(C64::new(*c, 0.0), &dr[i].coeffs);
        }
        step(&rho_bar, &r_bar)
    }
}

/// Serialized form of a ground state. Orbitals are not stored; they are rebuilt from the
/// potential on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStateCheckpoint {
    pub lattice_vectors: [Vec3; 3],
    pub params: ScfParams,
    pub n_occ: usize,
    pub config_hash: Option<String>,
    pub gap: f64,
    pub fermi: f64,
    pub edges: BandEdges,
    pub energy: HartreeEnergy,
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub band_energies: Vec<Vec<f64>>,
    pub rho_nuc: Vec<C64>,
    pub rho: Vec<C64>,
    pub potential: Vec<C64>,
}

impl GroundStateCheckpoint {
    pub fn from_state(gs: &GroundState, config_hash: Option<String>) -> Self {
        Self {
            lattice_vectors: gs.lattice.vectors,
            params: gs.params.clone(),
            n_occ: gs.n_occ,
            config_hash,
            gap: gs.gap,
            fermi: gs.fermi,
            edges: gs.edges,
            energy: gs.energy(),
            residual: gs.residual,
            iterations: gs.iterations,
            residual_history: gs.residual_history.clone(),
            band_energies: gs
                .bands
                .fibers
                .iter()
                .map(|f| f.energies.to_vec())
                .collect(),
            rho_nuc: gs.rho_nuc.coeffs.to_vec(),
            rho: gs.rho.coeffs.to_vec(),
            potential: gs.potential.coeffs.to_vec(),
        }
    }

    /// Rebuilds the ground state, rediagonalizing from the stored potential.
    pub fn restore(&self) -> Result<GroundState> {
        let lattice = Lattice::new(self.lattice_vectors)?;
        let params = &self.params;
        let basis = Arc::new(PlaneWaveBasis::new(&lattice, params.ecut)?);
        let density_basis = Arc::new(PlaneWaveBasis::new(
            &lattice,
            params.density_cutoff_factor * params.ecut,
        )?);
        let qgrid = QGrid::new(&lattice, params.qgrid)?;
        let load = |c: &Vec<C64>| {
            PeriodicFunction::new(density_basis.clone(), c.iter().copied().collect())
        };
        let rho_nuc = load(&self.rho_nuc)?;
        let rho = load(&self.rho)?;
        let potential = load(&self.potential)?;
        let bands = band_structure(&basis, &potential, &qgrid, self.n_occ + params.extra_bands)?;
        for (f, stored) in bands.fibers.iter().zip(&self.band_energies) {
            for (a, b) in f.energies.iter().zip(stored) {
                if (a - b).abs() > 1e-8 {
                    return Err(Error::InvalidArgument(
                        "checkpoint band energies do not match its potential".into(),
                    ));
                }
            }
        }
        let (edges, gap) = band_edges_and_gap(&bands, self.n_occ)?;
        let fermi = fermi_level(&bands, self.n_occ)?;
        let mut gs = GroundState {
            lattice,
            params: params.clone(),
            basis,
            density_basis,
            qgrid,
            n_occ: self.n_occ,
            rho_nuc,
            rho,
            potential,
            bands,
            edges,
            gap,
            fermi,
            residual: self.residual,
            iterations: self.iterations,
            residual_history: self.residual_history.clone(),
            energy_history: Vec::new(),
        };
        gs.energy_history.push(gs.energy().total);
        Ok(gs)
    }
}
