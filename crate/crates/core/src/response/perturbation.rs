//! Perturbative response of the ground-state density matrix to a local potential.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::potential_matrix;
use crate::error::{Error, Result};
use crate::lattice::{norm2, Vec3};
use crate::periodic::PeriodicFunction;
use crate::response::fibers::EigenFibers;
use crate::scf::GroundState;

/// Fiber blocks of an operator coupling `k` (columns) to `k+q` (rows), each in the
/// eigenbases of the respective fibers.
#[derive(Debug, Clone)]
pub struct ResponseOperator {
    pub q: Vec3,
    pub blocks: Vec<Array2<C64>>,
}

impl ResponseOperator {
    /// Per-cell trace `(1/N_q) sum_k tr Q_k`; zero by convention for `q != 0`.
    pub fn trace_per_cell(&self) -> C64 {
        if norm2(self.q) > 0.0 {
            return C64::default();
        }
        let s: C64 = self.blocks.iter().map(|b| b.diag().sum()).sum();
        s / self.blocks.len() as f64
    }

    /// Grid-averaged Hilbert-Schmidt norm.
    pub fn hs_norm(&self) -> f64 {
        let s: f64 = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum();
        (s / self.blocks.len() as f64).sqrt()
    }

    pub fn hs_distance(&self, other: &Self) -> f64 {
        let s: f64 = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (a - b).iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum();
        (s / self.blocks.len() as f64).sqrt()
    }

    /// `max_k |Q_k - Q_k^dagger|`; only meaningful for `q = 0`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let d = b - &b.t().mapv(|c| c.conj());
                d.iter().fold(0.0f64, |m, c| m.max(c.norm()))
            })
            .fold(0.0, f64::max)
    }

    /// Blocks expressed in the plane-wave basis: `C_{k+q} Q C_k^dagger`.
    pub fn to_plane_waves(&self, fk: &EigenFibers, fkq: &EigenFibers) -> Vec<Array2<C64>> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                fkq.vectors[i]
                    .dot(b)
                    .dot(&fk.vectors[i].t().mapv(|c| c.conj()))
            })
            .collect()
    }
}

/// Elliptical contour through `lower` and `upper` on the real axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub n_quad: usize,
    /// Ratio of the imaginary semi-axis to the real one; 1 is a circle.
    pub aspect: f64,
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self {
            n_quad: 64,
            aspect: 0.5,
        }
    }
}

/// Quadrature nodes `z_j` and weights `w_j` with `sum_j w_j f(z_j) ~ (1/2 pi i) \oint f`.
#[derive(Debug, Clone)]
pub struct Contour {
    pub nodes: Vec<C64>,
    pub weights: Vec<C64>,
}

impl Contour {
    /// Counter-clockwise ellipse with real vertices `lower` and `upper`, sampled by the
    /// periodic trapezoid rule at half-integer angles.
    pub fn ellipse(lower: f64, upper: f64, spec: ContourSpec) -> Self {
        let center = 0.5 * (lower + upper);
        let a = 0.5 * (upper - lower);
        let b = spec.aspect * a;
        let n = spec.n_quad;
        let h = 2.0 * PI / n as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for j in 0..n {
            let t = h * (j as f64 + 0.5);
            nodes.push(C64::new(center + a * t.cos(), b * t.sin()));
            let dz = C64::new(-a * t.sin(), b * t.cos());
            weights.push(dz * h / C64::new(0.0, 2.0 * PI));
        }
        Self { nodes, weights }
    }

    /// Contour enclosing the occupied spectrum: from `inf(spectrum) - gap` to the Fermi level.
    pub fn for_ground_state(
        gs: &GroundState,
        fibers: &[&EigenFibers],
        spec: ContourSpec,
    ) -> Result<Self> {
        if spec.n_quad < 4 || !(spec.aspect > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid contour {spec:?}")));
        }
        let bottom = fibers
            .iter()
            .map(|f| f.min_energy())
            .fold(f64::INFINITY, f64::min);
        let c = Self::ellipse(bottom - gs.gap, gs.fermi, spec);
        let tol = gs.gap / 8.0;
        for (i, z) in c.nodes.iter().enumerate() {
            for f in fibers {
                for e in &f.energies {
                    for x in e.iter() {
                        let d = (z - x).norm();
                        if d < tol {
                            return Err(Error::ContourTouchesSpectrum {
                                node: i,
                                distance: d,
                            });
                        }
                    }
                }
            }
        }
        Ok(c)
    }
}

fn check_commensurate(gs: &GroundState, q: Vec3) -> Result<()> {
    if !gs.qgrid.is_commensurate(&gs.lattice, q) {
        return Err(Error::IncommensurateQ { q });
    }
    Ok(())
}

/// Matrix elements `<u_{a,k+q}| V |u_{b,k}>` of the Bloch component `V` for every fiber.
pub fn perturbation_matrices(
    gs: &GroundState,
    fk: &EigenFibers,
    fkq: &EigenFibers,
    v: &PeriodicFunction,
) -> Vec<Array2<C64>> {
    let vpw = potential_matrix(&gs.basis, v);
    (0..fk.len())
        .into_par_iter()
        .map(|i| {
            fkq.vectors[i]
                .t()
                .mapv(|c| c.conj())
                .dot(&vpw)
                .dot(&fk.vectors[i])
        })
        .collect()
}

/// First-order response from explicit energy denominators:
/// `Q_ab = V_ab (f_a - f_b)/(e_a - e_b)` with `a` at `k+q` and `b` at `k`.
pub fn q1v_sum_over_states(
    gs: &GroundState,
    fk: &EigenFibers,
    fkq: &EigenFibers,
    v: &PeriodicFunction,
    q: Vec3,
) -> Result<ResponseOperator> {
    check_commensurate(gs, q)?;
    let vm = perturbation_matrices(gs, fk, fkq, v);
    let mut blocks = Vec::with_capacity(vm.len());
    for (i, m) in vm.into_iter().enumerate() {
        let (ekq, ek) = (&fkq.energies[i], &fk.energies[i]);
        let mut out = Array2::<C64>::zeros(m.raw_dim());
        for a in 0..m.nrows() {
            for b in 0..m.ncols() {
                let df = fkq.occupation(a) - fk.occupation(b);
                if df == 0.0 {
                    continue;
                }
                let de = ekq[a] - ek[b];
                if de.abs() < 0.5 * gs.gap {
                    return Err(Error::GapViolated { denominator: de });
                }
                out[[a, b]] = m[[a, b]] * (df / de);
            }
        }
        blocks.push(out);
    }
    Ok(ResponseOperator { q, blocks })
}

/// First-order response from the resolvent contour integral
/// `(1/2 pi i) \oint R(z) V R(z) dz`.
pub fn q1v_contour(
    gs: &GroundState,
    fk: &EigenFibers,
    fkq: &EigenFibers,
    v: &PeriodicFunction,
    q: Vec3,
    spec: ContourSpec,
) -> Result<ResponseOperator> {
    check_commensurate(gs, q)?;
    let contour = Contour::for_ground_state(gs, &[fk, fkq], spec)?;
    let vm = perturbation_matrices(gs, fk, fkq, v);
    let blocks = vm
        .into_par_iter()
        .enumerate()
        .map(|(i, m)| {
            let (ekq, ek) = (&fkq.energies[i], &fk.energies[i]);
            let mut out = Array2::<C64>::zeros(m.raw_dim());
            for (z, w) in contour.nodes.iter().zip(&contour.weights) {
                let ra: Vec<C64> = ekq.iter().map(|e| 1.0 / (z - e)).collect();
                let rb: Vec<C64> = ek.iter().map(|e| 1.0 / (z - e)).collect();
                for a in 0..m.nrows() {
                    let wa = w * ra[a];
                    for b in 0..m.ncols() {
                        out[[a, b]] += wa * rb[b];
                    }
                }
            }
            out * &m
        })
        .collect();
    Ok(ResponseOperator { q, blocks })
}

/// Response terms of orders `1..=order` for a periodic perturbation (`q = 0`), each the
/// contour integral of `R (V R)^n`.
pub fn qnv_higher_order(
    gs: &GroundState,
    fk: &EigenFibers,
    v: &PeriodicFunction,
    order: usize,
    spec: ContourSpec,
) -> Result<Vec<ResponseOperator>> {
    if order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    let contour = Contour::for_ground_state(gs, &[fk], spec)?;
    let vm = perturbation_matrices(gs, fk, fk, v);
    let per_fiber: Vec<Vec<Array2<C64>>> = vm
        .into_par_iter()
        .enumerate()
        .map(|(i, m)| {
            let e = &fk.energies[i];
            let n = e.len();
            let mut acc = vec![Array2::<C64>::zeros((n, n)); order];
            for (z, w) in contour.nodes.iter().zip(&contour.weights) {
                let r: Vec<C64> = e.iter().map(|x| 1.0 / (z - x)).collect();
                // V R: columns of V scaled by r.
                let vr = Array2::from_shape_fn((n, n), |(a, b)| m[[a, b]] * r[b]);
                let mut x =
                    Array2::from_shape_fn(
                        (n, n),
                        |(a, b)| if a == b { r[a] } else { C64::default() },
                    );
                for term in acc.iter_mut() {
                    x = x.dot(&vr);
                    term.scaled_add(*w, &x);
                }
            }
            acc
        })
        .collect();
    Ok((0..order)
        .map(|k| ResponseOperator {
            q: [0.0; 3],
            blocks: per_fiber.iter().map(|f| f[k].clone()).collect(),
        })
        .collect())
}
