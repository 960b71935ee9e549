//! Symmetrized dielectric matrix and its long-wavelength limit.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, Solve, SVD, UPLO};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{add, norm, norm2, PlaneWaveBasis, Vec3};
use crate::response::chi0::{chi0_from_transitions, transitions, Frequency, TransitionSet};
use crate::response::fibers::EigenFibers;
use crate::scf::GroundState;

/// Body matrices with a larger condition number are rejected.
pub const MAX_BODY_CONDITION: f64 = 1e12;

/// Linear-response machinery around one ground state.
#[derive(Debug, Clone)]
pub struct DielectricModel {
    pub gs: Arc<GroundState>,
    /// Plane waves `G` on which the response matrices are represented (`G = 0` first).
    pub chi_basis: Arc<PlaneWaveBasis>,
    pub max_bands: Option<usize>,
    /// With `false` the independent-particle response is replaced by zero.
    pub response_enabled: bool,
    pub fibers0: EigenFibers,
    trans0: Vec<TransitionSet>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LMatrix {
    pub l: [[f64; 3]; 3],
    /// Mean of the diagonal; the isotropic value for cubic crystals.
    pub l0: f64,
    /// Share of the trace coming from transitions into the highest retained band.
    pub truncation: f64,
}

/// Head, wings and body of the dielectric matrix in the limit `q -> 0`.
#[derive(Debug, Clone)]
pub struct HeadWingsBody {
    pub l: Array2<C64>,
    /// Row wing: `eps_{0K}(q) -> beta_K . q/|q|`; one row per `K != 0`.
    pub beta: Array2<C64>,
    /// Column wing: `eps_{K0}(q) -> gamma_K . q/|q|`.
    pub gamma: Array2<C64>,
    /// `eps_{KK'}(0)` for `K, K' != 0`.
    pub body: Array2<C64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MacroscopicDielectric {
    pub eps_m: [[f64; 3]; 3],
    pub l: LMatrix,
    /// `1 + L - eps_M`: the local-field correction.
    pub local_field: [[f64; 3]; 3],
    pub body_condition: f64,
    pub body_min_eigenvalue: f64,
    /// Smallest eigenvalue of `eps_M - 1`.
    pub lower_margin: f64,
    /// Smallest eigenvalue of `1 + L - eps_M`.
    pub upper_margin: f64,
}

impl MacroscopicDielectric {
    pub fn bounds_hold(&self, tol: f64) -> bool {
        self.lower_margin >= -tol && self.upper_margin >= -tol
    }

    pub fn directional(&self, k: Vec3) -> f64 {
        quad(&self.eps_m, k) / norm2(k)
    }
}

fn quad(m: &[[f64; 3]; 3], k: Vec3) -> f64 {
    (0..3)
        .map(|i| (0..3).map(|j| k[i] * m[i][j] * k[j]).sum::<f64>())
        .sum()
}

fn sym_min_eigenvalue(m: [[f64; 3]; 3]) -> Result<f64> {
    let a = Array2::from_shape_fn((3, 3), |(i, j)| 0.5 * (m[i][j] + m[j][i]));
    let (e, _) = a.eigh(UPLO::Lower)?;
    Ok(e[0])
}

impl DielectricModel {
    pub fn new(gs: Arc<GroundState>, ecut_chi: f64, max_bands: Option<usize>) -> Result<Self> {
        if !(ecut_chi > 0.0 && ecut_chi <= gs.basis.ecut()) {
            return Err(Error::InvalidArgument(format!(
                "response cutoff {ecut_chi} must lie in (0, {}]",
                gs.basis.ecut()
            )));
        }
        let chi_basis = Arc::new(PlaneWaveBasis::new(&gs.lattice, ecut_chi)?);
        let fibers0 = EigenFibers::compute(&gs, [0.0; 3], max_bands)?;
        if fibers0.nbands() <= gs.n_occ {
            return Err(Error::InvalidArgument(
                "response needs at least one empty band".into(),
            ));
        }
        let trans0 = Self::build_transitions(&gs, &chi_basis, &fibers0, &fibers0, true);
        Ok(Self {
            gs,
            chi_basis,
            max_bands,
            response_enabled: true,
            fibers0,
            trans0,
        })
    }

    /// Same model with the independent-particle response switched off.
    pub fn without_response(&self) -> Self {
        let mut m = self.clone();
        m.response_enabled = false;
        m
    }

    fn build_transitions(
        gs: &GroundState,
        chi_basis: &PlaneWaveBasis,
        fk: &EigenFibers,
        fkq: &EigenFibers,
        with_momentum: bool,
    ) -> Vec<TransitionSet> {
        (0..fk.len())
            .into_par_iter()
            .map(|i| {
                transitions(
                    &gs.basis,
                    &fk.energies[i],
                    &fk.vectors[i],
                    &fkq.energies[i],
                    &fkq.vectors[i],
                    gs.n_occ,
                    chi_basis.millers(),
                    with_momentum,
                )
            })
            .collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.gs.lattice.cell_volume
    }

    /// Transitions at `q = 0`, including momentum matrix elements.
    pub fn transitions_at_zero(&self) -> &[TransitionSet] {
        &self.trans0
    }

    pub fn fibers_at(&self, q: Vec3) -> Result<EigenFibers> {
        EigenFibers::compute(&self.gs, q, self.max_bands)
    }

    fn check_gap(&self, sets: &[TransitionSet]) -> Result<()> {
        let d = sets
            .iter()
            .map(|t| t.min_abs_denominator())
            .fold(f64::INFINITY, f64::min);
        if d < 0.5 * self.gs.gap {
            return Err(Error::GapViolated { denominator: d });
        }
        Ok(())
    }

    /// Independent-particle response `chi0_{GG'}(q, freq)` over the response basis.
    pub fn chi0(&self, q: Vec3, freq: Frequency) -> Result<Array2<C64>> {
        let n = self.chi_basis.len();
        if !self.response_enabled {
            return Ok(Array2::zeros((n, n)));
        }
        if norm2(q) == 0.0 {
            return Ok(chi0_from_transitions(
                &self.trans0,
                freq,
                self.cell_volume(),
            ));
        }
        let fq = self.fibers_at(q)?;
        let sets = Self::build_transitions(&self.gs, &self.chi_basis, &self.fibers0, &fq, false);
        self.check_gap(&sets)?;
        Ok(chi0_from_transitions(&sets, freq, self.cell_volume()))
    }

    fn coulomb_sqrt(&self, q: Vec3) -> Result<Array1<f64>> {
        self.chi_basis
            .vectors()
            .iter()
            .map(|k| {
                let qk = add(q, *k);
                let n = norm(qk);
                if n < 1e-12 {
                    Err(Error::CoulombSingularity { wavevector: qk })
                } else {
                    Ok((4.0 * PI).sqrt() / n)
                }
            })
            .collect()
    }

    /// `eps_{KK'}(q) = delta - sqrt(4pi)/|q+K| chi0_{KK'}(q) sqrt(4pi)/|q+K'|`.
    pub fn dielectric_matrix(&self, q: Vec3, freq: Frequency) -> Result<Array2<C64>> {
        let s = self.coulomb_sqrt(q)?;
        let chi = self.chi0(q, freq)?;
        let n = s.len();
        Ok(Array2::from_shape_fn((n, n), |(i, j)| {
            let d = if i == j { 1.0 } else { 0.0 };
            C64::new(d, 0.0) - chi[[i, j]] * (s[i] * s[j])
        }))
    }

    /// Total charge `(1 + L)^{-1} m` for the Bloch component `q` of an external charge, with
    /// `m` given on the response basis.
    pub fn total_charge(&self, q: Vec3, m: &Array1<C64>, freq: Frequency) -> Result<Array1<C64>> {
        let s = self.coulomb_sqrt(q)?;
        let eps = self.dielectric_matrix(q, freq)?;
        let rhs: Array1<C64> = m.iter().zip(s.iter()).map(|(c, w)| c * *w).collect();
        let x = eps.solve_into(rhs)?;
        Ok(x.iter().zip(s.iter()).map(|(c, w)| c / *w).collect())
    }

    /// `k^T L k` from interband momentum matrix elements.
    pub fn l_quadratic_form(&self, k: Vec3) -> f64 {
        if !self.response_enabled {
            return 0.0;
        }
        let mut acc = 0.0;
        for set in &self.trans0 {
            let p = set.momentum.as_ref().expect("momentum at q = 0");
            for t in 0..set.len() {
                if set.df[t] <= 0.0 {
                    continue;
                }
                let kp = p[[t, 0]] * k[0] + p[[t, 1]] * k[1] + p[[t, 2]] * k[2];
                let gap = -set.de[t];
                acc += kp.norm_sqr() / gap.powi(3);
            }
        }
        8.0 * PI / (self.cell_volume() * self.trans0.len() as f64) * acc
    }

    /// Full `L` from six directional evaluations (axes and face diagonals).
    pub fn compute_l(&self) -> LMatrix {
        let e = |i: usize| {
            let mut v = [0.0; 3];
            v[i] = 1.0;
            v
        };
        let mut l = [[0.0; 3]; 3];
        for (i, row) in l.iter_mut().enumerate() {
            row[i] = self.l_quadratic_form(e(i));
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                let f = self.l_quadratic_form(add(e(i), e(j)));
                l[i][j] = 0.5 * (f - l[i][i] - l[j][j]);
                l[j][i] = l[i][j];
            }
        }
        let trace = l[0][0] + l[1][1] + l[2][2];
        LMatrix {
            l,
            l0: trace / 3.0,
            truncation: if trace > 0.0 {
                self.last_band_share() / trace
            } else {
                0.0
            },
        }
    }

    fn last_band_share(&self) -> f64 {
        let last = self.fibers0.nbands() - 1;
        let mut acc = 0.0;
        for set in &self.trans0 {
            let p = set.momentum.as_ref().expect("momentum at q = 0");
            for t in 0..set.len() {
                if set.df[t] > 0.0 && set.pairs[t].1 == last {
                    let p2: f64 = (0..3).map(|a| p[[t, a]].norm_sqr()).sum();
                    acc += p2 / (-set.de[t]).powi(3);
                }
            }
        }
        8.0 * PI / (self.cell_volume() * self.trans0.len() as f64) * acc
    }

    /// Head, wings and body at `q -> 0` for a complex frequency.
    pub fn head_wings_body(&self, freq: Frequency) -> Result<HeadWingsBody> {
        let ng = self.chi_basis.len();
        let nb = ng - 1;
        let vol = self.cell_volume();
        let norm_f = 1.0 / (self.trans0.len() as f64 * vol);
        let mut l = Array2::<C64>::zeros((3, 3));
        let mut beta = Array2::<C64>::zeros((nb, 3));
        let mut gamma = Array2::<C64>::zeros((nb, 3));
        if self.response_enabled {
            for set in &self.trans0 {
                let p = set.momentum.as_ref().expect("momentum at q = 0");
                for t in 0..set.len() {
                    let w = freq.weight(set.df[t], set.de[t]);
                    let de = set.de[t];
                    for i in 0..3 {
                        for j in 0..3 {
                            l[[i, j]] -= w * (p[[t, i]].conj() * p[[t, j]]).re / (de * de);
                        }
                    }
                    for g in 1..ng {
                        let mt = set.m[[t, g]];
                        for i in 0..3 {
                            beta[[g - 1, i]] += w * p[[t, i]].conj() * mt / de;
                            gamma[[g - 1, i]] += w * mt.conj() * p[[t, i]] / de;
                        }
                    }
                }
            }
            l.mapv_inplace(|c| c * (4.0 * PI * norm_f));
            for g in 1..ng {
                let f = 4.0 * PI / norm(self.chi_basis.vector(g)) * norm_f;
                for i in 0..3 {
                    beta[[g - 1, i]] *= f;
                    gamma[[g - 1, i]] *= f;
                }
            }
        }
        let chi = self.chi0([0.0; 3], freq)?;
        let s: Vec<f64> = (1..ng)
            .map(|g| (4.0 * PI).sqrt() / norm(self.chi_basis.vector(g)))
            .collect();
        let body = Array2::from_shape_fn((nb, nb), |(i, j)| {
            let d = if i == j { 1.0 } else { 0.0 };
            C64::new(d, 0.0) - chi[[i + 1, j + 1]] * (s[i] * s[j])
        });
        Ok(HeadWingsBody {
            l,
            beta,
            gamma,
            body,
        })
    }

    /// `eps_M(freq) = 1 + L - sym(beta^T C^{-1} gamma)`, complex symmetric.
    pub fn macroscopic_tensor(&self, freq: Frequency) -> Result<(Array2<C64>, HeadWingsBody, f64)> {
        let hwb = self.head_wings_body(freq)?;
        let sv = hwb.body.svd(false, false)?.1;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition = if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        };
        if !(condition <= MAX_BODY_CONDITION) {
            return Err(Error::SingularBody { condition });
        }
        let mut x = Array2::<C64>::zeros(hwb.gamma.raw_dim());
        for j in 0..3 {
            let col = hwb.body.solve(&hwb.gamma.column(j).to_owned())?;
            x.column_mut(j).assign(&col);
        }
        let b = hwb.beta.t().dot(&x);
        let eps = Array2::from_shape_fn((3, 3), |(i, j)| {
            let d = if i == j { 1.0 } else { 0.0 };
            C64::new(d, 0.0) + hwb.l[[i, j]] - 0.5 * (b[[i, j]] + b[[j, i]])
        });
        Ok((eps, hwb, condition))
    }

    /// Static macroscopic dielectric tensor with diagnostics.
    pub fn macroscopic_epsilon(&self) -> Result<MacroscopicDielectric> {
        let (eps, hwb, condition) = self.macroscopic_tensor(Frequency::STATIC)?;
        let l = self.compute_l();
        let mut eps_m = [[0.0; 3]; 3];
        let mut lf = [[0.0; 3]; 3];
        let mut upper = [[0.0; 3]; 3];
        let mut lower = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                eps_m[i][j] = eps[[i, j]].re;
                lf[i][j] = l.l[i][j] + if i == j { 1.0 } else { 0.0 } - eps_m[i][j];
                upper[i][j] = lf[i][j];
                lower[i][j] = eps_m[i][j] - if i == j { 1.0 } else { 0.0 };
            }
        }
        let body_min_eigenvalue = if hwb.body.is_empty() {
            1.0
        } else {
            hwb.body.eigh(UPLO::Lower)?.0[0]
        };
        Ok(MacroscopicDielectric {
            eps_m,
            l,
            local_field: lf,
            body_condition: condition,
            body_min_eigenvalue,
            lower_margin: sym_min_eigenvalue(lower)?,
            upper_margin: sym_min_eigenvalue(upper)?,
        })
    }

    /// Head of the inverse dielectric matrix at `q = eta k`, for `k` a unit vector.
    pub fn inverse_head(&self, q: Vec3) -> Result<C64> {
        let eps = self.dielectric_matrix(q, Frequency::STATIC)?;
        let mut e0 = Array1::<C64>::zeros(eps.nrows());
        e0[0] = C64::new(1.0, 0.0);
        Ok(eps.solve_into(e0)?[0])
    }
}

/// JSON payload for the dielectric stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DielectricData {
    pub ecut_chi: f64,
    pub response_basis_size: usize,
    pub nbands: usize,
    #[serde(rename = "L")]
    pub l: [[f64; 3]; 3],
    #[serde(rename = "L0")]
    pub l0: f64,
    #[serde(rename = "epsM")]
    pub eps_m: [[f64; 3]; 3],
    pub local_field: [[f64; 3]; 3],
    pub truncation: f64,
    pub body_condition: f64,
    pub body_min_eigenvalue: f64,
    pub bounds_ok: bool,
    pub anisotropy: f64,
}

impl DielectricData {
    pub fn new(model: &DielectricModel, md: &MacroscopicDielectric) -> Self {
        let mut off = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    off = off.max(md.eps_m[i][j].abs());
                }
            }
        }
        Self {
            ecut_chi: model.chi_basis.ecut(),
            response_basis_size: model.chi_basis.len(),
            nbands: model.fibers0.nbands(),
            l: md.l.l,
            l0: md.l.l0,
            eps_m: md.eps_m,
            local_field: md.local_field,
            truncation: md.l.truncation,
            body_condition: md.body_condition,
            body_min_eigenvalue: md.body_min_eigenvalue,
            bounds_ok: md.bounds_hold(1e-8),
            anisotropy: off,
        }
    }
}

/// `k^T M k` for a 3x3 tensor.
pub fn quadratic(m: &[[f64; 3]; 3], k: Vec3) -> f64 {
    quad(m, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{cubic_ground_state, skewed_ground_state};

    fn max_abs(a: &Array2<C64>) -> f64 {
        a.iter().fold(0.0f64, |m, c| m.max(c.norm()))
    }

    #[test]
    fn static_chi0_is_hermitian_and_negative() {
        let model = DielectricModel::new(skewed_ground_state(), 1.0, None).unwrap();
        for q in [[0.0; 3], [0.05, -0.02, 0.03]] {
            let chi = model.chi0(q, Frequency::STATIC).unwrap();
            let herm = &chi - &chi.t().mapv(|c| c.conj());
            assert!(max_abs(&herm) < 1e-13 * max_abs(&chi));
            let e = chi.eigh(UPLO::Lower).unwrap().0;
            assert!(e.iter().all(|x| *x <= 1e-13), "{e}");
        }
    }

    #[test]
    fn chi0_is_reciprocal() {
        // chi_{GG'}(q) = chi_{-G',-G}(-q) for a real potential.
        let model = DielectricModel::new(skewed_ground_state(), 1.0, None).unwrap();
        let q = [0.04, 0.03, -0.05];
        let freq = Frequency::new(0.01, 0.02);
        let a = model.chi0(q, freq).unwrap();
        let b = model.chi0([-q[0], -q[1], -q[2]], freq).unwrap();
        let basis = &model.chi_basis;
        let neg = |i: usize| {
            let m = basis.miller(i);
            basis.find([-m[0], -m[1], -m[2]]).unwrap()
        };
        let mut worst = 0.0f64;
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                worst = worst.max((a[[i, j]] - b[[neg(j), neg(i)]]).norm());
            }
        }
        assert!(worst < 1e-12 * max_abs(&a), "{worst:e}");
    }

    #[test]
    fn l_matches_static_head() {
        let model = DielectricModel::new(skewed_ground_state(), 1.0, None).unwrap();
        let l = model.compute_l();
        let head = model.head_wings_body(Frequency::STATIC).unwrap().l;
        for i in 0..3 {
            for j in 0..3 {
                assert!((l.l[i][j] - l.l[j][i]).abs() < 1e-14);
                assert!((head[[i, j]].re - l.l[i][j]).abs() < 1e-10 * l.l0);
                assert!(head[[i, j]].im.abs() < 1e-12);
            }
        }
        assert!(sym_min_eigenvalue(l.l).unwrap() >= -1e-14);
        assert!(l.l0 > 0.0);
    }

    #[test]
    fn macroscopic_tensor_lies_between_one_and_one_plus_l() {
        let model = DielectricModel::new(skewed_ground_state(), 1.0, None).unwrap();
        let md = model.macroscopic_epsilon().unwrap();
        assert!(md.bounds_hold(1e-8), "{md:?}");
        assert!(md.body_min_eigenvalue >= 1.0 - 1e-12);
    }

    #[test]
    fn cubic_crystal_is_isotropic() {
        let model = DielectricModel::new(cubic_ground_state(), 1.2, None).unwrap();
        let data = DielectricData::new(&model, &model.macroscopic_epsilon().unwrap());
        assert!(data.anisotropy < 1e-10, "{}", data.anisotropy);
    }

    #[test]
    fn switching_response_off_gives_vacuum() {
        let model = DielectricModel::new(cubic_ground_state(), 1.2, None)
            .unwrap()
            .without_response();
        let md = model.macroscopic_epsilon().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = if i == j { 1.0 } else { 0.0 };
                assert_eq!(md.eps_m[i][j], d);
            }
        }
    }
}
