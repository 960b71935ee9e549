//! Linear screening of a localized external charge.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{add, dot, norm2, normalized, PlaneWaveBasis, Vec3};
use crate::response::chi0::Frequency;
use crate::response::dielectric::{quadratic, DielectricModel, MacroscopicDielectric};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCharge {
    pub center: Vec3,
    pub charge: f64,
    pub width: f64,
}

/// External charge `m`: a sum of normalized Gaussians in the whole space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectCharge {
    pub parts: Vec<GaussianCharge>,
}

impl DefectCharge {
    pub fn gaussian(center: Vec3, charge: f64, width: f64) -> Self {
        Self {
            parts: vec![GaussianCharge {
                center,
                charge,
                width,
            }],
        }
    }

    pub fn total_charge(&self) -> f64 {
        self.parts.iter().map(|p| p.charge).sum()
    }

    /// Unitary transform `(2 pi)^{-3/2} \int m(x) exp(-i k.x) dx`.
    pub fn fourier(&self, k: Vec3) -> C64 {
        let s = (2.0 * PI).powf(-1.5);
        self.parts
            .iter()
            .map(|p| {
                C64::from_polar(
                    s * p.charge * (-0.5 * p.width * p.width * norm2(k)).exp(),
                    -dot(k, p.center),
                )
            })
            .sum()
    }

    /// Coefficients of the periodic part of the Bloch component at `q` of the dilated charge
    /// `eta^3 m(eta x)`: `|cell|^{-1/2} (2 pi)^{3/2} m^((q+K)/eta)`.
    pub fn bloch_coefficients(&self, q: Vec3, basis: &PlaneWaveBasis, eta: f64) -> Array1<C64> {
        let f = (2.0 * PI).powf(1.5) / basis.lattice().cell_volume.sqrt();
        basis
            .vectors()
            .iter()
            .map(|k| {
                let qk = add(q, *k);
                self.fourier([qk[0] / eta, qk[1] / eta, qk[2] / eta]) * f
            })
            .collect()
    }

    /// Upper bound on `sup |v_c(m)|`; exact for a single Gaussian.
    pub fn potential_bound(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| p.charge.abs() * (2.0 / PI).sqrt() / p.width)
            .sum()
    }
}

/// Ratio of total to external charge seen at wavevector `eta sigma`, scaled by `\int m`.
///
/// As `eta -> 0` this tends to the screened charge `\int m / (sigma^T eps_M sigma)`.
pub fn screened_charge_sample(
    model: &DielectricModel,
    m: &DefectCharge,
    sigma: Vec3,
    eta: f64,
) -> Result<f64> {
    let s = normalized(sigma);
    let q = [eta * s[0], eta * s[1], eta * s[2]];
    let mc = m.bloch_coefficients(q, &model.chi_basis, 1.0);
    let tot = model.total_charge(q, &mc, Frequency::STATIC)?;
    Ok(m.total_charge() * (tot[0] / mc[0]).re)
}

/// Ratio `4 pi m^(k) / (|k|^2 W^eta(k))` for the dilated charge; tends to `k^T eps_M k`
/// for a unit vector `k`.
pub fn rescaled_potential_sample(
    model: &DielectricModel,
    m: &DefectCharge,
    k: Vec3,
    eta: f64,
) -> Result<f64> {
    let k = normalized(k);
    let q = [eta * k[0], eta * k[1], eta * k[2]];
    let mc = m.bloch_coefficients(q, &model.chi_basis, eta);
    let tot = model.total_charge(q, &mc, Frequency::STATIC)?;
    Ok((mc[0] / tot[0]).re)
}

/// Quadratic extrapolation to `eta = 0` from the two smallest samples.
pub fn richardson(samples: &[(f64, f64)]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| b.0.total_cmp(&a.0));
    match s.len() {
        0 => f64::NAN,
        1 => s[0].1,
        n => {
            let (h1, f1) = s[n - 2];
            let (h2, f2) = s[n - 1];
            (h1 * h1 * f2 - h2 * h2 * f1) / (h1 * h1 - h2 * h2)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScreeningRow {
    pub kind: String,
    pub eta: f64,
    pub direction: Vec3,
    pub measured: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlochScreening {
    pub q: Vec3,
    pub total_charge: Vec<C64>,
    pub potential: Vec<C64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefectScreeningReport {
    pub external_charge: f64,
    /// `\int m / (1 + L0)`.
    pub renormalized_charge: f64,
    /// `\int m / eps_M` along each sampled direction, from the macroscopic tensor.
    pub macroscopic_prediction: Vec<f64>,
    /// Extrapolated screened charge along each sampled direction.
    pub screened_limit: Vec<f64>,
    /// Extrapolated rescaled potential per direction; tends to `sigma^T eps_M sigma`.
    pub rescaled_limit: Vec<f64>,
    pub rows: Vec<ScreeningRow>,
    pub components: Vec<BlochScreening>,
    pub potential_bound: f64,
    pub smallness_bound: f64,
    pub warnings: Vec<String>,
}

/// Screening of the external charge `m` at the grid offsets and in the long-wavelength limit.
///
/// The smallness check compares `sup |v_c(m)|` with a quarter of the gap. With `strict` a
/// violation is an error; otherwise it is reported as a warning, which is useful because
/// every quantity computed here is linear in `m`.
pub fn defect_screening(
    model: &DielectricModel,
    md: &MacroscopicDielectric,
    m: &DefectCharge,
    etas: &[f64],
    directions: &[Vec3],
    strict: bool,
) -> Result<DefectScreeningReport> {
    let gs = &model.gs;
    let bound = m.potential_bound();
    let smallness = 0.25 * gs.gap;
    let mut warnings = Vec::new();
    if bound >= smallness {
        if strict {
            return Err(Error::PerturbationTooLarge {
                norm: bound,
                bound: smallness,
            });
        }
        warnings.push(format!(
            "defect potential {bound:.3e} exceeds the linear-regime bound {smallness:.3e}; results are the linear response"
        ));
    }
    if m.parts
        .iter()
        .any(|p| p.width > 0.25 * gs.lattice.min_lattice_length())
    {
        warnings.push(
            "defect extends over more than a quarter cell; grid offsets alias its tail".into(),
        );
    }

    let mut components = Vec::new();
    for q in gs.qgrid.nonzero_offsets() {
        let mc = m.bloch_coefficients(q, &model.chi_basis, 1.0);
        let tot = model.total_charge(q, &mc, Frequency::STATIC)?;
        let pot = model
            .chi_basis
            .vectors()
            .iter()
            .zip(tot.iter())
            .map(|(k, c)| c * (4.0 * PI / norm2(add(q, *k))))
            .collect();
        components.push(BlochScreening {
            q,
            total_charge: tot.to_vec(),
            potential: pot,
        });
    }

    let q_ext = m.total_charge();
    let mut rows = Vec::new();
    let mut limits = Vec::new();
    let mut rescaled = Vec::new();
    let mut predictions = Vec::new();
    for d in directions {
        let s = normalized(*d);
        let eps_dir = quadratic(&md.eps_m, s);
        predictions.push(q_ext / eps_dir);
        let mut samples = Vec::new();
        let mut potentials = Vec::new();
        for &eta in etas {
            let v = screened_charge_sample(model, m, s, eta)?;
            samples.push((eta, v));
            rows.push(ScreeningRow {
                kind: "screened_charge".into(),
                eta,
                direction: s,
                measured: v,
                predicted: q_ext / eps_dir,
            });
            let r = rescaled_potential_sample(model, m, s, eta)?;
            potentials.push((eta, r));
            rows.push(ScreeningRow {
                kind: "rescaled_potential".into(),
                eta,
                direction: s,
                measured: r,
                predicted: eps_dir,
            });
        }
        limits.push(richardson(&samples));
        rescaled.push(richardson(&potentials));
    }
    Ok(DefectScreeningReport {
        external_charge: q_ext,
        renormalized_charge: q_ext / (1.0 + md.l.l0),
        macroscopic_prediction: predictions,
        screened_limit: limits,
        rescaled_limit: rescaled,
        rows,
        components,
        potential_bound: bound,
        smallness_bound: smallness,
        warnings,
    })
}

pub fn write_screening_csv<W: Write>(
    report: &DefectScreeningReport,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "kind,eta,k1,k2,k3,measured,predicted")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{:.6e},{:.12e},{:.12e},{:.12e},{:.15e},{:.15e}",
            r.kind, r.eta, r.direction[0], r.direction[1], r.direction[2], r.measured, r.predicted
        )?;
    }
    Ok(())
}
