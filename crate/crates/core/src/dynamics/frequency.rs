//! Frequency-dependent response: `chi0(q, omega + i eta)` and the macroscopic tensor.
//!
//! With the transform `F f(omega) = \int f(t) exp(i omega t) dt`, the kicked linear term of
//! [`q1v_time`](super::q1v_time) transforms into the retarded sum over transitions used by
//! [`DielectricModel::chi0`]; the frequency-domain routines reuse that model.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Vec3;
use crate::response::chi0::Frequency;
use crate::response::dielectric::DielectricModel;

fn check_broadening(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "broadening must be positive, got {eta}"
        )));
    }
    Ok(())
}

/// `chi0_{GG'}(q, omega + i eta)` for each frequency.
pub fn chi0_omega(
    model: &DielectricModel,
    q: Vec3,
    omegas: &[f64],
    eta: f64,
) -> Result<Vec<Array2<C64>>> {
    check_broadening(eta)?;
    omegas
        .iter()
        .map(|w| model.chi0(q, Frequency::new(*w, eta)))
        .collect()
}

/// One frequency of the macroscopic tensor. `error` is set when the body matrix is singular
/// at this frequency; the tensor entries are then NaN.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonOmegaPoint {
    pub omega: f64,
    pub tensor_re: [[f64; 3]; 3],
    pub tensor_im: [[f64; 3]; 3],
    pub eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EpsilonOmegaPoint {
    /// Smallest eigenvalue of the Hermitian part `(eps + eps^dagger)/2`.
    pub fn hermitian_min_eigenvalue(&self) -> Result<f64> {
        let m = Array2::from_shape_fn((3, 3), |(i, j)| {
            let a = C64::new(self.tensor_re[i][j], self.tensor_im[i][j]);
            let b = C64::new(self.tensor_re[j][i], -self.tensor_im[j][i]);
            0.5 * (a + b)
        });
        Ok(m.eigh(UPLO::Lower)?.0[0])
    }
}

/// `eps_M(omega + i eta)` from the frequency-dependent head, wings and body.
pub fn epsilon_m_omega(
    model: &DielectricModel,
    omegas: &[f64],
    eta: f64,
) -> Result<Vec<EpsilonOmegaPoint>> {
    check_broadening(eta)?;
    let mut out = Vec::with_capacity(omegas.len());
    for &omega in omegas {
        match model.macroscopic_tensor(Frequency::new(omega, eta)) {
            Ok((eps, _, _)) => out.push(EpsilonOmegaPoint {
                omega,
                tensor_re: std::array::from_fn(|i| std::array::from_fn(|j| eps[[i, j]].re)),
                tensor_im: std::array::from_fn(|i| std::array::from_fn(|j| eps[[i, j]].im)),
                eta,
                error: None,
            }),
            Err(e @ Error::SingularBody { .. }) => {
                log::warn!("omega = {omega}: {e}");
                out.push(EpsilonOmegaPoint {
                    omega,
                    tensor_re: [[f64::NAN; 3]; 3],
                    tensor_im: [[f64::NAN; 3]; 3],
                    eta,
                    error: Some(e.to_string()),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
