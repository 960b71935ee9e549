//! Periodic functions in the normalized plane-wave basis `e_K = |cell|^{-1/2} exp(iK.r)`.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{add, dot, norm2, PlaneWaveBasis, Vec3};

/// Coefficients of a periodic function in a plane-wave basis.
#[derive(Debug, Clone)]
pub struct PeriodicFunction {
    pub basis: Arc<PlaneWaveBasis>,
    pub coeffs: Array1<C64>,
}

/// Coefficients below this are treated as exact zeros where a singular kernel would act on them.
pub const ZERO_MODE_TOL: f64 = 1e-10;

impl PeriodicFunction {
    pub fn new(basis: Arc<PlaneWaveBasis>, coeffs: Array1<C64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::InvalidArgument(format!(
                "coefficient length {} does not match basis size {}",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(Self { basis, coeffs })
    }

    pub fn zeros(basis: Arc<PlaneWaveBasis>) -> Self {
        let n = basis.len();
        Self {
            basis,
            coeffs: Array1::zeros(n),
        }
    }

    /// Constant function with the given integral over one cell.
    pub fn uniform(basis: Arc<PlaneWaveBasis>, integral: f64) -> Self {
        let mut f = Self::zeros(basis);
        let vol = f.basis.lattice().cell_volume;
        f.coeffs[0] = C64::new(integral / vol.sqrt(), 0.0);
        f
    }

    pub fn cell_volume(&self) -> f64 {
        self.basis.lattice().cell_volume
    }

    /// Integral over one unit cell.
    pub fn integral(&self) -> f64 {
        self.cell_volume().sqrt() * self.coeffs[0].re
    }

    /// Squared L2 norm over one cell (Parseval).
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// True when `c_{-K} = conj(c_K)` for every pair present in the basis.
    pub fn is_real(&self, tol: f64) -> bool {
        let b = &self.basis;
        (0..b.len()).all(|i| {
            let m = b.miller(i);
            match b.find([-m[0], -m[1], -m[2]]) {
                Some(j) => (self.coeffs[i] - self.coeffs[j].conj()).norm() <= tol,
                None => self.coeffs[i].norm() <= tol,
            }
        })
    }

    pub fn value_at(&self, r: Vec3) -> C64 {
        let s = 1.0 / self.cell_volume().sqrt();
        self.coeffs
            .iter()
            .zip(self.basis.vectors())
            .map(|(c, k)| c * C64::from_polar(s, dot(*k, r)))
            .sum()
    }

    /// Re-expresses the function in another basis over the same lattice, dropping modes
    /// that the target basis does not contain.
    pub fn project_onto(&self, target: &Arc<PlaneWaveBasis>) -> Self {
        let mut out = Self::zeros(target.clone());
        for (i, m) in target.millers().iter().enumerate() {
            if let Some(j) = self.basis.find(*m) {
                out.coeffs[i] = self.coeffs[j];
            }
        }
        out
    }

    pub fn coefficient(&self, m: [i32; 3]) -> C64 {
        self.basis
            .find(m)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            coeffs: self.coeffs.mapv(|c| c * s),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_basis(other)?;
        Ok(Self {
            basis: self.basis.clone(),
            coeffs: &self.coeffs + &other.coeffs,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_basis(other)?;
        Ok(Self {
            basis: self.basis.clone(),
            coeffs: &self.coeffs - &other.coeffs,
        })
    }

    fn check_same_basis(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis) || self.basis.millers() == other.basis.millers() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "periodic functions live in different bases".into(),
            ))
        }
    }
}

/// Solves `-Laplacian V = 4 pi rho` with zero mean.
pub fn poisson_solve(rho: &PeriodicFunction) -> Result<PeriodicFunction> {
    let c0 = rho.coeffs[0].norm();
    if c0 > ZERO_MODE_TOL {
        return Err(Error::NonNeutralCell { coefficient: c0 });
    }
    let mut v = PeriodicFunction::zeros(rho.basis.clone());
    for i in 1..rho.basis.len() {
        v.coeffs[i] = rho.coeffs[i] * (4.0 * PI / norm2(rho.basis.vector(i)));
    }
    Ok(v)
}

/// Coulomb pairing `(4 pi / |cell|) sum_K conj(f_K) g_K / |q+K|^2` of two Bloch components.
///
/// Returns the real part; for real fields at `q = 0` the pairing is real.
pub fn coulomb_inner(f: &PeriodicFunction, g: &PeriodicFunction, q: Vec3) -> Result<f64> {
    f.check_same_basis(g)?;
    let mut acc = 0.0;
    for i in 0..f.basis.len() {
        let k = add(q, f.basis.vector(i));
        let k2 = norm2(k);
        let prod = f.coeffs[i].conj() * g.coeffs[i];
        if k2 < 1e-20 {
            if f.coeffs[i].norm() > ZERO_MODE_TOL && g.coeffs[i].norm() > ZERO_MODE_TOL {
                return Err(Error::CoulombSingularity { wavevector: k });
            }
            continue;
        }
        acc += prod.re / k2;
    }
    Ok(4.0 * PI / f.cell_volume() * acc)
}

/// Periodized normalized Gaussian charge of width `width` centred at `center`.
pub fn gaussian_density(
    center: Vec3,
    charge: f64,
    width: f64,
    basis: &Arc<PlaneWaveBasis>,
) -> PeriodicFunction {
    let lmin = basis.lattice().min_lattice_length();
    if width > 0.25 * lmin {
        log::warn!("Gaussian width {width} exceeds a quarter of the shortest lattice vector; images overlap");
    }
    let pref = charge / basis.lattice().cell_volume.sqrt();
    let coeffs = basis
        .vectors()
        .iter()
        .map(|k| {
            C64::from_polar(
                pref * (-0.5 * width * width * norm2(*k)).exp(),
                -dot(*k, center),
            )
        })
        .collect();
    PeriodicFunction {
        basis: basis.clone(),
        coeffs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use approx::assert_relative_eq;

    fn basis(a: f64, ecut: f64) -> Arc<PlaneWaveBasis> {
        Arc::new(PlaneWaveBasis::new(&Lattice::cubic(a).unwrap(), ecut).unwrap())
    }

    #[test]
    fn uniform_integral_round_trip() {
        let b = basis(5.0, 2.0);
        let f = PeriodicFunction::uniform(b, 3.0);
        assert_relative_eq!(f.integral(), 3.0, epsilon = 1e-14);
        assert_relative_eq!(f.value_at([0.3, 1.0, 2.0]).re, 3.0 / 125.0, epsilon = 1e-14);
    }

    #[test]
    fn poisson_single_mode() {
        // rho = cos(2 pi x / a): V = 4 pi / k^2 cos(kx).
        let a = 6.0;
        let b = basis(a, 2.0);
        let k = 2.0 * PI / a;
        let s = b.lattice().cell_volume.sqrt() / 2.0;
        let mut rho = PeriodicFunction::zeros(b.clone());
        rho.coeffs[b.find([1, 0, 0]).unwrap()] = C64::new(s, 0.0);
        rho.coeffs[b.find([-1, 0, 0]).unwrap()] = C64::new(s, 0.0);
        let v = poisson_solve(&rho).unwrap();
        for x in [0.0, 0.7, 2.1, 4.4] {
            let expect = 4.0 * PI / (k * k) * (k * x).cos();
            assert_relative_eq!(v.value_at([x, 0.2, -1.0]).re, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn poisson_rejects_charged_cell() {
        let b = basis(4.0, 1.0);
        let rho = PeriodicFunction::uniform(b, 1.0);
        assert!(matches!(
            poisson_solve(&rho),
            Err(Error::NonNeutralCell { .. })
        ));
    }

    #[test]
    fn coulomb_inner_zero_mode_singularity() {
        let b = basis(4.0, 1.0);
        let f = PeriodicFunction::uniform(b, 1.0);
        assert!(matches!(
            coulomb_inner(&f, &f, [0.0; 3]),
            Err(Error::CoulombSingularity { .. })
        ));
        // At a nonzero Bloch offset the zero mode is harmless.
        let val = coulomb_inner(&f, &f, [0.1, 0.0, 0.0]).unwrap();
        assert_relative_eq!(
            val,
            4.0 * PI / 64.0 * f.coeffs[0].norm_sqr() / 0.01,
            max_relative = 1e-12
        );
    }

    #[test]
    fn coulomb_inner_is_potential_pairing() {
        // (4 pi/|cell|) sum conj(f) g/|K|^2 = |cell|^{-1} int conj(f) V[g].
        let b = basis(5.0, 3.0);
        let g1 = gaussian_density([0.0; 3], 1.0, 0.7, &b);
        let g2 = gaussian_density([1.0, 0.5, 0.0], 1.0, 0.9, &b);
        let d = g1.sub(&g2).unwrap();
        let v = poisson_solve(&d).unwrap();
        let direct: f64 = d
            .coeffs
            .iter()
            .zip(v.coeffs.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        let ci = coulomb_inner(&d, &d, [0.0; 3]).unwrap();
        assert_relative_eq!(ci * b.lattice().cell_volume, direct, max_relative = 1e-12);
        assert!(ci > 0.0);
    }

    #[test]
    fn gaussian_matches_lattice_sum() {
        // Oracle: sum of real-space images of the normalized Gaussian.
        let a = 4.0;
        let w = 0.8;
        let b = basis(a, 40.0);
        let center = [0.3, -0.2, 1.1];
        let rho = gaussian_density(center, 2.0, w, &b);
        assert!(rho.is_real(1e-14));
        assert_relative_eq!(rho.integral(), 2.0, epsilon = 1e-12);
        let r = [1.0, 0.4, 0.9];
        let norm = 2.0 / (2.0 * PI * w * w).powf(1.5);
        let mut sum = 0.0;
        for i in -3..=3 {
            for j in -3..=3 {
                for k in -3..=3 {
                    let d = [
                        r[0] - center[0] - a * i as f64,
                        r[1] - center[1] - a * j as f64,
                        r[2] - center[2] - a * k as f64,
                    ];
                    sum += norm * (-norm2(d) / (2.0 * w * w)).exp();
                }
            }
        }
        assert_relative_eq!(rho.value_at(r).re, sum, max_relative = 1e-9);
    }

    #[test]
    fn projection_keeps_common_modes() {
        let big = basis(5.0, 4.0);
        let small = basis(5.0, 1.0);
        let g = gaussian_density([0.1, 0.2, 0.3], 1.0, 0.5, &big);
        let p = g.project_onto(&small);
        assert_eq!(p.coeffs.len(), small.len());
        for (i, m) in small.millers().iter().enumerate() {
            assert_eq!(p.coeffs[i], g.coefficient(*m));
        }
    }
}
