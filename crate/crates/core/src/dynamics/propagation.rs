//! Free propagation, the perturbation series in time, and the self-consistent Hartree
//! dynamics.
//!
//! Integration happens in the interaction picture `Q~(t) = U0(t)^* Q(t) U0(t)`, where the
//! free evolution is exact and only the drive and the induced potential need a quadrature.

use std::io::Write;

use crate::linalg::eigh_hermitian;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{hs_norm, trace_per_cell, DrivenPotential, DynamicsModel, TimeGrid};
use crate::error::{Error, Result};
use crate::lattice::PlaneWaveBasis;

/// Largest admissible `dt * max transition frequency`.
pub const MAX_PHASE_PER_STEP: f64 = 0.5;

/// Densities and norms along a trajectory, with the blocks at the final time.
#[derive(Debug, Clone)]
pub struct ResponseTrajectory {
    pub times: Vec<f64>,
    /// Per-cell trace of `Q(t)`.
    pub trace0: Vec<f64>,
    pub hs_norm: Vec<f64>,
    /// Induced density on the model's density basis.
    pub density: Vec<Array1<C64>>,
    pub final_blocks: Vec<Array2<C64>>,
    /// Corrector passes per step (empty for closed-form and quadrature trajectories).
    pub corrector_passes: Vec<usize>,
}

impl ResponseTrajectory {
    /// `max_t ||rho_a(t) - rho_b(t)||` over the density coefficients.
    pub fn max_density_distance(&self, other: &Self) -> f64 {
        self.density
            .iter()
            .zip(&other.density)
            .map(|(a, b)| (a - b).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn max_density_norm(&self) -> f64 {
        self.density
            .iter()
            .map(|a| a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Damped transform `\int rho(t) exp(i omega t - damping t) dt` by the trapezoid rule.
    pub fn fourier_density(&self, omega: f64, damping: f64) -> Array1<C64> {
        let n = self.times.len();
        let mut acc = Array1::<C64>::zeros(self.density[0].len());
        for j in 0..n {
            let t = self.times[j];
            let h = if j == 0 {
                0.5 * (self.times[1] - self.times[0])
            } else if j == n - 1 {
                0.5 * (self.times[j] - self.times[j - 1])
            } else {
                0.5 * (self.times[j + 1] - self.times[j - 1])
            };
            let ph = C64::new(-damping * t, omega * t).exp() * h;
            acc.scaled_add(ph, &self.density[j]);
        }
        acc
    }
}

/// Terms of the perturbation series in time and their partial sums.
#[derive(Debug, Clone)]
pub struct SeriesTrajectories {
    /// `orders[n-1]` is `Q_n`.
    pub orders: Vec<ResponseTrajectory>,
    /// `partial_sums[n-1]` is `Q_1 + ... + Q_n`.
    pub partial_sums: Vec<ResponseTrajectory>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HartreeMode {
    /// Full unitary conjugation.
    Nonlinear,
    /// First-order part of the same discrete scheme.
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    /// Include the induced Hartree potential `v_c(rho_Q)`.
    pub feedback: bool,
    pub mode: HartreeMode,
    /// Absolute tolerance on the change of the blocks between corrector passes.
    pub corrector_tol: f64,
    pub max_corrector: usize,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            feedback: true,
            mode: HartreeMode::Nonlinear,
            corrector_tol: 1e-13,
            max_corrector: 50,
        }
    }
}

/// `X_ab exp(-i (e_a - e_b) t)`: conjugation by the free propagator in the eigenbasis.
fn phase(x: &Array2<C64>, e: &Array1<f64>, t: f64) -> Array2<C64> {
    Array2::from_shape_fn(x.raw_dim(), |(a, b)| {
        x[[a, b]] * C64::from_polar(1.0, -(e[a] - e[b]) * t)
    })
}

/// `U0(t) Q U0(t)^*` for every fiber.
pub fn free_propagate(model: &DynamicsModel, blocks: &[Array2<C64>], t: f64) -> Vec<Array2<C64>> {
    blocks
        .iter()
        .zip(&model.fibers.energies)
        .map(|(b, e)| phase(b, e, t))
        .collect()
}

fn commutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b) - b.dot(a)
}

/// `[W, gamma0]_ab = W_ab (f_b - f_a)`.
fn commutator_gamma0(w: &Array2<C64>, occ: &[f64]) -> Array2<C64> {
    Array2::from_shape_fn(w.raw_dim(), |(a, b)| w[[a, b]] * (occ[b] - occ[a]))
}

fn max_abs(x: &Array2<C64>) -> f64 {
    x.iter().fold(0.0f64, |m, c| m.max(c.norm()))
}

/// `exp(-i s W)` for Hermitian `W`, or its Cayley approximant `(1 + i s W/2)^{-1}(1 - i s W/2)`.
fn unitary_of(w: &Array2<C64>, s: f64, cayley: bool) -> Result<Array2<C64>> {
    let (lam, v) = eigh_hermitian(w)?;
    let ph: Vec<C64> = lam
        .iter()
        .map(|l| {
            if cayley {
                C64::new(1.0, -0.5 * s * l) / C64::new(1.0, 0.5 * s * l)
            } else {
                C64::from_polar(1.0, -s * l)
            }
        })
        .collect();
    let scaled = Array2::from_shape_fn(v.raw_dim(), |(i, j)| v[[i, j]] * ph[j]);
    Ok(scaled.dot(&v.t().mapv(|c| c.conj())))
}

fn check_step(model: &DynamicsModel, grid: &TimeGrid) -> Result<()> {
    let product = grid.dt * model.max_transition_frequency();
    if product > MAX_PHASE_PER_STEP {
        return Err(Error::StepTooCoarse { product });
    }
    Ok(())
}

fn occupations(model: &DynamicsModel) -> Vec<f64> {
    (0..model.nbands())
        .map(|n| model.fibers.occupation(n))
        .collect()
}

/// Cumulative integral `\int_0^{t_j} f` on a uniform grid: composite Simpson at even
/// indices, and one interval of the local quadratic interpolant at odd ones.
fn cumulative_integral(f: &[Array2<C64>], h: f64) -> Vec<Array2<C64>> {
    let n = f.len();
    let mut out = vec![Array2::<C64>::zeros(f[0].raw_dim()); n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = (&f[0] + &f[1]) * (0.5 * h);
        return out;
    }
    for j in (2..n).step_by(2) {
        out[j] = &out[j - 2] + &((&f[j - 2] + &(&f[j - 1] * 4.0) + &f[j]) * (h / 3.0));
    }
    for j in (1..n).step_by(2) {
        out[j] = if j + 1 < n {
            &out[j - 1] + &((&f[j - 1] * 5.0 + &(&f[j] * 8.0) - &f[j + 1]) * (h / 12.0))
        } else {
            &out[j - 1] + &((&f[j] * 5.0 + &(&f[j - 1] * 8.0) - &f[j - 2]) * (h / 12.0))
        };
    }
    out
}

struct FiberSeries {
    /// Per order: per time density contribution, trace, squared HS norm; and final block.
    orders: Vec<(Vec<Array1<C64>>, Vec<f64>, Vec<f64>, Array2<C64>)>,
    sums: Vec<(Vec<Array1<C64>>, Vec<f64>, Vec<f64>, Array2<C64>)>,
}

fn record(
    model: &DynamicsModel,
    k: usize,
    e: &Array1<f64>,
    tilde: &[Array2<C64>],
    grid: &TimeGrid,
) -> (Vec<Array1<C64>>, Vec<f64>, Vec<f64>, Array2<C64>) {
    let mut dens = Vec::with_capacity(tilde.len());
    let mut tr = Vec::with_capacity(tilde.len());
    let mut hs = Vec::with_capacity(tilde.len());
    let mut last = Array2::zeros(tilde[0].raw_dim());
    for (j, x) in tilde.iter().enumerate() {
        let q = phase(x, e, grid.time(j));
        dens.push(model.fiber_density(k, &q));
        tr.push(q.diag().iter().map(|c| c.re).sum());
        hs.push(q.iter().map(|c| c.norm_sqr()).sum());
        last = q;
    }
    (dens, tr, hs, last)
}

/// Series terms `Q_1..Q_nmax` of the response to the drive (no Hartree feedback), from
/// `Q_n(t) = -i \int_0^t U0(t-s)[v(s), Q_{n-1}(s)]U0(t-s)^* ds` with `Q_0 = gamma0`.
///
/// A kick is handled in closed form, `Q_n(0+) = (-i a)^n/n! ad_V^n(gamma0)`.
pub fn qnv_time(
    model: &DynamicsModel,
    drive: &DrivenPotential,
    grid: &TimeGrid,
    nmax: usize,
) -> Result<SeriesTrajectories> {
    if !(1..=4).contains(&nmax) {
        return Err(Error::InvalidArgument(format!(
            "series order must be in 1..=4, got {nmax}"
        )));
    }
    check_step(model, grid)?;
    let occ = occupations(model);
    let v = model.on_density_basis(&drive.profile);
    let vblocks = model.potential_blocks(&v);
    let gamma0 = model.gamma0();
    let nt = grid.nsteps + 1;
    let amp = drive.amplitude;

    let fibers: Vec<FiberSeries> = (0..model.nfibers())
        .into_par_iter()
        .map(|k| {
            let e = &model.fibers.energies[k];
            let vk = &vblocks[k];
            let mut prev: Vec<Array2<C64>> = vec![gamma0[k].clone(); nt];
            let mut sum: Vec<Array2<C64>> = vec![Array2::zeros(vk.raw_dim()); nt];
            let mut orders = Vec::with_capacity(nmax);
            let mut sums = Vec::with_capacity(nmax);
            for n in 1..=nmax {
                let cur: Vec<Array2<C64>> = if drive.envelope.is_kick() {
                    let x = if n == 1 {
                        commutator_gamma0(vk, &occ)
                    } else {
                        commutator(vk, &prev[0])
                    } * C64::new(0.0, -amp / n as f64);
                    vec![x; nt]
                } else {
                    let f: Vec<Array2<C64>> = (0..nt)
                        .map(|j| {
                            let t = grid.time(j);
                            let vt =
                                phase(vk, e, -t) * C64::new(0.0, -amp * drive.envelope.value(t));
                            commutator(&vt, &prev[j])
                        })
                        .collect();
                    cumulative_integral(&f, grid.dt)
                };
                for (s, c) in sum.iter_mut().zip(&cur) {
                    *s += c;
                }
                orders.push(record(model, k, e, &cur, grid));
                sums.push(record(model, k, e, &sum, grid));
                prev = cur;
            }
            FiberSeries { orders, sums }
        })
        .collect();

    let reduce =
        |pick: &dyn Fn(&FiberSeries) -> &(Vec<Array1<C64>>, Vec<f64>, Vec<f64>, Array2<C64>)| {
            let nk = fibers.len() as f64;
            let mut density = vec![Array1::<C64>::zeros(model.density_basis.len()); nt];
            let mut trace0 = vec![0.0; nt];
            let mut hs2 = vec![0.0; nt];
            let mut final_blocks = Vec::with_capacity(fibers.len());
            for f in &fibers {
                let (d, t, h, last) = pick(f);
                for j in 0..nt {
                    density[j] += &d[j];
                    trace0[j] += t[j];
                    hs2[j] += h[j];
                }
                final_blocks.push(last.clone());
            }
            ResponseTrajectory {
                times: grid.times(),
                trace0: trace0.iter().map(|t| t / nk).collect(),
                hs_norm: hs2.iter().map(|h| (h / nk).sqrt()).collect(),
                density: density.into_iter().map(|d| d / nk).collect(),
                final_blocks,
                corrector_passes: Vec::new(),
            }
        };
    let orders: Vec<ResponseTrajectory> = (0..nmax)
        .map(|n| reduce(&|f: &FiberSeries| &f.orders[n]))
        .collect();
    let partial_sums = (0..nmax)
        .map(|n| reduce(&|f: &FiberSeries| &f.sums[n]))
        .collect();

    let mut warnings = Vec::new();
    for n in 1..nmax {
        let (lo, hi) = (&orders[n - 1], &orders[n]);
        if let Some(j) = (0..nt).find(|&j| lo.hs_norm[j] > 0.0 && hi.hs_norm[j] >= lo.hs_norm[j]) {
            let msg = format!(
                "series term of order {} is not smaller than order {} at t = {} ({:e} >= {:e})",
                n + 1,
                n,
                grid.time(j),
                hi.hs_norm[j],
                lo.hs_norm[j]
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok(SeriesTrajectories {
        orders,
        partial_sums,
        warnings,
    })
}

/// Linear term `Q_1(t) = -i \int_0^t U0(t-s)[v(s), gamma0]U0(t-s)^* ds`.
pub fn q1v_time(
    model: &DynamicsModel,
    drive: &DrivenPotential,
    grid: &TimeGrid,
) -> Result<ResponseTrajectory> {
    let mut s = qnv_time(model, drive, grid, 1)?;
    Ok(s.orders.remove(0))
}

fn check_admissible(model: &DynamicsModel, q0: &[Array2<C64>]) -> Result<()> {
    let nb = model.nbands();
    if q0.len() != model.nfibers() || q0.iter().any(|b| b.dim() != (nb, nb)) {
        return Err(Error::InvalidArgument(format!(
            "initial state needs {} blocks of size {nb}x{nb}",
            model.nfibers()
        )));
    }
    for (b, g) in q0.iter().zip(model.gamma0()) {
        let full = &g + b;
        let herm = max_abs(&(&full - &full.t().mapv(|c| c.conj())));
        if herm > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "initial state is not Hermitian ({herm:e})"
            )));
        }
        let (lam, _) = eigh_hermitian(&full)?;
        if lam.iter().any(|l| *l < -1e-10 || *l > 1.0 + 1e-10) {
            return Err(Error::InvalidArgument(
                "initial state violates 0 <= gamma0 + Q0 <= 1".into(),
            ));
        }
    }
    Ok(())
}

/// Self-consistent Hartree dynamics of `Q(t) = gamma(t) - gamma0` under an optional drive.
///
/// Each step is an implicit midpoint (Cayley) step in the interaction picture; the
/// midpoint potential is refined by fixed-point corrector passes. The per-cell trace is
/// conserved up to round-off since every step is a unitary conjugation.
pub fn propagate_hartree(
    model: &DynamicsModel,
    q0: &[Array2<C64>],
    drive: Option<&DrivenPotential>,
    grid: &TimeGrid,
    opts: &PropagationOptions,
) -> Result<ResponseTrajectory> {
    check_step(model, grid)?;
    check_admissible(model, q0)?;
    let occ = occupations(model);
    let gamma0 = model.gamma0();
    let energies = &model.fibers.energies;
    let nonlinear = opts.mode == HartreeMode::Nonlinear;
    let ext = drive.map(|d| model.on_density_basis(&d.profile));

    let mut q: Vec<Array2<C64>> = q0.to_vec();
    if let (Some(d), Some(v)) = (drive, &ext) {
        if d.envelope.is_kick() {
            let vb = model.potential_blocks(v);
            q = q
                .iter()
                .zip(&vb)
                .zip(&gamma0)
                .map(|((qk, vk), g)| {
                    if nonlinear {
                        let u = unitary_of(vk, d.amplitude, false)?;
                        Ok(u.dot(&(g + qk)).dot(&u.t().mapv(|c| c.conj())) - g)
                    } else {
                        Ok(qk - &(commutator_gamma0(vk, &occ) * C64::new(0.0, d.amplitude)))
                    }
                })
                .collect::<Result<_>>()?;
        }
    }

    // Interaction-picture potential at time t for the midpoint state `mid`.
    let w_tilde = |mid: &[Array2<C64>], t: f64| -> Option<Vec<Array2<C64>>> {
        let mut v = Array1::<C64>::zeros(model.density_basis.len());
        let mut any = false;
        if let (Some(d), Some(e)) = (drive, &ext) {
            let s = d.amplitude * d.envelope.value(t);
            if s != 0.0 {
                v.scaled_add(C64::new(s, 0.0), e);
                any = true;
            }
        }
        if opts.feedback {
            let schr: Vec<Array2<C64>> = mid
                .iter()
                .zip(energies)
                .map(|(x, e)| phase(x, e, t))
                .collect();
            v += &model.hartree_potential(&model.density(&schr));
            any = true;
        }
        any.then(|| {
            model
                .potential_blocks(&v)
                .iter()
                .zip(energies)
                .map(|(w, e)| phase(w, e, -t))
                .collect()
        })
    };

    let step = |qn: &[Array2<C64>], w: &[Array2<C64>]| -> Result<Vec<Array2<C64>>> {
        qn.par_iter()
            .zip(w.par_iter())
            .zip(gamma0.par_iter())
            .map(|((qk, wk), g)| {
                if nonlinear {
                    let c = unitary_of(wk, grid.dt, true)?;
                    Ok(c.dot(&(g + qk)).dot(&c.t().mapv(|x| x.conj())) - g)
                } else {
                    Ok(qk - &(commutator_gamma0(wk, &occ) * C64::new(0.0, grid.dt)))
                }
            })
            .collect()
    };

    let nt = grid.nsteps + 1;
    let mut traj = ResponseTrajectory {
        times: grid.times(),
        trace0: Vec::with_capacity(nt),
        hs_norm: Vec::with_capacity(nt),
        density: Vec::with_capacity(nt),
        final_blocks: Vec::new(),
        corrector_passes: Vec::with_capacity(grid.nsteps),
    };
    let push = |traj: &mut ResponseTrajectory, qt: &[Array2<C64>], t: f64| {
        let schr: Vec<Array2<C64>> = qt
            .iter()
            .zip(energies)
            .map(|(x, e)| phase(x, e, t))
            .collect();
        traj.trace0.push(trace_per_cell(&schr));
        traj.hs_norm.push(hs_norm(&schr));
        traj.density.push(model.density(&schr));
        schr
    };
    let mut last = push(&mut traj, &q, 0.0);

    let mut prev: Option<Vec<Array2<C64>>> = None;
    for n in 0..grid.nsteps {
        let t_mid = grid.time(n) + 0.5 * grid.dt;
        let mut next: Vec<Array2<C64>> = match &prev {
            Some(p) => q.iter().zip(p).map(|(a, b)| a * 2.0 - b).collect(),
            None => q.clone(),
        };
        let mut passes = 0;
        loop {
            passes += 1;
            let mid: Vec<Array2<C64>> = q.iter().zip(&next).map(|(a, b)| (a + b) * 0.5).collect();
            let new = match w_tilde(&mid, t_mid) {
                Some(w) => step(&q, &w)?,
                None => q.clone(),
            };
            let change = new
                .iter()
                .zip(&next)
                .map(|(a, b)| max_abs(&(a - b)))
                .fold(0.0, f64::max);
            next = new;
            if change <= opts.corrector_tol {
                break;
            }
            if passes >= opts.max_corrector {
                return Err(Error::CorrectorNotConverged { step: n, change });
            }
        }
        traj.corrector_passes.push(passes);
        prev = Some(std::mem::replace(&mut q, next));
        last = push(&mut traj, &q, grid.time(n + 1));
    }
    traj.final_blocks = last;
    Ok(traj)
}

/// CSV with one row per time: `t,trace0,hs_norm` and real and imaginary parts of the
/// selected density coefficients.
pub fn write_trajectory_csv<W: Write>(
    traj: &ResponseTrajectory,
    basis: &PlaneWaveBasis,
    selected: &[[i32; 3]],
    mut w: W,
) -> Result<()> {
    let idx: Vec<usize> = selected
        .iter()
        .map(|m| {
            basis.find(*m).ok_or_else(|| {
                Error::InvalidArgument(format!("density coefficient {m:?} outside the basis"))
            })
        })
        .collect::<Result<_>>()?;
    write!(w, "t,trace0,hs_norm")?;
    for m in selected {
        write!(
            w,
            ",re_{}_{}_{},im_{}_{}_{}",
            m[0], m[1], m[2], m[0], m[1], m[2]
        )?;
    }
    writeln!(w)?;
    for j in 0..traj.times.len() {
        write!(
            w,
            "{:.10e},{:.15e},{:.15e}",
            traj.times[j], traj.trace0[j], traj.hs_norm[j]
        )?;
        for &i in &idx {
            let c = traj.density[j][i];
            write!(w, ",{:.15e},{:.15e}", c.re, c.im)?;
        }
        writeln!(w)?;
    }
    Ok(())
}
