//! Batch pipeline behind the command-line front end.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::bloch::write_bands_csv;
use crate::dynamics::frequency::epsilon_m_omega;
use crate::dynamics::{
    propagate_hartree, write_trajectory_csv, DrivenPotential, DynamicsModel, PropagationOptions,
    TimeGrid,
};
use crate::error::{Error, Result};
use crate::io::config::{GaussianSite, RunConfig};
use crate::lattice::{Lattice, PlaneWaveBasis};
use crate::periodic::{gaussian_density, poisson_solve, PeriodicFunction};
use crate::response::dielectric::{DielectricData, DielectricModel, MacroscopicDielectric};
use crate::response::perturbation::{q1v_contour, q1v_sum_over_states, ContourSpec};
use crate::response::screening::{
    defect_screening, write_screening_csv, DefectCharge, GaussianCharge,
};
use crate::scf::{scf_solve, GroundState, GroundStateCheckpoint};

pub const GROUND_STATE_FILE: &str = "ground_state.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Scf,
    Bands,
    Dielectric,
    Defect,
    Dynamics,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Scf => "scf",
            Command::Bands => "bands",
            Command::Dielectric => "dielectric",
            Command::Defect => "defect",
            Command::Dynamics => "dynamics",
        };
        f.write_str(s)
    }
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl StageError {
    /// 2 configuration, 3 SCF, 4 not an insulator, 5 response, 6 dynamics.
    pub fn exit_code(&self) -> i32 {
        match (&self.error, self.stage) {
            (Error::ConfigInvalid(_), _) | (_, "config") => 2,
            (Error::NotAnInsulator { .. }, _) => 4,
            (_, "scf") | (_, "bands") => 3,
            (_, "dielectric") | (_, "defect") => 5,
            (_, "dynamics") => 6,
            _ => 1,
        }
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Completion record; written last, so its presence marks a finished run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub config_hash: String,
    pub code_version: String,
    pub checkpoint_reused: bool,
    pub scf_iterations: usize,
    pub stages: Vec<StageTiming>,
    pub warnings: Vec<String>,
    pub files: Vec<FileEntry>,
    pub summary: serde_json::Value,
}

struct Pipeline<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    stages: Vec<StageTiming>,
    warnings: Vec<String>,
    files: Vec<FileEntry>,
    summary: serde_json::Map<String, serde_json::Value>,
}

impl Pipeline<'_> {
    fn stage<T>(
        &mut self,
        name: &'static str,
        f: impl FnOnce(&mut Self) -> Result<T>,
    ) -> std::result::Result<T, StageError> {
        let t = Instant::now();
        let out = f(self).map_err(|error| StageError { stage: name, error });
        self.stages.push(StageTiming {
            name: name.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    /// Writes through a temporary file and a rename so that readers never see partial output.
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir, name, bytes)?;
        self.record(name, bytes);
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex(&Sha256::digest(bytes)),
        });
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.partial"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

/// Periodized sum of Gaussian charges on `basis`.
pub fn periodic_charge(sites: &[GaussianSite], basis: &Arc<PlaneWaveBasis>) -> PeriodicFunction {
    let mut f = PeriodicFunction::zeros(basis.clone());
    for s in sites {
        f.coeffs += &gaussian_density(s.center, s.charge, s.width, basis).coeffs;
    }
    f
}

/// Ground state from the checkpoint in `dir` when its hash matches, otherwise from SCF.
/// Returns the state and whether the checkpoint was reused.
pub fn ground_state(cfg: &RunConfig, dir: &Path) -> Result<(Arc<GroundState>, bool)> {
    let hash = cfg.ground_state_hash();
    let path = dir.join(GROUND_STATE_FILE);
    if path.exists() {
        let cp: std::result::Result<GroundStateCheckpoint, _> =
            serde_json::from_slice(&fs::read(&path)?);
        match cp {
            Ok(cp) if cp.config_hash.as_deref() == Some(hash.as_str()) => match cp.restore() {
                Ok(gs) => return Ok((Arc::new(gs), true)),
                Err(e) => log::warn!("checkpoint could not be restored ({e}); recomputing"),
            },
            Ok(_) => log::info!("checkpoint belongs to a different configuration; recomputing"),
            Err(e) => log::warn!("unreadable checkpoint ({e}); recomputing"),
        }
    }
    let lattice = Lattice::new(cfg.lattice)?;
    let density_basis = Arc::new(PlaneWaveBasis::new(
        &lattice,
        cfg.scf.density_cutoff_factor * cfg.scf.ecut,
    )?);
    let rho_nuc = periodic_charge(&cfg.sites, &density_basis);
    let gs = scf_solve(&lattice, &rho_nuc, cfg.z, &cfg.scf)?;
    Ok((Arc::new(gs), false))
}

fn dielectric(
    p: &mut Pipeline,
    gs: &Arc<GroundState>,
) -> Result<(DielectricModel, MacroscopicDielectric)> {
    let model = DielectricModel::new(gs.clone(), p.cfg.ecut_chi, p.cfg.response.max_bands)?;
    let md = model.macroscopic_epsilon()?;
    let data = DielectricData::new(&model, &md);
    if !data.bounds_ok {
        p.warnings.push(format!(
            "1 <= epsM <= 1 + L violated (margins {:e}, {:e})",
            md.lower_margin, md.upper_margin
        ));
    }
    p.write("dielectric.json", &serde_json::to_vec_pretty(&data)?)?;
    p.summary.insert("epsM".into(), json!(md.eps_m));
    p.summary.insert("L0".into(), json!(md.l.l0));
    Ok((model, md))
}

/// Runs `command` with outputs in `dir` and returns the manifest it wrote.
pub fn run(
    command: Command,
    cfg: &RunConfig,
    dir: &Path,
) -> std::result::Result<RunManifest, StageError> {
    let mut p = Pipeline {
        cfg,
        dir: dir.to_path_buf(),
        stages: Vec::new(),
        warnings: Vec::new(),
        files: Vec::new(),
        summary: serde_json::Map::new(),
    };
    p.stage("output", |p| {
        fs::create_dir_all(&p.dir)?;
        let m = p.dir.join(MANIFEST_FILE);
        if m.exists() {
            fs::remove_file(m)?;
        }
        Ok(())
    })?;

    let (gs, reused) = p.stage("scf", |p| {
        let (gs, reused) = ground_state(p.cfg, &p.dir)?;
        let bytes = serde_json::to_vec_pretty(&GroundStateCheckpoint::from_state(
            &gs,
            Some(p.cfg.ground_state_hash()),
        ))?;
        if reused {
            p.record(GROUND_STATE_FILE, &fs::read(p.dir.join(GROUND_STATE_FILE))?);
        } else {
            p.write(GROUND_STATE_FILE, &bytes)?;
        }
        let e = gs.energy();
        p.summary.insert("gap".into(), json!(gs.gap));
        p.summary.insert("fermi".into(), json!(gs.fermi));
        p.summary.insert("energy".into(), json!(e.total));
        p.summary.insert("residual".into(), json!(gs.residual));
        Ok((gs, reused))
    })?;
    let scf_iterations = if reused { 0 } else { gs.iterations };

    match command {
        Command::Scf => {}
        Command::Bands => p.stage("bands", |p| {
            let mut buf = Vec::new();
            write_bands_csv(&gs.bands, &mut buf)?;
            p.write("bands.csv", &buf)
        })?,
        Command::Dielectric => {
            p.stage("dielectric", |p| dielectric(p, &gs).map(|_| ()))?;
        }
        Command::Defect => {
            let spec = p.cfg.defect.clone().ok_or_else(|| StageError {
                stage: "config",
                error: Error::InvalidArgument("the defect command needs a [defect] section".into()),
            })?;
            let (model, md) = p.stage("dielectric", |p| dielectric(p, &gs))?;
            p.stage("defect", |p| {
                let m = DefectCharge {
                    parts: spec
                        .charges
                        .iter()
                        .map(|s| GaussianCharge {
                            center: s.center,
                            charge: s.charge,
                            width: s.width,
                        })
                        .collect(),
                };
                let report = defect_screening(
                    &model,
                    &md,
                    &m,
                    &p.cfg.response.eta_list,
                    &spec.directions,
                    spec.strict,
                )?;
                let mut buf = Vec::new();
                write_screening_csv(&report, &mut buf)?;
                p.write("screening.csv", &buf)?;
                p.warnings.extend(report.warnings.iter().cloned());

                // Dual-path check on the periodized defect potential.
                let mut mp = periodic_charge(&spec.charges, &gs.density_basis);
                mp.coeffs[0] = Default::default();
                let v = poisson_solve(&mp)?.scaled(-1.0);
                let contour = ContourSpec {
                    n_quad: p.cfg.response.n_quad,
                    aspect: p.cfg.response.aspect,
                };
                let f0 = &model.fibers0;
                let sos = q1v_sum_over_states(&gs, f0, f0, &v, [0.0; 3])?;
                let ci = q1v_contour(&gs, f0, f0, &v, [0.0; 3], contour)?;
                p.summary
                    .insert("external_charge".into(), json!(report.external_charge));
                p.summary.insert(
                    "renormalized_charge".into(),
                    json!(report.renormalized_charge),
                );
                p.summary.insert(
                    "macroscopic_prediction".into(),
                    json!(report.macroscopic_prediction),
                );
                p.summary
                    .insert("screened_limit".into(), json!(report.screened_limit));
                p.summary
                    .insert("rescaled_limit".into(), json!(report.rescaled_limit));
                p.summary.insert(
                    "q1v_contour_relative_difference".into(),
                    json!(sos.hs_distance(&ci) / sos.hs_norm().max(f64::MIN_POSITIVE)),
                );
                Ok(())
            })?;
        }
        Command::Dynamics => {
            let spec = p.cfg.dynamics.clone().ok_or_else(|| StageError {
                stage: "config",
                error: Error::InvalidArgument(
                    "the dynamics command needs a [dynamics] section".into(),
                ),
            })?;
            p.stage("dynamics", |p| {
                let model = DynamicsModel::new(gs.clone(), spec.ecut_density, spec.nbands)?;
                let m = periodic_charge(&spec.profile, &model.density_basis);
                let drive = DrivenPotential::from_charge(&m, spec.envelope, spec.amplitude)?;
                let grid = TimeGrid::new(spec.dt, spec.nsteps)?;
                let opts = PropagationOptions {
                    feedback: spec.feedback,
                    mode: spec.mode,
                    ..Default::default()
                };
                let traj =
                    propagate_hartree(&model, &model.zero_blocks(), Some(&drive), &grid, &opts)?;
                let mut buf = Vec::new();
                write_trajectory_csv(&traj, &model.density_basis, &spec.selected, &mut buf)?;
                p.write("trajectory.csv", &buf)?;
                let drift = traj
                    .trace0
                    .iter()
                    .fold(0.0f64, |m, t| m.max((t - traj.trace0[0]).abs()));
                p.summary.insert("trace_drift".into(), json!(drift));
                p.summary
                    .insert("final_hs_norm".into(), json!(traj.hs_norm.last()));
                p.summary.insert(
                    "corrector_passes".into(),
                    json!(traj.corrector_passes.iter().sum::<usize>()),
                );

                if !p.cfg.response.omega_grid.is_empty() {
                    let dm =
                        DielectricModel::new(gs.clone(), p.cfg.ecut_chi, p.cfg.response.max_bands)?;
                    let pts = epsilon_m_omega(
                        &dm,
                        &p.cfg.response.omega_grid,
                        p.cfg.response.broadening,
                    )?;
                    for q in &pts {
                        if let Some(e) = &q.error {
                            p.warnings.push(format!("omega = {}: {e}", q.omega));
                        }
                    }
                    p.write("epsM_omega.json", &serde_json::to_vec_pretty(&pts)?)?;
                }
                Ok(())
            })?;
        }
    }

    let manifest = RunManifest {
        command,
        config_hash: cfg.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        checkpoint_reused: reused,
        scf_iterations,
        stages: p.stages.clone(),
        warnings: p.warnings.clone(),
        files: p.files.clone(),
        summary: serde_json::Value::Object(p.summary.clone()),
    };
    p.stage("output", |p| {
        let bytes = serde_json::to_vec_pretty(&manifest)?;
        write_atomic(&p.dir, MANIFEST_FILE, &bytes)
    })?;
    Ok(manifest)
}
