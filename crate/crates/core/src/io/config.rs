//! Run configuration: a TOML document with one table per stage.
//!
//! Validation walks the whole document and reports every problem it finds, each tagged
//! with the dotted path of the offending key.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::dynamics::{Envelope, HartreeMode};
use crate::error::{ConfigIssue, Error, Result};
use crate::lattice::{Lattice, Vec3};
use crate::scf::ScfParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSite {
    pub center: Vec3,
    pub charge: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseConfig {
    pub n_quad: usize,
    pub aspect: f64,
    /// Bands kept in the response sums; all plane waves when absent.
    pub max_bands: Option<usize>,
    pub eta_list: Vec<f64>,
    pub omega_grid: Vec<f64>,
    pub broadening: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectConfig {
    pub charges: Vec<GaussianSite>,
    pub directions: Vec<Vec3>,
    /// Fail instead of warning when the defect is too strong for the linear regime.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub dt: f64,
    pub nsteps: usize,
    pub nbands: usize,
    pub ecut_density: f64,
    /// Periodic charge whose potential drives the system.
    pub profile: Vec<GaussianSite>,
    pub envelope: Envelope,
    pub amplitude: f64,
    pub feedback: bool,
    pub mode: HartreeMode,
    /// Density coefficients (Miller indices) written to the trajectory table.
    pub selected: Vec<[i32; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub lattice: [Vec3; 3],
    pub z: usize,
    pub sites: Vec<GaussianSite>,
    pub ecut_chi: f64,
    pub scf: ScfParams,
    pub response: ResponseConfig,
    pub defect: Option<DefectConfig>,
    pub dynamics: Option<DynamicsConfig>,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// SHA-256 of the canonical JSON form of the whole configuration, output path excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        digest(&c)
    }

    /// Hash of the inputs that determine the ground state.
    pub fn ground_state_hash(&self) -> String {
        digest(&(&self.lattice, self.z, &self.sites, &self.scf))
    }
}

fn digest<T: Serialize>(v: &T) -> String {
    let bytes = serde_json::to_vec(v).expect("configuration serializes");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Collects issues while reading typed values out of a TOML table.
struct Reader<'a> {
    issues: &'a mut Vec<ConfigIssue>,
}

impl Reader<'_> {
    fn issue(&mut self, path: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn f64_value(&mut self, path: &str, v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) if x.is_finite() => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.issue(path, "expected a finite number");
                None
            }
        }
    }

    fn usize_value(&mut self, path: &str, v: &Value) -> Option<usize> {
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            _ => {
                self.issue(path, "expected a non-negative integer");
                None
            }
        }
    }

    fn f64(&mut self, t: &Table, sec: &str, key: &str, default: Option<f64>) -> Option<f64> {
        let path = format!("{sec}.{key}");
        match t.get(key) {
            Some(v) => self.f64_value(&path, v),
            None if default.is_some() => default,
            None => {
                self.issue(&path, "missing");
                None
            }
        }
    }

    fn usize(&mut self, t: &Table, sec: &str, key: &str, default: Option<usize>) -> Option<usize> {
        let path = format!("{sec}.{key}");
        match t.get(key) {
            Some(v) => self.usize_value(&path, v),
            None if default.is_some() => default,
            None => {
                self.issue(&path, "missing");
                None
            }
        }
    }

    fn bool(&mut self, t: &Table, sec: &str, key: &str, default: bool) -> bool {
        match t.get(key) {
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.issue(&format!("{sec}.{key}"), "expected true or false");
                default
            }
            None => default,
        }
    }

    fn f64_list(&mut self, path: &str, v: &Value) -> Option<Vec<f64>> {
        let Value::Array(a) = v else {
            self.issue(path, "expected an array of numbers");
            return None;
        };
        let mut out = Vec::with_capacity(a.len());
        let mut ok = true;
        for (i, x) in a.iter().enumerate() {
            match self.f64_value(&format!("{path}[{i}]"), x) {
                Some(x) => out.push(x),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn vec3(&mut self, path: &str, v: &Value) -> Option<Vec3> {
        let xs = self.f64_list(path, v)?;
        if xs.len() != 3 {
            self.issue(path, "expected three components");
            return None;
        }
        Some([xs[0], xs[1], xs[2]])
    }

    fn int3(&mut self, path: &str, v: &Value) -> Option<[i64; 3]> {
        let Value::Array(a) = v else {
            self.issue(path, "expected three integers");
            return None;
        };
        let xs: Vec<i64> = a.iter().filter_map(|x| x.as_integer()).collect();
        if a.len() != 3 || xs.len() != 3 {
            self.issue(path, "expected three integers");
            return None;
        }
        Some([xs[0], xs[1], xs[2]])
    }

    fn sites(&mut self, path: &str, v: Option<&Value>) -> Option<Vec<GaussianSite>> {
        let Some(v) = v else {
            self.issue(path, "missing");
            return None;
        };
        let Value::Array(a) = v else {
            self.issue(path, "expected an array of {center, charge, width} tables");
            return None;
        };
        if a.is_empty() {
            self.issue(path, "at least one entry is required");
            return None;
        }
        let mut out = Vec::new();
        let mut ok = true;
        for (i, s) in a.iter().enumerate() {
            let p = format!("{path}[{i}]");
            let Some(t) = s.as_table() else {
                self.issue(&p, "expected a table");
                ok = false;
                continue;
            };
            let center = t
                .get("center")
                .map_or(Some([0.0; 3]), |c| self.vec3(&format!("{p}.center"), c));
            let charge = self.f64(t, &p, "charge", None);
            let width = self.f64(t, &p, "width", None);
            if let Some(w) = width {
                if w <= 0.0 {
                    self.issue(&format!("{p}.width"), "must be positive");
                    ok = false;
                }
            }
            match (center, charge, width) {
                (Some(center), Some(charge), Some(width)) => out.push(GaussianSite {
                    center,
                    charge,
                    width,
                }),
                _ => ok = false,
            }
        }
        ok.then_some(out)
    }
}

fn section<'a>(root: &'a Table, name: &str, r: &mut Reader, required: bool) -> Option<&'a Table> {
    match root.get(name) {
        Some(Value::Table(t)) => Some(t),
        Some(_) => {
            r.issue(name, "expected a table");
            None
        }
        None => {
            if required {
                r.issue(name, "missing section");
            }
            None
        }
    }
}

const SECTIONS: [&str; 8] = [
    "lattice", "nuclei", "basis", "scf", "response", "defect", "dynamics", "output",
];

/// Parses and validates a configuration, reporting every problem at once.
pub fn validate_config(raw: &str) -> std::result::Result<RunConfig, Vec<ConfigIssue>> {
    let root: Table = match raw.parse() {
        Ok(t) => t,
        Err(e) => {
            return Err(vec![ConfigIssue {
                path: String::new(),
                message: format!("not valid TOML: {e}"),
            }])
        }
    };
    let mut issues = Vec::new();
    let mut r = Reader {
        issues: &mut issues,
    };
    for key in root.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            r.issue(key, "unknown section");
        }
    }

    // [lattice]: either `vectors` or the cubic shorthand `a`.
    let mut lattice = None;
    if let Some(t) = section(&root, "lattice", &mut r, true) {
        match (t.get("vectors"), t.get("a")) {
            (Some(Value::Array(rows)), None) if rows.len() == 3 => {
                let v: Vec<Option<Vec3>> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| r.vec3(&format!("lattice.vectors[{i}]"), row))
                    .collect();
                if let [Some(a), Some(b), Some(c)] = v[..] {
                    lattice = Some([a, b, c]);
                }
            }
            (None, Some(a)) => {
                if let Some(a) = r.f64_value("lattice.a", a) {
                    if a > 0.0 {
                        lattice = Some([[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]]);
                    } else {
                        r.issue("lattice.a", "must be positive");
                    }
                }
            }
            (Some(_), Some(_)) => r.issue("lattice", "give either `vectors` or `a`, not both"),
            (Some(_), None) => r.issue("lattice.vectors", "expected three vectors"),
            (None, None) => r.issue("lattice", "missing `vectors` (or cubic `a`)"),
        }
        if let Some(v) = lattice {
            if let Err(e) = Lattice::new(v) {
                r.issue("lattice.vectors", e.to_string());
                lattice = None;
            }
        }
    }

    // [nuclei]
    let mut z = None;
    let mut sites = None;
    if let Some(t) = section(&root, "nuclei", &mut r, true) {
        z = r.usize(t, "nuclei", "z", None);
        if z == Some(0) {
            r.issue("nuclei.z", "at least one electron per cell is required");
        }
        sites = r.sites("nuclei.sites", t.get("sites"));
        if let (Some(z), Some(s)) = (z, &sites) {
            let total: f64 = s.iter().map(|x| x.charge).sum();
            if (total - z as f64).abs() > 1e-9 * z.max(1) as f64 {
                r.issue(
                    "nuclei.z",
                    format!(
                        "cell is not neutral: z = {z} electrons but nuclear charges sum to {total}"
                    ),
                );
            }
        }
    }

    // [basis]
    let defaults = ScfParams::default();
    let mut ecut = None;
    let mut ecut_chi = None;
    let mut qgrid = None;
    if let Some(t) = section(&root, "basis", &mut r, true) {
        ecut = r.f64(t, "basis", "ecut", None);
        ecut_chi = r.f64(t, "basis", "ecut_chi", ecut.map(|e| 0.5 * e));
        if let Some(e) = ecut {
            if e <= 0.0 {
                r.issue("basis.ecut", "must be positive");
            }
        }
        if let (Some(e), Some(c)) = (ecut, ecut_chi) {
            if c <= 0.0 {
                r.issue("basis.ecut_chi", "must be positive");
            } else if c > e {
                r.issue(
                    "basis.ecut_chi",
                    format!("must not exceed basis.ecut ({c} > {e})"),
                );
            }
        }
        qgrid = match t.get("qgrid") {
            None => Some(defaults.qgrid),
            Some(v) => r.int3("basis.qgrid", v).and_then(|g| {
                if g.iter().all(|x| *x >= 1) {
                    Some([g[0] as usize, g[1] as usize, g[2] as usize])
                } else {
                    r.issue("basis.qgrid", "grid dimensions must be at least 1");
                    None
                }
            }),
        };
    }

    // [scf]
    let empty = Table::new();
    let t = section(&root, "scf", &mut r, false).unwrap_or(&empty);
    let mixing = r.f64(t, "scf", "mixing", Some(defaults.mixing));
    let max_iter = r.usize(t, "scf", "max_iter", Some(defaults.max_iter));
    let tol_density = r.f64(t, "scf", "tol_density", Some(defaults.tol_density));
    let extra_bands = r.usize(t, "scf", "extra_bands", Some(defaults.extra_bands));
    let dcf = r.f64(
        t,
        "scf",
        "density_cutoff_factor",
        Some(defaults.density_cutoff_factor),
    );
    let anderson_depth = r.usize(t, "scf", "anderson_depth", Some(defaults.anderson_depth));
    if mixing.is_some_and(|m| !(m > 0.0 && m <= 1.0)) {
        r.issue("scf.mixing", "must lie in (0, 1]");
    }
    if max_iter == Some(0) {
        r.issue("scf.max_iter", "must be at least 1");
    }
    if tol_density.is_some_and(|x| x <= 0.0) {
        r.issue("scf.tol_density", "must be positive");
    }
    if dcf.is_some_and(|x| x < 1.0) {
        r.issue("scf.density_cutoff_factor", "must be at least 1");
    }

    // [response]
    let t = section(&root, "response", &mut r, false).unwrap_or(&empty);
    let n_quad = r.usize(t, "response", "n_quad", Some(64));
    let aspect = r.f64(t, "response", "aspect", Some(0.5));
    let max_bands = match t.get("max_bands") {
        None => Some(None),
        Some(v) => r.usize_value("response.max_bands", v).map(Some),
    };
    let eta_list = match t.get("eta_list") {
        None => Some(vec![0.04, 0.02, 0.01]),
        Some(v) => r.f64_list("response.eta_list", v),
    };
    let omega_grid = match t.get("omega_grid") {
        None => Some(Vec::new()),
        Some(v) => r.f64_list("response.omega_grid", v),
    };
    let broadening = r.f64(t, "response", "broadening", Some(1e-3));
    if n_quad.is_some_and(|n| n < 4) {
        r.issue(
            "response.n_quad",
            "at least 4 quadrature nodes are required",
        );
    }
    if aspect.is_some_and(|a| a <= 0.0) {
        r.issue("response.aspect", "must be positive");
    }
    if let (Some(Some(mb)), Some(z)) = (max_bands, z) {
        if mb <= z {
            r.issue(
                "response.max_bands",
                format!("must exceed the {z} occupied bands"),
            );
        }
    }
    if let Some(e) = &eta_list {
        if e.is_empty() || e.iter().any(|x| *x <= 0.0) {
            r.issue("response.eta_list", "needs at least one positive value");
        }
    }
    if broadening.is_some_and(|b| b <= 0.0) {
        r.issue("response.broadening", "must be positive");
    }

    // [defect]
    let mut defect = Some(None);
    if let Some(t) = section(&root, "defect", &mut r, false) {
        let charges = r.sites("defect.charges", t.get("charges"));
        let strict = r.bool(t, "defect", "strict", true);
        let directions = match t.get("directions") {
            None => Some(vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
            Some(Value::Array(a)) if !a.is_empty() => {
                let d: Vec<Option<Vec3>> = a
                    .iter()
                    .enumerate()
                    .map(|(i, v)| r.vec3(&format!("defect.directions[{i}]"), v))
                    .collect();
                let mut ok = true;
                for (i, x) in d.iter().enumerate() {
                    if let Some(x) = x {
                        if x.iter().all(|c| *c == 0.0) {
                            r.issue(&format!("defect.directions[{i}]"), "must be nonzero");
                            ok = false;
                        }
                    }
                }
                d.into_iter().collect::<Option<Vec<_>>>().filter(|_| ok)
            }
            Some(_) => {
                r.issue("defect.directions", "expected a nonempty array of vectors");
                None
            }
        };
        defect = match (charges, directions) {
            (Some(charges), Some(directions)) => Some(Some(DefectConfig {
                charges,
                directions,
                strict,
            })),
            _ => None,
        };
    }

    // [dynamics]
    let mut dynamics = Some(None);
    if let Some(t) = section(&root, "dynamics", &mut r, false) {
        let dt = r.f64(t, "dynamics", "dt", None);
        let nsteps = r.usize(t, "dynamics", "nsteps", None);
        let nbands = r.usize(t, "dynamics", "nbands", None);
        let ecut_density = r.f64(t, "dynamics", "ecut_density", ecut_chi);
        let profile = r.sites("dynamics.profile", t.get("profile"));
        let amplitude = r.f64(t, "dynamics", "amplitude", None);
        let feedback = r.bool(t, "dynamics", "feedback", true);
        let mode = match t.get("mode").map(|v| v.as_str()) {
            None | Some(Some("nonlinear")) => Some(HartreeMode::Nonlinear),
            Some(Some("linearized")) => Some(HartreeMode::Linearized),
            _ => {
                r.issue("dynamics.mode", "expected \"nonlinear\" or \"linearized\"");
                None
            }
        };
        let envelope = match t.get("envelope") {
            None => {
                r.issue("dynamics.envelope", "missing");
                None
            }
            Some(v) => match v.clone().try_into::<Envelope>() {
                Ok(e) => {
                    let bad = match e {
                        Envelope::GaussianPulse { width, .. } => !(width > 0.0),
                        Envelope::Monochromatic { omega } => !omega.is_finite(),
                        Envelope::DeltaKick => false,
                    };
                    if bad {
                        r.issue("dynamics.envelope", "invalid envelope parameters");
                        None
                    } else {
                        Some(e)
                    }
                }
                Err(e) => {
                    r.issue(
                        "dynamics.envelope",
                        format!("expected {{kind = \"delta_kick\" | \"monochromatic\" | \"gaussian_pulse\", ...}}: {e}"),
                    );
                    None
                }
            },
        };
        let selected = match t.get("selected") {
            None => Some(vec![[1, 0, 0], [0, 1, 0], [0, 0, 1]]),
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    r.int3(&format!("dynamics.selected[{i}]"), v)
                        .map(|m| m.map(|x| x as i32))
                })
                .collect::<Vec<_>>()
                .into_iter()
                .collect(),
            Some(_) => {
                r.issue("dynamics.selected", "expected an array of Miller indices");
                None
            }
        };
        if dt.is_some_and(|x| x <= 0.0) {
            r.issue("dynamics.dt", "must be positive");
        }
        if nsteps == Some(0) {
            r.issue("dynamics.nsteps", "must be at least 1");
        }
        if let (Some(nb), Some(z)) = (nbands, z) {
            if nb <= z {
                r.issue(
                    "dynamics.nbands",
                    format!("must exceed the {z} occupied bands"),
                );
            }
        }
        if ecut_density.is_some_and(|x| x <= 0.0) {
            r.issue("dynamics.ecut_density", "must be positive");
        }
        dynamics = match (
            dt,
            nsteps,
            nbands,
            ecut_density,
            profile,
            envelope,
            amplitude,
            mode,
            selected,
        ) {
            (
                Some(dt),
                Some(nsteps),
                Some(nbands),
                Some(ecut_density),
                Some(profile),
                Some(envelope),
                Some(amplitude),
                Some(mode),
                Some(selected),
            ) => Some(Some(DynamicsConfig {
                dt,
                nsteps,
                nbands,
                ecut_density,
                profile,
                envelope,
                amplitude,
                feedback,
                mode,
                selected,
            })),
            _ => None,
        };
    }

    // [output]
    let mut output_dir = Some(PathBuf::from("out"));
    if let Some(t) = section(&root, "output", &mut r, false) {
        match t.get("dir") {
            None => {}
            Some(Value::String(s)) if !s.is_empty() => output_dir = Some(PathBuf::from(s)),
            Some(_) => {
                r.issue("output.dir", "expected a nonempty path");
                output_dir = None;
            }
        }
    }

    if !issues.is_empty() {
        return Err(issues);
    }
    // Every field is present once no issue was recorded.
    let scf = ScfParams {
        ecut: ecut.unwrap(),
        qgrid: qgrid.unwrap(),
        mixing: mixing.unwrap(),
        max_iter: max_iter.unwrap(),
        tol_density: tol_density.unwrap(),
        extra_bands: extra_bands.unwrap(),
        density_cutoff_factor: dcf.unwrap(),
        anderson_depth: anderson_depth.unwrap(),
    };
    Ok(RunConfig {
        lattice: lattice.unwrap(),
        z: z.unwrap(),
        sites: sites.unwrap(),
        ecut_chi: ecut_chi.unwrap(),
        scf,
        response: ResponseConfig {
            n_quad: n_quad.unwrap(),
            aspect: aspect.unwrap(),
            max_bands: max_bands.unwrap(),
            eta_list: eta_list.unwrap(),
            omega_grid: omega_grid.unwrap(),
            broadening: broadening.unwrap(),
        },
        defect: defect.unwrap(),
        dynamics: dynamics.unwrap(),
        output_dir: output_dir.unwrap(),
    })
}

/// Reads and validates a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let raw = std::fs::read_to_string(path)?;
    validate_config(&raw).map_err(Error::ConfigInvalid)
}
