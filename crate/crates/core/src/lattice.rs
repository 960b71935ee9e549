//! Bravais lattice, plane-wave basis and the discrete Brillouin-zone grid.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(s: f64, a: Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

pub fn norm2(a: Vec3) -> f64 {
    dot(a, a)
}

pub fn norm(a: Vec3) -> f64 {
    norm2(a).sqrt()
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn normalized(a: Vec3) -> Vec3 {
    scale(1.0 / norm(a), a)
}

/// Real-space lattice together with its reciprocal lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub vectors: [Vec3; 3],
    pub reciprocal: [Vec3; 3],
    pub cell_volume: f64,
    pub bz_volume: f64,
}

impl Lattice {
    /// Builds the lattice and its reciprocal vectors with `a_i . b_j = 2 pi delta_ij`.
    pub fn new(vectors: [Vec3; 3]) -> Result<Self> {
        let [a1, a2, a3] = vectors;
        let det = dot(a1, cross(a2, a3));
        let scale_ref = norm(a1) * norm(a2) * norm(a3);
        if !det.is_finite() || det.abs() <= 1e-10 * scale_ref.max(f64::MIN_POSITIVE) {
            return Err(Error::DegenerateLattice { det });
        }
        let f = 2.0 * PI / det;
        let reciprocal = [
            scale(f, cross(a2, a3)),
            scale(f, cross(a3, a1)),
            scale(f, cross(a1, a2)),
        ];
        let cell_volume = det.abs();
        Ok(Self {
            vectors,
            reciprocal,
            cell_volume,
            bz_volume: (2.0 * PI).powi(3) / cell_volume,
        })
    }

    pub fn cubic(a: f64) -> Result<Self> {
        Self::new([[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]])
    }

    /// Cartesian vector `m1 b1 + m2 b2 + m3 b3`.
    pub fn reciprocal_vector(&self, m: [i32; 3]) -> Vec3 {
        let mut out = [0.0; 3];
        for (i, b) in self.reciprocal.iter().enumerate() {
            for c in 0..3 {
                out[c] += m[i] as f64 * b[c];
            }
        }
        out
    }

    /// Coordinates of `k` in units of the reciprocal vectors.
    pub fn fractional(&self, k: Vec3) -> Vec3 {
        [
            dot(k, self.vectors[0]) / (2.0 * PI),
            dot(k, self.vectors[1]) / (2.0 * PI),
            dot(k, self.vectors[2]) / (2.0 * PI),
        ]
    }

    pub fn min_lattice_length(&self) -> f64 {
        self.vectors
            .iter()
            .map(|a| norm(*a))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Reciprocal-lattice vectors with `|K|^2 / 2 <= ecut`, sorted by kinetic energy and then by
/// integer coordinates so that the ordering is reproducible.
#[derive(Debug, Clone)]
pub struct PlaneWaveBasis {
    lattice: Lattice,
    ecut: f64,
    millers: Vec<[i32; 3]>,
    cartesian: Vec<Vec3>,
    index: HashMap<[i32; 3], usize>,
}

impl PlaneWaveBasis {
    pub fn new(lattice: &Lattice, ecut: f64) -> Result<Self> {
        if !(ecut.is_finite() && ecut >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ecut must be non-negative, got {ecut}"
            )));
        }
        let kmax = (2.0 * ecut).sqrt();
        let bound: Vec<i32> = lattice
            .vectors
            .iter()
            .map(|a| (kmax * norm(*a) / (2.0 * PI)).floor() as i32 + 1)
            .collect();
        let mut entries: Vec<(f64, [i32; 3], Vec3)> = Vec::new();
        for m1 in -bound[0]..=bound[0] {
            for m2 in -bound[1]..=bound[1] {
                for m3 in -bound[2]..=bound[2] {
                    let m = [m1, m2, m3];
                    let k = lattice.reciprocal_vector(m);
                    let kin = 0.5 * norm2(k);
                    if kin <= ecut * (1.0 + 1e-12) {
                        entries.push((kin, m, k));
                    }
                }
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let millers: Vec<[i32; 3]> = entries.iter().map(|e| e.1).collect();
        let cartesian = entries.iter().map(|e| e.2).collect();
        let index = millers.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        Ok(Self {
            lattice: lattice.clone(),
            ecut,
            millers,
            cartesian,
            index,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn ecut(&self) -> f64 {
        self.ecut
    }

    pub fn len(&self) -> usize {
        self.millers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.millers.is_empty()
    }

    pub fn millers(&self) -> &[[i32; 3]] {
        &self.millers
    }

    pub fn miller(&self, i: usize) -> [i32; 3] {
        self.millers[i]
    }

    pub fn vector(&self, i: usize) -> Vec3 {
        self.cartesian[i]
    }

    pub fn vectors(&self) -> &[Vec3] {
        &self.cartesian
    }

    pub fn find(&self, m: [i32; 3]) -> Option<usize> {
        self.index.get(&m).copied()
    }

    /// Position of `K = 0`; always present and always first.
    pub fn zero_index(&self) -> usize {
        0
    }
}

/// Discrete Monkhorst-Pack-like grid `q = sum_i (j_i / n_i) b_i`, folded so that every
/// fractional coordinate lies in `(-1/2, 1/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    pub dims: [usize; 3],
    pub fractional: Vec<Vec3>,
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

fn fold_half(x: f64) -> f64 {
    let mut y = x - x.round();
    if y <= -0.5 + 1e-12 {
        y += 1.0;
    }
    y
}

impl QGrid {
    pub fn new(lattice: &Lattice, dims: [usize; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "q-grid dimensions must be positive, got {dims:?}"
            )));
        }
        let mut fractional = Vec::new();
        for j1 in 0..dims[0] {
            for j2 in 0..dims[1] {
                for j3 in 0..dims[2] {
                    fractional.push([
                        fold_half(j1 as f64 / dims[0] as f64),
                        fold_half(j2 as f64 / dims[1] as f64),
                        fold_half(j3 as f64 / dims[2] as f64),
                    ]);
                }
            }
        }
        let points = fractional
            .iter()
            .map(|f| {
                let mut k = [0.0; 3];
                for i in 0..3 {
                    for c in 0..3 {
                        k[c] += f[i] * lattice.reciprocal[i][c];
                    }
                }
                k
            })
            .collect();
        let n = fractional.len();
        Ok(Self {
            dims,
            fractional,
            points,
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn integer_coords(&self, frac: Vec3) -> Option<[i64; 3]> {
        let mut out = [0i64; 3];
        for i in 0..3 {
            let x = frac[i] * self.dims[i] as f64;
            let r = x.round();
            if (x - r).abs() > 1e-8 {
                return None;
            }
            out[i] = (r as i64).rem_euclid(self.dims[i] as i64);
        }
        Some(out)
    }

    /// Index of the grid point equal to `q` modulo the reciprocal lattice, if any.
    pub fn find(&self, lattice: &Lattice, q: Vec3) -> Option<usize> {
        let j = self.integer_coords(lattice.fractional(q))?;
        Some(((j[0] as usize) * self.dims[1] + j[1] as usize) * self.dims[2] + j[2] as usize)
    }

    pub fn is_commensurate(&self, lattice: &Lattice, q: Vec3) -> bool {
        self.find(lattice, q).is_some()
    }

    /// Grid offsets other than zero: the allowed Bloch wavevectors of a periodic
    /// perturbation on the supercell that the grid represents.
    pub fn nonzero_offsets(&self) -> Vec<Vec3> {
        self.points
            .iter()
            .filter(|q| norm2(**q) > 1e-20)
            .copied()
            .collect()
    }
}
