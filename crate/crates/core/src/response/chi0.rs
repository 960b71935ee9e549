//! Independent-particle density response built from interband transitions.

use ndarray::{s, Array1, Array2, Axis};
use num_complex::Complex64 as C64;

use crate::lattice::PlaneWaveBasis;
use crate::response::fibers::{momentum_elements, pair_elements};

/// Complex frequency `omega + i eta`; the zero value is the static limit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Frequency {
    pub omega: f64,
    pub eta: f64,
}

impl Frequency {
    pub const STATIC: Frequency = Frequency {
        omega: 0.0,
        eta: 0.0,
    };

    pub fn new(omega: f64, eta: f64) -> Self {
        Self { omega, eta }
    }

    pub fn is_static(&self) -> bool {
        self.omega == 0.0 && self.eta == 0.0
    }

    /// `(f_a - f_b) / (e_a - e_b + omega + i eta)`.
    pub fn weight(&self, df: f64, de: f64) -> C64 {
        df / C64::new(de + self.omega, self.eta)
    }
}

/// All transitions `a (at k) -> b (at k+q)` with `f_a != f_b` for one fiber pair.
#[derive(Debug, Clone)]
pub struct TransitionSet {
    /// `(a, b)` band indices.
    pub pairs: Vec<(usize, usize)>,
    /// `f_a - f_b`.
    pub df: Array1<f64>,
    /// `e_a - e_b`.
    pub de: Array1<f64>,
    /// `M_{ba}(G)` with one row per transition and one column per `G`.
    pub m: Array2<C64>,
    /// `<b|p|a>` (rows: transitions, columns: axes); only for `q = 0`.
    pub momentum: Option<Array2<C64>>,
}

impl TransitionSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn min_abs_denominator(&self) -> f64 {
        self.de.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()))
    }
}

/// Builds the transition set between the fiber `(ek, ck)` at `k` and `(ekq, ckq)` at `k+q`.
#[allow(clippy::too_many_arguments)]
pub fn transitions(
    basis: &PlaneWaveBasis,
    ek: &Array1<f64>,
    ck: &Array2<C64>,
    ekq: &Array1<f64>,
    ckq: &Array2<C64>,
    n_occ: usize,
    gvecs: &[[i32; 3]],
    with_momentum: bool,
) -> TransitionSet {
    let nb = ek.len();
    let nu = nb - n_occ;
    let nt = 2 * n_occ * nu;
    let mut pairs = Vec::with_capacity(nt);
    let mut df = Array1::zeros(nt);
    let mut de = Array1::zeros(nt);
    // Block A: a occupied at k, b empty at k+q. Block B: a empty at k, b occupied at k+q.
    for a in 0..n_occ {
        for b in n_occ..nb {
            let t = pairs.len();
            pairs.push((a, b));
            df[t] = 1.0;
            de[t] = ek[a] - ekq[b];
        }
    }
    for a in n_occ..nb {
        for b in 0..n_occ {
            let t = pairs.len();
            pairs.push((a, b));
            df[t] = -1.0;
            de[t] = ek[a] - ekq[b];
        }
    }
    let adj = |c: ndarray::ArrayView2<C64>| c.t().mapv(|x| x.conj());
    let kq_empty_adj = adj(ckq.slice(s![.., n_occ..]));
    let kq_occ_adj = adj(ckq.slice(s![.., ..n_occ]));
    let k_occ = ck.slice(s![.., ..n_occ]);
    let k_empty = ck.slice(s![.., n_occ..]);

    let mut m = Array2::<C64>::zeros((nt, gvecs.len()));
    for (gi, g) in gvecs.iter().enumerate() {
        let ma = pair_elements(basis, kq_empty_adj.view(), k_occ, *g); // (nu, n_occ)
        let mb = pair_elements(basis, kq_occ_adj.view(), k_empty, *g); // (n_occ, nu)
        let mut col = m.column_mut(gi);
        let mut t = 0;
        for a in 0..n_occ {
            for bi in 0..nu {
                col[t] = ma[[bi, a]];
                t += 1;
            }
        }
        for ai in 0..nu {
            for b in 0..n_occ {
                col[t] = mb[[b, ai]];
                t += 1;
            }
        }
    }

    let momentum = with_momentum.then(|| {
        let pa = momentum_elements(basis, ckq.slice(s![.., n_occ..]), k_occ);
        let pb = momentum_elements(basis, ckq.slice(s![.., ..n_occ]), k_empty);
        let mut p = Array2::<C64>::zeros((nt, 3));
        for axis in 0..3 {
            let mut t = 0;
            for a in 0..n_occ {
                for bi in 0..nu {
                    p[[t, axis]] = pa[axis][[bi, a]];
                    t += 1;
                }
            }
            for ai in 0..nu {
                for b in 0..n_occ {
                    p[[t, axis]] = pb[axis][[b, ai]];
                    t += 1;
                }
            }
        }
        p
    });

    TransitionSet {
        pairs,
        df,
        de,
        m,
        momentum,
    }
}

/// `chi0_{GG'} = (1/(N_q |cell|)) sum_k sum_t w_t conj(M_t(G)) M_t(G')`.
pub fn chi0_from_transitions(
    sets: &[TransitionSet],
    freq: Frequency,
    cell_volume: f64,
) -> Array2<C64> {
    let ng = sets[0].m.ncols();
    let mut chi = Array2::<C64>::zeros((ng, ng));
    for set in sets {
        let w: Array1<C64> = set
            .df
            .iter()
            .zip(set.de.iter())
            .map(|(f, e)| freq.weight(*f, *e))
            .collect();
        let weighted = &set.m * &w.view().insert_axis(Axis(1));
        chi = chi + set.m.t().mapv(|c| c.conj()).dot(&weighted);
    }
    chi.mapv_inplace(|c| c / (sets.len() as f64 * cell_volume));
    chi
}
