//! Brute-force full CI for small systems.
//!
//! Two independent routes to matrix elements live here: the Slater–Condon
//! assembly used by [`dense_fci_matrix`], and [`operator_apply_reference`],
//! which applies every second-quantized term to an occupation vector with
//! explicit Jordan–Wigner signs. Ground states come from a dense
//! eigensolver or from Lanczos over the matrix-free kernel.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::configs::{enumerate_all_configurations, fci_dimension, Configuration, SpinString};
use crate::integrals::FragmentHamiltonian;
use crate::sbd::{apply_hamiltonian_into, dot, fix_sign, SbdError, SubspaceBasis};

/// Largest dimension assembled densely by [`FciMethod::Auto`].
pub const DENSE_LIMIT: usize = 500;
/// Default cap for [`fci_solve`].
pub const DEFAULT_FCI_CAP: u64 = 1_000_000;

const LANCZOS_MAX_ITER: usize = 300;
const LANCZOS_TOL: f64 = 1e-9;
const LANCZOS_RESTARTS: usize = 20;
/// Memory budget for stored Lanczos vectors (bytes).
const LANCZOS_MEMORY: usize = 1 << 30;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("FCI dimension {dimension} exceeds cap {cap}")]
    CapExceeded { dimension: String, cap: u64 },
    #[error("Lanczos did not converge: residual {residual:.3e}")]
    NoConvergence { residual: f64 },
    #[error(transparent)]
    Basis(#[from] SbdError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FciMethod {
    Dense,
    Lanczos,
    /// Dense up to [`DENSE_LIMIT`], Lanczos above.
    Auto,
}

#[derive(Clone, Debug)]
pub struct DenseSpectrumResult {
    pub ground_energy: f64,
    /// Amplitudes in the order of `configs`.
    pub ground_vector: Vec<f64>,
    pub configs: Vec<Configuration>,
    pub dimension: usize,
}

impl DenseSpectrumResult {
    /// `|Psi_x|^2` per configuration.
    pub fn probabilities(&self) -> Vec<f64> {
        self.ground_vector.iter().map(|x| x * x).collect()
    }
}

/// Ground state of the full configuration space.
pub fn fci_solve(ham: &FragmentHamiltonian, cap: u64) -> Result<DenseSpectrumResult, OracleError> {
    fci_solve_with(ham, cap, FciMethod::Auto)
}

pub fn fci_solve_with(ham: &FragmentHamiltonian, cap: u64, method: FciMethod) -> Result<DenseSpectrumResult, OracleError> {
    let spec = ham.spec();
    let configs = enumerate_all_configurations(spec, cap).map_err(|_| OracleError::CapExceeded {
        dimension: fci_dimension(spec).to_string(),
        cap,
    })?;
    let dense = match method {
        FciMethod::Dense => true,
        FciMethod::Lanczos => false,
        FciMethod::Auto => configs.len() <= DENSE_LIMIT,
    };
    if dense {
        Ok(dense_ground_state(ham, configs))
    } else {
        lanczos_ground_state(ham, configs)
    }
}

/// Full matrix `H_xy` over `configs`, assembled entrywise from the
/// Slater–Condon rules. Row-major.
pub fn dense_fci_matrix(ham: &FragmentHamiltonian, configs: &[Configuration]) -> DMatrix<f64> {
    let n = configs.len();
    let rows: Vec<Vec<f64>> = configs
        .par_iter()
        .map(|x| {
            configs
                .iter()
                .map(|y| ham.coupling_element(x, y).expect("configurations share particle numbers"))
                .collect()
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

fn dense_ground_state(ham: &FragmentHamiltonian, configs: Vec<Configuration>) -> DenseSpectrumResult {
    let matrix = dense_fci_matrix(ham, &configs);
    let eig = SymmetricEigen::new(matrix);
    let (k, energy) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, e)| if e < best.1 { (i, e) } else { best });
    let mut vector: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    let norm = dot(&vector, &vector).sqrt();
    vector.iter_mut().for_each(|x| *x /= norm);
    fix_sign(&mut vector);
    DenseSpectrumResult { ground_energy: energy, ground_vector: vector, dimension: configs.len(), configs }
}

/// Lowest eigenpair of a symmetric tridiagonal matrix.
fn tridiagonal_ground(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let (idx, theta) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, e)| if e < best.1 { (i, e) } else { best });
    (theta, eig.eigenvectors.column(idx).iter().copied().collect())
}

/// Lanczos with full reorthogonalization and explicit restarts from the
/// current Ritz vector.
fn lanczos_ground_state(ham: &FragmentHamiltonian, configs: Vec<Configuration>) -> Result<DenseSpectrumResult, OracleError> {
    let basis = SubspaceBasis::build(configs.iter().copied(), ham)?;
    let n = basis.len();
    let max_iter = LANCZOS_MAX_ITER.min(n).min((LANCZOS_MEMORY / (8 * n)).max(20));

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2c);
    let mut start: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut hv = vec![0.0; n];
    let mut energy = f64::INFINITY;
    let mut residual = f64::INFINITY;

    for _ in 0..LANCZOS_RESTARTS {
        let norm = dot(&start, &start).sqrt();
        start.iter_mut().for_each(|x| *x /= norm);
        let mut vectors: Vec<Vec<f64>> = vec![start.clone()];
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        for j in 0..max_iter {
            apply_hamiltonian_into(&basis, ham, &vectors[j], &mut hv);
            let a = dot(&vectors[j], &hv);
            alphas.push(a);
            let mut w = hv.clone();
            for _ in 0..2 {
                for q in &vectors {
                    let c = dot(q, &w);
                    w.par_iter_mut().zip(q.par_iter()).for_each(|(wi, qi)| *wi -= c * qi);
                }
            }
            let b = dot(&w, &w).sqrt();
            let last = j + 1 == max_iter;
            if b < 1e-12 || last || (j + 1) % 10 == 0 {
                let (_, y) = tridiagonal_ground(&alphas, &betas);
                let estimate = b * y[j].abs();
                if b < 1e-12 || estimate < LANCZOS_TOL * 0.1 || last {
                    break;
                }
            }
            betas.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            vectors.push(w);
        }
        let k = alphas.len();
        let (_, y) = tridiagonal_ground(&alphas, &betas[..k - 1]);
        let mut ritz = vec![0.0; n];
        for (coef, q) in y.iter().zip(&vectors) {
            ritz.par_iter_mut().zip(q.par_iter()).for_each(|(r, qi)| *r += coef * qi);
        }
        let norm = dot(&ritz, &ritz).sqrt();
        ritz.iter_mut().for_each(|x| *x /= norm);
        apply_hamiltonian_into(&basis, ham, &ritz, &mut hv);
        energy = dot(&ritz, &hv);
        residual = hv.iter().zip(&ritz).map(|(h, r)| (h - energy * r).powi(2)).sum::<f64>().sqrt();
        start = ritz;
        if residual <= LANCZOS_TOL {
            break;
        }
    }
    if residual > LANCZOS_TOL {
        return Err(OracleError::NoConvergence { residual });
    }
    fix_sign(&mut start);
    Ok(DenseSpectrumResult {
        ground_energy: energy,
        ground_vector: start,
        dimension: n,
        configs: basis.configs().to_vec(),
    })
}

/// Spin-orbital occupation vector: alpha orbitals at bits `0..M`, beta
/// orbitals at bits `M..2M`.
fn to_spin_orbitals(c: &Configuration, norb: usize) -> u128 {
    c.alpha.bits() as u128 | ((c.beta.bits() as u128) << norb)
}

fn from_spin_orbitals(state: u128, norb: usize) -> Configuration {
    let mask = if norb == 64 { u64::MAX as u128 } else { (1u128 << norb) - 1 };
    Configuration::new(
        SpinString::from_bits((state & mask) as u64),
        SpinString::from_bits(((state >> norb) & mask) as u64),
    )
}

/// Jordan–Wigner sign: parity of occupied modes below `mode`.
fn jw_sign(state: u128, mode: usize) -> f64 {
    let below = state & ((1u128 << mode) - 1);
    if below.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn annihilate(state: u128, mode: usize) -> Option<(u128, f64)> {
    if state >> mode & 1 == 1 {
        Some((state & !(1u128 << mode), jw_sign(state, mode)))
    } else {
        None
    }
}

fn create(state: u128, mode: usize) -> Option<(u128, f64)> {
    if state >> mode & 1 == 0 {
        Some((state | (1u128 << mode), jw_sign(state, mode)))
    } else {
        None
    }
}

/// `<y|H|c>` for every `y` reached from `c` by the terms
/// `sum h_pq a+_p a_q + 1/2 sum (pq|rs) a+_p a+_r a_s a_q`.
pub fn operator_apply_reference(c: &Configuration, ham: &FragmentHamiltonian) -> BTreeMap<Configuration, f64> {
    let m = ham.norb();
    let state = to_spin_orbitals(c, m);
    let mut out: BTreeMap<Configuration, f64> = BTreeMap::new();
    *out.entry(*c).or_default() += ham.e_core();
    let mode = |orb: usize, spin: usize| orb + spin * m;

    for sigma in 0..2 {
        for p in 0..m {
            for q in 0..m {
                let h = ham.h(p, q);
                if h == 0.0 {
                    continue;
                }
                let Some((s1, f1)) = annihilate(state, mode(q, sigma)) else { continue };
                let Some((s2, f2)) = create(s1, mode(p, sigma)) else { continue };
                *out.entry(from_spin_orbitals(s2, m)).or_default() += h * f1 * f2;
            }
        }
    }
    for sigma in 0..2 {
        for tau in 0..2 {
            for p in 0..m {
                for q in 0..m {
                    for r in 0..m {
                        for s in 0..m {
                            let g = ham.eri(p, q, r, s);
                            if g == 0.0 {
                                continue;
                            }
                            let Some((s1, f1)) = annihilate(state, mode(q, sigma)) else { continue };
                            let Some((s2, f2)) = annihilate(s1, mode(s, tau)) else { continue };
                            let Some((s3, f3)) = create(s2, mode(r, tau)) else { continue };
                            let Some((s4, f4)) = create(s3, mode(p, sigma)) else { continue };
                            *out.entry(from_spin_orbitals(s4, m)).or_default() += 0.5 * g * f1 * f2 * f3 * f4;
                        }
                    }
                }
            }
        }
    }
    out
}
