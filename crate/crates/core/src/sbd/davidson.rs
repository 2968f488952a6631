//! Lowest eigenpair of the projected Hamiltonian.
//!
//! Davidson iteration with a diagonal preconditioner; bases at or below
//! [`SolverOptions::dense_threshold`] are diagonalized densely.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::SubspaceBasis;
use super::matvec::{apply_hamiltonian_into, for_each_entry};
use super::{SbdError, SubspaceVector};
use crate::integrals::FragmentHamiltonian;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Residual norm `||Hv - Ev||` at which the solve stops (Hartree).
    pub tol: f64,
    pub max_iterations: usize,
    pub max_subspace: usize,
    pub restart_size: usize,
    pub dense_threshold: usize,
    /// Lower bound on `|H_xx - E|` in the preconditioner.
    pub level_shift: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iterations: 1000,
            max_subspace: 24,
            restart_size: 4,
            dense_threshold: 64,
            level_shift: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTimings {
    pub matvec: f64,
    pub subspace: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundStateResult {
    pub energy: f64,
    pub vector: SubspaceVector,
    pub residual_norm: f64,
    pub iterations: usize,
    pub matvec_count: usize,
    pub converged: bool,
    pub wall_times: SolveTimings,
}

const DOT_CHUNK: usize = 1 << 14;

/// Dot product with a reduction order fixed by the vector length alone.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() <= DOT_CHUNK {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let partial: Vec<f64> = a
        .par_chunks(DOT_CHUNK)
        .zip(b.par_chunks(DOT_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn scale(alpha: f64, x: &mut [f64]) {
    x.par_iter_mut().for_each(|xi| *xi *= alpha);
}

/// Flips the sign so the largest-magnitude entry (first on ties) is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Index-hashed pseudo-random entries in [-0.5, 0.5).
fn scrambled(i: usize) -> f64 {
    let mut z = (i as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

/// Ground state of `P H P` over `basis`.
pub fn solve_ground_state(
    basis: &SubspaceBasis,
    ham: &FragmentHamiltonian,
    opts: &SolverOptions,
) -> Result<GroundStateResult, SbdError> {
    if basis.is_empty() {
        return Err(SbdError::EmptyBasis);
    }
    if basis.len() <= opts.dense_threshold.max(2) {
        Ok(dense_solve(basis, ham))
    } else {
        davidson(basis, ham, opts)
    }
}

fn dense_solve(basis: &SubspaceBasis, ham: &FragmentHamiltonian) -> GroundStateResult {
    let start = Instant::now();
    let n = basis.len();
    let mut matrix = DMatrix::<f64>::zeros(n, n);
    for (row, &d) in basis.diagonal().iter().enumerate() {
        matrix[(row, row)] = d;
        for_each_entry(basis, ham, row, |col, h| matrix[(row, col)] += h);
    }
    let mut column = vec![0.0; n];
    let matvec_time = start.elapsed().as_secs_f64();
    let eig = SymmetricEigen::new(matrix);
    let (k, energy) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, e)| if e < best.1 { (i, e) } else { best });
    let mut coeffs: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    let norm = dot(&coeffs, &coeffs).sqrt();
    scale(1.0 / norm, &mut coeffs);
    fix_sign(&mut coeffs);
    apply_hamiltonian_into(basis, ham, &coeffs, &mut column);
    let residual_norm = column
        .iter()
        .zip(&coeffs)
        .map(|(hv, v)| (hv - energy * v).powi(2))
        .sum::<f64>()
        .sqrt();
    let total = start.elapsed().as_secs_f64();
    GroundStateResult {
        energy,
        vector: SubspaceVector::new(coeffs),
        residual_norm,
        iterations: 0,
        matvec_count: 1,
        converged: true,
        wall_times: SolveTimings { matvec: matvec_time, subspace: total - matvec_time, total },
    }
}

/// Gram–Schmidt (two passes) of `t` against the orthonormal `basis`;
/// returns the remaining norm after normalization is applied.
fn orthonormalize(t: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, t);
            axpy(-c, b, t);
        }
    }
    let norm = dot(t, t).sqrt();
    if norm > 0.0 {
        scale(1.0 / norm, t);
    }
    norm
}

fn davidson(basis: &SubspaceBasis, ham: &FragmentHamiltonian, opts: &SolverOptions) -> Result<GroundStateResult, SbdError> {
    let start = Instant::now();
    let n = basis.len();
    let diag = basis.diagonal();
    let max_sub = opts.max_subspace.max(opts.restart_size + 2).min(n);
    let keep = opts.restart_size.clamp(1, max_sub - 1);

    let mut matvec_time = 0.0;
    let mut matvec_count = 0usize;
    let apply = |v: &[f64], out: &mut [f64], count: &mut usize, time: &mut f64| {
        let t = Instant::now();
        apply_hamiltonian_into(basis, ham, v, out);
        *count += 1;
        *time += t.elapsed().as_secs_f64();
    };

    // Unit vector on the lowest diagonal element plus a small scrambled
    // component, so that symmetry sectors orthogonal to that determinant are
    // still reachable.
    let lowest = diag
        .iter()
        .enumerate()
        .fold(0, |best, (i, d)| if *d < diag[best] { i } else { best });
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(max_sub);
    let mut av: Vec<Vec<f64>> = Vec::with_capacity(max_sub);
    let mut first = vec![0.0; n];
    first[lowest] = 1.0;
    let mut second: Vec<f64> = (0..n).map(scrambled).collect();
    orthonormalize(&mut second, std::slice::from_ref(&first));
    for guess in [first, second] {
        let mut out = vec![0.0; n];
        apply(&guess, &mut out, &mut matvec_count, &mut matvec_time);
        v.push(guess);
        av.push(out);
    }
    // projected matrix, row-major over the current subspace
    let rebuild_proj = |v: &[Vec<f64>], av: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..v.len()).map(|i| (0..v.len()).map(|j| dot(&v[i], &av[j])).collect()).collect()
    };
    let mut proj = rebuild_proj(&v, &av);

    let mut x = vec![0.0; n];
    let mut ax = vec![0.0; n];
    let mut residual = vec![0.0; n];
    let mut theta: f64;
    let mut rnorm: f64;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let k = v.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                t[(i, j)] = 0.5 * (proj[i][j] + proj[j][i]);
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let y0 = eig.eigenvectors.column(order[0]);
        theta = eig.eigenvalues[order[0]];

        x.par_iter_mut().for_each(|xi| *xi = 0.0);
        ax.par_iter_mut().for_each(|xi| *xi = 0.0);
        for i in 0..k {
            axpy(y0[i], &v[i], &mut x);
            axpy(y0[i], &av[i], &mut ax);
        }
        residual.par_iter_mut().zip(ax.par_iter().zip(x.par_iter())).for_each(|(r, (a, xi))| *r = a - theta * xi);
        rnorm = dot(&residual, &residual).sqrt();
        if rnorm <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        if k >= max_sub {
            let ritz: Vec<usize> = order[..keep].to_vec();
            let mut new_v = Vec::with_capacity(max_sub);
            let mut new_av = Vec::with_capacity(max_sub);
            for &c in &ritz {
                let y = eig.eigenvectors.column(c);
                let mut nv = vec![0.0; n];
                let mut nav = vec![0.0; n];
                for i in 0..k {
                    axpy(y[i], &v[i], &mut nv);
                    axpy(y[i], &av[i], &mut nav);
                }
                new_v.push(nv);
                new_av.push(nav);
            }
            v = new_v;
            av = new_av;
            proj = rebuild_proj(&v, &av);
        }

        let mut t: Vec<f64> = residual
            .par_iter()
            .zip(diag.par_iter())
            .map(|(r, d)| {
                let denom = d - theta;
                let denom = if denom.abs() < opts.level_shift {
                    if denom < 0.0 { -opts.level_shift } else { opts.level_shift }
                } else {
                    denom
                };
                -r / denom
            })
            .collect();
        let mut norm = orthonormalize(&mut t, &v);
        if norm < 1e-10 {
            // preconditioned direction collapsed into the subspace
            t.copy_from_slice(&residual);
            norm = orthonormalize(&mut t, &v);
            if norm < 1e-14 {
                break;
            }
        }
        let mut at = vec![0.0; n];
        apply(&t, &mut at, &mut matvec_count, &mut matvec_time);
        let kk = v.len();
        let mut row: Vec<f64> = (0..kk).map(|j| dot(&t, &av[j])).collect();
        for (i, r) in proj.iter_mut().enumerate() {
            r.push(dot(&v[i], &at));
        }
        row.push(dot(&t, &at));
        proj.push(row);
        v.push(t);
        av.push(at);
    }

    let norm = dot(&x, &x).sqrt();
    scale(1.0 / norm, &mut x);
    fix_sign(&mut x);
    let total = start.elapsed().as_secs_f64();
    let result = GroundStateResult {
        energy: theta,
        vector: SubspaceVector::new(x),
        residual_norm: rnorm / norm,
        iterations,
        matvec_count,
        converged,
        wall_times: SolveTimings { matvec: matvec_time, subspace: total - matvec_time, total },
    };
    if converged {
        Ok(result)
    } else {
        Err(SbdError::NoConvergence(Box::new(result)))
    }
}
