//! Matrix-free `w = P H P v` over a [`SubspaceBasis`].
//!
//! Each output row is computed by one thread from the excitation links of
//! its alpha and beta strings, so there are no write conflicts and the
//! result is bitwise independent of the thread count.

use rayon::prelude::*;

use super::basis::{SingleLink, SubspaceBasis};
use crate::integrals::FragmentHamiltonian;

const ROW_CHUNK: usize = 256;

/// Calls `f(row)` for each row of the block whose beta index appears as a
/// link target, in ascending target order. `links` must be sorted by target.
#[inline]
fn for_each_match<L, F>(start: usize, betas: &[u32], links: &[L], target: impl Fn(&L) -> u32, mut f: F)
where
    F: FnMut(&L, usize),
{
    if links.is_empty() || betas.is_empty() {
        return;
    }
    if links.len() * 8 < betas.len() {
        for l in links {
            if let Ok(i) = betas.binary_search(&target(l)) {
                f(l, start + i);
            }
        }
    } else {
        let (mut i, mut j) = (0, 0);
        while i < betas.len() && j < links.len() {
            let b = betas[i];
            let t = target(&links[j]);
            match b.cmp(&t) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    f(&links[j], start + i);
                    i += 1;
                    j += 1;
                }
            }
        }
    }
}

/// Calls `f(col, H_row,col)` for every off-diagonal entry of `row` that lies
/// inside the basis, in a fixed order.
#[inline]
pub(crate) fn for_each_entry<F>(basis: &SubspaceBasis, ham: &FragmentHamiltonian, row: usize, mut f: F)
where
    F: FnMut(usize, f64),
{
    let ia = basis.row_alpha(row);
    let ib = basis.row_beta(row) as usize;
    let alpha = basis.alpha_table();
    let beta = basis.beta_table();
    let a_str = alpha.strings()[ia];
    let b_str = beta.strings()[ib];

    // alpha singles, beta spectator
    let a_singles = alpha.singles(ia);
    for l in a_singles {
        if let Some(col) = basis.find_in_block(l.target as usize, ib as u32) {
            f(col, l.sign * (l.same_spin + basis.spectator(l.pair, b_str)));
        }
    }

    // beta singles and beta-beta doubles stay inside this row's block
    let (start, betas) = basis.block(ia);
    let b_singles = beta.singles(ib);
    for_each_match(start, betas, b_singles, |l: &SingleLink| l.target, |l, col| {
        f(col, l.sign * (l.same_spin + basis.spectator(l.pair, a_str)));
    });
    for_each_match(start, betas, beta.doubles(ib), |d| d.target, |d, col| f(col, d.value));

    // alpha-alpha doubles
    for d in alpha.doubles(ia) {
        if let Some(col) = basis.find_in_block(d.target as usize, ib as u32) {
            f(col, d.value);
        }
    }

    // alpha-beta doubles composed from the two single tables
    if !b_singles.is_empty() {
        for la in a_singles {
            let (start, betas) = basis.block(la.target as usize);
            for_each_match(start, betas, b_singles, |l: &SingleLink| l.target, |lb, col| {
                f(col, la.sign * lb.sign * ham.eri_pairs(la.pair as usize, lb.pair as usize));
            });
        }
    }
}

#[inline]
fn row_value(basis: &SubspaceBasis, ham: &FragmentHamiltonian, row: usize, v: &[f64]) -> f64 {
    let mut acc = basis.diagonal()[row] * v[row];
    for_each_entry(basis, ham, row, |col, h| acc += h * v[col]);
    acc
}

/// Writes `P H P v` into `out`.
pub fn apply_hamiltonian_into(basis: &SubspaceBasis, ham: &FragmentHamiltonian, v: &[f64], out: &mut [f64]) {
    assert_eq!(v.len(), basis.len(), "vector length does not match basis");
    assert_eq!(out.len(), basis.len(), "output length does not match basis");
    out.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(chunk, slice)| {
        let first = chunk * ROW_CHUNK;
        for (offset, w) in slice.iter_mut().enumerate() {
            *w = row_value(basis, ham, first + offset, v);
        }
    });
}

/// Returns `P H P v`; the projected Hamiltonian is never materialized.
pub fn apply_hamiltonian(basis: &SubspaceBasis, ham: &FragmentHamiltonian, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; basis.len()];
    apply_hamiltonian_into(basis, ham, v, &mut out);
    out
}
