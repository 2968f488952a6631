//! Subspace extension by single excitations and amplitude-based trimming.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::SubspaceBasis;
use super::SubspaceVector;
use crate::configs::{enumerate_singles, Configuration};
use crate::integrals::FragmentHamiltonian;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtendOptions {
    /// Partners with `|H_xy| <= screen` are dropped; 0 keeps every single.
    pub screen: f64,
}

/// Basis configurations plus every single-excitation partner of each
/// (Hamming distance 2, same particle numbers). Sorted, deduplicated.
pub fn extend_basis(basis: &SubspaceBasis, ham: &FragmentHamiltonian, opts: &ExtendOptions) -> Vec<Configuration> {
    let norb = basis.spec().norb;
    let screen = opts.screen;
    let mut out: Vec<Configuration> = basis
        .configs()
        .par_iter()
        .flat_map_iter(|c| {
            let partners = enumerate_singles(c, norb);
            std::iter::once(*c).chain(partners.into_iter().filter_map(move |(y, _)| {
                if screen > 0.0 {
                    let h = ham.coupling_element(c, &y).unwrap_or(0.0);
                    (h.abs() > screen).then_some(y)
                } else {
                    Some(y)
                }
            }))
        })
        .collect();
    out.par_sort_unstable();
    out.dedup();
    out
}

/// Selection rule for [`trim_by_amplitude`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keep {
    /// The `ceil(k/100 * n)` largest `|v_x|`, ties by configuration order.
    TopPercent(f64),
    /// Every `x` with `|v_x| > eps`.
    Threshold(f64),
}

/// Number of entries kept by a top-`percent` trim of `n` entries.
pub fn top_count(percent: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    // guard against 10% of 30 evaluating to 3.0000000000000004
    let raw = percent / 100.0 * n as f64;
    let rounded = raw.round();
    let count = if (raw - rounded).abs() <= 1e-9 * raw.max(1.0) { rounded } else { raw.ceil() };
    (count as usize).clamp(1, n)
}

/// Configurations retained by `keep`, in configuration order.
pub fn trim_by_amplitude(basis: &SubspaceBasis, v: &SubspaceVector, keep: Keep) -> Vec<Configuration> {
    let coeffs = v.coeffs();
    assert_eq!(coeffs.len(), basis.len(), "vector length does not match basis");
    let configs = basis.configs();
    match keep {
        Keep::Threshold(eps) => configs
            .iter()
            .zip(coeffs)
            .filter(|(_, c)| c.abs() > eps)
            .map(|(x, _)| *x)
            .collect(),
        Keep::TopPercent(percent) => {
            let count = top_count(percent, configs.len());
            let mut order: Vec<usize> = (0..configs.len()).collect();
            // rows are already in configuration order, so the index breaks ties
            order.sort_by(|&a, &b| coeffs[b].abs().total_cmp(&coeffs[a].abs()).then(a.cmp(&b)));
            let mut kept: Vec<usize> = order[..count].to_vec();
            kept.sort_unstable();
            kept.into_iter().map(|i| configs[i]).collect()
        }
    }
}
