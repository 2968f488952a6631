//! Seeded synthetic Hamiltonians and bases for tests and benchmarks.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::configs::{strings_with_count, Configuration, SystemSpec};
use crate::integrals::{pair_index, FragmentHamiltonian};

/// Random real Hamiltonian with a molecule-like shape: orbital energies
/// increasing with index, dominant Coulomb integrals `(pp|qq)`, small
/// couplings everywhere else. Every permutational class is populated.
///
/// Ground states of these instances are strongly correlated: at `M = 6`
/// roughly half of the determinants carry the last 0.1% of the weight.
pub fn random_hamiltonian(spec: &SystemSpec, seed: u64) -> FragmentHamiltonian {
    random_hamiltonian_with_coupling(spec, seed, 1.0)
}

/// [`random_hamiltonian`] with the off-diagonal one-electron terms and the
/// non-Coulomb two-electron integrals scaled by `coupling` (> 0). Small
/// values give a dominant reference determinant, as in typical molecules.
pub fn random_hamiltonian_with_coupling(spec: &SystemSpec, seed: u64, coupling: f64) -> FragmentHamiltonian {
    assert!(coupling > 0.0, "coupling must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = spec.norb;
    let mut ham = FragmentHamiltonian::zeros(*spec);
    ham.set_e_core(rng.random_range(-1.0..1.0));
    for p in 0..m {
        for q in 0..=p {
            let v = if p == q {
                -2.0 + 0.5 * p as f64 + rng.random_range(-0.1..0.1)
            } else {
                rng.random_range(-0.2 * coupling..0.2 * coupling)
            };
            ham.set_h(p, q, v);
        }
    }
    for p in 0..m {
        for q in 0..=p {
            for r in 0..m {
                for s in 0..=r {
                    if pair_index(r, s) > pair_index(p, q) {
                        continue;
                    }
                    let v = if p == q && r == s {
                        0.4 + rng.random_range(0.0..0.3)
                    } else {
                        rng.random_range(-0.1 * coupling..0.1 * coupling)
                    };
                    ham.set_eri(p, q, r, s, v);
                }
            }
        }
    }
    ham
}

/// Cartesian product of `n_alpha_strings` alpha strings and
/// `n_beta_strings` beta strings drawn without replacement from the valid
/// strings of `spec`. Sorted.
pub fn product_basis(spec: &SystemSpec, n_alpha_strings: usize, n_beta_strings: usize, seed: u64) -> Vec<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alphas = strings_with_count(spec.norb, spec.n_alpha);
    let mut betas = strings_with_count(spec.norb, spec.n_beta);
    alphas.shuffle(&mut rng);
    betas.shuffle(&mut rng);
    alphas.truncate(n_alpha_strings);
    betas.truncate(n_beta_strings);
    alphas.sort();
    betas.sort();
    let mut out = Vec::with_capacity(alphas.len() * betas.len());
    for &a in &alphas {
        for &b in &betas {
            out.push(Configuration::new(a, b));
        }
    }
    out
}

/// Random subset of `size` configurations from `pool`, sorted.
pub fn random_subset(pool: &[Configuration], size: usize, seed: u64) -> Vec<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<Configuration> = pool.choose_multiple(&mut rng, size.min(pool.len())).copied().collect();
    picked.sort();
    picked
}
