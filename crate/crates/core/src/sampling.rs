//! Configuration samples: file I/O, a noisy sampler over the exact ground
//! state, and self-consistent configuration recovery.
//!
//! Samples are raw `2M`-bit strings stored as [`Configuration`] values that
//! may violate particle numbers. Recovery repairs each violating spin string
//! by flipping bits one at a time, choosing the orbital with probability
//! weighted by the current mean occupations:
//!
//! - too many electrons: empty occupied `p` with weight `1 - n[p] + 1e-6`
//! - too few electrons: fill empty `p` with weight `n[p] + 1e-6`

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::configs::{fci_dimension, Configuration, Spin, SpinString, SystemSpec};
use crate::integrals::FragmentHamiltonian;
use crate::oracle::{fci_solve, DenseSpectrumResult, OracleError};
use crate::sbd::{SubspaceBasis, SubspaceVector};

/// Largest FCI dimension [`sample_exact`] will solve.
pub const SAMPLER_CAP: u64 = 1_000_000;

const RECOVERY_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: spin string of length {found}, expected {expected}")]
    LengthMismatch { line: usize, expected: usize, found: usize },
    #[error("FCI dimension {dimension} exceeds sampler cap {cap}")]
    CapExceeded { dimension: String, cap: u64 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Multiset of raw bitstrings with shot counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampleSet {
    norb: usize,
    entries: BTreeMap<Configuration, u64>,
    total: u64,
}

impl SampleSet {
    pub fn new(norb: usize) -> Self {
        SampleSet { norb, entries: BTreeMap::new(), total: 0 }
    }

    /// Adds `count` shots of `raw`; zero counts are ignored.
    pub fn add(&mut self, raw: Configuration, count: u64) {
        if count == 0 {
            return;
        }
        *self.entries.entry(raw).or_default() += count;
        self.total += count;
    }

    pub fn norb(&self) -> usize {
        self.norb
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct strings with counts, in configuration order.
    pub fn iter(&self) -> impl Iterator<Item = (&Configuration, u64)> {
        self.entries.iter().map(|(c, n)| (c, *n))
    }

    /// Fraction of shots with the correct particle numbers.
    pub fn valid_fraction(&self, spec: &SystemSpec) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let valid: u64 = self.iter().filter(|(c, _)| c.is_valid_for(spec)).map(|(_, n)| n).sum();
        valid as f64 / self.total as f64
    }
}

/// Parses `<alpha_bits> <beta_bits> <count>` lines; duplicates are merged.
pub fn load_samples<R: BufRead>(reader: R, spec: &SystemSpec) -> Result<SampleSet, SamplingError> {
    let mut set = SampleSet::new(spec.norb);
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(SamplingError::Parse {
                line: lineno,
                message: format!("expected '<alpha> <beta> <count>', found {} fields", parts.len()),
            });
        }
        for s in &parts[..2] {
            if s.len() != spec.norb {
                return Err(SamplingError::LengthMismatch { line: lineno, expected: spec.norb, found: s.len() });
            }
        }
        let raw = Configuration::parse(parts[0], parts[1])
            .map_err(|e| SamplingError::Parse { line: lineno, message: e.to_string() })?;
        let count: u64 = parts[2].parse().map_err(|_| SamplingError::Parse {
            line: lineno,
            message: format!("bad count {:?}", parts[2]),
        })?;
        if count == 0 {
            return Err(SamplingError::Parse { line: lineno, message: "count must be at least 1".into() });
        }
        set.add(raw, count);
    }
    Ok(set)
}

/// Writes the sample file format, sorted by configuration order.
pub fn save_samples<W: Write>(samples: &SampleSet, mut out: W) -> std::io::Result<()> {
    for (c, n) in samples.iter() {
        writeln!(out, "{} {}", c.to_text(samples.norb), n)?;
    }
    Ok(())
}

/// Draws `shots` configurations with probability `|Psi_x|^2` from the exact
/// ground state of `ham`, then flips each of the `2M` bits independently
/// with probability `noise_p`.
pub fn sample_exact(ham: &FragmentHamiltonian, shots: u64, noise_p: f64, seed: u64) -> Result<SampleSet, SamplingError> {
    let spec = ham.spec();
    let dimension = fci_dimension(spec);
    if u64::try_from(&dimension).map_or(true, |d| d > SAMPLER_CAP) {
        return Err(SamplingError::CapExceeded { dimension: dimension.to_string(), cap: SAMPLER_CAP });
    }
    let state = fci_solve(ham, SAMPLER_CAP)?;
    Ok(sample_from_state(&state, spec.norb, shots, noise_p, seed))
}

/// [`sample_exact`] for an already solved state.
pub fn sample_from_state(state: &DenseSpectrumResult, norb: usize, shots: u64, noise_p: f64, seed: u64) -> SampleSet {
    assert!((0.0..=1.0).contains(&noise_p), "noise_p must lie in [0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = state.probabilities();
    let dist = WeightedIndex::new(&weights).expect("ground state has nonzero norm");
    let mut set = SampleSet::new(norb);
    for _ in 0..shots {
        let mut c = state.configs[dist.sample(&mut rng)];
        if noise_p > 0.0 {
            let mut alpha = c.alpha;
            let mut beta = c.beta;
            for p in 0..norb {
                if rng.random_bool(noise_p) {
                    alpha = alpha.with_flipped(p);
                }
            }
            for p in 0..norb {
                if rng.random_bool(noise_p) {
                    beta = beta.with_flipped(p);
                }
            }
            c = Configuration::new(alpha, beta);
        }
        set.add(c, 1);
    }
    set
}

/// Mean orbital occupations per spin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyEstimate {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl OccupancyEstimate {
    /// `n_sigma / M` on every orbital, used before any eigenvector exists.
    pub fn uniform(spec: &SystemSpec) -> Self {
        let m = spec.norb as f64;
        OccupancyEstimate {
            alpha: vec![spec.n_alpha as f64 / m; spec.norb],
            beta: vec![spec.n_beta as f64 / m; spec.norb],
        }
    }

    pub fn spin(&self, spin: Spin) -> &[f64] {
        match spin {
            Spin::Alpha => &self.alpha,
            Spin::Beta => &self.beta,
        }
    }

    /// Element-wise mean of several estimates.
    pub fn average(estimates: &[OccupancyEstimate]) -> Option<Self> {
        let first = estimates.first()?;
        let k = estimates.len() as f64;
        let mut out = OccupancyEstimate { alpha: vec![0.0; first.alpha.len()], beta: vec![0.0; first.beta.len()] };
        for e in estimates {
            for (o, x) in out.alpha.iter_mut().zip(&e.alpha) {
                *o += x / k;
            }
            for (o, x) in out.beta.iter_mut().zip(&e.beta) {
                *o += x / k;
            }
        }
        Some(out)
    }
}

/// `n_sigma[p] = sum_x |v_x|^2 occ_sigma(x, p)`, normalized by `|v|^2`.
pub fn estimate_occupancy(basis: &SubspaceBasis, v: &SubspaceVector) -> OccupancyEstimate {
    let norb = basis.spec().norb;
    let mut alpha = vec![0.0; norb];
    let mut beta = vec![0.0; norb];
    let mut weight = 0.0;
    for (c, x) in basis.configs().iter().zip(v.coeffs()) {
        let w = x * x;
        weight += w;
        for p in c.alpha.occupied() {
            alpha[p] += w;
        }
        for p in c.beta.occupied() {
            beta[p] += w;
        }
    }
    if weight > 0.0 {
        alpha.iter_mut().chain(beta.iter_mut()).for_each(|o| *o /= weight);
    }
    OccupancyEstimate { alpha, beta }
}

/// Repairs one spin string to exactly `target` electrons.
fn recover_string<R: Rng>(mut s: SpinString, target: usize, occ: &[f64], norb: usize, rng: &mut R) -> SpinString {
    let mut count = s.count() as usize;
    while count != target {
        let candidates: Vec<usize> = if count > target { s.occupied().collect() } else { s.empty(norb).collect() };
        let weights: Vec<f64> = candidates
            .iter()
            .map(|&p| {
                let n = occ[p].clamp(0.0, 1.0);
                if count > target { 1.0 - n + RECOVERY_FLOOR } else { n + RECOVERY_FLOOR }
            })
            .collect();
        let pick = WeightedIndex::new(&weights).expect("weights are positive").sample(rng);
        s = s.with_flipped(candidates[pick]);
        count = s.count() as usize;
    }
    s
}

/// Recovered configuration multiset: valid inputs pass through; every shot
/// of a violating string is repaired independently.
pub fn recover_configurations(
    samples: &SampleSet,
    occ: &OccupancyEstimate,
    spec: &SystemSpec,
    seed: u64,
) -> BTreeMap<Configuration, u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norb = spec.norb;
    let mask_ok = |s: SpinString| s.fits(norb);
    let mut out: BTreeMap<Configuration, u64> = BTreeMap::new();
    for (raw, count) in samples.iter() {
        if raw.is_valid_for(spec) {
            *out.entry(*raw).or_default() += count;
            continue;
        }
        debug_assert!(mask_ok(raw.alpha) && mask_ok(raw.beta));
        for _ in 0..count {
            let alpha = if raw.alpha.count() as usize == spec.n_alpha {
                raw.alpha
            } else {
                recover_string(raw.alpha, spec.n_alpha, &occ.alpha, norb, &mut rng)
            };
            let beta = if raw.beta.count() as usize == spec.n_beta {
                raw.beta
            } else {
                recover_string(raw.beta, spec.n_beta, &occ.beta, norb, &mut rng)
            };
            *out.entry(Configuration::new(alpha, beta)).or_default() += 1;
        }
    }
    out
}

/// Draws `min(size, distinct)` distinct configurations without replacement,
/// each draw weighted by multiplicity. Sorted.
pub fn subsample(pool: &BTreeMap<Configuration, u64>, size: usize, seed: u64) -> Vec<Configuration> {
    if size >= pool.len() {
        return pool.keys().copied().collect();
    }
    // Efraimidis–Spirakis: the `size` largest keys ln(u)/w form a weighted
    // sample without replacement.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(f64, Configuration)> = pool
        .iter()
        .map(|(c, &w)| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            (u.ln() / w as f64, *c)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut picked: Vec<Configuration> = keyed.into_iter().take(size).map(|(_, c)| c).collect();
    picked.sort();
    picked
}

/// Splits a master seed into an independent stream per `tag`
/// (splitmix64 of `master ^ splitmix64(tag)`).
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(master ^ splitmix(tag))
}
