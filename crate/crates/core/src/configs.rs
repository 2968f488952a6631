//! Electronic configurations: per-spin occupation strings, combinatorics,
//! single-excitation enumeration and fermionic phases.
//!
//! A [`SpinString`] packs the occupations of up to 64 spatial orbitals for
//! one spin species into a machine word (bit `p` = orbital `p`). The text
//! form writes orbital 0 first, so `"110"` has orbitals 0 and 1 occupied.

use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest orbital count representable by a single-word spin string.
pub const MAX_ORBITALS: usize = 64;

/// Default cap on the number of configurations materialized by
/// [`enumerate_all_configurations`].
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("configuration space of dimension {dimension} exceeds cap {cap}")]
    CapExceeded { dimension: String, cap: u64 },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("cannot parse spin string {text:?}: {reason}")]
    Parse { text: String, reason: String },
}

/// Occupation flags of one spin species. Bits at positions >= M are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpinString(u64);

impl SpinString {
    pub const EMPTY: SpinString = SpinString(0);

    #[inline]
    pub const fn from_bits(bits: u64) -> Self {
        SpinString(bits)
    }

    /// String with the given orbitals occupied.
    pub fn from_orbitals(orbitals: &[usize]) -> Self {
        let mut bits = 0u64;
        for &p in orbitals {
            assert!(p < MAX_ORBITALS, "orbital index {p} out of range");
            bits |= 1 << p;
        }
        SpinString(bits)
    }

    #[inline]
    pub const fn bits(self) -> u64 {
        self.0
    }

    #[inline]
    pub const fn count(self) -> u32 {
        self.0.count_ones()
    }

    #[inline]
    pub const fn is_occupied(self, orbital: usize) -> bool {
        (self.0 >> orbital) & 1 == 1
    }

    #[inline]
    pub const fn with_flipped(self, orbital: usize) -> Self {
        SpinString(self.0 ^ (1 << orbital))
    }

    /// Occupied orbital indices in increasing order.
    #[inline]
    pub fn occupied(self) -> Occupied {
        Occupied(self.0)
    }

    /// Empty orbital indices below `norb`, increasing.
    pub fn empty(self, norb: usize) -> Occupied {
        Occupied(!self.0 & mask(norb))
    }

    /// True if no bit at position >= `norb` is set.
    #[inline]
    pub fn fits(self, norb: usize) -> bool {
        self.0 & !mask(norb) == 0
    }

    /// Sign (+1 or -1) for moving an electron between `from` and `to`:
    /// parity of occupied orbitals strictly between the two.
    #[inline]
    pub fn phase_between(self, from: usize, to: usize) -> f64 {
        let (lo, hi) = if from < to { (from, to) } else { (to, from) };
        if hi - lo < 2 {
            return 1.0;
        }
        let between = ((1u64 << hi) - 1) & !((1u64 << (lo + 1)) - 1);
        if (self.0 & between).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Renders `norb` characters of '0'/'1', orbital 0 first.
    pub fn to_text(self, norb: usize) -> String {
        (0..norb)
            .map(|p| if self.is_occupied(p) { '1' } else { '0' })
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text.len() > MAX_ORBITALS {
            return Err(ConfigError::Parse {
                text: text.to_string(),
                reason: format!("more than {MAX_ORBITALS} orbitals"),
            });
        }
        let mut bits = 0u64;
        for (p, ch) in text.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => bits |= 1 << p,
                other => {
                    return Err(ConfigError::Parse {
                        text: text.to_string(),
                        reason: format!("unexpected character {other:?}"),
                    })
                }
            }
        }
        Ok(SpinString(bits))
    }
}

#[inline]
fn mask(norb: usize) -> u64 {
    if norb >= 64 {
        u64::MAX
    } else {
        (1u64 << norb) - 1
    }
}

/// Iterator over set bit positions, lowest first.
#[derive(Clone, Copy, Debug)]
pub struct Occupied(u64);

impl Iterator for Occupied {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let p = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(p)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Occupied {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Alpha,
    Beta,
}

/// A Slater determinant: one occupation string per spin. Ordered
/// lexicographically on `(alpha, beta)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    pub alpha: SpinString,
    pub beta: SpinString,
}

impl Configuration {
    #[inline]
    pub const fn new(alpha: SpinString, beta: SpinString) -> Self {
        Configuration { alpha, beta }
    }

    pub fn spin(&self, spin: Spin) -> SpinString {
        match spin {
            Spin::Alpha => self.alpha,
            Spin::Beta => self.beta,
        }
    }

    #[inline]
    pub fn hamming(&self, other: &Configuration) -> u32 {
        (self.alpha.0 ^ other.alpha.0).count_ones() + (self.beta.0 ^ other.beta.0).count_ones()
    }

    /// Whether the configuration has the right width and particle numbers.
    pub fn is_valid_for(&self, spec: &SystemSpec) -> bool {
        self.alpha.fits(spec.norb)
            && self.beta.fits(spec.norb)
            && self.alpha.count() as usize == spec.n_alpha
            && self.beta.count() as usize == spec.n_beta
    }

    /// `"<alpha_bits> <beta_bits>"`.
    pub fn to_text(&self, norb: usize) -> String {
        format!("{} {}", self.alpha.to_text(norb), self.beta.to_text(norb))
    }

    pub fn parse(alpha: &str, beta: &str) -> Result<Self, ConfigError> {
        Ok(Configuration::new(SpinString::parse(alpha)?, SpinString::parse(beta)?))
    }
}

/// Orbital count and per-spin electron counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemSpec {
    pub norb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
}

impl SystemSpec {
    pub fn new(norb: usize, n_alpha: usize, n_beta: usize) -> Result<Self, ConfigError> {
        let spec = SystemSpec { norb, n_alpha, n_beta };
        spec.validate()?;
        Ok(spec)
    }

    /// Active space `(n_electrons e, norb o)` with the odd electron, if any,
    /// placed in the alpha sector.
    pub fn from_active_space(n_electrons: usize, norb: usize) -> Result<Self, ConfigError> {
        Self::new(norb, n_electrons.div_ceil(2), n_electrons / 2)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.norb == 0 || self.norb > MAX_ORBITALS {
            return Err(ConfigError::InvalidSystem(format!(
                "orbital count {} outside 1..={MAX_ORBITALS}",
                self.norb
            )));
        }
        if self.n_alpha > self.norb || self.n_beta > self.norb {
            return Err(ConfigError::InvalidSystem(format!(
                "electron counts ({}, {}) exceed orbital count {}",
                self.n_alpha, self.n_beta, self.norb
            )));
        }
        Ok(())
    }

    pub fn count(&self, spin: Spin) -> usize {
        match spin {
            Spin::Alpha => self.n_alpha,
            Spin::Beta => self.n_beta,
        }
    }

    pub fn n_electrons(&self) -> usize {
        self.n_alpha + self.n_beta
    }
}

/// A one-electron move `from_orb -> to_orb` within one spin string.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Excitation {
    pub spin: Spin,
    pub from_orb: usize,
    pub to_orb: usize,
    /// +1 or -1.
    pub phase: i8,
}

impl Excitation {
    #[inline]
    pub fn sign(&self) -> f64 {
        f64::from(self.phase)
    }

    /// Applies the move to `c`, returning the target and its phase relative
    /// to `c`, or `None` if `from_orb` is empty or `to_orb` is occupied.
    pub fn apply(spin: Spin, from_orb: usize, to_orb: usize, c: &Configuration) -> Option<(Configuration, Excitation)> {
        let s = c.spin(spin);
        if from_orb == to_orb || !s.is_occupied(from_orb) || s.is_occupied(to_orb) {
            return None;
        }
        let phase = if s.phase_between(from_orb, to_orb) > 0.0 { 1 } else { -1 };
        let moved = s.with_flipped(from_orb).with_flipped(to_orb);
        let target = match spin {
            Spin::Alpha => Configuration::new(moved, c.beta),
            Spin::Beta => Configuration::new(c.alpha, moved),
        };
        Some((target, Excitation { spin, from_orb, to_orb, phase }))
    }
}

/// Binomial coefficient as a big integer.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::default();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `C(M, n_alpha) * C(M, n_beta)`, exact.
pub fn fci_dimension(spec: &SystemSpec) -> BigUint {
    binomial(spec.norb, spec.n_alpha) * binomial(spec.norb, spec.n_beta)
}

/// [`fci_dimension`] when it fits in a `u64`.
pub fn fci_dimension_u64(spec: &SystemSpec) -> Option<u64> {
    u64::try_from(fci_dimension(spec)).ok()
}

/// Big integer rendered as `d.dd×10^e` (three significant figures).
pub fn format_scientific(value: &BigUint, sig_figs: usize) -> String {
    let digits = value.to_string();
    if digits.len() <= sig_figs {
        return digits;
    }
    // round half up on the first dropped digit
    let mut head: Vec<u8> = digits.as_bytes()[..sig_figs].iter().map(|b| b - b'0').collect();
    let mut exponent = digits.len() - 1;
    if digits.as_bytes()[sig_figs] >= b'5' {
        let mut i = sig_figs;
        loop {
            if i == 0 {
                head.insert(0, 1);
                head.pop();
                exponent += 1;
                break;
            }
            i -= 1;
            if head[i] == 9 {
                head[i] = 0;
            } else {
                head[i] += 1;
                break;
            }
        }
    }
    let mut out = String::new();
    out.push((b'0' + head[0]) as char);
    if head.len() > 1 {
        out.push('.');
        for d in &head[1..] {
            out.push((b'0' + d) as char);
        }
    }
    format!("{out}e{exponent}")
}

/// Every single excitation of `c` (alpha moves first, then beta; within a
/// spin by source then target orbital), with fermionic phases.
pub fn enumerate_singles(c: &Configuration, norb: usize) -> Vec<(Configuration, Excitation)> {
    let mut out = Vec::with_capacity(
        (c.alpha.count() as usize) * norb + (c.beta.count() as usize) * norb,
    );
    for spin in [Spin::Alpha, Spin::Beta] {
        let s = c.spin(spin);
        for from in s.occupied() {
            for to in s.empty(norb) {
                if let Some(pair) = Excitation::apply(spin, from, to, c) {
                    out.push(pair);
                }
            }
        }
    }
    out
}

/// All `norb`-bit strings with `count` bits set, in increasing numeric order.
pub fn strings_with_count(norb: usize, count: usize) -> Vec<SpinString> {
    assert!(norb <= MAX_ORBITALS && count <= norb);
    if count == 0 {
        return vec![SpinString::EMPTY];
    }
    let mut out = Vec::new();
    let limit = mask(norb);
    let mut v: u64 = mask(count);
    loop {
        out.push(SpinString(v));
        // Gosper's hack: next integer with the same popcount.
        let t = v | (v - 1);
        if t == u64::MAX {
            break;
        }
        let next = (t + 1) | (((!t & (t + 1)) - 1) >> (v.trailing_zeros() + 1));
        if next > limit {
            break;
        }
        v = next;
    }
    out
}

/// Every valid configuration of `spec` in the total order.
pub fn enumerate_all_configurations(spec: &SystemSpec, cap: u64) -> Result<Vec<Configuration>, ConfigError> {
    spec.validate()?;
    let dimension = fci_dimension(spec);
    match u64::try_from(&dimension) {
        Ok(d) if d <= cap => {}
        _ => {
            return Err(ConfigError::CapExceeded { dimension: dimension.to_string(), cap });
        }
    }
    let alphas = strings_with_count(spec.norb, spec.n_alpha);
    let betas = strings_with_count(spec.norb, spec.n_beta);
    let mut out = Vec::with_capacity(alphas.len() * betas.len());
    for &a in &alphas {
        for &b in &betas {
            out.push(Configuration::new(a, b));
        }
    }
    Ok(out)
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M={} (n_alpha={}, n_beta={})", self.norb, self.n_alpha, self.n_beta)
    }
}
