//! Fragment Hamiltonians: FCIDUMP ingestion and Slater–Condon matrix
//! elements.
//!
//! Two-electron integrals are in chemists' notation `(pq|rs)` with real
//! orbitals, so the eight index permutations share one stored value.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use log::warn;
use thiserror::Error;

use crate::configs::{Configuration, SpinString, SystemSpec};

#[derive(Debug, Error)]
pub enum IntegralError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid electron counts: {0}")]
    Spec(String),
    #[error("particle numbers differ: {0}")]
    SpecMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Packed index of an unordered orbital pair.
#[inline]
pub fn pair_index(p: usize, q: usize) -> usize {
    if p >= q {
        p * (p + 1) / 2 + q
    } else {
        q * (q + 1) / 2 + p
    }
}

/// Active-space Hamiltonian of one fragment.
#[derive(Clone, Debug, PartialEq)]
pub struct FragmentHamiltonian {
    spec: SystemSpec,
    e_core: f64,
    /// Row-major `M x M`.
    h: Vec<f64>,
    /// Packed over `pair_index(pair_index(p,q), pair_index(r,s))`.
    eri: Vec<f64>,
}

impl FragmentHamiltonian {
    /// All-zero Hamiltonian for `spec`.
    pub fn zeros(spec: SystemSpec) -> Self {
        let m = spec.norb;
        let npair = m * (m + 1) / 2;
        FragmentHamiltonian {
            spec,
            e_core: 0.0,
            h: vec![0.0; m * m],
            eri: vec![0.0; npair * (npair + 1) / 2],
        }
    }

    #[inline]
    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    #[inline]
    pub fn norb(&self) -> usize {
        self.spec.norb
    }

    #[inline]
    pub fn e_core(&self) -> f64 {
        self.e_core
    }

    pub fn set_e_core(&mut self, value: f64) {
        self.e_core = value;
    }

    #[inline]
    pub fn h(&self, p: usize, q: usize) -> f64 {
        self.h[p * self.spec.norb + q]
    }

    /// Sets `h[p][q]` and `h[q][p]`.
    pub fn set_h(&mut self, p: usize, q: usize, value: f64) {
        let m = self.spec.norb;
        self.h[p * m + q] = value;
        self.h[q * m + p] = value;
    }

    /// `(pq|rs)`.
    #[inline]
    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.eri[pair_index(pair_index(p, q), pair_index(r, s))]
    }

    /// Integral addressed by two packed pair indices.
    #[inline]
    pub fn eri_pairs(&self, pq: usize, rs: usize) -> f64 {
        self.eri[pair_index(pq, rs)]
    }

    /// Sets `(pq|rs)` and all its permutational images.
    pub fn set_eri(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        let idx = pair_index(pair_index(p, q), pair_index(r, s));
        self.eri[idx] = value;
    }

    /// Number of distinct one-electron entries (`p >= q`) that are nonzero.
    pub fn count_nonzero_h(&self) -> usize {
        let m = self.spec.norb;
        (0..m).flat_map(|p| (0..=p).map(move |q| (p, q))).filter(|&(p, q)| self.h(p, q) != 0.0).count()
    }

    pub fn count_nonzero_eri(&self) -> usize {
        self.eri.iter().filter(|v| **v != 0.0).count()
    }

    pub fn is_finite(&self) -> bool {
        self.e_core.is_finite() && self.h.iter().chain(&self.eri).all(|v| v.is_finite())
    }

    /// `<c|H|c>`.
    pub fn diagonal_element(&self, c: &Configuration) -> f64 {
        let mut e = self.e_core;
        let occ_a: Vec<usize> = c.alpha.occupied().collect();
        let occ_b: Vec<usize> = c.beta.occupied().collect();
        for &p in occ_a.iter().chain(&occ_b) {
            e += self.h(p, p);
        }
        // same-spin pairs: Coulomb minus exchange
        for occ in [&occ_a, &occ_b] {
            for (i, &p) in occ.iter().enumerate() {
                for &q in &occ[..i] {
                    e += self.eri(p, p, q, q) - self.eri(p, q, q, p);
                }
            }
        }
        for &p in &occ_a {
            for &q in &occ_b {
                e += self.eri(p, p, q, q);
            }
        }
        e
    }

    /// `<x|H|y>` by the Slater–Condon rules.
    pub fn coupling_element(&self, x: &Configuration, y: &Configuration) -> Result<f64, IntegralError> {
        if x.alpha.count() != y.alpha.count() || x.beta.count() != y.beta.count() {
            return Err(IntegralError::SpecMismatch(format!(
                "({}, {}) vs ({}, {}) electrons",
                x.alpha.count(),
                x.beta.count(),
                y.alpha.count(),
                y.beta.count()
            )));
        }
        let da = (x.alpha.bits() ^ y.alpha.bits()).count_ones();
        let db = (x.beta.bits() ^ y.beta.bits()).count_ones();
        let value = match (da, db) {
            (0, 0) => self.diagonal_element(x),
            (2, 0) => self.single_element(y.alpha, x.alpha, y.beta),
            (0, 2) => self.single_element(y.beta, x.beta, y.alpha),
            (4, 0) => self.same_spin_double(y.alpha, x.alpha),
            (0, 4) => self.same_spin_double(y.beta, x.beta),
            (2, 2) => {
                let (pa, ra, sign_a) = single_move(y.alpha, x.alpha);
                let (pb, rb, sign_b) = single_move(y.beta, x.beta);
                sign_a * sign_b * self.eri(ra, pa, rb, pb)
            }
            _ => 0.0,
        };
        Ok(value)
    }

    /// Single excitation `source -> target` in one spin sector, with the
    /// other sector's string as spectator.
    fn single_element(&self, source: SpinString, target: SpinString, other: SpinString) -> f64 {
        let (p, r, sign) = single_move(source, target);
        let mut v = self.h(r, p);
        for k in source.occupied() {
            v += self.eri(r, p, k, k) - self.eri(r, k, k, p);
        }
        for k in other.occupied() {
            v += self.eri(r, p, k, k);
        }
        sign * v
    }

    /// Same-spin double excitation between two strings of one sector.
    fn same_spin_double(&self, source: SpinString, target: SpinString) -> f64 {
        let removed = source.bits() & !target.bits();
        let added = target.bits() & !source.bits();
        let p = removed.trailing_zeros() as usize;
        let q = 63 - removed.leading_zeros() as usize;
        let r = added.trailing_zeros() as usize;
        let s = 63 - added.leading_zeros() as usize;
        same_spin_double_value(self, source, p, q, r, s)
    }

    /// Serializes in FCIDUMP format with 17 significant digits.
    pub fn write_fcidump<W: Write>(&self, mut out: W) -> Result<(), IntegralError> {
        let m = self.spec.norb;
        let ms2 = self.spec.n_alpha as i64 - self.spec.n_beta as i64;
        writeln!(out, " &FCI NORB={},NELEC={},MS2={},", m, self.spec.n_electrons(), ms2)?;
        let orbsym = vec!["1"; m].join(",");
        writeln!(out, "  ORBSYM={orbsym},")?;
        writeln!(out, "  ISYM=1,")?;
        writeln!(out, " &END")?;
        for p in 0..m {
            for q in 0..=p {
                let pq = pair_index(p, q);
                for r in 0..m {
                    for s in 0..=r {
                        let rs = pair_index(r, s);
                        if rs > pq {
                            continue;
                        }
                        let v = self.eri_pairs(pq, rs);
                        if v != 0.0 {
                            writeln!(out, "{v:24.16e} {:4} {:4} {:4} {:4}", p + 1, q + 1, r + 1, s + 1)?;
                        }
                    }
                }
            }
        }
        for p in 0..m {
            for q in 0..=p {
                let v = self.h(p, q);
                if v != 0.0 {
                    writeln!(out, "{v:24.16e} {:4} {:4} {:4} {:4}", p + 1, q + 1, 0, 0)?;
                }
            }
        }
        writeln!(out, "{:24.16e} {:4} {:4} {:4} {:4}", self.e_core, 0, 0, 0, 0)?;
        Ok(())
    }
}

/// Orbital vacated in `source`, orbital filled in `target`, and the phase.
#[inline]
fn single_move(source: SpinString, target: SpinString) -> (usize, usize, f64) {
    let p = (source.bits() & !target.bits()).trailing_zeros() as usize;
    let r = (target.bits() & !source.bits()).trailing_zeros() as usize;
    (p, r, source.phase_between(p, r))
}

/// `<target|H|source>` for the same-spin double moving `p -> r` then
/// `q -> s` in `source`.
#[inline]
pub(crate) fn same_spin_double_value(
    ham: &FragmentHamiltonian,
    source: SpinString,
    p: usize,
    q: usize,
    r: usize,
    s: usize,
) -> f64 {
    let sign1 = source.phase_between(p, r);
    let mid = source.with_flipped(p).with_flipped(r);
    let sign2 = mid.phase_between(q, s);
    sign1 * sign2 * (ham.eri(r, p, s, q) - ham.eri(r, q, s, p))
}

/// Parses a Molpro-style FCIDUMP.
pub fn parse_fcidump<R: BufRead>(reader: R) -> Result<FragmentHamiltonian, IntegralError> {
    let mut header = String::new();
    let mut lines = reader.lines().enumerate();
    let mut header_done = false;
    let mut header_first_line = 1;
    for (idx, line) in lines.by_ref() {
        let line = line?;
        if header.is_empty() {
            header_first_line = idx + 1;
        }
        let upper = line.to_ascii_uppercase();
        header.push_str(&line);
        header.push('\n');
        if upper.contains("&END") || upper.trim() == "/" || upper.trim_end().ends_with('/') {
            header_done = true;
            break;
        }
    }
    if !header_done {
        return Err(IntegralError::Parse {
            line: header_first_line,
            message: "unterminated FCIDUMP header (expected &END or /)".into(),
        });
    }
    let fields = parse_namelist(&header);
    let get = |key: &str| -> Result<i64, IntegralError> {
        let raw = fields.get(key).ok_or_else(|| IntegralError::Parse {
            line: header_first_line,
            message: format!("header is missing {key}"),
        })?;
        let first = raw.split(',').map(str::trim).find(|s| !s.is_empty()).unwrap_or("");
        first.parse::<i64>().map_err(|_| IntegralError::Parse {
            line: header_first_line,
            message: format!("bad value for {key}: {raw:?}"),
        })
    };
    let norb = get("NORB")?;
    let nelec = get("NELEC")?;
    let ms2 = if fields.contains_key("MS2") { get("MS2")? } else { 0 };
    if norb <= 0 || norb as usize > crate::configs::MAX_ORBITALS {
        return Err(IntegralError::Parse {
            line: header_first_line,
            message: format!("NORB={norb} outside 1..={}", crate::configs::MAX_ORBITALS),
        });
    }
    if (nelec + ms2) % 2 != 0 || (nelec - ms2) % 2 != 0 {
        return Err(IntegralError::Spec(format!("NELEC={nelec} and MS2={ms2} have different parity")));
    }
    let n_alpha = (nelec + ms2) / 2;
    let n_beta = (nelec - ms2) / 2;
    if n_alpha < 0 || n_beta < 0 {
        return Err(IntegralError::Spec(format!("negative electron count from NELEC={nelec}, MS2={ms2}")));
    }
    let spec = SystemSpec::new(norb as usize, n_alpha as usize, n_beta as usize)
        .map_err(|e| IntegralError::Spec(e.to_string()))?;

    let m = spec.norb;
    let mut ham = FragmentHamiltonian::zeros(spec);
    let mut seen_h = vec![false; m * m];
    let mut seen_eri = vec![false; ham.eri.len()];
    let mut seen_core = false;

    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(IntegralError::Parse {
                line: lineno,
                message: format!("expected 'value i j k l', found {} fields", parts.len()),
            });
        }
        let value = parse_real(parts[0]).ok_or_else(|| IntegralError::Parse {
            line: lineno,
            message: format!("bad numeric value {:?}", parts[0]),
        })?;
        if !value.is_finite() {
            return Err(IntegralError::Parse { line: lineno, message: "non-finite integral".into() });
        }
        let mut ix = [0usize; 4];
        for (slot, raw) in ix.iter_mut().zip(&parts[1..]) {
            let v: i64 = raw.parse().map_err(|_| IntegralError::Parse {
                line: lineno,
                message: format!("bad index {raw:?}"),
            })?;
            if v < 0 || v > norb {
                return Err(IntegralError::Parse {
                    line: lineno,
                    message: format!("index {v} outside [0, {norb}]"),
                });
            }
            *slot = v as usize;
        }
        match ix {
            [0, 0, 0, 0] => {
                if seen_core {
                    warn!("FCIDUMP line {lineno}: duplicate core energy overwrites earlier value");
                }
                seen_core = true;
                ham.e_core = value;
            }
            [i, j, 0, 0] if i > 0 && j > 0 => {
                let (p, q) = (i - 1, j - 1);
                if seen_h[p * m + q] {
                    warn!("FCIDUMP line {lineno}: duplicate one-electron integral ({i} {j}) overwrites earlier value");
                }
                seen_h[p * m + q] = true;
                seen_h[q * m + p] = true;
                ham.set_h(p, q, value);
            }
            [i, 0, 0, 0] if i > 0 => {
                // orbital energy; not part of the Hamiltonian
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                let idx = pair_index(pair_index(i - 1, j - 1), pair_index(k - 1, l - 1));
                if seen_eri[idx] {
                    warn!("FCIDUMP line {lineno}: duplicate two-electron integral ({i} {j}|{k} {l}) overwrites earlier value");
                }
                seen_eri[idx] = true;
                ham.eri[idx] = value;
            }
            _ => {
                return Err(IntegralError::Parse {
                    line: lineno,
                    message: format!("unrecognized index pattern {:?}", ix),
                });
            }
        }
    }
    Ok(ham)
}

/// Accepts Fortran `D` exponents as well as `E`.
fn parse_real(raw: &str) -> Option<f64> {
    raw.parse::<f64>().ok().or_else(|| raw.replace(['D', 'd'], "e").parse::<f64>().ok())
}

/// Splits a namelist body into upper-cased `KEY -> raw value` entries.
fn parse_namelist(text: &str) -> HashMap<String, String> {
    let upper = text.to_ascii_uppercase();
    let body = upper.replace("&FCI", " ").replace("&END", " ").replace('/', " ");
    let mut out = HashMap::new();
    let mut current: Option<(String, String)> = None;
    for token in body.split(|c: char| c == ',' || c.is_whitespace()) {
        if token.is_empty() {
            continue;
        }
        if let Some((key, value)) = token.split_once('=') {
            if let Some((k, v)) = current.take() {
                out.insert(k, v);
            }
            current = Some((key.trim().to_string(), value.trim().to_string()));
        } else if let Some((_, v)) = current.as_mut() {
            v.push(',');
            v.push_str(token);
        }
    }
    if let Some((k, v)) = current {
        out.insert(k, v);
    }
    out
}
