use std::collections::HashMap;

use rayon::prelude::*;

use super::SbdError;
use crate::configs::{Configuration, Excitation, Spin, SpinString, SystemSpec};
use crate::integrals::{pair_index, same_spin_double_value, FragmentHamiltonian};

/// Single excitation between two unique spin strings of a basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleLink {
    /// Index of the target string in the same [`SpinTable`].
    pub target: u32,
    pub from: u8,
    pub to: u8,
    pub sign: f64,
    /// `pair_index(to, from)`, the row of the Coulomb table used for the
    /// spectator-spin contribution.
    pub pair: u32,
    /// Signless one-body plus same-spin two-body part of the element.
    pub same_spin: f64,
}

/// Same-spin double excitation between two unique strings; `value` is the
/// full phased matrix element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoubleLink {
    pub target: u32,
    pub value: f64,
}

/// Unique strings of one spin sector with their excitation maps, closed
/// over the set: a link exists only if its target string is also present.
#[derive(Clone, Debug, Default)]
pub struct SpinTable {
    strings: Vec<SpinString>,
    single_offsets: Vec<usize>,
    singles: Vec<SingleLink>,
    double_offsets: Vec<usize>,
    doubles: Vec<DoubleLink>,
}

impl SpinTable {
    fn build(strings: Vec<SpinString>, ham: &FragmentHamiltonian) -> Self {
        let norb = ham.norb();
        let lookup: HashMap<u64, u32> = strings.iter().enumerate().map(|(i, s)| (s.bits(), i as u32)).collect();

        let per_string: Vec<(Vec<SingleLink>, Vec<DoubleLink>)> = strings
            .par_iter()
            .map(|&source| {
                let occ: Vec<usize> = source.occupied().collect();
                let empty: Vec<usize> = source.empty(norb).collect();
                let mut singles = Vec::new();
                for &p in &occ {
                    for &r in &empty {
                        let target = source.with_flipped(p).with_flipped(r);
                        let Some(&t) = lookup.get(&target.bits()) else { continue };
                        let mut same = ham.h(r, p);
                        for &k in &occ {
                            same += ham.eri(r, p, k, k) - ham.eri(r, k, k, p);
                        }
                        singles.push(SingleLink {
                            target: t,
                            from: p as u8,
                            to: r as u8,
                            sign: source.phase_between(p, r),
                            pair: pair_index(r, p) as u32,
                            same_spin: same,
                        });
                    }
                }
                singles.sort_by_key(|l| l.target);

                let mut doubles = Vec::new();
                for (i, &p) in occ.iter().enumerate() {
                    for &q in &occ[i + 1..] {
                        for (j, &r) in empty.iter().enumerate() {
                            for &s in &empty[j + 1..] {
                                let target = source.with_flipped(p).with_flipped(q).with_flipped(r).with_flipped(s);
                                let Some(&t) = lookup.get(&target.bits()) else { continue };
                                doubles.push(DoubleLink {
                                    target: t,
                                    value: same_spin_double_value(ham, source, p, q, r, s),
                                });
                            }
                        }
                    }
                }
                doubles.sort_by_key(|l| l.target);
                (singles, doubles)
            })
            .collect();

        let mut table = SpinTable {
            strings,
            single_offsets: Vec::with_capacity(per_string.len() + 1),
            double_offsets: Vec::with_capacity(per_string.len() + 1),
            ..Default::default()
        };
        table.single_offsets.push(0);
        table.double_offsets.push(0);
        for (singles, doubles) in per_string {
            table.singles.extend(singles);
            table.doubles.extend(doubles);
            table.single_offsets.push(table.singles.len());
            table.double_offsets.push(table.doubles.len());
        }
        table
    }

    pub fn strings(&self) -> &[SpinString] {
        &self.strings
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    #[inline]
    pub fn singles(&self, string: usize) -> &[SingleLink] {
        &self.singles[self.single_offsets[string]..self.single_offsets[string + 1]]
    }

    #[inline]
    pub fn doubles(&self, string: usize) -> &[DoubleLink] {
        &self.doubles[self.double_offsets[string]..self.double_offsets[string + 1]]
    }

    pub fn position(&self, s: SpinString) -> Option<usize> {
        self.strings.binary_search(&s).ok()
    }

    pub fn single_link_count(&self) -> usize {
        self.singles.len()
    }

    pub fn double_link_count(&self) -> usize {
        self.doubles.len()
    }
}

/// Sorted, deduplicated configuration set with the helper tables used by
/// the matrix-free Hamiltonian application.
///
/// Rows sharing an alpha string are contiguous (a "block"); inside a block
/// rows are ordered by beta string.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    spec: SystemSpec,
    configs: Vec<Configuration>,
    alpha: SpinTable,
    beta: SpinTable,
    row_alpha: Vec<u32>,
    row_beta: Vec<u32>,
    block_start: Vec<usize>,
    diagonal: Vec<f64>,
    /// `coulomb[pair * norb + k] = (pair|kk)`.
    coulomb: Vec<f64>,
}

impl SubspaceBasis {
    /// Sorts, deduplicates and indexes `configs`, precomputing diagonal
    /// elements and per-spin excitation links for `ham`.
    pub fn build<I>(configs: I, ham: &FragmentHamiltonian) -> Result<Self, SbdError>
    where
        I: IntoIterator<Item = Configuration>,
    {
        let spec = *ham.spec();
        let mut configs: Vec<Configuration> = configs.into_iter().collect();
        if let Some(bad) = configs.iter().find(|c| !c.is_valid_for(&spec)) {
            return Err(SbdError::SpecMismatch(format!(
                "configuration {} is not valid for {spec}",
                bad.to_text(spec.norb)
            )));
        }
        if configs.is_empty() {
            return Err(SbdError::EmptyBasis);
        }
        configs.par_sort_unstable();
        configs.dedup();

        let mut alpha_strings: Vec<SpinString> = configs.iter().map(|c| c.alpha).collect();
        alpha_strings.dedup();
        let mut beta_strings: Vec<SpinString> = configs.iter().map(|c| c.beta).collect();
        beta_strings.par_sort_unstable();
        beta_strings.dedup();

        let beta_lookup: HashMap<u64, u32> =
            beta_strings.iter().enumerate().map(|(i, s)| (s.bits(), i as u32)).collect();
        let mut row_alpha = Vec::with_capacity(configs.len());
        let mut row_beta = Vec::with_capacity(configs.len());
        let mut block_start = Vec::with_capacity(alpha_strings.len() + 1);
        for (row, c) in configs.iter().enumerate() {
            if row == 0 || configs[row - 1].alpha != c.alpha {
                block_start.push(row);
            }
            row_alpha.push((block_start.len() - 1) as u32);
            row_beta.push(beta_lookup[&c.beta.bits()]);
        }
        block_start.push(configs.len());

        let (alpha, beta) = rayon::join(
            || SpinTable::build(alpha_strings, ham),
            || SpinTable::build(beta_strings, ham),
        );

        let norb = spec.norb;
        let npair = norb * (norb + 1) / 2;
        let mut coulomb = vec![0.0; npair * norb];
        for p in 0..norb {
            for q in 0..=p {
                let pq = pair_index(p, q);
                for k in 0..norb {
                    coulomb[pq * norb + k] = ham.eri(p, q, k, k);
                }
            }
        }
        let diagonal = configs.par_iter().map(|c| ham.diagonal_element(c)).collect();

        Ok(SubspaceBasis { spec, configs, alpha, beta, row_alpha, row_beta, block_start, diagonal, coulomb })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn alpha_table(&self) -> &SpinTable {
        &self.alpha
    }

    pub fn beta_table(&self) -> &SpinTable {
        &self.beta
    }

    pub fn table(&self, spin: Spin) -> &SpinTable {
        match spin {
            Spin::Alpha => &self.alpha,
            Spin::Beta => &self.beta,
        }
    }

    /// Row of `c`, if present.
    pub fn position(&self, c: &Configuration) -> Option<usize> {
        let ia = self.alpha.position(c.alpha)?;
        let ib = self.beta.position(c.beta)? as u32;
        self.find_in_block(ia, ib)
    }

    pub fn contains(&self, c: &Configuration) -> bool {
        self.position(c).is_some()
    }

    /// Every single-excitation link of `spin` as (source, target,
    /// excitation) triples; used for auditing the tables.
    pub fn single_links(&self, spin: Spin) -> Vec<(SpinString, SpinString, Excitation)> {
        let table = self.table(spin);
        let mut out = Vec::with_capacity(table.single_link_count());
        for (i, &s) in table.strings.iter().enumerate() {
            for l in table.singles(i) {
                out.push((
                    s,
                    table.strings[l.target as usize],
                    Excitation {
                        spin,
                        from_orb: l.from as usize,
                        to_orb: l.to as usize,
                        phase: if l.sign > 0.0 { 1 } else { -1 },
                    },
                ));
            }
        }
        out
    }

    #[inline]
    pub(crate) fn row_alpha(&self, row: usize) -> usize {
        self.row_alpha[row] as usize
    }

    #[inline]
    pub(crate) fn row_beta(&self, row: usize) -> u32 {
        self.row_beta[row]
    }

    #[inline]
    pub(crate) fn block(&self, alpha_index: usize) -> (usize, &[u32]) {
        let start = self.block_start[alpha_index];
        let end = self.block_start[alpha_index + 1];
        (start, &self.row_beta[start..end])
    }

    #[inline]
    pub(crate) fn find_in_block(&self, alpha_index: usize, beta_index: u32) -> Option<usize> {
        let (start, betas) = self.block(alpha_index);
        betas.binary_search(&beta_index).ok().map(|i| start + i)
    }

    /// Spectator Coulomb sum `sum_{k in occ} (pair|kk)`.
    #[inline]
    pub(crate) fn spectator(&self, pair: u32, occ: SpinString) -> f64 {
        let row = &self.coulomb[pair as usize * self.spec.norb..][..self.spec.norb];
        occ.occupied().map(|k| row[k]).sum()
    }
}
