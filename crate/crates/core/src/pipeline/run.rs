use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::report::{EnergyReport, FinalStage, IterationRecord, PhaseClock, SampleSummary, SeedRecord};
use super::{Method, PipelineConfig, PipelineError};
use crate::configs::Configuration;
use crate::integrals::FragmentHamiltonian;
use crate::sampling::{derive_seed, estimate_occupancy, recover_configurations, subsample, OccupancyEstimate, SampleSet};
use crate::sbd::{
    extend_basis, solve_ground_state, trim_by_amplitude, ExtendOptions, GroundStateResult, Keep, SbdError, SolverOptions,
    SubspaceBasis,
};

const TAG_RECOVER: u64 = 1;
const TAG_SUBSAMPLE: u64 = 2;
const TAG_SPLIT: u64 = 3;

fn stream(master: u64, iteration: usize, tag: u64) -> u64 {
    derive_seed(master, (iteration as u64) << 8 | tag)
}

struct Solved {
    basis: SubspaceBasis,
    result: GroundStateResult,
}

/// Builds and solves a subspace; a non-converged solve yields its best
/// iterate with `converged == false`.
fn solve(ham: &FragmentHamiltonian, configs: Vec<Configuration>, opts: &SolverOptions) -> Result<Solved, PipelineError> {
    let basis = SubspaceBasis::build(configs, ham).map_err(|e| match e {
        SbdError::EmptyBasis => PipelineError::EmptySubspace,
        other => other.into(),
    })?;
    let result = match solve_ground_state(&basis, ham, opts) {
        Ok(r) => r,
        Err(SbdError::NoConvergence(best)) => *best,
        Err(e) => return Err(e.into()),
    };
    Ok(Solved { basis, result })
}

/// Mutable state shared by the three drivers.
struct Run<'a> {
    ham: &'a FragmentHamiltonian,
    samples: &'a SampleSet,
    cfg: &'a PipelineConfig,
    clock: PhaseClock,
    matvecs: usize,
    converged: bool,
    iterations: Vec<IterationRecord>,
    recovery_seeds: Vec<u64>,
}

impl<'a> Run<'a> {
    fn new(ham: &'a FragmentHamiltonian, samples: &'a SampleSet, cfg: &'a PipelineConfig) -> Result<Self, PipelineError> {
        let clock = PhaseClock::start();
        cfg.validate()?;
        if samples.norb() != ham.norb() {
            return Err(PipelineError::SampleMismatch { expected: ham.norb(), found: samples.norb() });
        }
        if samples.is_empty() {
            return Err(PipelineError::EmptySubspace);
        }
        Ok(Run {
            ham,
            samples,
            cfg,
            clock,
            matvecs: 0,
            converged: true,
            iterations: Vec::new(),
            recovery_seeds: Vec::new(),
        })
    }

    fn record(&mut self, solved: &Solved) {
        self.matvecs += solved.result.matvec_count;
        self.converged &= solved.result.converged;
    }

    fn solve(&mut self, configs: Vec<Configuration>, phase: &str) -> Result<Solved, PipelineError> {
        let solved = solve(self.ham, configs, &self.cfg.solver)?;
        self.record(&solved);
        self.clock.lap(phase);
        Ok(solved)
    }

    fn solve_groups(&mut self, groups: Vec<Vec<Configuration>>) -> Result<Vec<Solved>, PipelineError> {
        let ham = self.ham;
        let opts = &self.cfg.solver;
        let solved: Vec<Solved> = groups
            .into_par_iter()
            .filter(|g| !g.is_empty())
            .map(|g| solve(ham, g, opts))
            .collect::<Result<_, _>>()?;
        for s in &solved {
            self.record(s);
        }
        self.clock.lap("subgroup_solve");
        Ok(solved)
    }

    fn recover(&mut self, iteration: usize, occ: &OccupancyEstimate) -> BTreeMap<Configuration, u64> {
        let seed = stream(self.cfg.seed, iteration, TAG_RECOVER);
        self.recovery_seeds.push(seed);
        let recovered = recover_configurations(self.samples, occ, self.ham.spec(), seed);
        debug_assert!(recovered.keys().all(|c| c.is_valid_for(self.ham.spec())));
        self.clock.lap("recovery");
        recovered
    }

    /// Fresh subsample topping the carryover up to the total capacity.
    fn fresh(&mut self, iteration: usize, recovered: &BTreeMap<Configuration, u64>, carried: usize) -> Vec<Configuration> {
        let budget = (self.cfg.subgroup_count * self.cfg.subgroup_capacity).saturating_sub(carried);
        let out = if budget == 0 {
            Vec::new()
        } else {
            subsample(recovered, budget, stream(self.cfg.seed, iteration, TAG_SUBSAMPLE))
        };
        self.clock.lap("subsample");
        out
    }

    fn stop_early(&self, previous: Option<f64>, current: f64) -> bool {
        matches!((self.cfg.early_stop, previous), (Some(tol), Some(prev)) if (current - prev).abs() < tol)
    }

    /// Extension (if enabled), extended solve, epsilon restriction and the
    /// final solve.
    fn finish(mut self, retained: Vec<Configuration>) -> Result<EnergyReport, PipelineError> {
        if retained.is_empty() {
            return Err(PipelineError::EmptySubspace);
        }
        let retained_dimension = retained.len();
        let extended = if self.cfg.extension_distance == 2 {
            let basis = SubspaceBasis::build(retained, self.ham)?;
            let ext = extend_basis(&basis, self.ham, &ExtendOptions { screen: self.cfg.extension_screen });
            self.clock.lap("extension");
            ext
        } else {
            retained
        };
        let ext = self.solve(extended, "extended_solve")?;
        let eps = self.cfg.epsilon();
        let kept = trim_by_amplitude(&ext.basis, &ext.result.vector, Keep::Threshold(eps));
        self.clock.lap("trim");
        let (final_energy, final_dimension) = if kept.len() == ext.basis.len() {
            (ext.result.energy, ext.basis.len())
        } else {
            let fin = self.solve(kept, "final_solve")?;
            (fin.result.energy, fin.basis.len())
        };
        let stage = FinalStage {
            retained_dimension,
            extended_dimension: ext.basis.len(),
            extended_energy: ext.result.energy,
            epsilon: eps,
        };
        Ok(self.report(Some(stage), final_energy, final_dimension))
    }

    fn report(self, final_stage: Option<FinalStage>, final_energy: f64, final_dimension: usize) -> EnergyReport {
        let spec = *self.ham.spec();
        let samples = SampleSummary {
            total_shots: self.samples.total(),
            distinct_strings: self.samples.len(),
            valid_fraction: self.samples.valid_fraction(&spec),
        };
        EnergyReport {
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            method: self.cfg.method,
            system: spec,
            samples,
            iterations: self.iterations,
            final_stage,
            final_energy,
            final_dimension,
            converged: self.converged,
            matvec_count: self.matvecs,
            seeds: SeedRecord { master: self.cfg.seed, recovery: self.recovery_seeds },
            config: self.cfg.clone(),
            timings: self.clock.finish("report"),
        }
    }
}

fn union(a: Vec<Configuration>, b: &[Configuration]) -> Vec<Configuration> {
    let mut out = a;
    out.extend_from_slice(b);
    out.sort_unstable();
    out.dedup();
    out
}

fn check(report: EnergyReport) -> Result<EnergyReport, PipelineError> {
    if report.converged {
        Ok(report)
    } else {
        Err(PipelineError::NoConvergence(Box::new(report)))
    }
}

/// Runs the method selected in `cfg`.
pub fn run_pipeline(ham: &FragmentHamiltonian, samples: &SampleSet, cfg: &PipelineConfig) -> Result<EnergyReport, PipelineError> {
    match cfg.method {
        Method::Sqd => run_sqd(ham, samples, cfg),
        Method::Extsqd => run_extsqd(ham, samples, cfg),
        Method::Trimsqd => run_trimsqd(ham, samples, cfg),
    }
}

/// Recovery loop with one diagonalization per iteration over the merged
/// pool; the top `k2` percent is carried over. No extension.
pub fn run_sqd(ham: &FragmentHamiltonian, samples: &SampleSet, cfg: &PipelineConfig) -> Result<EnergyReport, PipelineError> {
    let mut run = Run::new(ham, samples, cfg)?;
    run.clock.lap("setup");
    let mut occ = OccupancyEstimate::uniform(ham.spec());
    let mut carry: Vec<Configuration> = Vec::new();
    let mut last: Option<(f64, usize)> = None;
    for it in 0..cfg.recovery_iterations {
        let recovered = run.recover(it, &occ);
        let fresh = run.fresh(it, &recovered, carry.len());
        let pool = union(fresh, &carry);
        run.clock.lap("merge");
        let dimension = pool.len();
        let solved = run.solve(pool, "merged_solve")?;
        occ = estimate_occupancy(&solved.basis, &solved.result.vector);
        carry = trim_by_amplitude(&solved.basis, &solved.result.vector, Keep::TopPercent(cfg.k2));
        run.iterations.push(IterationRecord {
            iteration: it,
            recovered_distinct: recovered.len(),
            subspace_dimension: dimension,
            subgroup_dimensions: vec![dimension],
            subgroup_energies: vec![solved.result.energy],
            merged_dimension: Some(dimension),
            merged_energy: Some(solved.result.energy),
            carryover_dimension: carry.len(),
        });
        run.clock.lap("trim");
        let previous = last.map(|(e, _)| e);
        last = Some((solved.result.energy, dimension));
        if run.stop_early(previous, solved.result.energy) {
            break;
        }
    }
    let (energy, dimension) = last.expect("at least one iteration");
    check(run.report(None, energy, dimension))
}

/// Seeded shuffle followed by a contiguous split into `groups` near-equal
/// parts.
fn split_groups(mut pool: Vec<Configuration>, groups: usize, seed: u64) -> Vec<Vec<Configuration>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let base = pool.len() / groups;
    let extra = pool.len() % groups;
    let mut out = Vec::with_capacity(groups);
    let mut rest = pool.as_slice();
    for g in 0..groups {
        let take = base + usize::from(g < extra);
        let (head, tail) = rest.split_at(take);
        out.push(head.to_vec());
        rest = tail;
    }
    out
}

/// TrimSQD: subgroup solves keep their top `k1` percent, the union is
/// solved across subgroups and trimmed to its top `k2` percent, which is
/// carried over; the final retained set is extended and solved, then
/// restricted to `|Psi_x| > epsilon` and solved again.
pub fn run_trimsqd(ham: &FragmentHamiltonian, samples: &SampleSet, cfg: &PipelineConfig) -> Result<EnergyReport, PipelineError> {
    let mut run = Run::new(ham, samples, cfg)?;
    run.clock.lap("setup");
    let mut occ = OccupancyEstimate::uniform(ham.spec());
    let mut carry: Vec<Configuration> = Vec::new();
    let mut previous: Option<f64> = None;
    for it in 0..cfg.recovery_iterations {
        let recovered = run.recover(it, &occ);
        let fresh = run.fresh(it, &recovered, carry.len());
        let pool = union(fresh, &carry);
        let dimension = pool.len();
        let groups = split_groups(pool, cfg.subgroup_count, stream(cfg.seed, it, TAG_SPLIT));
        run.clock.lap("merge");

        let solved = run.solve_groups(groups)?;
        let mut kept: Vec<Configuration> = Vec::new();
        for s in &solved {
            kept.extend(trim_by_amplitude(&s.basis, &s.result.vector, Keep::TopPercent(cfg.k1)));
        }
        kept.sort_unstable();
        kept.dedup();
        run.clock.lap("trim");

        let merged = run.solve(kept, "merged_solve")?;
        occ = estimate_occupancy(&merged.basis, &merged.result.vector);
        carry = trim_by_amplitude(&merged.basis, &merged.result.vector, Keep::TopPercent(cfg.k2));
        run.iterations.push(IterationRecord {
            iteration: it,
            recovered_distinct: recovered.len(),
            subspace_dimension: dimension,
            subgroup_dimensions: solved.iter().map(|s| s.basis.len()).collect(),
            subgroup_energies: solved.iter().map(|s| s.result.energy).collect(),
            merged_dimension: Some(merged.basis.len()),
            merged_energy: Some(merged.result.energy),
            carryover_dimension: carry.len(),
        });
        run.clock.lap("trim");
        let energy = merged.result.energy;
        if run.stop_early(previous, energy) {
            break;
        }
        previous = Some(energy);
    }
    let report = run.finish(carry)?;
    check(report)
}

/// ExtSQD: subgroups are solved independently with per-subgroup carryover
/// of the top `k1` percent; the union of the final carryovers is extended
/// and solved, then restricted to `|Psi_x| > epsilon`.
pub fn run_extsqd(ham: &FragmentHamiltonian, samples: &SampleSet, cfg: &PipelineConfig) -> Result<EnergyReport, PipelineError> {
    let mut run = Run::new(ham, samples, cfg)?;
    run.clock.lap("setup");
    let g_count = cfg.subgroup_count;
    let mut occ = OccupancyEstimate::uniform(ham.spec());
    let mut carries: Vec<Vec<Configuration>> = vec![Vec::new(); g_count];
    let mut previous: Option<f64> = None;
    for it in 0..cfg.recovery_iterations {
        let recovered = run.recover(it, &occ);
        let carried: BTreeSet<Configuration> = carries.iter().flatten().copied().collect();
        let fresh = run.fresh(it, &recovered, carries.iter().map(Vec::len).sum());
        let mut fresh: Vec<Configuration> = fresh.into_iter().filter(|c| !carried.contains(c)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(stream(cfg.seed, it, TAG_SPLIT));
        fresh.shuffle(&mut rng);
        // round-robin over subgroups with room left
        let mut groups = carries.clone();
        let mut g = 0;
        for c in fresh {
            let mut tries = 0;
            while groups[g].len() >= cfg.subgroup_capacity && tries < g_count {
                g = (g + 1) % g_count;
                tries += 1;
            }
            if tries == g_count {
                break;
            }
            groups[g].push(c);
            g = (g + 1) % g_count;
        }
        let dimension = groups.iter().map(Vec::len).sum();
        run.clock.lap("merge");

        let nonempty: Vec<usize> = (0..g_count).filter(|&i| !groups[i].is_empty()).collect();
        let solved = run.solve_groups(groups)?;
        let mut next = vec![Vec::new(); g_count];
        for (s, &i) in solved.iter().zip(&nonempty) {
            next[i] = trim_by_amplitude(&s.basis, &s.result.vector, Keep::TopPercent(cfg.k1));
        }
        carries = next;
        let estimates: Vec<OccupancyEstimate> =
            solved.iter().map(|s| estimate_occupancy(&s.basis, &s.result.vector)).collect();
        occ = OccupancyEstimate::average(&estimates).ok_or(PipelineError::EmptySubspace)?;
        let energies: Vec<f64> = solved.iter().map(|s| s.result.energy).collect();
        run.iterations.push(IterationRecord {
            iteration: it,
            recovered_distinct: recovered.len(),
            subspace_dimension: dimension,
            subgroup_dimensions: solved.iter().map(|s| s.basis.len()).collect(),
            subgroup_energies: energies.clone(),
            merged_dimension: None,
            merged_energy: None,
            carryover_dimension: carries.iter().map(Vec::len).sum(),
        });
        run.clock.lap("trim");
        let best = energies.iter().copied().fold(f64::INFINITY, f64::min);
        if run.stop_early(previous, best) {
            break;
        }
        previous = Some(best);
    }
    let mut retained: Vec<Configuration> = carries.into_iter().flatten().collect();
    retained.sort_unstable();
    retained.dedup();
    run.clock.lap("merge");
    let report = run.finish(retained)?;
    check(report)
}
