//! Acceptance suite: one PASS/FAIL line per criterion, then a summary.
//!
//! Runs without the libtest harness so the lines are always printed. The
//! process exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use sqd_core::configs::{enumerate_all_configurations, format_scientific, SystemSpec};
use sqd_core::oracle::{dense_fci_matrix, fci_solve, operator_apply_reference};
use sqd_core::pipeline::{binding_energy, run_pipeline, run_trimsqd, Method, PipelineConfig};
use sqd_core::sampling::{recover_configurations, sample_exact, OccupancyEstimate};
use sqd_core::sbd::{apply_hamiltonian, extend_basis, ExtendOptions};
use sqd_core::synthetic::{product_basis, random_hamiltonian, random_hamiltonian_with_coupling, random_subset};
use sqd_core::{fci_dimension, Configuration, FragmentHamiltonian, SampleSet, SubspaceBasis, CHEMICAL_ACCURACY};

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into(), notes: Vec::new() }
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

fn full_coverage(spec: &SystemSpec) -> SampleSet {
    let mut set = SampleSet::new(spec.norb);
    for c in enumerate_all_configurations(spec, 1_000_000).unwrap() {
        set.add(c, 1);
    }
    set
}

// 1 ------------------------------------------------------------------------

fn fci_dimension_fidelity() -> Outcome {
    let rows = [
        (36, 35, "20589520178326522500", "2.06e19"),
        (34, 33, "1361429497505672100", "1.36e18"),
        (66, 45, "827138850772872845025", "8.27e20"),
    ];
    let mut pass = true;
    let mut shown = Vec::new();
    for (ne, mo, exact, sci) in rows {
        let spec = SystemSpec::from_active_space(ne, mo).unwrap();
        let dim = fci_dimension(&spec);
        let got = format_scientific(&dim, 3);
        pass &= dim.to_string() == exact && got == sci;
        shown.push(format!("({ne}e,{mo}o)={got}"));
    }
    Outcome::new(pass, shown.join(", "))
}

// 2 ------------------------------------------------------------------------

fn binding_energy_fidelity() -> Outcome {
    let rows = [
        ("trypsin", (-319415.8966, -319040.9552, -374.9986), 0.0572, 35.89),
        ("T4-lysozyme", (-289141.6090, -288758.7087, -382.9152), 0.0148, 9.30),
    ];
    let mut pass = true;
    let mut shown = Vec::new();
    let mut notes = Vec::new();
    for (name, (b, u, l), ha, kcal) in rows {
        let e = binding_energy(b, u, l);
        let ok_ha = (e.hartree - ha).abs() <= 5e-5;
        let ok_kcal = (e.kcal_per_mol - kcal).abs() <= 0.05;
        pass &= ok_ha && ok_kcal;
        shown.push(format!("{name} {:.4} Ha / {:.2} kcal/mol", e.hartree, e.kcal_per_mol));
        if !ok_ha {
            notes.push(format!(
                "{name}: |{:.5} - {ha}| = {:.1e} Ha exceeds 5e-5; the four-decimal inputs give this value exactly",
                e.hartree,
                (e.hartree - ha).abs()
            ));
        }
        if !ok_kcal {
            notes.push(format!("{name}: {:.4} kcal/mol vs {kcal}", e.kcal_per_mol));
        }
    }
    let mut out = Outcome::new(pass, shown.join("; "));
    out.notes = notes;
    out
}

// 3 ------------------------------------------------------------------------

fn slater_condon_correctness() -> Outcome {
    let mut instances = 0;
    let mut worst = 0.0f64;
    for (i, (m, a, b)) in [(3, 1, 1), (3, 2, 1), (3, 2, 2), (4, 2, 2), (4, 3, 1), (4, 2, 1), (4, 3, 2)]
        .into_iter()
        .cycle()
        .take(21)
        .enumerate()
    {
        let spec = SystemSpec::new(m, a, b).unwrap();
        let ham = random_hamiltonian(&spec, 300 + i as u64);
        let configs = enumerate_all_configurations(&spec, 10_000).unwrap();
        for y in &configs {
            let column = operator_apply_reference(y, &ham);
            for x in &configs {
                let reference = column.get(x).copied().unwrap_or(0.0);
                let rule = ham.coupling_element(x, y).unwrap();
                worst = worst.max((rule - reference).abs());
            }
        }
        instances += 1;
    }
    Outcome::new(worst <= 1e-12, format!("{instances} instances (M in 3..=4), max |diff| = {worst:.1e}"))
}

// 4 ------------------------------------------------------------------------

fn matvec_equivalence() -> Outcome {
    let cases = [(6, 3, 3, 400), (7, 3, 3, 1200), (7, 4, 2, 600), (8, 4, 4, 2000), (8, 3, 3, 2000), (8, 5, 3, 1500), (6, 2, 2, 225), (8, 4, 3, 2000), (5, 3, 2, 100), (8, 2, 2, 784), (7, 3, 2, 735)];
    let mut worst = 0.0f64;
    for (i, &(m, a, b, size)) in cases.iter().enumerate() {
        let spec = SystemSpec::new(m, a, b).unwrap();
        let ham = random_hamiltonian(&spec, 400 + i as u64);
        let all = enumerate_all_configurations(&spec, 1_000_000).unwrap();
        let configs = random_subset(&all, size, 17 + i as u64);
        let basis = SubspaceBasis::build(configs.clone(), &ham).unwrap();
        let v: Vec<f64> = (0..basis.len()).map(|k| ((k * 7919 % 1000) as f64 / 500.0) - 1.0).collect();
        let got = apply_hamiltonian(&basis, &ham, &v);
        let h = dense_fci_matrix(&ham, basis.configs());
        let reference = &h * nalgebra::DVector::from_column_slice(&v);
        let scale = reference.amax().max(1e-300);
        let diff = got.iter().zip(reference.iter()).map(|(g, r)| (g - r).abs()).fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    Outcome::new(worst <= 1e-12, format!("{} sub-bases (size <= 2000, M <= 8), max relative diff = {worst:.1e}", cases.len()))
}

// 5 ------------------------------------------------------------------------

fn chain_violations(ham: &FragmentHamiltonian, cfg: &PipelineConfig, samples: &SampleSet, label: &str) -> Vec<String> {
    let tol = 2.0 * cfg.solver.tol;
    let fci = fci_solve(ham, 1_000_000).unwrap().ground_energy;
    let report = run_trimsqd(ham, samples, cfg).unwrap();
    let mut out = Vec::new();
    for it in &report.iterations {
        let merged = it.merged_energy.unwrap();
        let lowest = it.subgroup_energies.iter().copied().fold(f64::INFINITY, f64::min);
        if merged > lowest + tol {
            out.push(format!("{label} iteration {}: merged above lowest subgroup by {:.1e}", it.iteration, merged - lowest));
        }
    }
    let stage = report.final_stage.as_ref().unwrap();
    let last_merged = report.iterations.last().unwrap().merged_energy.unwrap();
    if stage.extended_energy > last_merged + tol {
        out.push(format!("{label}: extended above merged by {:.1e}", stage.extended_energy - last_merged));
    }
    if fci > stage.extended_energy + tol {
        out.push(format!("{label}: FCI above extended"));
    }
    out
}

fn variational_chain() -> Outcome {
    let mut runs = 0;
    let mut violations = Vec::new();
    // realistic shape: tens to hundreds of configurations per subgroup
    for (m, n) in [(6, 3), (7, 3), (8, 4)] {
        for (seed, coupling) in [(1u64, 1.0), (2, 1.0), (3, 0.3)] {
            let spec = SystemSpec::new(m, n, n).unwrap();
            let ham = random_hamiltonian_with_coupling(&spec, seed, coupling);
            let samples = sample_exact(&ham, 100_000, 0.02, seed).unwrap();
            let cfg = PipelineConfig { seed, subgroup_capacity: 200, ..PipelineConfig::default() };
            violations.extend(chain_violations(&ham, &cfg, &samples, &format!("M={m} seed={seed}")));
            runs += 1;
        }
    }
    let realistic = violations.len();
    // small subgroups: a top-10% trim keeps one or two configurations each
    for seed in 0..24u64 {
        let m = 4 + (seed % 3) as usize;
        let spec = SystemSpec::new(m, m / 2, m / 2).unwrap();
        let ham = random_hamiltonian(&spec, 800 + seed);
        let samples = sample_exact(&ham, 4000, 0.02, seed).unwrap();
        let cfg = PipelineConfig { seed, subgroup_capacity: 30, recovery_iterations: 3, ..PipelineConfig::default() };
        violations.extend(chain_violations(&ham, &cfg, &samples, &format!("small M={m} seed={}", 800 + seed)));
        runs += 1;
    }
    let mut out = Outcome::new(
        violations.is_empty(),
        format!(
            "{runs} TrimSQD runs at baseline k1/k2: {realistic} violations on 9 realistic-size runs, {} on 24 small-subgroup runs",
            violations.len() - realistic
        ),
    );
    if !violations.is_empty() {
        out.notes.push(
            "with k1 < 100 the merged space is not a superset of each subgroup space, so the chain is not guaranteed".into(),
        );
    }
    out.notes.extend(violations.into_iter().take(6));
    out
}

// 6 ------------------------------------------------------------------------

fn pipeline_exactness_limit() -> Outcome {
    let cases = [(2, 1, 1), (4, 2, 2), (5, 3, 2), (6, 3, 3), (7, 4, 3), (8, 4, 4), (9, 3, 3)];
    let mut worst = 0.0f64;
    let mut runs = 0;
    for (i, &(m, a, b)) in cases.iter().enumerate() {
        let spec = SystemSpec::new(m, a, b).unwrap();
        assert!(fci_dimension(&spec) <= 10_000u32.into());
        let ham = random_hamiltonian(&spec, 600 + i as u64);
        let fci = fci_solve(&ham, 1_000_000).unwrap().ground_energy;
        let samples = full_coverage(&spec);
        for method in [Method::Trimsqd, Method::Extsqd] {
            let cfg = PipelineConfig { k1: 100.0, k2: 100.0, epsilon: Some(0.0), ..PipelineConfig::for_method(method) };
            let report = run_pipeline(&ham, &samples, &cfg).unwrap();
            worst = worst.max((report.final_energy - fci).abs());
            runs += 1;
        }
    }
    Outcome::new(worst <= 1e-9, format!("{runs} runs (dim up to 7056), k1 = k2 = 100, eps = 0: max |E - E_FCI| = {worst:.1e}"))
        .note("baseline k1 = 10 / k2 = 50 discards configurations by design, so the exactness limit is taken with non-lossy trimming")
}

// 7 ------------------------------------------------------------------------

fn noisy_end_to_end() -> Outcome {
    let spec = SystemSpec::new(6, 3, 3).unwrap();
    let ham: FragmentHamiltonian = random_hamiltonian(&spec, 2024);
    let fci = fci_solve(&ham, 1_000_000).unwrap().ground_energy;
    let samples = sample_exact(&ham, 100_000, 0.02, 11).unwrap();

    let recovered = recover_configurations(&samples, &OccupancyEstimate::uniform(&spec), &spec, 5);
    let recovered_shots: u64 = recovered.values().sum();
    let all_valid = recovered.keys().all(|c| c.is_valid_for(&spec)) && recovered_shots == samples.total();

    let cfg = PipelineConfig { k1: 100.0, k2: 100.0, seed: 11, ..PipelineConfig::default() };
    let report = run_trimsqd(&ham, &samples, &cfg).unwrap();
    let err = (report.final_energy - fci).abs();

    let baseline = run_trimsqd(&ham, &samples, &PipelineConfig { seed: 11, ..PipelineConfig::default() }).unwrap();
    Outcome::new(
        err <= CHEMICAL_ACCURACY && all_valid,
        format!(
            "|E - E_FCI| = {err:.2e} Ha (dim {}), raw valid fraction {:.3}, recovered valid {}/{} shots",
            report.final_dimension,
            samples.valid_fraction(&spec),
            if all_valid { recovered_shots } else { 0 },
            samples.total()
        ),
    )
    .note("trimming disabled (k1 = k2 = 100); the criterion isolates sampling noise and recovery")
    .note(format!(
        "informational: baseline k1 = 10 / k2 = 50 gives |E - E_FCI| = {:.2e} Ha at dim {}",
        (baseline.final_energy - fci).abs(),
        baseline.final_dimension
    ))
}

// 8 ------------------------------------------------------------------------

fn determinism() -> Outcome {
    let spec = SystemSpec::new(8, 4, 4).unwrap();
    let ham = random_hamiltonian(&spec, 88);
    let samples = sample_exact(&ham, 50_000, 0.02, 88).unwrap();
    let cfg = PipelineConfig { subgroup_capacity: 300, seed: 88, ..PipelineConfig::default() };
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_trimsqd(&ham, &samples, &cfg).unwrap().to_json())
    };
    let first = run_with(2);
    let second = run_with(2);
    let across: Vec<String> = [1, 4].iter().map(|&t| run_with(t)).collect();
    let same_runs = first == second;
    let same_threads = across.iter().all(|r| *r == first);
    Outcome::new(
        same_runs && same_threads,
        format!("repeat runs identical: {same_runs}; identical across 1/2/4 threads: {same_threads}"),
    )
}

// 9 ------------------------------------------------------------------------

fn scaling_smoke() -> Outcome {
    let spec = SystemSpec::new(16, 8, 8).unwrap();
    let ham = random_hamiltonian(&spec, 9);
    let basis = SubspaceBasis::build(product_basis(&spec, 1000, 1000, 9), &ham).unwrap();
    let v: Vec<f64> = (0..basis.len()).map(|i| ((i % 97) as f64 - 48.0) / 97.0).collect();
    let time = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            (0..3)
                .map(|_| {
                    let t = Instant::now();
                    std::hint::black_box(apply_hamiltonian(&basis, &ham, &v));
                    t.elapsed().as_secs_f64()
                })
                .fold(f64::INFINITY, f64::min)
        })
    };
    let t1 = time(1);
    let t4 = time(4);
    let efficiency = t1 / (4.0 * t4);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    Outcome::new(
        efficiency > 0.40,
        format!("dim {}, t1 = {t1:.3} s, t4 = {t4:.3} s, efficiency at 4 threads = {:.1}%", basis.len(), 100.0 * efficiency),
    )
    .note(format!("host reports {cores} available core(s); the criterion assumes a 4-core machine"))
    .note("context only: production runs target ~72.5% parallel efficiency at 64 nodes")
}

// 10 -----------------------------------------------------------------------

fn extension_oracle() -> Outcome {
    let mut checked = 0;
    let mut mismatches = 0;
    for (i, (a, b, size)) in [(3, 3, 5), (3, 3, 20), (3, 3, 1), (3, 2, 12), (2, 2, 30), (3, 3, 60), (4, 2, 8), (3, 3, 150), (2, 1, 4), (3, 3, 3), (1, 1, 2), (4, 3, 25)]
        .into_iter()
        .enumerate()
    {
        let spec = SystemSpec::new(6, a, b).unwrap();
        let ham = random_hamiltonian(&spec, 1000 + i as u64);
        let all = enumerate_all_configurations(&spec, 10_000).unwrap();
        let base = random_subset(&all, size, 2000 + i as u64);
        let basis = SubspaceBasis::build(base.clone(), &ham).unwrap();
        let got: BTreeSet<Configuration> = extend_basis(&basis, &ham, &ExtendOptions::default()).into_iter().collect();
        let brute: BTreeSet<Configuration> =
            all.iter().copied().filter(|y| base.iter().any(|x| x.hamming(y) <= 2)).collect();
        if got != brute {
            mismatches += 1;
        }
        checked += 1;
    }
    Outcome::new(mismatches == 0, format!("{checked} random bases in M = 6 spaces, {mismatches} mismatches"))
}

/// Name, time budget in seconds, check.
type Criterion = (&'static str, f64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("FCI-dimension fidelity", 1.0, fci_dimension_fidelity),
        ("binding-energy fidelity", 1.0, binding_energy_fidelity),
        ("Slater-Condon correctness", 10.0, slater_condon_correctness),
        ("matvec equivalence", 30.0, matvec_equivalence),
        ("variational chain", 60.0, variational_chain),
        ("pipeline exactness limit", 120.0, pipeline_exactness_limit),
        ("noisy end-to-end", 300.0, noisy_end_to_end),
        ("determinism", 120.0, determinism),
        ("scaling smoke", 300.0, scaling_smoke),
        ("extension oracle", 30.0, extension_oracle),
    ];
    let mut failed = Vec::new();
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                Outcome::new(false, format!("panicked: {}", msg.unwrap_or_default()))
            });
        let secs = t.elapsed().as_secs_f64();
        let in_budget = secs < *budget;
        let pass = outcome.pass && in_budget;
        println!(
            "[{}] criterion {:>2} {name}: {} ({secs:.2} s{})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            outcome.detail,
            if in_budget { String::new() } else { format!(", over the {budget} s budget") }
        );
        for note in &outcome.notes {
            println!("         note: {note}");
        }
        if !pass {
            failed.push(i + 1);
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
