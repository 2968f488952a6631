use std::collections::BTreeSet;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::configs::{enumerate_all_configurations, enumerate_singles, Spin, SpinString, SystemSpec};
use crate::integrals::FragmentHamiltonian;
use crate::oracle::{dense_fci_matrix, fci_solve};
use crate::synthetic::{random_hamiltonian, random_subset};

fn cfg(a: &str, b: &str) -> Configuration {
    Configuration::parse(a, b).unwrap()
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn assert_matches_dense(basis: &SubspaceBasis, ham: &FragmentHamiltonian, v: &[f64]) {
    let dense = dense_fci_matrix(ham, basis.configs());
    let expected = &dense * DVector::from_column_slice(v);
    let got = apply_hamiltonian(basis, ham, v);
    let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let hmax = basis.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let bound = 1e-12 * (vnorm * hmax).max(1.0);
    let err = got.iter().zip(expected.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= bound, "matvec error {err:e} > {bound:e}");
}

#[test]
fn build_deduplicates() {
    let spec = SystemSpec::new(2, 1, 1).unwrap();
    let ham = random_hamiltonian(&spec, 1);
    let c = cfg("10", "10");
    let d = cfg("01", "10");
    let basis = SubspaceBasis::build([c, c, d, c], &ham).unwrap();
    assert_eq!(basis.len(), 2);
    assert_eq!(basis.configs(), &[c, d]);
    assert_eq!(basis.position(&d), Some(1));
    assert_eq!(basis.position(&cfg("01", "01")), None);
}

#[test]
fn build_rejects_bad_input() {
    let spec = SystemSpec::new(2, 1, 1).unwrap();
    let ham = random_hamiltonian(&spec, 1);
    assert!(matches!(SubspaceBasis::build(Vec::new(), &ham), Err(SbdError::EmptyBasis)));
    assert!(matches!(
        SubspaceBasis::build([cfg("11", "10")], &ham),
        Err(SbdError::SpecMismatch(_))
    ));
}

#[test]
fn full_two_orbital_links() {
    let spec = SystemSpec::new(2, 1, 1).unwrap();
    let ham = random_hamiltonian(&spec, 1);
    let all = enumerate_all_configurations(&spec, 100).unwrap();
    let basis = SubspaceBasis::build(all, &ham).unwrap();
    assert_eq!(basis.len(), 4);
    let links = basis.single_links(Spin::Alpha);
    assert_eq!(links.len(), 2);
    for (source, target, exc) in links {
        assert_eq!(source.count(), 1);
        assert_ne!(source, target);
        assert_eq!(exc.phase, 1);
    }
}

#[test]
fn link_tables_match_enumerated_singles() {
    let spec = SystemSpec::new(8, 4, 4).unwrap();
    let ham = random_hamiltonian(&spec, 8);
    let all = enumerate_all_configurations(&spec, 10_000).unwrap();
    let subset = random_subset(&all, 1000, 17);
    let basis = SubspaceBasis::build(subset, &ham).unwrap();
    for spin in [Spin::Alpha, Spin::Beta] {
        let strings: BTreeSet<_> = basis.table(spin).strings().iter().copied().collect();
        let mut expected = BTreeSet::new();
        for &s in &strings {
            let probe = match spin {
                Spin::Alpha => Configuration::new(s, SpinString::EMPTY),
                Spin::Beta => Configuration::new(SpinString::EMPTY, s),
            };
            for (t, e) in enumerate_singles(&probe, 8) {
                let ts = t.spin(spin);
                if e.spin == spin && strings.contains(&ts) {
                    expected.insert((s, ts, e.from_orb, e.to_orb, e.phase));
                }
            }
        }
        let got: BTreeSet<_> = basis
            .single_links(spin)
            .into_iter()
            .map(|(s, t, e)| (s, t, e.from_orb, e.to_orb, e.phase))
            .collect();
        assert_eq!(got, expected, "{spin:?} links differ");
    }
}

#[test]
fn matvec_trivial_cases() {
    let spec = SystemSpec::new(4, 2, 2).unwrap();
    let ham = random_hamiltonian(&spec, 2);
    let all = enumerate_all_configurations(&spec, 100).unwrap();
    let basis = SubspaceBasis::build(all.clone(), &ham).unwrap();
    assert!(apply_hamiltonian(&basis, &ham, &vec![0.0; basis.len()]).iter().all(|x| *x == 0.0));
    let single = SubspaceBasis::build([all[7]], &ham).unwrap();
    let w = apply_hamiltonian(&single, &ham, &[0.75]);
    assert_eq!(w, vec![ham.diagonal_element(&all[7]) * 0.75]);
}

#[test]
fn matvec_matches_dense_projection() {
    for (seed, (m, na, nb, size)) in [(1u64, (4, 2, 2, 36)), (2, (5, 2, 3, 60)), (3, (6, 3, 3, 250)), (4, (7, 3, 2, 400)), (5, (8, 4, 4, 900))] {
        let spec = SystemSpec::new(m, na, nb).unwrap();
        let ham = random_hamiltonian(&spec, seed);
        let all = enumerate_all_configurations(&spec, 100_000).unwrap();
        let basis = SubspaceBasis::build(random_subset(&all, size, seed + 100), &ham).unwrap();
        assert_matches_dense(&basis, &ham, &random_vector(basis.len(), seed));
    }
}

#[test]
fn matvec_is_thread_count_independent() {
    let spec = SystemSpec::new(8, 4, 4).unwrap();
    let ham = random_hamiltonian(&spec, 31);
    let all = enumerate_all_configurations(&spec, 100_000).unwrap();
    let basis = SubspaceBasis::build(random_subset(&all, 3000, 5), &ham).unwrap();
    let v = random_vector(basis.len(), 9);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| apply_hamiltonian(&basis, &ham, &v))
    };
    let one = run(1);
    for threads in [2, 3, 4] {
        let other = run(threads);
        assert!(one.iter().zip(&other).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn dense_fallback_uncoupled_pair() {
    let spec = SystemSpec::new(2, 1, 0).unwrap();
    let mut ham = FragmentHamiltonian::zeros(spec);
    ham.set_h(0, 0, -1.0);
    ham.set_h(1, 1, -2.0);
    let basis = SubspaceBasis::build([cfg("10", "00"), cfg("01", "00")], &ham).unwrap();
    let res = solve_ground_state(&basis, &ham, &SolverOptions::default()).unwrap();
    assert!((res.energy + 2.0).abs() < 1e-14);
    assert!(res.vector.coeffs()[0].abs() < 1e-14);
    assert!((res.vector.coeffs()[1] - 1.0).abs() < 1e-14);
}

#[test]
fn full_space_solve_matches_oracle() {
    let spec = SystemSpec::new(4, 2, 2).unwrap();
    let ham = random_hamiltonian(&spec, 44);
    let oracle = fci_solve(&ham, 1000).unwrap();
    let basis = SubspaceBasis::build(oracle.configs.clone(), &ham).unwrap();
    let res = solve_ground_state(&basis, &ham, &SolverOptions::default()).unwrap();
    assert!((res.energy - oracle.ground_energy).abs() < 1e-9);
    // strict sub-bases stay above the exact energy
    for seed in 0..10 {
        let sub = random_subset(&oracle.configs, 20, seed);
        let b = SubspaceBasis::build(sub, &ham).unwrap();
        let r = solve_ground_state(&b, &ham, &SolverOptions::default()).unwrap();
        assert!(r.energy >= oracle.ground_energy - 1e-9);
    }
}

#[test]
fn davidson_matches_dense_path() {
    let spec = SystemSpec::new(8, 4, 4).unwrap();
    let ham = random_hamiltonian(&spec, 12);
    let all = enumerate_all_configurations(&spec, 100_000).unwrap();
    let basis = SubspaceBasis::build(random_subset(&all, 1200, 3), &ham).unwrap();
    let davidson = solve_ground_state(&basis, &ham, &SolverOptions::default()).unwrap();
    let dense_opts = SolverOptions { dense_threshold: 5000, ..SolverOptions::default() };
    let dense = solve_ground_state(&basis, &ham, &dense_opts).unwrap();
    assert!(davidson.iterations > 0);
    assert!(davidson.residual_norm <= 1e-8);
    assert!((davidson.energy - dense.energy).abs() < 1e-9);
    assert!((davidson.vector.norm() - 1.0).abs() < 1e-12);
    let overlap: f64 = davidson.vector.coeffs().iter().zip(dense.vector.coeffs()).map(|(a, b)| a * b).sum();
    assert!(overlap > 1.0 - 1e-8);
}

#[test]
fn davidson_reports_non_convergence() {
    let spec = SystemSpec::new(8, 4, 4).unwrap();
    let ham = random_hamiltonian(&spec, 12);
    let all = enumerate_all_configurations(&spec, 100_000).unwrap();
    let basis = SubspaceBasis::build(random_subset(&all, 800, 3), &ham).unwrap();
    let opts = SolverOptions { max_iterations: 2, ..SolverOptions::default() };
    match solve_ground_state(&basis, &ham, &opts) {
        Err(err @ SbdError::NoConvergence(_)) => {
            let best = err.best_iterate().unwrap();
            assert!(!best.converged);
            assert!(best.residual_norm > 1e-8);
        }
        other => panic!("expected NoConvergence, got {other:?}"),
    }
}

#[test]
fn extend_two_orbital_example() {
    let spec = SystemSpec::new(2, 1, 1).unwrap();
    let ham = random_hamiltonian(&spec, 1);
    let basis = SubspaceBasis::build([cfg("10", "10")], &ham).unwrap();
    let ext = extend_basis(&basis, &ham, &ExtendOptions::default());
    assert_eq!(ext, vec![cfg("10", "10"), cfg("10", "01"), cfg("01", "10")]);
}

#[test]
fn extend_fixed_point_and_brute_force() {
    let spec = SystemSpec::new(6, 3, 3).unwrap();
    let ham = random_hamiltonian(&spec, 6);
    let all = enumerate_all_configurations(&spec, 1000).unwrap();
    let full = SubspaceBasis::build(all.clone(), &ham).unwrap();
    assert_eq!(extend_basis(&full, &ham, &ExtendOptions::default()), all);
    for seed in 0..5 {
        let subset = random_subset(&all, 50, seed);
        let basis = SubspaceBasis::build(subset.clone(), &ham).unwrap();
        let ext = extend_basis(&basis, &ham, &ExtendOptions::default());
        let brute: Vec<_> = all.iter().copied().filter(|y| subset.iter().any(|x| x.hamming(y) <= 2)).collect();
        assert_eq!(ext, brute);
    }
}

#[test]
fn screened_extension_drops_weak_partners() {
    let spec = SystemSpec::new(6, 3, 3).unwrap();
    let ham = random_hamiltonian(&spec, 6);
    let all = enumerate_all_configurations(&spec, 1000).unwrap();
    let basis = SubspaceBasis::build(random_subset(&all, 20, 1), &ham).unwrap();
    let unscreened = extend_basis(&basis, &ham, &ExtendOptions::default());
    let screened = extend_basis(&basis, &ham, &ExtendOptions { screen: 0.05 });
    assert!(screened.len() < unscreened.len());
    assert!(basis.configs().iter().all(|c| screened.contains(c)));
}

#[test]
fn trim_examples() {
    let spec = SystemSpec::new(4, 1, 1).unwrap();
    let ham = random_hamiltonian(&spec, 1);
    let configs = vec![cfg("1000", "1000"), cfg("1000", "0100"), cfg("1000", "0010"), cfg("1000", "0001")];
    let basis = SubspaceBasis::build(configs.clone(), &ham).unwrap();
    let v = SubspaceVector::new(vec![0.8, 0.5, 0.3, 0.1]);
    assert_eq!(trim_by_amplitude(&basis, &v, Keep::TopPercent(50.0)), configs[..2].to_vec());
    assert_eq!(trim_by_amplitude(&basis, &v, Keep::TopPercent(100.0)), configs);
    let ties = SubspaceVector::new(vec![0.1, -0.5, 0.5, 0.1]);
    assert_eq!(trim_by_amplitude(&basis, &ties, Keep::TopPercent(25.0)), vec![configs[1]]);
    assert_eq!(trim_by_amplitude(&basis, &ties, Keep::TopPercent(75.0)), configs[..3].to_vec());
    let tiny = SubspaceVector::new(vec![0.9, 5e-6, -5.0000001e-6, 1e-7]);
    assert_eq!(trim_by_amplitude(&basis, &tiny, Keep::Threshold(5e-6)), vec![configs[0], configs[2]]);
}

#[test]
fn top_count_rounding() {
    assert_eq!(top_count(10.0, 30), 3);
    assert_eq!(top_count(10.0, 31), 4);
    assert_eq!(top_count(50.0, 1), 1);
    assert_eq!(top_count(100.0, 7), 7);
    assert_eq!(top_count(0.001, 7), 1);
}

#[test]
fn snapshot_round_trip() {
    let spec = SystemSpec::new(4, 2, 2).unwrap();
    let ham = random_hamiltonian(&spec, 3);
    let all = enumerate_all_configurations(&spec, 100).unwrap();
    let basis = SubspaceBasis::build(all, &ham).unwrap();
    let v = SubspaceVector::new(random_vector(basis.len(), 4));
    let mut buf = Vec::new();
    write_snapshot(&basis, &v, &mut buf).unwrap();
    let back = read_snapshot(buf.as_slice()).unwrap();
    assert_eq!(back.len(), basis.len());
    for ((c, x), (c0, x0)) in back.iter().zip(basis.configs().iter().zip(v.coeffs())) {
        assert_eq!(c, c0);
        assert_eq!(x.to_bits(), x0.to_bits());
    }
    assert!(matches!(read_snapshot("1100 0011\n".as_bytes()), Err(SbdError::Parse { line: 1, .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matvec_operator_is_symmetric(seed in 0u64..1000, size in 5usize..200) {
        let spec = SystemSpec::new(6, 3, 2).unwrap();
        let ham = random_hamiltonian(&spec, seed);
        let all = enumerate_all_configurations(&spec, 1000).unwrap();
        let basis = SubspaceBasis::build(random_subset(&all, size, seed), &ham).unwrap();
        let u = random_vector(basis.len(), seed + 1);
        let v = random_vector(basis.len(), seed + 2);
        let hu = apply_hamiltonian(&basis, &ham, &u);
        let hv = apply_hamiltonian(&basis, &ham, &v);
        let a: f64 = u.iter().zip(&hv).map(|(x, y)| x * y).sum();
        let b: f64 = hu.iter().zip(&v).map(|(x, y)| x * y).sum();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn nested_bases_are_variational(seed in 0u64..1000, small in 10usize..100, extra in 1usize..200) {
        let spec = SystemSpec::new(6, 3, 3).unwrap();
        let ham = random_hamiltonian(&spec, seed);
        let all = enumerate_all_configurations(&spec, 1000).unwrap();
        let big = random_subset(&all, small + extra, seed);
        let sub = random_subset(&big, small, seed + 7);
        let opts = SolverOptions::default();
        let e_small = solve_ground_state(&SubspaceBasis::build(sub, &ham).unwrap(), &ham, &opts).unwrap().energy;
        let e_big = solve_ground_state(&SubspaceBasis::build(big, &ham).unwrap(), &ham, &opts).unwrap().energy;
        prop_assert!(e_small >= e_big - 2.0 * opts.tol);
    }

    #[test]
    fn extension_is_superset_of_distance_two(seed in 0u64..1000, size in 1usize..40) {
        let spec = SystemSpec::new(5, 2, 2).unwrap();
        let ham = random_hamiltonian(&spec, seed);
        let all = enumerate_all_configurations(&spec, 1000).unwrap();
        let basis = SubspaceBasis::build(random_subset(&all, size, seed), &ham).unwrap();
        let ext = extend_basis(&basis, &ham, &ExtendOptions::default());
        for c in basis.configs() {
            prop_assert!(ext.binary_search(c).is_ok());
        }
        for y in &ext {
            if !basis.contains(y) {
                prop_assert!(basis.configs().iter().any(|x| x.hamming(y) == 2));
            }
            prop_assert!(y.is_valid_for(&spec));
        }
    }
}
