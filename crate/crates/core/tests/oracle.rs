use lsicert::coupling::{certify_lsi, spectrum, CouplingMatrix};
use lsicert::oracle::{
    duplication_inequality_check, enumerate_gibbs, exact_spectral_gap, ising_spin,
    mixture_identity_check, numeric_lsi_upper_bound, ordering_check, random_coupling,
    standard_duplication_fields, ORDERING_TOL,
};
use lsicert::rng;
use proptest::prelude::*;

fn zero(size: usize) -> CouplingMatrix {
    CouplingMatrix::from_rows(&vec![vec![0.0; size]; size]).unwrap()
}

/// Two-point symmetric law, brute force: minimise D(f)/var(f) over f = (1, t) on a grid.
fn two_point_gap_by_scan() -> f64 {
    let mut best = f64::INFINITY;
    for i in -2000..=2000 {
        let t = i as f64 * 0.01;
        if (t - 1.0).abs() < 1e-9 {
            continue;
        }
        let d = 0.5 * (1.0 - t).powi(2) + 0.5 * (t - 1.0).powi(2);
        let mean = 0.5 * (1.0 + t);
        let var = 0.5 * (1.0 - mean).powi(2) + 0.5 * (t - mean).powi(2);
        best = best.min(d / var);
    }
    best
}

/// Same law: minimise 2 D(f)/ent(f²) over f = (1, e^s), s on a grid away from 0.
fn two_point_lsi_by_scan() -> f64 {
    let mut best = f64::INFINITY;
    for i in 1..=4000 {
        for sign in [-1.0, 1.0] {
            let s = sign * i as f64 * 1e-3;
            let (a, b) = (1.0f64, s.exp());
            let d = (a - b).powi(2);
            let z = 0.5 * (a * a + b * b);
            let ent = 0.5 * a * a * (a * a).ln() + 0.5 * b * b * (b * b).ln() - z * z.ln();
            best = best.min(2.0 * d / ent);
        }
    }
    best
}

#[test]
fn single_free_spin_gap() {
    let scanned = two_point_gap_by_scan();
    assert!((scanned - 4.0).abs() < 1e-12, "{scanned}");
    let gap = exact_spectral_gap(&enumerate_gibbs(&zero(1)).unwrap()).unwrap();
    assert!((gap - 4.0).abs() < 1e-12, "{gap}");
}

#[test]
fn gap_tensorizes_over_free_sites() {
    let g1 = exact_spectral_gap(&enumerate_gibbs(&zero(1)).unwrap()).unwrap();
    for size in 2..=3 {
        let g = exact_spectral_gap(&enumerate_gibbs(&zero(size)).unwrap()).unwrap();
        assert!((g - g1).abs() < 1e-10, "N = {size}: {g}");
    }
}

#[test]
fn single_free_spin_lsi_rate() {
    let scanned = two_point_lsi_by_scan();
    // The quotient only approaches its infimum as f becomes constant.
    assert!(scanned > 4.0 && scanned < 4.0 + 1e-4, "{scanned}");
    let report = numeric_lsi_upper_bound(&enumerate_gibbs(&zero(1)).unwrap(), 10, 1).unwrap();
    assert!(report.rate <= scanned + 1e-9);
    assert!((report.rate - 4.0).abs() < 1e-6, "{report:?}");
    let cert = certify_lsi(&zero(1), 1, 4.0).unwrap();
    assert!((cert.certified_lsi_rate.unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn ordering_chain_on_coupled_pairs() {
    for a in [0.1, 0.3, -0.45] {
        let m = CouplingMatrix::from_rows(&[vec![0.0, a], vec![a, 0.0]]).unwrap();
        let chain = enumerate_gibbs(&m).unwrap();
        let gap = exact_spectral_gap(&chain).unwrap();
        let lsi = numeric_lsi_upper_bound(&chain, 20, 2).unwrap();
        let cert = certify_lsi(&m, 1, 4.0).unwrap().certified_lsi_rate.unwrap();
        assert!(cert <= lsi.rate + 1e-6, "a = {a}: {cert} vs {}", lsi.rate);
        assert!(lsi.rate <= gap + 1e-6);
    }
}

#[test]
fn lsi_search_reports_its_minimiser() {
    let m = CouplingMatrix::from_rows(&[vec![0.0, -2.0], vec![-2.0, 0.0]]).unwrap();
    let chain = enumerate_gibbs(&m).unwrap();
    let report = numeric_lsi_upper_bound(&chain, 20, 3).unwrap();
    assert!(report.rate <= report.linearized_limit + 1e-12);
    assert!(report.converged_restarts > 0);
    let f = &report.best_f;
    let direct = 2.0 * chain.dirichlet_form(f) / chain.entropy_of_square(f);
    assert!((direct - report.search_minimum).abs() < 1e-8 * direct);
}

#[test]
fn mixture_identity_on_a_pair() {
    let m = CouplingMatrix::from_rows(&[vec![0.0, 0.3], vec![0.3, 0.0]]).unwrap();
    let report = mixture_identity_check(&m, 0.8, 200_000, 5).unwrap();
    let pair = report
        .observables
        .iter()
        .find(|o| o.name == "sigma0Sigma1")
        .unwrap();
    let exact = (-0.3f64).exp() / ((-0.3f64).exp() + 0.3f64.exp()) * 2.0 - 1.0;
    assert!((pair.exact - exact).abs() < 1e-14);
    assert!(report.pass, "{report:#?}");
    let one = report.observables.iter().find(|o| o.name == "one").unwrap();
    assert_eq!((one.exact, one.estimate), (1.0, 1.0));
}

#[test]
fn mixture_identity_free_spins() {
    let report = mixture_identity_check(&zero(3), 0.5, 100_000, 6).unwrap();
    let mag = report
        .observables
        .iter()
        .find(|o| o.name == "magnetization")
        .unwrap();
    assert!(mag.exact.abs() < 1e-15);
    assert!(report.pass, "{report:#?}");
}

#[test]
fn duplication_inequality_standard_battery() {
    let r = duplication_inequality_check(&standard_duplication_fields(), 1000, 9);
    assert_eq!(r.evaluations, 20_000);
    assert_eq!(r.violations, 0);
    assert!(r.max_ratio <= 0.5 + 1e-12, "{}", r.max_ratio);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gibbs_law_is_normalised_and_spin_flip_symmetric(
        size in 1usize..6,
        raw in proptest::collection::vec(-1.0f64..1.0, 36),
    ) {
        let mut rows = vec![vec![0.0; size]; size];
        for x in 0..size {
            for y in 0..x {
                rows[x][y] = raw[x * 6 + y];
                rows[y][x] = raw[x * 6 + y];
            }
        }
        let m = CouplingMatrix::from_rows(&rows).unwrap();
        let chain = enumerate_gibbs(&m).unwrap();
        let total: f64 = chain.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        // No external field: flipping every spin preserves the weight.
        let all = (1 << size) - 1;
        for s in 0..chain.states() {
            prop_assert!((chain.probabilities()[s] - chain.probabilities()[s ^ all]).abs() < 1e-14);
        }
        prop_assert!(chain.expectation(|s| ising_spin(s, 0)).abs() < 1e-14);
        prop_assert!(exact_spectral_gap(&chain).unwrap() > 0.0);
    }
}

#[test]
fn random_corpus_instances_satisfy_the_ordering() {
    for k in 0..4 {
        let mut r = rng::stream(99, "corpus", k);
        let m = random_coupling(3 + k as usize, 0.6, &mut r).unwrap();
        assert!((spectrum(&m).unwrap().span() - 0.6).abs() < 1e-12);
        let report = ordering_check(&m, 4.0, 8, k).unwrap();
        assert!(report.holds, "{report:?}");
        assert!(report.certified_rate.unwrap() <= report.lsi.rate + ORDERING_TOL);
    }
}
