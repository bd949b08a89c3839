use fdsic::cancellation::{self, residual_power_theoretical};
use fdsic::estimator::{self, assemble_bc, optimal_v, EstimatorStatistics};
use fdsic::impairments::{self, exponential_pdp, pn_covariance_table, OscillatorMode, WienerOscillator};
use fdsic::linalg;
use fdsic::ofdm;
use fdsic::validation;
use fdsic::{CMatrix, CVector};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn real_embedding_equals_complex_normal_equations(
        seed in any::<u64>(),
        size in prop::sample::select(vec![4usize, 8, 16]),
        noise in 0.05f64..2.0,
        soi in 0.0f64..5.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bundle = validation::random_bundle(size, noise, soi, &mut rng).unwrap();
        let real = optimal_v(&bundle).unwrap();
        let complex = validation::complex_stationary_point(&bundle).unwrap();
        prop_assert!(linalg::max_abs_diff(&real.v, &complex) < 1e-8);
        prop_assert!(real.f_star.iter().all(|f| *f <= 0.0));

        // residual at the optimum is nonnegative and equals the closed form
        let tr_a = linalg::trace_re(&bundle.a);
        let floor = size as f64 * noise;
        prop_assert!(real.f_star_sum() >= -(tr_a + floor));
        let direct = residual_power_theoretical(&bundle.a, &real.v, noise, soi);
        let closed = floor + tr_a + real.f_star_sum();
        prop_assert!((direct / closed - 1.0).abs() < 1e-6);
    }

    #[test]
    fn phi_is_spd_for_hermitian_pd_c(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bundle = validation::random_bundle(8, 0.3, 0.2, &mut rng).unwrap();
        let phi = estimator::real_embedding(&bundle.c);
        prop_assert!((&phi - phi.transpose()).amax() < 1e-12);
        // dense eigensolver oracle: Φ's spectrum is C's, each twice
        let min_phi = phi.symmetric_eigenvalues().min();
        let min_c = bundle.c.symmetric_eigenvalues().min();
        prop_assert!(min_phi > 0.0);
        prop_assert!((min_phi - min_c).abs() < 1e-9 * min_c.abs().max(1.0));
    }
}

#[test]
fn qp_solver_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = DMatrix::from_fn(16, 16, |_, _| rand::Rng::random::<f64>(&mut rng) - 0.5);
    let phi = &g * g.transpose() + DMatrix::identity(16, 16) * 0.1;
    let b = nalgebra::DVector::from_fn(16, |_, _| rand::Rng::random::<f64>(&mut rng));
    let (v, f) = estimator::solve_qp(phi.clone(), &b).unwrap();
    let oracle = phi.clone().lu().solve(&b).unwrap();
    assert!((&v - &oracle).amax() < 1e-9);
    assert!((f + b.dot(&oracle)).abs() < 1e-9);
}

fn scenario_stats(
    table: &fdsic::impairments::PnCovarianceTable,
    symbols: CVector,
    noise: f64,
    soi: f64,
) -> EstimatorStatistics<'_> {
    EstimatorStatistics {
        symbols,
        phase_noise: table,
        pdp: exponential_pdp(4, 4.0, 50.0),
        n_tx: 4,
        noise_power: noise,
        soi_power: soi,
    }
}

#[test]
fn optimum_beats_simple_competitors() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in [4usize, 8, 16] {
        let dft = ofdm::build_dft_matrix(n, 4.min(n)).unwrap();
        for delta_f in [0.0, 1e-3, 0.1] {
            let table = pn_covariance_table(delta_f, n, OscillatorMode::PerAntenna).unwrap();
            for _ in 0..10 {
                let x = ofdm::gen_bpsk_symbols(n, 1.0, &mut rng).unwrap();
                let stats = scenario_stats(&table, x.clone(), 1.0, 10.0);
                let a = estimator::assemble_a(&stats).unwrap();
                let bundle = assemble_bc(a.clone(), 1.0, 10.0).unwrap();
                let opt = optimal_v(&bundle).unwrap();
                let best = residual_power_theoretical(&a, &opt.v, 1.0, 10.0);
                let closed = n as f64 + linalg::trace_re(&a) + opt.f_star_sum();
                assert!((best / closed - 1.0).abs() < 1e-6);
                for competitor in [
                    CMatrix::zeros(n, n),
                    CMatrix::identity(n, n),
                    estimator::ls_v(&x, &dft).unwrap(),
                ] {
                    let other = residual_power_theoretical(&a, &competitor, 1.0, 10.0);
                    assert!(best <= other * (1.0 + 1e-12), "{best} > {other}");
                }
            }
        }
    }
}

#[test]
fn minimum_residual_grows_with_soi_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 16;
    let table = pn_covariance_table(1e-2, n, OscillatorMode::PerAntenna).unwrap();
    let x = ofdm::gen_bpsk_symbols(n, 1.0, &mut rng).unwrap();
    let a = estimator::assemble_a(&scenario_stats(&table, x, 1.0, 0.0)).unwrap();
    let mut previous = 0.0;
    for soi in [0.0, 0.1, 1.0, 3.0, 10.0, 100.0, 1e4] {
        let opt = optimal_v(&assemble_bc(a.clone(), 1.0, soi).unwrap()).unwrap();
        let minimum = n as f64 + linalg::trace_re(&a) + opt.f_star_sum();
        assert!(minimum >= previous - 1e-9 * minimum, "{minimum} < {previous}");
        previous = minimum;
    }
}

#[test]
fn singular_c_is_reported() {
    // rank-deficient A with no noise or SoI
    let a = CMatrix::from_fn(4, 4, |_, _| fdsic::C64::new(1.0, 0.0));
    let bundle = assemble_bc(a, 0.0, 0.0).unwrap();
    assert!(matches!(optimal_v(&bundle), Err(fdsic::Error::SingularMatrix(_))));
}

/// Monte Carlo mean of ‖r‖² for fixed X against the closed form, for the
/// optimal and LS weights.
fn residual_monte_carlo(n: usize, trials: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (l, n_tx, noise, soi, delta_f) = (4, 4, 1.0, 10.0, 1e-2);
    let pdp = exponential_pdp(l, 4.0, 1e4 * n as f64 / (n as f64 * n_tx as f64));
    let dft = ofdm::build_dft_matrix(n, l).unwrap();
    let full = ofdm::build_dft_matrix(n, n).unwrap();
    let x = ofdm::gen_bpsk_symbols(n, 1.0, &mut rng).unwrap();
    let table = pn_covariance_table(delta_f, n, OscillatorMode::PerAntenna).unwrap();
    let stats = EstimatorStatistics {
        symbols: x.clone(),
        phase_noise: &table,
        pdp: pdp.clone(),
        n_tx,
        noise_power: noise,
        soi_power: soi,
    };
    let solution = estimator::optimal_estimator(&stats, &full).unwrap();
    let w_ls = estimator::ls_weight(&x, &dft).unwrap();
    let v_ls = estimator::ls_v(&x, &dft).unwrap();

    let mut acc_opt = 0.0;
    let mut acc_ls = 0.0;
    for _ in 0..trials {
        let ch = impairments::gen_si_channel(n_tx, l, &pdp, &mut rng).unwrap();
        let tx: Vec<_> = (0..n_tx)
            .map(|_| WienerOscillator::new(delta_f, n, 0.0).unwrap().advance(n, &mut rng).unwrap())
            .collect();
        let rx = WienerOscillator::new(delta_f, n, 0.0).unwrap().advance(n, &mut rng).unwrap();
        let r = impairments::synthesize_received(&x, &ch, &tx, &rx, soi, noise, &dft, &mut rng).unwrap();

        let h_opt = solution.estimate(&r.y).unwrap();
        let y_opt = cancellation::reconstruct_si(&x, &full, &h_opt).unwrap();
        let resid = (cancellation::cancel(&r.y, &y_opt).unwrap() - &r.y_soi).norm_squared();
        acc_opt += resid;

        let y_ls = cancellation::reconstruct_si(&x, &dft, &(&w_ls * &r.y)).unwrap();
        acc_ls += (cancellation::cancel(&r.y, &y_ls).unwrap() - &r.y_soi).norm_squared();
    }
    let mean_opt = acc_opt / trials as f64;
    let mean_ls = acc_ls / trials as f64;
    let theo_opt = residual_power_theoretical(&solution.bundle.a, &solution.v, noise, soi);
    let theo_ls = residual_power_theoretical(&solution.bundle.a, &v_ls, noise, soi);
    assert!((mean_opt / theo_opt - 1.0).abs() < 0.03, "N={n} optimal {mean_opt} vs {theo_opt}");
    assert!((mean_ls / theo_ls - 1.0).abs() < 0.03, "N={n} LS {mean_ls} vs {theo_ls}");

    // ability from empirical vs theoretical powers
    let e_i = cancellation::si_power(1.0, &pdp, n_tx, n);
    let floor = n as f64 * noise;
    let g_emp = cancellation::cancellation_ability(e_i, floor, mean_opt).db;
    let g_theo = cancellation::cancellation_ability(e_i, floor, theo_opt).db;
    assert!((g_emp - g_theo).abs() < 0.5);
}

#[test]
fn residual_power_matches_simulation_n16() {
    residual_monte_carlo(16, 10_000, 8);
}

#[test]
fn residual_power_matches_simulation_n32() {
    residual_monte_carlo(32, 10_000, 9);
}
