use nalgebra::DMatrix;
use nesh_core::dos::{self, DosInterval, DosTrace};
use nesh_core::game::{default_game, default_initial_actions, GameSpec};
use nesh_core::sampling::{random_game, random_topology};
use nesh_core::topology::{spectral_norm, symmetric_spectral_radius, Topology};
use nesh_core::tuner::{self, Bounds};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn game_strategy() -> impl Strategy<Value = GameSpec> {
    (2usize..7, any::<u64>()).prop_map(|(n, seed)| random_game(&mut ChaCha8Rng::seed_from_u64(seed), n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn equilibrium_is_stationary(game in game_strategy()) {
        let x = game.solve_ne().unwrap();
        let p = game.pseudogradient(&x).unwrap();
        prop_assert!(p.iter().all(|v| v.abs() <= 1e-10), "{p:?}");
    }

    #[test]
    fn monotone_and_lipschitz(game in game_strategy(), seed in any::<u64>()) {
        let n = game.n_players();
        let c = game.constants();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let px = game.pseudogradient(&x).unwrap();
            let pz = game.pseudogradient(&z).unwrap();
            let d2: f64 = x.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum();
            let inner: f64 = (0..n).map(|i| (x[i] - z[i]) * (px[i] - pz[i])).sum();
            prop_assert!(inner >= c.monotonicity_mu * d2 - 1e-9 * d2.max(1.0));
            for i in 0..n {
                prop_assert!((px[i] - pz[i]).abs() <= c.lipschitz_l * d2.sqrt() + 1e-9);
            }
        }
    }

    #[test]
    fn exact_estimates_reduce_to_pseudogradient(game in game_strategy(), seed in any::<u64>()) {
        let n = game.n_players();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let est: Vec<f64> = (0..n).flat_map(|_| x.clone()).collect();
        let a = game.mixed_pseudogradient(&x, &est).unwrap();
        let b = game.pseudogradient(&x).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
    }

    #[test]
    fn delta_selection_invariants(game in game_strategy(), seed in any::<u64>()) {
        let n = game.n_players();
        let topo = random_topology(&mut ChaCha8Rng::seed_from_u64(seed), n, 0.3).unwrap();
        let c = game.constants();
        let h = 0.99 * topo.h_max();
        let norm_h = topo.build_matrices(h).unwrap().norms().h;
        let (l, mu) = (c.lipschitz_l, c.monotonicity_mu);
        let d = tuner::select_delta(norm_h, l, mu, n).unwrap();
        prop_assert!(tuner::delta_feasible(d, norm_h, l, mu, n));
        prop_assert!(tuner::b_margin(d, norm_h, l, mu, n) > 0.0);
        let hb = tuner::hbar(norm_h, d, l, mu, n).unwrap();
        prop_assert!((nalgebra::Matrix2::identity() - hb).determinant() > 0.0);
        let rho = tuner::rho_hbar(norm_h, d, l, mu, n).unwrap();
        prop_assert!(rho < 1.0);

        // no random feasible step size does better
        let upper = (2.0 * mu / (l * l)).min((1.0 - norm_h) / (l * (n as f64).sqrt()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        for _ in 0..100 {
            let probe = upper * rng.gen_range(0.0..1.0);
            if tuner::delta_feasible(probe, norm_h, l, mu, n) {
                prop_assert!(rho <= tuner::rho_hbar(norm_h, probe, l, mu, n).unwrap() + 1e-12);
            }
        }
    }
}

#[test]
fn spectral_norm_matches_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let a = DMatrix::<f64>::from_fn(10, 10, |_, _| rng.gen_range(-1.0..1.0));
        let sym = &a + a.transpose();
        // power iteration on sym^2 converges to the largest |eigenvalue|^2
        let sq = &sym * &sym;
        let mut v = nalgebra::DVector::<f64>::from_fn(10, |i, _| 1.0 + i as f64 * 0.1);
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let w = &sq * &v;
            lambda = w.norm() / v.norm();
            v = w.normalize();
        }
        let oracle = lambda.sqrt();
        let got = spectral_norm(&sym).unwrap();
        assert!((got - oracle).abs() <= 1e-8 * oracle, "{got} vs {oracle}");
        assert!((symmetric_spectral_radius(&sym) - got).abs() <= 1e-10 * got);
    }
}

#[test]
fn gain_bound_sound_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.gen_range(2..=8);
        let extra = rng.gen_range(0.0..1.0);
        let topo = random_topology(&mut rng, n, extra).unwrap();
        let m = topo.build_matrices(0.99 * topo.h_max()).unwrap();
        assert!(symmetric_spectral_radius(&m.h_matrix) < 1.0);
        assert!((spectral_norm(&m.h_matrix).unwrap() - symmetric_spectral_radius(&m.h_matrix)).abs() < 1e-10);
    }
}

#[test]
fn hbar_power_norm_matches_decay() {
    let game = default_game();
    let topo = Topology::cycle(5).unwrap();
    let bounds = Bounds::from_data(&default_initial_actions(), &game.solve_ne().unwrap(), 0.1);
    let s = tuner::synthesize(&game, &topo, &bounds).unwrap();
    let c = s.constants;
    let hb = tuner::hbar(s.norms.h, s.params.delta, c.lipschitz_l, c.monotonicity_mu, 5).unwrap();
    let scaled = DMatrix::from_column_slice(2, 2, hb.as_slice()) / s.params.gamma1;
    let mut power = DMatrix::<f64>::identity(2, 2);
    for k in 1..=50 {
        power = &power * &scaled;
        let norm = spectral_norm(&power).unwrap();
        assert!(norm <= s.params.gamma_decay.powi(k) * (1.0 + 1e-9), "k = {k}");
    }
    assert_eq!(s.params.c_gamma, 1.0);
}

#[test]
fn levels_are_minimal() {
    let game = default_game();
    let topo = Topology::cycle(5).unwrap();
    let bounds = Bounds::from_data(&default_initial_actions(), &game.solve_ne().unwrap(), 0.1);
    let s = tuner::synthesize(&game, &topo, &bounds).unwrap();
    let lv = s.levels;
    let holds = |r: u64, a: f64| (2 * r + 1) as f64 / 2.0 >= a;
    assert!(holds(lv.r_x, lv.a_x) && holds(lv.r_y, lv.a_y));
    assert!(lv.r_x == 1 || !holds(lv.r_x - 1, lv.a_x));
    assert!(lv.r_y == 1 || !holds(lv.r_y - 1, lv.a_y));
}

#[test]
fn bound_and_levels_monotone() {
    let game = default_game();
    let topo = Topology::cycle(5).unwrap();
    let x_star = game.solve_ne().unwrap();
    let x0 = default_initial_actions();

    // larger margin: gamma1 closer to one, smaller C and smaller levels
    let mut prev: Option<(f64, u64, u64, f64)> = None;
    for margin in [0.02, 0.05, 0.1, 0.3, 0.6, 0.9] {
        let s = tuner::synthesize(&game, &topo, &Bounds::from_data(&x0, &x_star, margin)).unwrap();
        let p = s.params;
        if let Some((c, rx, ry, g)) = prev {
            assert!(p.c_bound <= c && p.r_x <= rx && p.r_y <= ry && p.gamma1 > g);
        }
        prev = Some((p.c_bound, p.r_x, p.r_y, p.gamma1));
    }

    // doubling C weakly increases both levels
    let s = tuner::synthesize(&game, &topo, &Bounds::from_data(&x0, &x_star, 0.1)).unwrap();
    let c = s.constants;
    let p = s.params;
    let a = tuner::required_r(p.c_bound, p.gamma1, p.delta, c.lipschitz_l, p.h, &s.norms, 5).unwrap();
    let b = tuner::required_r(2.0 * p.c_bound, p.gamma1, p.delta, c.lipschitz_l, p.h, &s.norms, 5).unwrap();
    assert!(b.r_x >= a.r_x && b.r_y >= a.r_y);
}

#[test]
fn certify_is_monotone_in_intervals() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for seed in 0..30 {
        let base = dos::generate(0.6, 3.0, 60.0, seed).unwrap();
        let p = base.certify(4.0, 1.5, 0.05).unwrap();
        let mut raw = base.intervals().to_vec();
        raw.push(DosInterval { start: rng.gen_range(0.0..60.0), duration: rng.gen_range(0.0..2.0) });
        let bigger = DosTrace::new(raw, 60.0).unwrap();
        let q = bigger.certify(4.0, 1.5, 0.05).unwrap();
        // merging can reduce the interval count, so only the measure is monotone in general
        assert!(q.kappa >= p.kappa - 1e-12);
        if bigger.n_transitions() > base.n_transitions() {
            assert!(q.eta >= p.eta - 1e-12);
        }
    }
}

#[test]
fn successful_transmission_bound_small_sweep() {
    let delta = 0.01;
    let k_max = 2000;
    for seed in 0..40 {
        let trace = dos::generate(0.5, 0.7, k_max as f64 * delta, seed).unwrap();
        let (tau_d, t) = trace.averaged_params();
        let p = trace.certify(tau_d, t, delta).unwrap();
        let mask = trace.sample_mask(delta, k_max).unwrap();
        let mut count = 0u64;
        for (k, &dos) in mask.iter().enumerate() {
            count += u64::from(!dos);
            assert!(count as f64 >= dos::ts_lower_bound(&p, delta, k as u64).unwrap());
        }
    }
}
