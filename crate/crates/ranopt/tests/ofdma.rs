use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ranopt::harness::{ch4_network, Ch4Params};
use ranopt::linalg::Matrix;
use ranopt::ofdma::*;

fn small_params(seed: u64) -> Ch4Params {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Ch4Params::default();
    p.n_sub = rng.gen_range(2..=4);
    p.network.n_femto = 2;
    p.network.fue_min = 1;
    p.network.fue_max = 2;
    p.network.n_mue = 1;
    p.ofdma.qam_femto = 4;
    p
}

fn uplink_sinr(net: &OfdmaNetwork, plan: &SubchannelPlan, serving: &[usize], i: usize, n: usize) -> f64 {
    let b = serving[i];
    let interference: f64 = (0..net.n_users())
        .filter(|&j| j != i && plan.assign[j][n])
        .map(|j| plan.power[j][n] * net.gains[b][j][n])
        .sum();
    plan.power[i][n] * net.gains[b][i][n] / (interference + net.noise)
}

fn check_outcome(net: &OfdmaNetwork, o: &OfdmaOutcome, params: &OfdmaParams) {
    assert!(exclusivity_holds(&o.plan.assign, &o.serving, net.n_sub));
    let t_m = qam_target_sinr(params.qam_macro, params.modulation.ber).unwrap();
    for i in 0..net.n_users() {
        let total: f64 = o.plan.power[i].iter().sum();
        assert!(total <= net.user_p_max[i] * (1.0 + 1e-9), "user {i} spends {total}");
        if net.is_macro_user(i) {
            for n in o.plan.subchannels_of(i) {
                let s = uplink_sinr(net, &o.plan, &o.serving, i, n);
                assert!(s >= t_m * (1.0 - 1e-9), "macro user {i} on {n}: {s} < {t_m}");
            }
        }
    }
    for w in o.trace.windows(2) {
        assert!(w[1].objective <= w[0].objective + 1e-12);
    }
}

fn random_system(rng: &mut ChaCha8Rng) -> (Matrix, Vec<f64>) {
    let m = rng.gen_range(1..=4);
    let scale = rng.gen_range(0.05..0.8);
    let data: Vec<f64> = (0..m * m).map(|k| if k % (m + 1) == 0 { 0.0 } else { scale * rng.gen::<f64>() }).collect();
    let g = (0..m).map(|_| rng.gen_range(0.01..1.0)).collect();
    (Matrix::new(m, m, data).unwrap(), g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn fixed_point_iteration_matches_direct_solution(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (gh, g) = random_system(&mut rng);
        let m = g.len();
        let a = DMatrix::identity(m, m) - DMatrix::from_row_slice(m, m, gh.as_slice());
        let oracle = a.lu().solve(&DVector::from_vec(g.clone()));
        let feasible = oracle.as_ref().map_or(false, |p| p.iter().all(|&v| v > 0.0));
        match foschini_miljanic(&gh, &g, 1e-13, 100_000).unwrap() {
            FmOutcome::Converged { powers, .. } => {
                prop_assert!(feasible);
                let p = oracle.unwrap();
                for k in 0..m {
                    prop_assert!((powers[k] - p[k]).abs() <= 1e-8 * p[k].max(1.0));
                }
            }
            FmOutcome::Diverged { .. } => prop_assert!(!feasible),
            FmOutcome::NotConverged { .. } => prop_assert!(false, "no verdict"),
        }
    }
}

#[test]
fn pareto_powers_are_dominated_by_every_feasible_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 300 {
        let (gh, g) = random_system(&mut rng);
        let m = g.len();
        let Ok(FmOutcome::Converged { powers, .. }) = foschini_miljanic(&gh, &g, 1e-14, 100_000) else { continue };
        checked += 1;
        for _ in 0..20 {
            let p: Vec<f64> = powers.iter().map(|&v| v * rng.gen_range(0.5..3.0)).collect();
            let need = gh.mul_vec(&p);
            let meets = (0..m).all(|k| p[k] >= need[k] + g[k]);
            if meets {
                assert!((0..m).all(|k| p[k] >= powers[k] * (1.0 - 1e-9)));
            }
        }
    }
}

#[test]
fn small_instances_stay_close_to_exhaustive_optimum() {
    let mut ratios = Vec::new();
    for seed in 1.. {
        if ratios.len() == 20 {
            break;
        }
        let p = small_params(seed);
        let Ok((net, sets)) = ch4_network(&p, seed) else { continue };
        let o = distributed_uplink_alloc(&net, &sets, &p.ofdma).unwrap();
        let (_, best) = exhaustive_optimal(&net, &sets, &p.ofdma).unwrap();
        check_outcome(&net, &o, &p.ofdma);
        assert!(o.objective <= best + 1e-12, "seed {seed}: {} > {best}", o.objective);
        for k in 1..net.n_cells {
            let users = net.users_of(k);
            if users.is_empty() {
                continue;
            }
            let rates: Vec<f64> = users.iter().map(|&i| o.plan.subchannels_of(i).len() as f64).collect();
            if rates.iter().any(|&r| r > 0.0) {
                assert!((fairness_index(&rates).unwrap() - 1.0).abs() <= 1e-12);
            }
        }
        ratios.push(if best > 0.0 { o.objective / best } else { 1.0 });
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(mean >= 0.95, "mean ratio {mean}");
}

#[test]
fn every_method_respects_budgets_and_protects_macro_users() {
    let p = Ch4Params { n_sub: 8, ..Ch4Params::default() };
    for seed in 1..=4 {
        let (net, sets) = ch4_network(&p, seed).unwrap();
        let fixed = distributed_uplink_alloc(&net, &sets, &p.ofdma).unwrap();
        check_outcome(&net, &fixed, &p.ofdma);
        let adaptive = adaptive_rate_alloc(&net, &sets, &p.ofdma).unwrap();
        check_outcome(&net, &adaptive, &p.ofdma);
        let hybrid = hybrid_access_alloc(&net, &sets, &p.ofdma).unwrap();
        assert!(exclusivity_holds(&hybrid.plan.assign, &hybrid.serving, net.n_sub));
        assert!(hybrid.objective >= adaptive.objective);
    }
}

#[test]
fn qam_targets_follow_closed_form() {
    use statrs::distribution::{ContinuousCDF, Normal};
    let z = Normal::new(0.0, 1.0).unwrap();
    for s in [4u32, 16, 64, 256] {
        let sf = f64::from(s);
        let x = 2.0 * (1.0 - 1.0 / sf.sqrt()) / sf.log2();
        let y = 3.0 / (2.0 * (sf - 1.0));
        let q_inv = z.inverse_cdf(1.0 - 1e-3 / x);
        let expected = q_inv * q_inv / y;
        let got = qam_target_sinr(s, 1e-3).unwrap();
        assert!((got - expected).abs() <= 1e-6 * expected, "{s}: {got} vs {expected}");
    }
}
