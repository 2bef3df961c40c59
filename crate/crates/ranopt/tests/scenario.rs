use proptest::prelude::*;
use ranopt::scenario::*;

fn hetnet(seed: u64, n_sub: usize, fading: bool) -> Scenario {
    generate_topology(&ScenarioConfig {
        seed,
        n_subchannels: n_sub,
        fading,
        topology: TopologyConfig::Hetnet(HetNetConfig::default()),
    })
    .unwrap()
}

#[test]
fn fading_has_unit_mean() {
    let s = hetnet(3, 1, false);
    let n = 100_000;
    let t = build_channel_tensor(&s, n, true, 11);
    let mean = t[0][0].iter().sum::<f64>() / n as f64 / s.path_gains[0][0];
    assert!((0.99..=1.01).contains(&mean), "mean {mean}");
}

#[test]
fn same_seed_same_tensor_and_instance() {
    assert_eq!(hetnet(5, 4, true), hetnet(5, 4, true));
    assert_ne!(hetnet(5, 4, true).gains, hetnet(6, 4, true).gains);
}

#[test]
fn json_round_trip_is_lossless() {
    let s = hetnet(9, 6, true);
    let text = serde_json::to_string(&s).unwrap();
    let back: Scenario = serde_json::from_str(&text).unwrap();
    assert_eq!(s, back);
}

#[test]
fn csv_dump_is_deterministic() {
    let s = hetnet(2, 2, true);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    s.write_csv(&mut a).unwrap();
    s.write_csv(&mut b).unwrap();
    assert_eq!(a, b);
    assert!(!a.is_empty());
}

#[test]
fn generated_gains_follow_distance_without_fading() {
    let s = hetnet(4, 1, false);
    let model = PathLossModel::macro_default();
    let near = s.user_positions.iter().map(|u| u.dist(&s.bs_positions[0])).fold(f64::INFINITY, f64::min);
    assert!(near > 0.0);
    for row in &s.path_gains {
        assert!(row.iter().all(|&g| g > 0.0 && g.is_finite()));
    }
    let g = path_loss_gain(&model, 100.0, 0).unwrap();
    assert!(g > path_loss_gain(&model, 100.0, 1).unwrap());
}

proptest! {
    #[test]
    fn gain_strictly_decreases_with_distance(
        d1 in 1.0f64..2000.0,
        ratio in 1.0001f64..10.0,
        walls in 0u32..3,
        a in 20.0f64..45.0,
    ) {
        let m = PathLossModel::HetNet { a, b: 30.0, c: 20.0, fc_ghz: 2.5, wall_loss_db: 10.0 };
        prop_assert!(path_loss_gain(&m, d1, walls).unwrap() > path_loss_gain(&m, d1 * ratio, walls).unwrap());
        let c = PathLossModel::Cran { fc_ghz: 2.5 };
        prop_assert!(path_loss_gain(&c, d1, 0).unwrap() > path_loss_gain(&c, d1 * ratio, 0).unwrap());
    }

    #[test]
    fn hetnet_invariants(seed in any::<u64>(), n_femto in 1usize..6, n_mue in 1usize..12) {
        let cfg = HetNetConfig { n_femto, n_mue, ..HetNetConfig::default() };
        let s = generate_topology(&ScenarioConfig {
            seed,
            n_subchannels: 3,
            fading: true,
            topology: TopologyConfig::Hetnet(cfg),
        }).unwrap();
        prop_assert_eq!(s.n_bs(), n_femto + 1);
        prop_assert!(s.noise.iter().all(|&v| v > 0.0));
        prop_assert!(s.max_powers.iter().all(|&v| v > 0.0));
        prop_assert!(s.user_positions.iter().all(|p| p.x.is_finite() && p.y.is_finite()));
        prop_assert!(s.gains.iter().flatten().flatten().all(|&g| g > 0.0 && g.is_finite()));
        prop_assert!(s.home_bs.iter().all(|&b| b < s.n_bs()));
    }
}
