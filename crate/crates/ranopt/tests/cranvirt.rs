use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ranopt::cranvirt::*;

fn chi(model: &ComplexityModel, ch: &PrbChannel, r: f64, b: f64) -> f64 {
    model.effort(r, ch.capacity(b))
}

fn hessian_min_eig(f: impl Fn(f64, f64) -> f64, r: f64, b: f64, h: f64) -> f64 {
    let frr = (f(r + h, b) - 2.0 * f(r, b) + f(r - h, b)) / (h * h);
    let fbb = (f(r, b + h) - 2.0 * f(r, b) + f(r, b - h)) / (h * h);
    let frb = (f(r + h, b + h) - f(r + h, b - h) - f(r - h, b + h) + f(r - h, b - h)) / (4.0 * h * h);
    let mean = 0.5 * (frr + fbb);
    let dev = (0.25 * (frr - fbb).powi(2) + frb * frb).sqrt();
    mean - dev
}

fn two_cell_instance(rng: &mut ChaCha8Rng, prbs: usize) -> OpInstance {
    let cells: Vec<Vec<PrbChannel>> = (0..2)
        .map(|_| (0..prbs).map(|_| PrbChannel::new(1e-12 * 10f64.powf(rng.gen_range(0.3..2.5)), 1e-12).unwrap()).collect())
        .collect();
    let probe = OpInstance::new(cells.clone(), vec![0.0; 2], 0.0, ComplexityModel::default(), default_rate_set()).unwrap();
    let bits = probe.floor_bits().iter().map(|f| f + rng.gen_range(0.5..6.0)).collect();
    let c = probe.floor_effort().max(0.0) + rng.gen_range(0.1..3.0);
    OpInstance::new(cells, bits, c, ComplexityModel::default(), default_rate_set()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn quantized_sinr_respects_lower_bound(log_g in -4.0f64..4.0, extra in 0.0f64..10.0) {
        let i = 1e-12;
        let d = i * 10f64.powf(log_g);
        let b = f64::from(min_quant_bits(d, i)) + extra.floor();
        let bound = (d / i + 1.0).sqrt() - 1.0;
        prop_assert!(sinr_with_quant(d, i, b) >= bound - 1e-12 * bound.max(1.0));
    }

    #[test]
    fn effort_is_convex_along_each_coordinate(
        log_g in 0.0f64..2.5,
        db in 0.0f64..6.0,
        frac in 0.02f64..0.95,
    ) {
        let model = ComplexityModel::default();
        let ch = PrbChannel::new(1e-12 * 10f64.powf(log_g), 1e-12).unwrap();
        let b = min_quant_bits_real(ch.d, ch.i) + 1e-3 + db;
        let t = ch.capacity(b - 1e-4);
        let r = 1e-3 + frac * (t - 2e-3);
        prop_assume!(r + 1e-4 < t - 1e-3);
        let h = 1e-4;
        let f = |r: f64, b: f64| chi(&model, &ch, r, b);
        let frr = (f(r + h, b) - 2.0 * f(r, b) + f(r - h, b)) / (h * h);
        let fbb = (f(r, b + h) - 2.0 * f(r, b) + f(r, b - h)) / (h * h);
        prop_assert!(frr >= -1e-6 && fbb >= -1e-6, "frr {frr} fbb {fbb} at r={r} b={b}");
    }

    #[test]
    fn effort_loses_joint_convexity_only_near_the_bit_floor(log_g in 0.5f64..2.5, frac in 0.2f64..0.8) {
        let model = ComplexityModel::default();
        let ch = PrbChannel::new(1e-12 * 10f64.powf(log_g), 1e-12).unwrap();
        let b = min_quant_bits_real(ch.d, ch.i) + 8.0;
        let t = ch.capacity(b);
        let r = frac * t;
        let e = hessian_min_eig(|r, b| chi(&model, &ch, r, b), r, b, 1e-4);
        prop_assert!(e >= -1e-6, "min eigenvalue {e}");
    }

    #[test]
    fn relaxed_sum_rate_is_concave_in_slice(seed in any::<u64>(), phi in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = two_cell_instance(&mut rng, 2);
        let at = |c: f64, bits: &[f64]| {
            let mut inst = base.clone();
            inst.budget_c = c;
            inst.budget_bits = bits.to_vec();
            solve_rll(&inst, &RllOptions::default()).unwrap().sum_rate
        };
        let floor = base.floor_bits();
        let c0 = base.floor_effort().max(0.0);
        let p1 = (c0 + rng.gen_range(0.05..3.0), vec![floor[0] + rng.gen_range(0.1..6.0), floor[1] + rng.gen_range(0.1..6.0)]);
        let p2 = (c0 + rng.gen_range(0.05..3.0), vec![floor[0] + rng.gen_range(0.1..6.0), floor[1] + rng.gen_range(0.1..6.0)]);
        let mid_c = phi * p1.0 + (1.0 - phi) * p2.0;
        let mid_b: Vec<f64> = p1.1.iter().zip(&p2.1).map(|(a, b)| phi * a + (1.0 - phi) * b).collect();
        let r1 = at(p1.0, &p1.1);
        let r2 = at(p2.0, &p2.1);
        let rm = at(mid_c, &mid_b);
        prop_assert!(rm >= phi * r1 + (1.0 - phi) * r2 - 1e-3, "{rm} < {} ", phi * r1 + (1.0 - phi) * r2);
    }

    #[test]
    fn roundings_are_feasible_and_below_relaxation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = two_cell_instance(&mut rng, 2);
        let opts = RllOptions::default();
        let sol = solve_rll(&inst, &opts).unwrap();
        prop_assert!(sol.effort <= inst.budget_c * (1.0 + 1e-9) + 1e-12);
        for (k, cell) in sol.b.iter().enumerate() {
            prop_assert!(cell.iter().sum::<f64>() <= inst.budget_bits[k] * (1.0 + 1e-9));
        }
        for d in [round_ra(&inst, &sol), round_ir(&inst, &sol, &opts)] {
            if d.feasible {
                prop_assert!(discrete_feasible(&inst, &d.r, &d.b));
                prop_assert!(d.sum_rate <= sol.sum_rate + 1e-9);
                prop_assert!(d.r.iter().flatten().all(|&r| r == 0.0 || inst.rates.contains(&r)));
            }
        }
    }
}

#[test]
fn bound_is_tight_at_the_bit_floor_and_asymptotics_hold() {
    for (g, limit) in [(1e4, 1e4f64.sqrt()), (1e-4, 0.5e-4)] {
        let i = 1e-12;
        let d = g * i;
        let low = sinr_with_quant(d, i, min_quant_bits_real(d, i));
        assert!((low - ((g + 1.0f64).sqrt() - 1.0)).abs() <= 1e-9 * low.max(1e-12));
        assert!((low / limit - 1.0).abs() <= 0.01, "ratio {}", low / limit);
    }
}

#[test]
fn sum_rate_grows_then_saturates_with_computation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = two_cell_instance(&mut rng, 2);
    let mut last = f64::NEG_INFINITY;
    let mut rates = Vec::new();
    for k in 0..24 {
        let mut inst = base.clone();
        inst.budget_c = base.floor_effort().max(0.0) + 0.01 * 2f64.powi(k);
        let r = solve_rll(&inst, &RllOptions::default()).unwrap().sum_rate;
        assert!(r >= last - 1e-9);
        last = r;
        rates.push(r);
    }
    let n = rates.len();
    assert!(rates[n - 1] - rates[n - 5] <= 1e-6);
    assert!(rates[n - 1] > rates[0]);
}

#[test]
fn equal_weights_cancel_payments() {
    let econ = EconomicModel::uniform(2, 3, 1e-7, 2e-7, 1e-5);
    let slices = vec![Slice { c: 5e6, b: vec![1e6, 2e6, 3e6] }, Slice { c: 1e6, b: vec![0.0, 4e6, 1e6] }];
    let rates = [2.5, 1.0];
    let p = profits(&econ, 168_000.0, &slices, &rates);
    let expect: f64 = rates.iter().map(|r| 1e-5 * 168_000.0 * r).sum();
    assert!((p.objective - expect).abs() <= 1e-9 * expect);
    let free = EconomicModel { rho: vec![0.0; 2], ..econ };
    let p = profits(&free, 168_000.0, &slices, &rates);
    for o in 0..2 {
        assert_eq!(p.op[o], -p.inp[o]);
    }
    assert_eq!(satisfaction_index(3.0, 4.0).unwrap(), 0.75);
    assert_eq!(satisfaction_index(-1.0, 4.0).unwrap(), 0.0);
}

#[test]
fn generated_instances_meet_ordering_on_average() {
    let model = ComplexityModel::default();
    let mut ir_total = 0.0;
    let mut ra_total = 0.0;
    for seed in 1..=5 {
        let sc = CranScenario::generate(&CranConfig { seed, ..CranConfig::default() }).unwrap();
        let econ = EconomicModel::uniform(sc.n_ops, sc.n_cells(), 1e-7, 1e-7, 1e-5);
        let caps = Caps { cloud: 2e7, fronthaul: vec![1.5e7; sc.n_cells()] };
        let opts = RulOptions { max_iter: 20, gradient: GradientMethod::DualSensitivity, ..RulOptions::default() };
        let out = proposed_alloc(&sc, &model, &econ, &caps, &opts).unwrap();
        let relaxed = out.rul.sum_rate();
        assert!(out.ir.total() <= relaxed + 1e-9);
        assert!(out.ra.total() <= relaxed + 1e-9);
        let used_c: f64 = out.rul.slices.iter().map(|s| s.c).sum();
        assert!(used_c <= caps.cloud * (1.0 + 1e-9));
        for k in 0..sc.n_cells() {
            let used: f64 = out.rul.slices.iter().map(|s| s.b[k]).sum();
            assert!(used <= caps.fronthaul[k] * (1.0 + 1e-9));
        }
        ir_total += out.ir.total();
        ra_total += out.ra.total();
    }
    assert!(ir_total >= ra_total);
}
