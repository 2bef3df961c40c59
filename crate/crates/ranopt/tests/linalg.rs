use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ranopt::linalg::*;

fn nonneg_matrix(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(0.0f64..1.0, n * n).prop_map(move |d| Matrix::new(n, n, d).unwrap())
}

fn dense_radius(m: &Matrix) -> f64 {
    let d = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    d.complex_eigenvalues().iter().map(|z: &Complex64| z.norm()).fold(0.0, f64::max)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn radius_matches_dense_eigenvalues(m in (1usize..6).prop_flat_map(nonneg_matrix)) {
        let r = spectral_radius(&m, 1e-10).unwrap();
        prop_assert!((r - dense_radius(&m)).abs() <= 1e-7 * (1.0 + r));
    }

    #[test]
    fn subunit_radius_iff_nonnegative_solution(
        m in (1usize..6).prop_flat_map(nonneg_matrix),
        scale in 0.05f64..0.6,
        seed in any::<u64>(),
    ) {
        let n = m.rows();
        let gh = Matrix::new(n, n, m.as_slice().iter().map(|v| v * scale).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let rho = spectral_radius(&gh, 1e-12).unwrap();
        prop_assume!((rho - 1.0).abs() > 1e-6);
        let nonneg = match solve_linear(&gh.identity_minus(), &g) {
            Ok(p) => p.iter().all(|&v| v >= 0.0),
            Err(_) => false,
        };
        prop_assert_eq!(rho < 1.0, nonneg);
    }

    #[test]
    fn hungarian_matches_enumeration(
        (n, extra) in (1usize..=5, 0usize..2),
        seed in any::<u64>(),
    ) {
        let cols = n + extra;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * cols).map(|_| f64::from(rng.gen_range(0u32..20))).collect();
        let cost = Matrix::new(n, cols, data).unwrap();
        let sol = hungarian_min_assign(&cost).unwrap();
        let mut best = f64::INFINITY;
        for perm in permutations(cols) {
            let c: f64 = (0..n).map(|a| cost[(a, perm[a])]).sum();
            best = best.min(c);
        }
        prop_assert_eq!(sol.cost, best);
        let realized: f64 = sol.tasks.iter().enumerate().map(|(a, &t)| cost[(a, t)]).sum();
        prop_assert_eq!(realized, best);
        let mut seen = sol.tasks.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), n);
    }

    #[test]
    fn projection_is_closest_feasible_point(
        x in prop::collection::vec(-2.0f64..3.0, 1..8),
        cap in 0.0f64..4.0,
        seed in any::<u64>(),
    ) {
        let y = project_capped_simplex(&x, cap).unwrap();
        prop_assert!(y.iter().all(|&v| v >= 0.0));
        prop_assert!(y.iter().sum::<f64>() <= cap + 1e-9);
        let dist = |z: &[f64]| x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let dy = dist(&y);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let mut z: Vec<f64> = x.iter().map(|_| rng.gen::<f64>()).collect();
            let total: f64 = z.iter().sum();
            let target = rng.gen::<f64>() * cap;
            if total > 0.0 {
                z.iter_mut().for_each(|v| *v *= target / total);
            }
            prop_assert!(dy <= dist(&z) + 1e-9);
        }
    }
}

#[test]
fn inverse_q_round_trips() {
    let mut p = 1e-5;
    while p <= 0.4 {
        let x = inverse_q(p).unwrap();
        assert_abs_diff_eq!(gaussian_q(x), p, epsilon = 1e-8);
        p *= 1.5;
    }
    let x = inverse_q(0.4).unwrap();
    assert_abs_diff_eq!(gaussian_q(x), 0.4, epsilon = 1e-8);
}

#[test]
fn q_matches_statrs_normal_tail() {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = Normal::new(0.0, 1.0).unwrap();
    for x in [0.0, 0.5, 1.0, 2.0, 3.09, 4.5] {
        assert_abs_diff_eq!(gaussian_q(x), 1.0 - n.cdf(x), epsilon = 1e-12);
    }
}

#[test]
fn roots_of_known_functions() {
    let r = bisect_root(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
    assert_abs_diff_eq!(r, 2f64.sqrt(), epsilon = 1e-8);
    let r = bisect_root(|x: f64| x.log2() - 1.0, 1.0, 4.0, 1e-12).unwrap();
    assert_abs_diff_eq!(r, 2.0, epsilon = 1e-9);
    let f = |x: f64| x.cos() - x;
    let r = illinois_root(f, 0.0, f(0.0), 1.0, f(1.0), 1e-14);
    assert_abs_diff_eq!(r, 0.739_085_133_215_160_6, epsilon = 1e-12);
}

#[test]
fn solve_matches_nalgebra_lu() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 1..8 {
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = Matrix::new(n, n, data.clone()).unwrap();
        let x = solve_linear(&a, &b).unwrap();
        let oracle = DMatrix::from_row_slice(n, n, &data).lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(x[i], oracle[i], epsilon = 1e-9);
        }
    }
}
