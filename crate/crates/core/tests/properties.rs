//! Invariants checked over randomised inputs.

mod common;

use amopt_core::baselines::{BaselineOptimizer, Sgd, Sgdm};
use amopt_core::history::HistoryBuffer;
use amopt_core::mixer::{
    apply_h, assemble_dense_h, damp_alpha, pd_lambda, solve_gamma, MixerConfig, PdMode, Penalty,
    SamState, ScheduleSpec,
};
use amopt_core::problems::{GradientOracle, LogisticOracle, QuadraticOracle, Spectrum};
use amopt_core::smallmat::{self, SymMatrix};
use amopt_core::vecops;
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_is_psd(seed in any::<u64>(), rows in 1usize..12, cols in 0usize..8) {
        let a = random_col(&mut rng(seed), rows, cols);
        let eig = smallmat::sym_eig(&smallmat::gram_sym(&a)).unwrap();
        let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
        for v in eig.values {
            prop_assert!(v >= -1e-10 * top);
        }
    }

    #[test]
    fn pinv_solve_projects_onto_range(seed in any::<u64>(), n in 1usize..8, rank in 0usize..8) {
        let mut r = rng(seed);
        let f = random_col(&mut r, rank.min(n), n);
        let z = smallmat::gram_sym(&f);
        let v = gaussian(&mut r, n);
        let zv = z.mul_vec(&v).unwrap();
        let sol = smallmat::pinv_solve(&z, &zv, 1e-12).unwrap();
        let back = z.mul_vec(&sol).unwrap();
        let scale = vecops::norm(&zv).max(1.0);
        prop_assert!(vecops::max_abs_diff(&back, &zv) <= 1e-8 * scale);
    }

    #[test]
    fn sym_eig_is_bitwise_deterministic(seed in any::<u64>(), n in 1usize..10) {
        let b = random_col(&mut rng(seed), n, n);
        let a = SymMatrix::from_dense(&b.add_scaled(1.0, &b.transpose()).unwrap()).unwrap();
        let first = smallmat::sym_eig(&a).unwrap();
        let second = smallmat::sym_eig(&a).unwrap();
        prop_assert_eq!(first.values, second.values);
        prop_assert_eq!(first.vectors, second.vectors);
    }

    #[test]
    fn lambda_orderings_agree(seed in any::<u64>(), m in 1usize..5) {
        let mut r = rng(seed);
        let y = random_col(&mut r, 12, m);
        let rr = random_col(&mut r, 12, m);
        let w = smallmat::gram_sym(&y.hcat(&rr).unwrap());
        let zinv = smallmat::gram_sym(&random_col(&mut r, m + 1, m));
        let s = SymMatrix::from_upper(2 * m, |i, j| if i < m && j >= m { zinv.get(i, j - m) } else { 0.0 });
        let ours = smallmat::lambda_max_product(&w, &s).unwrap();
        let sw = sym_to_na(&s) * sym_to_na(&w);
        prop_assert!((ours - max_real_eig(&sw)).abs() <= 1e-8 * ours.abs().max(1.0));
    }

    #[test]
    fn history_keeps_last_m_in_order(seed in any::<u64>(), cap in 1usize..6, pushes in 0usize..15) {
        let mut r = rng(seed);
        let mut h = HistoryBuffer::new(3, cap);
        let mut all = Vec::new();
        for _ in 0..pushes {
            let dx = gaussian(&mut r, 3);
            let dr = gaussian(&mut r, 3);
            h.push(&dx, &dr).unwrap();
            all.push((dx, dr));
            prop_assert!(h.len() <= cap);
        }
        let (x, rm) = h.matrices();
        let keep = &all[pushes.saturating_sub(cap)..];
        prop_assert_eq!(x.cols(), keep.len());
        for (j, (dx, dr)) in keep.iter().enumerate() {
            prop_assert_eq!(x.col(j), dx.as_slice());
            prop_assert_eq!(rm.col(j), dr.as_slice());
        }
    }

    #[test]
    fn mixing_matrix_norm_bound(
        seed in any::<u64>(),
        m in 1usize..=10,
        alpha in 0.0f64..=1.0,
        beta in 1e-3f64..=1.0,
        log_delta in -4.0f64..4.0,
    ) {
        let mut r = rng(seed);
        let x = random_col(&mut r, 20, m);
        let rr = random_col(&mut r, 20, m);
        let v = gaussian(&mut r, 20);
        let delta = 10f64.powf(log_delta);
        let hv = apply_h(&x, &rr, &v, alpha, beta, Penalty::Gram(delta), 1e-12).unwrap();
        let bound = 2.0 * (beta * beta * (1.0 + 2.0 * alpha * alpha - 2.0 * alpha) + alpha * alpha / delta);
        prop_assert!(vecops::norm_sq(&hv) <= bound * vecops::norm_sq(&v) * (1.0 + 1e-9));
    }

    #[test]
    fn damped_alpha_keeps_h_positive_definite(
        seed in any::<u64>(),
        m in 1usize..=6,
        alpha in 0.05f64..=1.0,
        beta in 0.05f64..=1.0,
        mu_idx in 0usize..3,
        log_delta in -2.0f64..2.0,
    ) {
        let mu = [1e-8, 0.2, 0.5][mu_idx];
        let mut r = rng(seed);
        let x = random_col(&mut r, 15, m);
        let rr = random_col(&mut r, 15, m);
        let pen = Penalty::Gram(10f64.powf(log_delta));
        let lambda = pd_lambda(&x, &rr, beta, pen, 1e-12).unwrap();
        let a = damp_alpha(alpha, beta, mu, lambda);
        let h = to_na(&assemble_dense_h(&x, &rr, a, beta, pen, 1e-12).unwrap());
        let lmin = sym_min_eig(&h);
        prop_assert!(lmin >= beta * mu - 1e-9, "{} < {}", lmin, beta * mu);
        prop_assert!((lmin - (beta - 0.5 * a * lambda)).abs() <= 1e-8 * lambda.abs().max(1.0));
    }

    #[test]
    fn accepted_steps_are_descent_directions(seed in any::<u64>(), beta in 0.01f64..1.0) {
        let mut r = rng(seed);
        let cfg = MixerConfig { beta, m: 4, ..MixerConfig::default() };
        let mut state = SamState::new(cfg, gaussian(&mut r, 6)).unwrap();
        let mut fb = Sgd::new(0.01);
        for _ in 0..25 {
            let res = gaussian(&mut r, 6);
            let rep = state.sam_step(&res, Some(&mut fb)).unwrap();
            if !rep.fell_back {
                prop_assert!(vecops::dot(&rep.dx, &res) > 0.0);
            }
        }
    }

    #[test]
    fn exact_am_residuals_never_increase(seed in any::<u64>()) {
        let (q, sys) = QuadraticOracle::generate(12, 50.0, Spectrum::Log, 1, 0.0, seed).unwrap();
        let mut state = SamState::new(MixerConfig::plain_am(12), vec![0.0; 12]).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let res = sys.residual(state.x());
            let rep = state.sam_step(&res, None).unwrap();
            if k > 0 {
                prop_assert!(rep.projected_residual_norm <= prev * (1.0 + 1e-9) + 1e-12);
                prev = rep.projected_residual_norm;
            } else {
                prev = vecops::norm(&q.full_gradient(&[0.0; 12]));
            }
        }
    }

    #[test]
    fn gamma_is_first_order_optimal(
        seed in any::<u64>(),
        m in 1usize..6,
        pen_kind in 0usize..3,
        log_delta in -2.0f64..2.0,
    ) {
        let mut r = rng(seed);
        let x = random_col(&mut r, 10, m);
        let rr = random_col(&mut r, 10, m);
        let v = gaussian(&mut r, 10);
        let delta = 10f64.powf(log_delta);
        let pen = [Penalty::None, Penalty::Identity(delta), Penalty::Gram(delta)][pen_kind];
        let objective = |g: &[f64]| {
            let fit = vecops::norm_sq(&vecops::sub(&v, &rr.mul_vec(g).unwrap()));
            fit + match pen {
                Penalty::None => 0.0,
                Penalty::Identity(d) => d * vecops::norm_sq(g),
                Penalty::Gram(d) => d * vecops::norm_sq(&x.mul_vec(g).unwrap()),
            }
        };
        let gamma = solve_gamma(&x, &rr, &v, pen, 1e-12).unwrap();
        let best = objective(&gamma);
        for j in 0..m {
            for step in [1e-4, -1e-4] {
                let mut g = gamma.clone();
                g[j] += step;
                prop_assert!(objective(&g) >= best - 1e-10);
            }
        }
    }

    #[test]
    fn oracle_full_gradient_is_mean_of_samples(seed in any::<u64>(), t in 1usize..40, d in 1usize..6) {
        let o = LogisticOracle::synthetic(t, d, 1.0, 0.1, 0.2, seed);
        let x = gaussian(&mut rng(seed ^ 1), d);
        let all: Vec<usize> = (0..t).collect();
        let full = o.full_gradient(&x);
        let mb = o.minibatch_gradient(&x, &all).unwrap();
        prop_assert!(vecops::max_abs_diff(&full, &mb) <= 1e-12 * vecops::norm(&full).max(1.0));
        for v in full {
            prop_assert!(v.is_finite());
        }
    }

    #[test]
    fn sgdm_without_momentum_matches_sgd(seed in any::<u64>(), lr in 1e-4f64..1.0) {
        let mut r = rng(seed);
        let mut a = Sgd::new(lr);
        let mut b = Sgdm::new(lr, 0.0, 0.0);
        let mut xa = gaussian(&mut r, 4);
        let mut xb = xa.clone();
        for _ in 0..5 {
            let g = gaussian(&mut r, 4);
            xa = a.step(&xa, &g).unwrap();
            xb = b.step(&xb, &g).unwrap();
            prop_assert_eq!(&xa, &xb);
        }
    }
}

#[test]
fn eigen_damp_mode_keeps_every_step_positive_definite() {
    let (q, _) = QuadraticOracle::generate(10, 100.0, Spectrum::Log, 1, 0.0, 3).unwrap();
    let cfg = MixerConfig {
        pd_mode: PdMode::EigenDamp,
        mu: 0.2,
        beta: 0.01,
        m: 4,
        ..MixerConfig::default()
    };
    let mut state = SamState::new(cfg, vec![1.0; 10]).unwrap();
    for _ in 0..30 {
        let r = vecops::scale(-1.0, &q.full_gradient(state.x()));
        let rep = state.sam_step(&r, None).unwrap();
        if let Some(l) = rep.lambda_k {
            assert!(rep.alpha_used * l <= 2.0 * rep.beta_used * (1.0 - 0.2) + 1e-12);
        }
    }
}

#[test]
fn polynomial_schedule_partial_sums() {
    let s = ScheduleSpec::Polynomial {
        r: 0.75,
        scale: 1.0,
    };
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut checkpoints = Vec::new();
    for k in 0..1_000_000usize {
        let (_, b) = s.rates(k, 1.0, 1.0);
        sum += b;
        sum_sq += b * b;
        if (k + 1) % 250_000 == 0 {
            checkpoints.push((sum, sum_sq));
        }
    }
    // Σβ keeps growing by more than 1 per block of 250k terms.
    let growth: Vec<f64> = checkpoints.windows(2).map(|w| w[1].0 - w[0].0).collect();
    assert!(growth.iter().all(|&g| g > 1.0));
    // The Σβ² increments are small and shrinking.
    let tails: Vec<f64> = checkpoints.windows(2).map(|w| w[1].1 - w[0].1).collect();
    assert!(tails.windows(2).all(|t| t[1] < t[0]));
    assert!(tails.iter().all(|&t| t < 2e-3));
    // ζ(1.5) bounds the full series.
    assert!(sum_sq < 2.6124);
}
