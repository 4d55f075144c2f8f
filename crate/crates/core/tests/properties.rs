use proptest::prelude::*;

use quadtruth::distributions::Dist;
use quadtruth::grids::{integrate_nd, rotate_grid, tensor_grid, CovSpec, Decomposition};
use quadtruth::mc_engine::{mc_integration, MCConfig, McTarget};
use quadtruth::quad_rules::{compute_normalized_rule, integrate_1d, RuleKind};
use quadtruth::scenarios::{CdeScenario, ConfoundingScenario, HrScenario, RmstScenario, Scenario, TimeGrid};
use quadtruth::special_fn::{dilog, expit, logit, odds_ratio};

fn kind_strategy() -> impl Strategy<Value = RuleKind> {
    prop_oneof![
        Just(RuleKind::Hermite),
        Just(RuleKind::Legendre),
        Just(RuleKind::Laguerre),
        (-0.9f64..6.0).prop_map(|alpha| RuleKind::GenLaguerre { alpha }),
    ]
}

fn moment(kind: RuleKind, j: usize) -> f64 {
    match kind {
        RuleKind::Hermite if j % 2 == 1 => 0.0,
        RuleKind::Hermite => (1..j).step_by(2).map(|i| i as f64).product::<f64>() / 2f64.powi(j as i32 / 2),
        RuleKind::Legendre if j % 2 == 1 => 0.0,
        RuleKind::Legendre => 1.0 / (j as f64 + 1.0),
        RuleKind::Laguerre => (1..=j).map(|i| i as f64).product(),
        RuleKind::GenLaguerre { alpha } => (1..=j).map(|i| alpha + i as f64).product(),
    }
}

/// Random symmetric positive-definite matrix A Aᵀ + 0.1 I.
fn spd(d: usize, entries: &[f64]) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let dot: f64 = (0..d).map(|k| entries[i * d + k] * entries[j * d + k]).sum();
                    dot + if i == j { 0.1 } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polynomial_exactness(kind in kind_strategy(), k in 1usize..16, coef in prop::collection::vec(-2.0f64..2.0, 32)) {
        let rule = compute_normalized_rule(kind, k).unwrap();
        let deg = 2 * k - 1;
        let c = &coef[..=deg];
        let poly = |x: f64| c.iter().rev().fold(0.0, |acc, a| acc * x + a);
        let q = integrate_1d(&rule, poly).unwrap();
        let exact: f64 = c.iter().enumerate().map(|(j, a)| a * moment(kind, j)).sum();
        let scale: f64 = c.iter().enumerate().map(|(j, a)| a.abs() * integrate_1d(&rule, |x| x.abs().powi(j as i32)).unwrap()).sum();
        prop_assert!((q - exact).abs() <= 1e-11 * scale.max(1.0), "{kind:?} K={k}: {q} vs {exact}");
    }

    #[test]
    fn normalized_weights_sum_to_one(kind in kind_strategy(), k in 1usize..=64) {
        let rule = compute_normalized_rule(kind, k).unwrap();
        let s: f64 = rule.weights.iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-13);
        prop_assert!(rule.weights.iter().all(|w| *w > 0.0));
        prop_assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rotation_reproduces_moments(d in 1usize..=4, entries in prop::collection::vec(-1.5f64..1.5, 16),
                                   mean in prop::collection::vec(-5.0f64..5.0, 4), which in 0usize..2) {
        let cov = CovSpec::new(mean[..d].to_vec(), spd(d, &entries)).unwrap();
        let dec = [Decomposition::Cholesky, Decomposition::Spectral][which];
        let g = rotate_grid(&tensor_grid(3, d).unwrap(), &cov, dec).unwrap();
        for i in 0..d {
            let m = integrate_nd(&g, |x| x[i]).unwrap();
            prop_assert!((m - cov.mean()[i]).abs() < 1e-10);
            for j in 0..d {
                let c = integrate_nd(&g, |x| (x[i] - cov.mean()[i]) * (x[j] - cov.mean()[j])).unwrap();
                prop_assert!((c - cov.cov(i, j)).abs() < 1e-10 * (1.0 + cov.cov(i, j).abs()));
            }
        }
    }

    #[test]
    fn expit_symmetry_and_range(x in -800.0f64..800.0) {
        let p = expit(x);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((expit(-x) - (1.0 - p)).abs() < 1e-15);
        // 1 - p keeps enough digits to invert only for moderate |x|
        if x.abs() < 15.0 {
            prop_assert!((logit(p) - x).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn odds_ratio_reciprocal(p1 in 0.001f64..0.999, p0 in 0.001f64..0.999) {
        let a = odds_ratio(p1, p0).unwrap();
        let b = odds_ratio(p0, p1).unwrap();
        prop_assert!((a * b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dilog_reflection(z in 0.01f64..0.99) {
        let lhs = dilog(z).unwrap() + dilog(1.0 - z).unwrap();
        let rhs = std::f64::consts::PI.powi(2) / 6.0 - z.ln() * (1.0 - z).ln();
        prop_assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn marginal_probabilities_are_probabilities(b0 in -4.0f64..4.0, b1 in -3.0f64..3.0, b2 in -2.0f64..2.0,
                                                mu in -3.0f64..3.0, s2 in 0.1f64..4.0, k in 1usize..30) {
        let s = ConfoundingScenario::new(b0, b1, vec![b2], vec![Dist::Normal { mu, sigma2: s2 }]).unwrap();
        for a in [0u8, 1] {
            let p = s.marginal_prob(a, k).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
        }
        let null = ConfoundingScenario::new(b0, 0.0, vec![b2], vec![Dist::Normal { mu, sigma2: s2 }]).unwrap();
        let or = null.odds_ratio_truth(k, Decomposition::Spectral).unwrap().get("odds_ratio").unwrap();
        prop_assert!((or - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rmst_total_effect_decomposes(mu0 in -2.0f64..2.0, mu1 in -2.0f64..2.0, b0 in -2.0f64..1.0,
                                     ba in -1.0f64..1.0, bm in -1.0f64..1.0, tau in 0.1f64..10.0) {
        let s = RmstScenario { mu0, mu1, beta0: b0, beta_a: ba, beta_m: bm, tau };
        let r = s.mediation_truth(20).unwrap();
        let (te, nde, nie) = (r.get("te").unwrap(), r.get("nde").unwrap(), r.get("nie").unwrap());
        prop_assert!((te - nde - nie).abs() < 1e-14 * (1.0 + tau));
        let null = RmstScenario { beta_m: 0.0, ..s };
        prop_assert_eq!(null.mediation_truth(20).unwrap().get("nie").unwrap(), 0.0);
    }

    #[test]
    fn hr_ratios_multiply(a0 in -1.0f64..1.0, aa in -1.0f64..1.0, g in 0.5f64..3.0, lam in 0.5f64..4.0,
                          ba in -1.0f64..1.0, bm in -1.0f64..1.0) {
        let s = HrScenario {
            alpha0: a0, alpha_a: aa, gamma: g, lambda: lam, beta_a: ba, beta_m: bm,
            t_grid: TimeGrid::Range { start: 0.2, end: 2.0, points: 7 },
        };
        let r = s.mediation_truth(12).unwrap();
        for (t, te) in r.series("te") {
            let prod = r.get_at("nde", t).unwrap() * r.get_at("nie", t).unwrap();
            prop_assert!((te - prod).abs() <= 1e-12 * te.abs().max(1.0));
            for tag in ["1_1", "1_0", "0_0"] {
                let sv = r.get_at(&format!("s_{tag}"), t).unwrap();
                prop_assert!(sv > 0.0 && sv <= 1.0);
            }
        }
    }

    #[test]
    fn cde_identity_is_linear(beta in prop::array::uniform6(-5.0f64..5.0), a_coef in -2.0f64..2.0,
                              u_coef in -1.0f64..1.0, m in -3.0f64..3.0, flip in any::<bool>()) {
        let mut s = CdeScenario { beta, m, ..Default::default() };
        s.l_given_u.a_coef = a_coef;
        s.l_given_u.u_coef = u_coef;
        if flip {
            s.a = 0;
            s.a_star = 1;
        }
        let v = s.cde_truth(5).unwrap().get("cde").unwrap();
        prop_assert!((v - s.identity_closed_form().unwrap()).abs() < 1e-10);
    }

    #[test]
    fn mc_is_a_function_of_seed(seed in any::<u64>()) {
        let s = Scenario::Rmst(RmstScenario::default());
        let cfg = MCConfig::new(500, 3, seed).unwrap();
        let a = mc_integration(&s, &McTarget::Rmst, &cfg).unwrap();
        let b = mc_integration(&s, &McTarget::Rmst, &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.estimates, &y.estimates);
            prop_assert!(x.sd >= 0.0);
        }
    }
}
