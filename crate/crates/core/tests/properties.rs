//! Cross-module invariants: identities that tie two independent
//! computation routes together, exercised on randomized inputs.

use proptest::prelude::*;
use rand::Rng;

use dotk_core::benamou_brenier::{minimize_action, path_action, OptimizerConfig};
use dotk_core::couplings::{coupling_path_decomposition, monotone_coupling, thin};
use dotk_core::distributions::{
    bernoulli_sum_pmf, leave_out_pmf, log_concavity_margins, ulc_margins, BernoulliSystem, Pmf,
};
use dotk_core::sampling::{random_log_concave_pmf, random_monotone_system, rng_for};
use dotk_core::shepp_olkin::SheppOlkinInstance;
use dotk_core::transport::{decompose_constant_speed, h_tilde, DiscretePath};

fn prob() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        Just(1.0),
        0.0..=1.0f64,
        0.0..0.02f64,
        (0.0..0.02f64).prop_map(|x| 1.0 - x),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convolution_is_permutation_invariant(ps in prop::collection::vec(prob(), 1..9)) {
        let sys = BernoulliSystem::constant(ps.clone()).unwrap();
        let f = bernoulli_sum_pmf(&sys, 0.0).unwrap();
        let mut rev = ps.clone();
        rev.reverse();
        let sys_rev = BernoulliSystem::constant(rev).unwrap();
        let f_rev = bernoulli_sum_pmf(&sys_rev, 0.0).unwrap();
        for (a, b) in f.masses().iter().zip(f_rev.masses()) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn mean_matches_parameter_sum(
        ps in prop::collection::vec(prob(), 1..9),
        qs in prop::collection::vec(prob(), 1..9),
        t in 0.0..=1.0f64,
    ) {
        let n = ps.len().min(qs.len());
        let sys = BernoulliSystem::new(ps[..n].to_vec(), qs[..n].to_vec()).unwrap();
        let f = bernoulli_sum_pmf(&sys, t).unwrap();
        prop_assert!((f.mean() - sys.mean_at(t)).abs() < 1e-12);
    }

    #[test]
    fn leave_one_out_rebuilds_the_sum(
        ps in prop::collection::vec(0.0..=1.0f64, 1..8),
        t in 0.0..=1.0f64,
    ) {
        let sys = BernoulliSystem::constant(ps.clone()).unwrap();
        let f = bernoulli_sum_pmf(&sys, t).unwrap();
        for (i, &p) in ps.iter().enumerate() {
            let loo = leave_out_pmf(&sys, t, &[i]).unwrap();
            for k in 0..=f.max_index() as isize {
                let rebuilt = (1.0 - p) * loo.get(k) + p * loo.get(k - 1);
                prop_assert!((f.get(k) - rebuilt).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn bernoulli_sums_are_log_concave_and_ulc(ps in prop::collection::vec(prob(), 1..10)) {
        let sys = BernoulliSystem::constant(ps.clone()).unwrap();
        let f = bernoulli_sum_pmf(&sys, 0.5).unwrap();
        let margins = log_concavity_margins(&f);
        prop_assert!(margins.d.iter().all(|&d| d >= -1e-12));
        let u = ulc_margins(&f, ps.len()).unwrap();
        prop_assert!(u.iter().all(|&x| x >= -1e-12));
    }

    #[test]
    fn thinning_conserves_mass_and_mean(
        masses in prop::collection::vec(0.01..1.0f64, 1..9),
        t in 0.0..=1.0f64,
    ) {
        let total: f64 = masses.iter().sum();
        let f = Pmf::new(masses.iter().map(|m| m / total).collect()).unwrap();
        let tf = thin(&f, t).unwrap();
        prop_assert!((tf.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((tf.mean() - t * f.mean()).abs() < 1e-12);
    }

    #[test]
    fn coupling_interpolation_conserves_mass(
        masses in prop::collection::vec(0.01..1.0f64, 2..8),
        t in 0.0..=1.0f64,
        thin_level in 0.1..0.9f64,
    ) {
        let total: f64 = masses.iter().sum();
        let f1 = Pmf::new(masses.iter().map(|m| m / total).collect()).unwrap();
        let f0 = thin(&f1, thin_level).unwrap();
        let pi = monotone_coupling(&f0, &f1).unwrap();
        let f = dotk_core::couplings::coupling_interpolation(&pi, t).unwrap();
        prop_assert!((f.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn decomposition_recovers_closed_forms() {
    // uniqueness: the sampled-path route reproduces the closed-form
    // coefficients wherever both are defined
    let mut rng = rng_for(31, 0);
    for trial in 0..10 {
        let sys = random_monotone_system(2 + trial % 4, &mut rng);
        let so = SheppOlkinInstance::new(sys).unwrap();
        if so.v() <= 1e-9 {
            continue;
        }
        let path = so.path(201).unwrap();
        let dec = decompose_constant_speed(&path).unwrap();
        assert!((dec.v - so.v()).abs() < 1e-12);
        for (i, &t) in path.times().iter().enumerate() {
            let closed = so.alpha_at(t).unwrap();
            for k in 0..closed.values.len() {
                if dec.valid[i][k] && closed.valid[k] {
                    assert!(
                        (dec.alpha[i][k] - closed.values[k]).abs() < 1e-9,
                        "trial {trial} t={t} k={k}: {} vs {}",
                        dec.alpha[i][k],
                        closed.values[k]
                    );
                }
            }
        }
    }
}

#[test]
fn coupling_alpha_agrees_with_decomposition() {
    // two independent routes to the same mixing coefficients
    let mut rng = rng_for(32, 0);
    for trial in 0..10 {
        let f1 = random_log_concave_pmf(3 + trial % 4, &mut rng);
        let f0 = thin(&f1, 0.45).unwrap();
        let pi = monotone_coupling(&f0, &f1).unwrap();
        let cp = match coupling_path_decomposition(&pi) {
            Ok(cp) => cp,
            Err(_) => continue,
        };
        let path = cp.to_path(101).unwrap();
        let dec = decompose_constant_speed(&path).unwrap();
        assert!((dec.v - cp.v()).abs() < 1e-12);
        for (i, &t) in path.times().iter().enumerate() {
            let closed = cp.alpha_at(t).unwrap();
            for k in 0..closed.values.len() {
                if dec.valid[i][k] && closed.valid[k] {
                    assert!(
                        (dec.alpha[i][k] - closed.values[k]).abs() < 1e-8,
                        "trial {trial} t={t} k={k}: {} vs {}",
                        dec.alpha[i][k],
                        closed.values[k]
                    );
                }
            }
        }
    }
}

#[test]
fn delta_margin_decomposes_into_nonnegative_pieces() {
    // h̃ - h = [f_{k+2}(α_{k+2}-α_{k+1})A_k + f_k(α_{k+1}-α_k)B_k]/D_{k+1}
    //         + f_{k+1}·α'_{k+1}/v  wherever the gap clears the floor
    let mut rng = rng_for(33, 0);
    for trial in 0..20 {
        let sys = random_monotone_system(2 + trial % 6, &mut rng);
        let so = SheppOlkinInstance::new(sys).unwrap();
        if so.v() <= 1e-9 || so.reduced_system().len() < 2 {
            continue;
        }
        for &t in &[0.25, 0.5, 0.75] {
            let f = so.pmf_at(t).unwrap();
            let g = so.g_at(t).unwrap();
            let h = so.h_at(t).unwrap();
            let alpha = so.alpha_at(t).unwrap();
            let da = so.dalpha_at(t).unwrap();
            let ht = h_tilde(&f, &g).unwrap();
            let a = &alpha.values;
            for k in 0..h.len() {
                if ht.skipped[k] || !alpha.valid[k] || !alpha.valid[k + 1] || !alpha.valid[k + 2] {
                    continue;
                }
                let d_gap = f.get(k as isize + 1).powi(2) - f.get(k as isize) * f.get(k as isize + 2);
                let a_k = f.get(k as isize + 1) * g.get(k as isize)
                    - f.get(k as isize) * g.get(k as isize + 1);
                let b_k = f.get(k as isize + 1) * g.get(k as isize + 1)
                    - f.get(k as isize + 2) * g.get(k as isize);
                let piece1 = (f.get(k as isize + 2) * (a[k + 2] - a[k + 1]) * a_k
                    + f.get(k as isize) * (a[k + 1] - a[k]) * b_k)
                    / d_gap;
                let piece2 = f.get(k as isize + 1) * da[k + 1] / so.v();
                let lhs = ht.values[k] - h[k];
                assert!(
                    (lhs - (piece1 + piece2)).abs() < 1e-10,
                    "trial {trial} t={t} k={k}: {lhs} vs {}",
                    piece1 + piece2
                );
            }
        }
    }
}

#[test]
fn pair_coefficients_match_appendix_cubics() {
    // the pairwise b is exactly the stated mixture of four cubic margins of
    // the leave-two-out sum, computed here through the appendix module
    let sys = BernoulliSystem::new(vec![0.15, 0.45, 0.7, 0.3], vec![0.5, 0.8, 0.9, 0.65]).unwrap();
    let so = SheppOlkinInstance::new(sys.clone()).unwrap();
    let t = 0.4;
    let ps = sys.params_at(t);
    let m = sys.len();
    for k in 0..m - 1 {
        let terms = so.pair_terms(t, k).unwrap();
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let rest: Vec<f64> = ps
                    .iter()
                    .enumerate()
                    .filter(|(l, _)| *l != i && *l != j)
                    .map(|(_, &p)| p)
                    .collect();
                let cubics = dotk_core::appendix::cubic_margins(&rest).unwrap();
                let (pi, pj) = (ps[i], ps[j]);
                let expected = 0.5
                    * (pi * pj * cubics.c1[k]
                        + (1.0 - pi) * (1.0 - pj) * cubics.c1bar[k]
                        + (1.0 - pi) * pj * cubics.c3[k]
                        + pi * (1.0 - pj) * cubics.c3bar[k]);
                assert!(
                    (terms.b[i][j] - expected).abs() < 1e-14,
                    "k={k} i={i} j={j}: {} vs {expected}",
                    terms.b[i][j]
                );
                // each cubic factor is nonnegative on its own
                assert!(cubics.c1[k] >= 0.0 && cubics.c1bar[k] >= 0.0);
                assert!(cubics.c3[k] >= 0.0 && cubics.c3bar[k] >= 0.0);
            }
        }
    }
}

#[test]
fn certificate_dominates_curvature_on_random_instances() {
    use dotk_core::transport::concavity_certificate;
    let mut rng = rng_for(35, 0);
    let mut checked = 0usize;
    let mut max_identity = 0.0f64;
    for trial in 0..100 {
        let sys = random_monotone_system(2 + trial % 8, &mut rng);
        let so = SheppOlkinInstance::new(sys).unwrap();
        if so.v() <= 1e-9 || so.reduced_system().len() < 2 {
            continue;
        }
        let rep = dotk_core::shepp_olkin::analyze(
            &so,
            dotk_core::shepp_olkin::AnalyzeOptions {
                grid: 21,
                with_pair_certificate: false,
            },
        )
        .unwrap();
        for (i, &t) in rep.times.iter().enumerate() {
            let f = so.pmf_at(t).unwrap();
            let g = so.g_at(t).unwrap();
            let h = so.h_at(t).unwrap();
            let cert = match concavity_certificate(&f, &g, &h, so.v()) {
                Ok(c) => c,
                // vanishing masses block the bound near the trim boundary
                Err(_) => continue,
            };
            assert!(cert.bound <= 1e-12, "trial {trial} t={t}: {}", cert.bound);
            assert!(
                cert.bound >= rep.h2_transport[i] - 1e-8,
                "trial {trial} t={t}: bound {} below H'' {}",
                cert.bound,
                rep.h2_transport[i]
            );
            max_identity = max_identity.max(cert.max_identity_residual);
            checked += 1;
        }
    }
    assert!(checked > 500, "only {checked} certificates evaluated");
    assert!(max_identity < 1e-10, "remainder identity residual {max_identity:e}");
}

#[test]
fn non_monotone_systems_betray_themselves() {
    // decomposing a non-monotone interpolation either reports backward flux
    // or pushes a mixing coefficient out of [0,1]
    let mut rng = rng_for(36, 0);
    let mut witnesses = 0usize;
    for _ in 0..50 {
        let n = 2 + rng.random_range(0..3usize);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let sys = BernoulliSystem::new(a, b).unwrap();
        if sys.is_monotone() || sys.speed().abs() < 0.05 {
            continue;
        }
        let so = SheppOlkinInstance::new(sys).unwrap();
        let path = so.path(51).unwrap();
        match decompose_constant_speed(&path) {
            Err(dotk_core::Error::NegativeTransport { .. }) => witnesses += 1,
            Ok(dec) => {
                if dec.alpha_range_violation() > 1e-9 {
                    witnesses += 1;
                }
            }
            Err(e) => panic!("unexpected: {e}"),
        }
    }
    assert!(witnesses > 0, "random search found no witness");
}

#[test]
fn mean_speed_identity() {
    // dλ/dt = v·Σ g = v along closed-form interpolations
    let mut rng = rng_for(34, 0);
    for _ in 0..10 {
        let sys = random_monotone_system(5, &mut rng);
        let so = SheppOlkinInstance::new(sys).unwrap();
        if so.v() <= 1e-9 {
            continue;
        }
        for &t in &[0.1, 0.6, 0.9] {
            let dfdt = so.dpmf_at(t);
            let dmean: f64 = dfdt
                .iter()
                .enumerate()
                .map(|(k, &d)| k as f64 * d)
                .sum();
            assert!((dmean - so.v()).abs() < 1e-10);
            let g = so.g_at(t).unwrap();
            assert!((g.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn minimisation_is_symmetric_and_restrictable() {
    let f0 = Pmf::new(vec![0.7, 0.3]).unwrap();
    let f1 = Pmf::new(vec![0.25, 0.75]).unwrap();
    let config = OptimizerConfig {
        max_iters: 400,
        ..OptimizerConfig::default()
    };
    let fwd = minimize_action(&f0, &f1, config).unwrap();
    let bwd = minimize_action(&f1, &f0, config).unwrap();
    let rel = (fwd.vn_estimate - bwd.vn_estimate).abs() / fwd.vn_estimate;
    assert!(rel < 0.02, "forward {} backward {}", fwd.vn_estimate, bwd.vn_estimate);

    // restriction to [0, s] scales the length by s
    let path = &fwd.best_path;
    let alpha = &fwd.best_alpha;
    let total = fwd.vn_estimate;
    let j = path.len() / 2;
    let s = path.times()[j];
    let times: Vec<f64> = path.times()[..=j].iter().map(|&t| t / s).collect();
    let pmfs: Vec<Pmf> = path.pmfs()[..=j].to_vec();
    let sub = DiscretePath::from_pmfs(times, pmfs).unwrap();
    let sub_alpha: Vec<Vec<f64>> = alpha[..=j].to_vec();
    let eval = path_action(&sub, &sub_alpha).unwrap();
    // rescaling to [0,1] multiplies β by 1/s² and the measure by s, so the
    // restricted squared action is s·∫₀ˢβ ≈ (s·total)²
    let sub_len = eval.action_sq.sqrt();
    assert!(
        (sub_len - s * total).abs() / (s * total) < 0.02,
        "restricted {} expected {}",
        sub_len,
        s * total
    );
}
