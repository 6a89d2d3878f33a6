use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::*;
use crate::numerics::optim::bisect;
use crate::numerics::rng::rng_from;
use crate::numerics::special::t_cdf;
use crate::numerics::stats::ks_uniform;

fn arma11(n: usize, a: f64, phi: f64, theta: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed);
    let mut y = Vec::with_capacity(n);
    let (mut prev_y, mut prev_e) = (a / (1.0 - phi), 0.0);
    for _ in 0..n + 300 {
        let e: f64 = StandardNormal.sample(&mut rng);
        let v = a + phi * prev_y + theta * prev_e + e;
        y.push(v);
        prev_y = v;
        prev_e = e;
    }
    y.split_off(300)
}

fn round_trip_error(model: &MarginalModel, y: &[f64]) -> f64 {
    let path = model.predictive_path(y);
    let pit = model.pit(y, 1).unwrap();
    let mut worst: f64 = 0.0;
    for (k, u) in pit.values.iter().enumerate() {
        let t = pit.start + k;
        // Next to an atom of mass nu, continuous probabilities below ~1e-7
        // keep too few digits in u = nu + (1 - nu)F to invert to 1e-8.
        if let Some(Predictive::ZeroAdjusted { family, mu, sigma, .. }) = path[t] {
            if y[t] > 0.0 && family.cdf(y[t], mu, sigma) < 1e-7 {
                continue;
            }
        }
        let x = model.inverse_pit(*u, path[t].as_ref().unwrap());
        worst = worst.max((x - y[t]).abs() / (1.0 + y[t].abs()));
    }
    worst
}

#[test]
fn exact_model_pit_is_uniform() {
    let model = MarginalModel {
        kind: MarginalKind::Arima,
        transform: Transform::None,
        shift: 0.0,
        payload: MarginalPayload::Arima(ArimaModel {
            spec: ArimaSpec { p: 1, d: 0, q: 1 },
            a: 0.5,
            phi: vec![0.6],
            theta: vec![0.3],
            sigma2: 1.0,
            loglik: 0.0,
            aic: 0.0,
            n_used: 0,
            std_errors: vec![],
            last_state: LastState { levels: vec![], residuals: vec![] },
        }),
    };
    let y = arma11(2000, 0.5, 0.6, 0.3, 77);
    let u = model.pit(&y, 0).unwrap();
    assert_eq!(u.start, 0);
    let ks = ks_uniform(&u.values);
    assert!(ks.p_value > 0.01, "KS p = {}", ks.p_value);
}

#[test]
fn zero_residual_maps_to_median() {
    let y = arma11(400, 0.2, 0.5, 0.0, 3);
    let model = fit_marginal(&y, &MarginalSpec::new(MarginalKind::Arima).with_order(1, 0, 0)).unwrap();
    let mut y2 = y.clone();
    let last = model.horizon(&y[..399]).unwrap();
    y2[399] = last.median();
    let pit = model.pit(&y2, 0).unwrap();
    assert!((pit.values[399] - 0.5).abs() < 1e-15);
}

#[test]
fn median_is_conditional_mean_recursion() {
    let y = arma11(800, 0.3, 0.5, 0.4, 5);
    let model = fit_marginal(&y, &MarginalSpec::new(MarginalKind::Arima).with_order(1, 0, 1)).unwrap();
    let MarginalPayload::Arima(m) = &model.payload else { unreachable!() };
    let path = model.predictive_path(&y);
    let n = y.len();
    let eps = y[n - 1] - path[n - 1].unwrap().median();
    let oracle = m.a + m.phi[0] * y[n - 1] + m.theta[0] * eps;
    let state = model.horizon(&y).unwrap();
    assert!((model.inverse_pit(0.5, &state) - oracle).abs() < 1e-8);
    assert_eq!(state.mean(), Some(state.median()));
}

#[test]
fn garch_quantile_uses_scaled_t() {
    let mut rng = rng_from(8);
    let mut y = vec![0.0; 2500];
    let mut s2: f64 = 0.5;
    let mut e_prev: f64 = 0.0;
    for t in 1..y.len() {
        s2 = 0.05 + 0.1 * e_prev * e_prev + 0.85 * s2;
        let z: f64 = StandardNormal.sample(&mut rng);
        e_prev = s2.sqrt() * z;
        y[t] = 0.4 * y[t - 1] + e_prev;
    }
    let model = fit_marginal(&y, &MarginalSpec::new(MarginalKind::ArimaGarchT).with_order(1, 0, 0)).unwrap();
    let MarginalPayload::ArimaGarchT(g) = &model.payload else { unreachable!() };
    let state = model.horizon(&y).unwrap();
    let nu = g.nu;
    let tq = bisect(|x| t_cdf(x, nu) - 0.975, 0.0, 50.0, 1e-14, 300);
    let mean = g.arima.a + g.arima.phi[0] * y[y.len() - 1];
    let oracle = mean + g.last_sigma2.sqrt() * tq * ((nu - 2.0) / nu).sqrt();
    assert!((model.inverse_pit(0.975, &state) - oracle).abs() < 1e-9, "{}", oracle);
    // correct-model PIT is uniform for the fitted GARCH too
    let ks = ks_uniform(&model.pit(&y, 0).unwrap().values);
    assert!(ks.p_value > 0.01, "KS p = {}", ks.p_value);
}

#[test]
fn round_trip_on_every_kind() {
    // log-scale ARIMA(1,1,0) on a positive random walk
    let mut rng = rng_from(31);
    let mut level: f64 = 0.0;
    let walk: Vec<f64> = (0..600)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            level += 0.1 * z;
            10.0 * level.exp()
        })
        .collect();
    let m = fit_marginal(&walk, &MarginalSpec::new(MarginalKind::Arima).with_order(1, 1, 0).with_transform(Transform::Log)).unwrap();
    assert_eq!(m.first_index(), 1);
    assert!(round_trip_error(&m, &walk) < 1e-8);

    // shifted log for a series with negative values
    let signed: Vec<f64> = arma11(500, 0.0, 0.5, 0.0, 4).iter().map(|v| v * 0.1).collect();
    let m = fit_marginal(&signed, &MarginalSpec::new(MarginalKind::Arima).with_order(1, 0, 0).with_transform(Transform::Log)).unwrap();
    let min = signed.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(m.shift, 1.0 + min.abs());
    assert!(round_trip_error(&m, &signed) < 1e-8);

    let y = arma11(1200, 0.1, 0.6, 0.0, 6);
    let g = fit_marginal(&y, &MarginalSpec::new(MarginalKind::ArimaGarchT).with_order(1, 0, 0)).unwrap();
    assert!(round_trip_error(&g, &y) < 1e-8);

    let gam = Gamma::new(2.0, 1.5).unwrap();
    let x: Vec<f64> = (0..800).map(|_| if rng.random::<f64>() < 0.25 { 0.0 } else { gam.sample(&mut rng) }).collect();
    for kind in [MarginalKind::Zaga, MarginalKind::Zaig] {
        let z = fit_marginal(&x, &MarginalSpec::new(kind)).unwrap();
        assert!(round_trip_error(&z, &x) < 1e-8, "{kind}");
    }
}

#[test]
fn zero_adjusted_pit_is_uniform() {
    let mut rng = rng_from(12);
    let gam = Gamma::new(2.0, 2.5).unwrap();
    let x: Vec<f64> = (0..2000).map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { gam.sample(&mut rng) }).collect();
    let m = fit_marginal(&x, &MarginalSpec::new(MarginalKind::Zaga)).unwrap();
    let u = m.pit(&x, 9).unwrap();
    assert!(ks_uniform(&u.values).p_value > 0.01);
    assert_eq!(u.values, m.pit(&x, 9).unwrap().values);
    assert_ne!(u.values, m.pit(&x, 10).unwrap().values);
}

#[test]
fn missing_values_are_imputed_in_paths() {
    let y = arma11(300, 0.0, 0.5, 0.0, 2);
    let m = fit_marginal(&y, &MarginalSpec::new(MarginalKind::Arima).with_order(1, 0, 0)).unwrap();
    let mut gappy = y.clone();
    gappy[299] = f64::NAN;
    let path = m.predictive_path(&gappy);
    let imputed = path[299].unwrap().median();
    let mut filled = y.clone();
    filled[299] = imputed;
    assert_eq!(path[300], m.predictive_path(&filled)[300]);
    assert!(m.pit(&gappy, 0).is_err());
}

#[test]
fn json_round_trip_and_kind_check() {
    let y = arma11(400, 0.0, 0.5, 0.0, 2);
    let m = fit_marginal(&y, &MarginalSpec::new(MarginalKind::Arima).with_order(1, 0, 0)).unwrap();
    let s = serde_json::to_string(&m).unwrap();
    let back: MarginalModel = serde_json::from_str(&s).unwrap();
    assert_eq!(back, m);
    let mut bad = m.clone();
    bad.kind = MarginalKind::Zaga;
    assert!(bad.validate().is_err());
    assert!("arima-garch-t".parse::<MarginalKind>().unwrap() == MarginalKind::ArimaGarchT);
    let spec: MarginalSpec = serde_json::from_str(r#"{"kind":"arima","order":{"p":1,"d":0,"q":2},"transform":"log"}"#).unwrap();
    assert_eq!(spec.garch, [1, 1]);
    assert_eq!(spec.transform, Transform::Log);
}

#[test]
fn short_history_is_an_error() {
    let y = arma11(400, 0.0, 0.5, 0.0, 2);
    let m = fit_marginal(&y, &MarginalSpec::new(MarginalKind::Arima).with_order(1, 1, 0)).unwrap();
    assert!(m.pit(&y[..1], 0).is_err());
    assert!(m.horizon(&[]).is_err());
    assert!(fit_marginal(&[0.0, 1.0], &MarginalSpec::new(MarginalKind::Zaga).with_transform(Transform::Log)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn location_scale_round_trip(loc in -3.0f64..3.0, scale in 0.05f64..3.0, nu in 2.5f64..40.0,
                                 offset in -2.0f64..2.0, log in any::<bool>(), shift in 0.0f64..3.0, z in -4.0f64..4.0) {
        let inn = if nu > 30.0 { Innovation::Normal } else { Innovation::StudentT { nu } };
        let bt = BackTransform { offset, log, shift };
        let p = Predictive::LocationScale { loc, scale, innovation: inn, back: bt };
        let x = bt.to_data(loc + scale * z);
        let u = p.cdf(x);
        prop_assume!(u > PIT_CLAMP && u < 1.0 - PIT_CLAMP);
        let back = p.quantile(u);
        prop_assert!((back - x).abs() < 1e-8 * (1.0 + x.abs()), "{} vs {}", back, x);
    }

    #[test]
    fn zero_adjusted_round_trip(mu in 0.1f64..20.0, sigma in 0.2f64..1.5, nu in 0.05f64..0.9, q in 0.001f64..0.999, ig in any::<bool>()) {
        let family = if ig { ZaFamily::InverseGaussian } else { ZaFamily::Gamma };
        let p = Predictive::ZeroAdjusted { family, nu, mu, sigma };
        let x = family.quantile(q, mu, sigma);
        let u = p.cdf(x);
        let back = p.quantile(u);
        prop_assert!((back - x).abs() < 1e-8 * (1.0 + x), "{} vs {}", back, x);
    }
}
