use smokecast::data::Period;
use smokecast::e0ns::{fit_variance_spline, forecast_e0ns, gain_curve, GainCurveParams, Jumpoff, GAIN_NAMES};
use smokecast::mcmc::dist::sample_std_normal;
use smokecast::mcmc::{stream_rng, ChainConfig, PosteriorDraws};
use smokecast::stats::{quantile, variance};

#[test]
fn median_trajectory_matches_brute_force_recursion() {
    let params = [12.0, 35.0, 4.0, 15.0, 2.8, 0.5];
    let omega = 0.8;
    // A noise multiplier that grows with the level, clamped at 75.
    let pairs: Vec<(f64, f64)> = (0..60).map(|i| 45.0 + 0.5 * i as f64).map(|e| (e, 0.3 + 0.01 * (e - 45.0))).collect();
    let spline = fit_variance_spline(&pairs, 5).unwrap();

    let n = 20_000;
    let mut names: Vec<String> = GAIN_NAMES.iter().map(|g| format!("{g}[A]")).collect();
    names.push("noise_sd[A]".into());
    let mut row = params.to_vec();
    row.push(omega);
    let config = ChainConfig {
        n_iterations: n + 1,
        burn_in: 1,
        thin: 1,
        n_chains: 1,
        seed: 1,
        adaptation_window: 1,
    };
    let draws = PosteriorDraws::new(names, row.repeat(n), 1, config, Default::default())
        .unwrap()
        .with_meta(serde_json::json!({ "sex": "male", "spline": spline }));
    let jumpoff = vec![Jumpoff {
        country: "A".into(),
        period: Period::from_start(2010).unwrap(),
        e0: 68.0,
    }];
    let traj = forecast_e0ns(&draws, &jumpoff, 9, &mut stream_rng(3, &[])).unwrap();

    let p = GainCurveParams::from_array(&params);
    let mut rng = stream_rng(4, &[]);
    let brute: Vec<Vec<f64>> = (0..100_000)
        .map(|_| {
            let mut e = 68.0;
            (0..9)
                .map(|_| {
                    let m = spline.eval(e);
                    e += gain_curve(e, &p) + omega * m * sample_std_normal(&mut rng);
                    e
                })
                .collect()
        })
        .collect();
    for h in 0..9 {
        let b: Vec<f64> = brute.iter().map(|t| t[h]).collect();
        let f = traj.cell(0, h);
        let sd = variance(&b).sqrt();
        // Standard error of a normal median is about 1.2533 sd / sqrt(n).
        let se = 1.2533 * sd * (1.0 / n as f64 + 1.0 / b.len() as f64).sqrt();
        let diff = quantile(f, 0.5) - quantile(&b, 0.5);
        assert!(diff.abs() < 4.0 * se, "period {h}: diff {diff}, se {se}");
    }
}
