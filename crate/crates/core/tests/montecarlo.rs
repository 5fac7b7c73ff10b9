mod common;

use common::*;
use orthofield::algebra::Expansion;
use orthofield::criteria::FieldCriteria;
use orthofield::montecarlo::{
    clt_experiment, estimate_error, estimate_error_ladder, ks_critical, McSettings, PairSimulator, KS_COEF_ALPHA_001,
};
use orthofield::{InnovationLaw, Kernel};

#[test]
fn monte_carlo_error_matches_exact_error_on_the_zoo() {
    let rect = rect(&[4, 4]);
    let models = zoo();
    let mut within = 0;
    for (i, (name, model)) in models.iter().enumerate() {
        let c = FieldCriteria::new(model).unwrap();
        let d = c.candidate_d(&squares(&[2, 4, 8])).unwrap();
        let exact = c.approx_error(d.expansion(), &rect).unwrap();
        let est = estimate_error(model, d.expansion(), &rect, &McSettings::new(4000, 100 + i as u64))
            .unwrap()
            .with_exact(exact);
        let z = est.z_score().unwrap();
        if z <= 4.0 {
            within += 1;
        } else {
            eprintln!("{name}: mc {} exact {exact} z {z}", est.mc_error_per_cell);
        }
    }
    assert!(within + 1 >= models.len(), "{within} of {}", models.len());
}

#[test]
fn gaussian_linear_variance_is_consistent() {
    let rect = rect(&[6, 6]);
    let replicates = 4000;
    for (i, (name, model)) in zoo().into_iter().enumerate() {
        if !matches!(model.kernel(), Kernel::Linear(_)) {
            continue;
        }
        let model = model.with_law(InnovationLaw::gaussian(1.0).unwrap());
        let exact = model.exact_variance_ratio(&rect).unwrap();
        let d = FieldCriteria::new(&model).unwrap().candidate_d(&squares(&[2, 4])).unwrap();
        let report = clt_experiment(&model, d.expansion(), &rect, &McSettings::new(replicates, 7 + i as u64)).unwrap();
        let band = 4.0 * exact * (2.0 / replicates as f64).sqrt();
        assert!((report.empirical_variance - exact).abs() <= band + 1e-12, "{name}: {} vs {exact}", report.empirical_variance);
        assert!(report.empirical_variance >= 0.0);
        if let Some(ks) = report.ks_statistic {
            assert!((0.0..=1.0).contains(&ks));
        }
    }
}

#[test]
fn z2_error_decreases_along_the_ladder() {
    let model = z2();
    let d = Expansion::innovation(mi(&[1, 1]), 2.0);
    let ladder = squares(&[2, 4, 8, 16, 32]);
    let est = estimate_error_ladder(&model, &d, &ladder, &McSettings::new(20_000, 3)).unwrap();
    for (e, r) in est.iter().zip(&ladder) {
        let k = r.upper().get(0) as f64;
        let exact = (4.0 * k - 2.0) / (k * k);
        assert!((e.mc_error_per_cell - exact).abs() <= 4.0 * e.standard_error, "{r}: {e:?}");
    }
    assert!(est.windows(2).all(|w| w[1].mc_error_per_cell < w[0].mc_error_per_cell));
}

#[test]
fn replicate_streams_are_prefix_stable_and_thread_independent() {
    let model = z4();
    let d = FieldCriteria::new(&model).unwrap().candidate_d(&squares(&[2, 4])).unwrap();
    let sim = PairSimulator::new(&model, d.expansion(), &squares(&[3, 5])).unwrap();
    let short = sim.run(&McSettings::new(50, 11)).unwrap();
    let long = sim.run(&McSettings::new(100, 11).with_threads(3)).unwrap();
    let single = sim.run(&McSettings::new(100, 11).with_threads(1)).unwrap();
    assert_eq!(&long[..50], &short[..]);
    assert_eq!(long, single);
    assert_eq!(long[17], sim.draw(11, 17));
    assert_ne!(sim.run(&McSettings::new(50, 12)).unwrap(), short);
}

#[test]
fn iid_field_has_no_approximation_error() {
    let model = z1();
    let d = Expansion::innovation(mi(&[1, 1]), 1.0);
    let est = estimate_error(&model, &d, &rect(&[5, 7]), &McSettings::new(200, 0)).unwrap();
    assert_eq!(est.mc_error_per_cell, 0.0);
    assert_eq!(est.standard_error, 0.0);
}

#[test]
fn clt_for_a_gaussian_moving_average() {
    let model = z2().with_law(InnovationLaw::gaussian(1.0).unwrap());
    let d = Expansion::innovation(mi(&[1, 1]), 2.0);
    let report = clt_experiment(&model, &d, &rect(&[16, 16]), &McSettings::new(2000, 9)).unwrap();
    assert_eq!(report.target_variance, 4.0);
    let exact = report.exact_variance_ratio.unwrap();
    assert_eq!(exact, (2.0 * 15.0 * 15.0 + 2.0 * 16.0 * 16.0) / 256.0);
    // S_n is Gaussian with variance `exact`; rescale before comparing with
    // the standard KS critical value.
    let rescaled = clt_experiment(
        &model,
        &Expansion::innovation(mi(&[1, 1]), exact.sqrt()),
        &rect(&[16, 16]),
        &McSettings::new(2000, 9),
    )
    .unwrap();
    assert!(rescaled.ks_statistic.unwrap() < ks_critical(KS_COEF_ALPHA_001, 2000));
}

#[test]
fn degenerate_candidate_skips_ks() {
    let model = z1();
    let report = clt_experiment(&model, &Expansion::zero(2), &rect(&[4, 4]), &McSettings::new(100, 1)).unwrap();
    assert_eq!(report.ks_statistic, None);
    assert!(report.flags.iter().any(|f| f == "degenerate-variance"));
}

#[test]
fn too_few_replicates_are_rejected() {
    let model = z1();
    let d = Expansion::innovation(mi(&[1, 1]), 1.0);
    assert!(estimate_error(&model, &d, &rect(&[2, 2]), &McSettings::new(1, 0)).is_err());
    assert!(clt_experiment(&model, &d, &rect(&[2, 2]), &McSettings::new(99, 0)).is_err());
}
