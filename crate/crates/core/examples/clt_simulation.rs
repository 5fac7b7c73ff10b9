//! Monte Carlo: the CLT for normalized partial sums and the simulated
//! approximation error against its exact value.

use orthofield::criteria::FieldCriteria;
use orthofield::montecarlo::{clt_and_error_ladder, ks_critical, McSettings, KS_COEF_ALPHA_01};
use orthofield::{FieldModel, InnovationLaw, LinearKernel, MultiIndex, Rectangle};

fn main() -> orthofield::Result<()> {
    let model = FieldModel::linear(
        LinearKernel::new(2, [(MultiIndex::from([0, 0]), 1.0), (MultiIndex::from([1, 1]), 1.0)])?,
        InnovationLaw::gaussian(1.0)?,
    );
    let ladder: Vec<Rectangle> = [4, 16, 64].iter().map(|&k| Rectangle::square(2, k)).collect::<Result<_, _>>()?;
    let criteria = FieldCriteria::new(&model)?;
    let d = criteria.candidate_d(&ladder)?;
    let settings = McSettings::new(3000, 2024);
    let (clt, errors) = clt_and_error_ladder(&model, d.expansion(), &ladder, &settings)?;

    println!("D = {}  (target variance {})", d.expansion(), clt[0].target_variance);
    println!("KS critical value at 1%: {:.4}", ks_critical(KS_COEF_ALPHA_01, settings.replicates));
    for (c, e) in clt.iter().zip(&errors) {
        let exact = criteria.approx_error(d.expansion(), &c.rect)?;
        println!(
            "{}: mean {:+.4}, var {:.4} (exact {:.4}), ks {:.4}, error {:.4} ± {:.4} (exact {:.4})",
            c.rect,
            c.empirical_mean,
            c.empirical_variance,
            c.exact_variance_ratio.unwrap_or(f64::NAN),
            c.ks_statistic.unwrap_or(f64::NAN),
            e.mc_error_per_cell,
            e.standard_error,
            exact
        );
    }
    Ok(())
}
