//! The same machinery on `Z^3`: eight-corner remainders and three
//! regularity terms.

use orthofield::criteria::FieldCriteria;
use orthofield::{FieldModel, InnovationLaw, LinearKernel, MultiIndex, Rectangle};

fn main() -> orthofield::Result<()> {
    let model = FieldModel::linear(
        LinearKernel::new(3, [(MultiIndex::from([0, 0, 0]), 1.0), (MultiIndex::from([1, 0, 1]), 0.5)])?,
        InnovationLaw::gaussian(2.0)?,
    );
    let criteria = FieldCriteria::new(&model)?;
    let ladder: Vec<Rectangle> = [2, 4, 8, 16].iter().map(|&k| Rectangle::square(3, k)).collect::<Result<_, _>>()?;
    let d = criteria.candidate_d(&ladder)?;
    println!("D = {}", d.expansion());

    let n = Rectangle::new(MultiIndex::from([3, 2, 4]))?;
    let c = criteria.decomposition(d.expansion(), &n)?;
    println!("{n}: error {} = {} + {} (worst relative {:.1e})", c.error, c.projective, c.remainder, c.worst_relative());

    let report = criteria.report(&ladder, &d, 0.05)?;
    for row in &report.rows {
        println!(
            "{}: defdlim2 {:.5}, regularity {:?}, error {:.5}",
            row.grid, row.defdlim2_avg, row.regularity_norms, row.error_per_cell
        );
    }
    println!("conclusion: {}", report.verdicts.conclusion);
    Ok(())
}
