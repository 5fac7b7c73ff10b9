//! A linear moving-average field: partial sums, the Cesàro candidate and
//! the cumulative kernel sums under both indexing conventions.

use orthofield::criteria::{linear_b, linear_cesaro, BConvention, FieldCriteria};
use orthofield::{FieldModel, InnovationLaw, LinearKernel, MultiIndex, Rectangle};

fn main() -> orthofield::Result<()> {
    let kernel = LinearKernel::new(
        2,
        [(MultiIndex::from([0, 0]), 1.0), (MultiIndex::from([1, 0]), -0.4), (MultiIndex::from([1, 1]), 0.7)],
    )?;
    let model = FieldModel::linear(kernel, InnovationLaw::rademacher());
    let rect = Rectangle::new(MultiIndex::from([3, 2]))?;
    println!("S_(3,2) = {}", model.partial_sum(&rect)?);
    println!("E S^2 / |n| = {}", model.exact_variance_ratio(&rect)?);

    for j in [[1, 1], [2, 1], [2, 2], [3, 3]] {
        let j = MultiIndex::from(j);
        println!(
            "b_{j}: shifted origin {}, literal {}",
            linear_b(&model, &j, BConvention::ShiftedOrigin)?,
            linear_b(&model, &j, BConvention::LiteralRange)?
        );
    }

    let ladder: Vec<Rectangle> = [2, 4, 8, 16, 32, 64].iter().map(|&k| Rectangle::square(2, k)).collect::<Result<_, _>>()?;
    let seq = linear_cesaro(&model, &ladder, BConvention::ShiftedOrigin)?;
    for (r, c) in ladder.iter().zip(&seq) {
        println!("Cesàro coefficient at {r}: {c:.6}");
    }
    println!("kernel sum: {}", 1.0 - 0.4 + 0.7);

    let criteria = FieldCriteria::new(&model)?;
    let d = criteria.candidate_d(&ladder)?;
    println!("D = {}", d.expansion());
    Ok(())
}
