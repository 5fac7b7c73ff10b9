//! A second-order Volterra field: both coefficient tables, the cross
//! monomials the closed form misses, and Cauchy gaps along a ladder.

use orthofield::criteria::{volterra_cauchy_gap, volterra_cnw, FieldCriteria};
use orthofield::{FieldModel, InnovationLaw, MultiIndex, Rectangle, VolterraKernel};

fn main() -> orthofield::Result<()> {
    let entries = [
        ((MultiIndex::from([0, 0]), MultiIndex::from([1, 1])), 1.0),
        ((MultiIndex::from([2, 1]), MultiIndex::from([1, 2])), 0.5),
    ];
    let model = FieldModel::volterra(VolterraKernel::new(2, entries)?, InnovationLaw::rademacher());
    let criteria = FieldCriteria::new(&model)?;

    let n = Rectangle::square(2, 6)?;
    let tables = volterra_cnw(&criteria, &n)?;
    println!("closed-form c_(n,w) at {n}:");
    for (w, c) in &tables.literal {
        println!("  w = {w}: {c}");
    }
    println!("from the Cesàro projection:");
    for (w, c) in &tables.projected {
        println!("  w = {w}: {c}");
    }
    println!("cross monomials: {}", tables.cross_terms);
    println!("tables disagree: {}", tables.disagreement);

    let ladder: Vec<Rectangle> = [2, 4, 8, 16].iter().map(|&k| Rectangle::square(2, k)).collect::<Result<_, _>>()?;
    for w in ladder.windows(2) {
        let gap = volterra_cauchy_gap(&criteria, &w[1], &w[0])?;
        println!("gap {} -> {}: closed form {:.6e}, projected {:.6e}", w[0], w[1], gap.literal, gap.projected);
    }
    Ok(())
}
