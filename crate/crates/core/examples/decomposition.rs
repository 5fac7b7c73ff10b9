//! The orthogonal split of the approximation error into projective and
//! remainder parts, checked on a moving average and a Volterra field.

use orthofield::criteria::FieldCriteria;
use orthofield::{FieldModel, InnovationLaw, LinearKernel, MultiIndex, Rectangle, VolterraKernel};

fn main() -> orthofield::Result<()> {
    let linear = FieldModel::linear(
        LinearKernel::new(2, [(MultiIndex::from([0, 0]), 1.0), (MultiIndex::from([1, 1]), 1.0)])?,
        InnovationLaw::rademacher(),
    );
    let volterra = FieldModel::volterra(
        VolterraKernel::new(2, [((MultiIndex::from([1, 0]), MultiIndex::from([0, 1])), 1.0)])?,
        InnovationLaw::rademacher(),
    );
    let ladder: Vec<Rectangle> = [2, 4, 8].iter().map(|&k| Rectangle::square(2, k)).collect::<Result<_, _>>()?;

    for (name, model) in [("moving average", &linear), ("volterra", &volterra)] {
        let criteria = FieldCriteria::new(model)?;
        let d = criteria.candidate_d(&ladder)?;
        println!("{name}: D = {}", d.expansion());
        for upper in [[2, 2], [3, 5], [6, 6]] {
            let n = Rectangle::new(MultiIndex::from(upper))?;
            let c = criteria.decomposition(d.expansion(), &n)?;
            println!(
                "  {n}: error {:.6} = projective {:.6} + remainder {:.6}  (remainder formula {:.6}, worst relative {:.1e})",
                c.error,
                c.projective,
                c.remainder,
                c.remainder_formula,
                c.worst_relative()
            );
        }
    }
    Ok(())
}
