//! Exact innovation algebra: conditional expectations, projections and
//! second moments of multilinear expansions.

use orthofield::algebra::{cond_expect, inner, norm2, project, shift, Expansion};
use orthofield::MultiIndex;

fn main() -> orthofield::Result<()> {
    let e: Expansion = "1.5 * x[(0,0)] + 2 * x[(1,0)]x[(0,2)] - 0.5 * x[(2,2)] + 3".parse()?;
    println!("e            = {e}");

    let cutoff = MultiIndex::from([1, 1]);
    println!("E[e | F_(1,1)] = {}", cond_expect(&e, &cutoff)?);

    // Commuting filtrations: conditioning twice equals conditioning on the meet.
    let a = MultiIndex::from([2, 0]);
    let b = MultiIndex::from([0, 2]);
    let twice = cond_expect(&cond_expect(&e, &b)?, &a)?;
    assert_eq!(twice, cond_expect(&e, &a.meet(&b))?);
    println!("E_a E_b e    = {twice}");

    for m in [[0, 0], [1, 2], [2, 2]] {
        let m = MultiIndex::from(m);
        println!("P_{m} e = {}", project(&e, &m)?);
    }

    let sigma2 = 2.0;
    println!("||e||^2 (sigma^2 = {sigma2}) = {}", norm2(&e, sigma2)?);
    let moved = shift(&e, &MultiIndex::from([5, -3]))?;
    println!("shifted      = {moved}");
    println!("<e, shifted> = {}", inner(&e, &moved, sigma2)?);
    Ok(())
}
