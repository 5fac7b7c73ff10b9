//! Brute-force Rademacher enumeration as an independent check of the
//! algebra on small windows.

use orthofield::algebra::{inner, norm2, project};
use orthofield::criteria::build_martingale;
use orthofield::oracle::{oracle_cond_check, oracle_expectation, oracle_inner, Window};
use orthofield::{Expansion, FieldModel, InnovationLaw, LinearKernel, MultiIndex, Rectangle};

fn main() -> orthofield::Result<()> {
    let model = FieldModel::linear(
        LinearKernel::new(2, [(MultiIndex::from([0, 0]), 1.0), (MultiIndex::from([1, 1]), 1.0)])?,
        InnovationLaw::rademacher(),
    );
    let n = Rectangle::square(2, 2)?;
    let s = model.partial_sum(&n)?;
    let m = build_martingale(&Expansion::innovation(MultiIndex::ones(2), 2.0), &n)?;
    let window = Window::covering([&s, &m])?;
    println!("{} sites, {} sign patterns", window.len(), 1u64 << window.len());

    println!("E S      : oracle {}, algebra {}", oracle_expectation(&s, &window)?, s.constant_term());
    println!("E S^2    : oracle {}, algebra {}", oracle_inner(&s, &s, &window)?, norm2(&s, 1.0)?);
    println!("E S M    : oracle {}, algebra {}", oracle_inner(&s, &m, &window)?, inner(&s, &m, 1.0)?);
    let diff = &s - &m;
    println!("E (S-M)^2/|n| : oracle {}", oracle_inner(&diff, &diff, &window)? / n.cells() as f64);

    let mut passed = 0;
    for a in -1..=2 {
        for b in -1..=2 {
            let c = MultiIndex::from([a, b]);
            assert!(oracle_cond_check(&s, &c, &window)?);
            assert!(oracle_cond_check(&project(&s, &c)?, &c, &window)?);
            passed += 2;
        }
    }
    println!("{passed} conditional-expectation checks agree");
    Ok(())
}
