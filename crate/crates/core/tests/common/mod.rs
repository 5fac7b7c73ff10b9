#![allow(dead_code)]

use orthofield::{FieldModel, InnovationLaw, LinearKernel, MultiIndex, Rectangle, VolterraKernel};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mi(c: &[i64]) -> MultiIndex {
    MultiIndex::new(c.iter().copied())
}

pub fn rect(c: &[i64]) -> Rectangle {
    Rectangle::new(mi(c)).unwrap()
}

pub fn squares(sides: &[i64]) -> Vec<Rectangle> {
    sides.iter().map(|&k| rect(&[k, k])).collect()
}

pub fn linear(entries: &[(&[i64], f64)]) -> FieldModel {
    FieldModel::linear(
        LinearKernel::new(2, entries.iter().map(|(j, a)| (mi(j), *a))).unwrap(),
        InnovationLaw::rademacher(),
    )
}

pub fn volterra(entries: &[(&[i64], &[i64], f64)]) -> FieldModel {
    FieldModel::volterra(
        VolterraKernel::new(2, entries.iter().map(|(u, v, a)| ((mi(u), mi(v)), *a))).unwrap(),
        InnovationLaw::rademacher(),
    )
}

pub fn z1() -> FieldModel {
    linear(&[(&[0, 0], 1.0)])
}

pub fn z2() -> FieldModel {
    linear(&[(&[0, 0], 1.0), (&[1, 1], 1.0)])
}

pub fn z3() -> FieldModel {
    volterra(&[(&[1, 0], &[0, 1], 1.0)])
}

pub fn z4() -> FieldModel {
    volterra(&[(&[2, 1], &[1, 2], 1.0)])
}

fn offsets() -> Vec<MultiIndex> {
    (0..3).flat_map(|a| (0..3).map(move |b| mi(&[a, b]))).collect()
}

/// Linear kernels on `[0,2]²`, each offset kept with probability 1/2,
/// coefficients uniform on `[-1,1]`.
pub fn random_linear(count: usize, seed: u64) -> Vec<FieldModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut entries: Vec<(MultiIndex, f64)> = Vec::new();
            for j in offsets() {
                let keep = rng.random_bool(0.5);
                let a = rng.random_range(-1.0..=1.0);
                if keep {
                    entries.push((j, a));
                }
            }
            if entries.is_empty() {
                entries.push((mi(&[0, 0]), rng.random_range(-1.0..=1.0)));
            }
            FieldModel::linear(LinearKernel::new(2, entries).unwrap(), InnovationLaw::rademacher())
        })
        .collect()
}

/// Volterra kernels with one to four distinct off-diagonal pairs in `[0,2]²`.
pub fn random_volterra(count: usize, seed: u64) -> Vec<FieldModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = offsets();
    (0..count)
        .map(|_| {
            let k = rng.random_range(1..=4);
            let mut entries: Vec<((MultiIndex, MultiIndex), f64)> = Vec::new();
            while entries.len() < k {
                let u = sites.choose(&mut rng).unwrap().clone();
                let v = sites.choose(&mut rng).unwrap().clone();
                if u != v && !entries.iter().any(|((a, b), _)| *a == u && *b == v) {
                    entries.push(((u, v), rng.random_range(-1.0..=1.0)));
                }
            }
            FieldModel::volterra(VolterraKernel::new(2, entries).unwrap(), InnovationLaw::rademacher())
        })
        .collect()
}

/// Z1–Z4, 50 random linear and 20 random Volterra kernels.
pub fn zoo() -> Vec<(String, FieldModel)> {
    let mut out = vec![
        ("Z1".to_string(), z1()),
        ("Z2".to_string(), z2()),
        ("Z3".to_string(), z3()),
        ("Z4".to_string(), z4()),
    ];
    out.extend(random_linear(50, 0x11).into_iter().enumerate().map(|(i, m)| (format!("L{i}"), m)));
    out.extend(random_volterra(20, 0x22).into_iter().enumerate().map(|(i, m)| (format!("V{i}"), m)));
    out
}
