//! Shared fixtures for the benchmarks.

use parisian_core::{DrawdownSpec, LevyModel, TabulatedDensity};

pub fn brownian() -> LevyModel {
    LevyModel::brownian(0.0, std::f64::consts::SQRT_2).unwrap()
}

pub fn cramer_lundberg() -> LevyModel {
    LevyModel::cramer_lundberg_exp(1.5, 0.0, 1.0, 1.0).unwrap()
}

/// Triangular claims on [0, 2] with mean 1.
pub fn cramer_lundberg_triangle() -> LevyModel {
    let claims = TabulatedDensity::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0], 1.0).unwrap();
    LevyModel::cramer_lundberg_general(1.5, 0.0, 1.0, claims).unwrap()
}

pub fn models() -> [(&'static str, LevyModel); 3] {
    [
        ("bm", brownian()),
        ("cl_exp", cramer_lundberg()),
        ("cl_triangle", cramer_lundberg_triangle()),
    ]
}

pub fn drawdown() -> DrawdownSpec {
    DrawdownSpec::linear(0.5, 1.0).unwrap()
}
