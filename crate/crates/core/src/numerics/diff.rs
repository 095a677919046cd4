use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffScheme {
    Central5pt,
    Richardson,
}

/// Default step `eps^(1/3) * max(1, |x|)`.
pub fn default_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

pub fn differentiate<F: FnMut(f64) -> f64>(f: F, x: f64, scheme: DiffScheme) -> f64 {
    differentiate_with_step(f, x, scheme, default_step(x))
}

pub fn differentiate_with_step<F: FnMut(f64) -> f64>(
    mut f: F,
    x: f64,
    scheme: DiffScheme,
    h: f64,
) -> f64 {
    match scheme {
        DiffScheme::Central5pt => {
            (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
        }
        DiffScheme::Richardson => {
            let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
            let h2 = 0.5 * h;
            let d2 = (f(x + h2) - f(x - h2)) / (2.0 * h2);
            (4.0 * d2 - d1) / 3.0
        }
    }
}

/// One-sided (forward) 3-point derivative, used where the left side is unavailable.
pub fn differentiate_forward<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h)
}
