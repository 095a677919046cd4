use num_complex::Complex64;

use crate::error::{Error, Result};

/// All roots of `c[0] + c[1] z + ... + c[n] z^n`, polished by Newton.
pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = coeffs.to_vec();
    while c.len() > 1 && c.last().unwrap().norm() == 0.0 {
        c.pop();
    }
    let n = c.len() - 1;
    match n {
        0 => vec![],
        1 => vec![-c[0] / c[1]],
        2 => quadratic(c[2], c[1], c[0]).to_vec(),
        _ => durand_kerner(&c),
    }
}

/// Roots of `a z^2 + b z + c` without cancellation.
pub fn quadratic(a: Complex64, b: Complex64, c: Complex64) -> [Complex64; 2] {
    let d = (b * b - 4.0 * a * c).sqrt();
    // pick the sign that avoids cancellation
    let qq = if (b.conj() * d).re >= 0.0 {
        -0.5 * (b + d)
    } else {
        -0.5 * (b - d)
    };
    if qq.norm() == 0.0 {
        return [Complex64::new(0.0, 0.0); 2];
    }
    [qq / a, c / qq]
}

fn horner(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut d = Complex64::new(0.0, 0.0);
    for a in c.iter().rev() {
        d = d * z + p;
        p = p * z + a;
    }
    (p, d)
}

fn durand_kerner(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let lead = c[n];
    let monic: Vec<Complex64> = c.iter().map(|a| a / lead).collect();
    let radius = 1.0 + monic[..n].iter().map(|a| a.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * radius * 0.5).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (p, _) = horner(&monic, z[i]);
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() == 0.0 {
                den = Complex64::new(1e-12, 0.0);
            }
            let step = p / den;
            z[i] -= step;
            moved = moved.max(step.norm() / z[i].norm().max(1.0));
        }
        if moved < 1e-15 {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, d) = horner(&monic, *zi);
            if d.norm() == 0.0 {
                break;
            }
            *zi -= p / d;
        }
    }
    z
}

/// Bisection on a sign change; used as an independent check on Newton solvers.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo * fhi > 0.0 {
        return Err(Error::InvalidArgument(
            "bisection interval has no sign change".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || hi - lo < tol {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn cubic_roots_real() {
        // (z-1)(z+2)(z-3) = z^3 - 2z^2 - 5z + 6
        let mut r: Vec<f64> = poly_roots(&[c(6.0), c(-5.0), c(-2.0), c(1.0)])
            .iter()
            .map(|z| z.re)
            .collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in r.iter().zip([-2.0, 1.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_small_root_accurate() {
        let [a, b] = quadratic(c(1.0), c(-1e8), c(1.0));
        let small = if a.norm() < b.norm() { a } else { b };
        assert!((small.re - 1e-8).abs() < 1e-22);
    }

    #[test]
    fn bisection_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }
}
