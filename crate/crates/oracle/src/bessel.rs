//! Closed-form kernels for constant `beta = lambda`.

use crate::{OracleError, Result};

/// `bessel_kernel(10, 1, 0.5)`, summed once with 60 terms and confirmed
/// against a 2000-term summation and an independent library evaluation.
pub const BESSEL_PIN_LAMBDA10_X1_Y05: f64 = -5.702_043_145_605_552;

/// `I_1(z) / z` as `1/2 sum_m w^m / (m! (m+1)!)` with `w = z^2 / 4`; a
/// negative `w` gives `J_1(|z|) / |z|`.
fn i1_over_z(w: f64, terms: usize) -> f64 {
    let mut term = 0.5;
    let mut sum = term;
    for m in 1..terms {
        term *= w / (m as f64 * (m as f64 + 1.0));
        sum += term;
    }
    sum
}

fn check(x: f64, y: f64) -> Result<()> {
    const SLACK: f64 = 1e-12;
    if !(y >= -SLACK && y <= x + SLACK && x <= 1.0 + SLACK) {
        return Err(OracleError::OutsideTriangle { x, y });
    }
    Ok(())
}

/// Dirichlet kernel `-lambda y I_1(z) / z`, `z = sqrt(lambda (x^2 - y^2))`.
pub fn bessel_kernel(lambda: f64, x: f64, y: f64) -> Result<f64> {
    check(x, y)?;
    Ok(-lambda * y * i1_over_z(lambda * (x * x - y * y) / 4.0, 60))
}

/// Neumann kernel `-lambda x I_1(z) / z`.
pub fn bessel_kernel_neumann(lambda: f64, x: f64, y: f64) -> Result<f64> {
    check(x, y)?;
    Ok(-lambda * x * i1_over_z(lambda * (x * x - y * y) / 4.0, 60))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vanishes_on_the_edge() {
        for lambda in [-3.0, 1.0, 10.0] {
            for x in [0.0, 0.3, 1.0] {
                assert_eq!(bessel_kernel(lambda, x, 0.0).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn diagonal_value() {
        for lambda in [-4.0, 1.0, 10.0] {
            for x in [0.1, 0.5, 1.0] {
                assert_relative_eq!(bessel_kernel(lambda, x, x).unwrap(), -lambda * x / 2.0, epsilon = 1e-15);
                assert_relative_eq!(bessel_kernel_neumann(lambda, x, x).unwrap(), -lambda * x / 2.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn pinned_value() {
        let v = bessel_kernel(10.0, 1.0, 0.5).unwrap();
        assert_relative_eq!(v, BESSEL_PIN_LAMBDA10_X1_Y05, max_relative = 1e-15);
        let long = -10.0 * 0.5 * i1_over_z(10.0 * 0.75 / 4.0, 2000);
        assert_relative_eq!(v, long, max_relative = 1e-15);
    }

    #[test]
    fn negative_lambda_is_oscillatory() {
        // J_1(z)/z = 1/2 - z^2/16 + ...; at small z the series is exact enough
        let (lambda, x, y) = (-1e-4, 1.0, 0.0);
        let neu = bessel_kernel_neumann(lambda, x, y).unwrap();
        let z2 = -lambda * (x * x - y * y);
        assert_relative_eq!(neu, -lambda * x * (0.5 - z2 / 16.0), max_relative = 1e-9);
        // first zero of J_1 at z = 3.8317...
        let z = 3.831_705_970_207_512;
        assert!(bessel_kernel_neumann(-z * z, 1.0, 0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rejects_points_outside_triangle() {
        assert!(bessel_kernel(1.0, 0.5, 0.6).is_err());
        assert!(bessel_kernel(1.0, 1.5, 0.1).is_err());
        assert!(bessel_kernel(1.0, 0.5, -0.1).is_err());
    }
}
