//! Chebyshev polynomial smoother, diagonally preconditioned, plus the power
//! iteration that estimates the spectral bound it targets.

use super::{dot, norm, LinearOp, Projection};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("operator action is numerically zero; cannot estimate spectrum")]
    ZeroOperator,
}

#[derive(Clone, Copy, Debug)]
pub struct ChebyshevConfig {
    pub degree: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
}

impl ChebyshevConfig {
    /// Smoothing interval derived from an estimated largest eigenvalue:
    /// [1.1 lambda_max / 10, 1.1 lambda_max].
    pub fn from_estimate(degree: usize, lambda_max: f64) -> Self {
        let hi = 1.1 * lambda_max;
        ChebyshevConfig {
            degree,
            lambda_lo: hi / 10.0,
            lambda_hi: hi,
        }
    }
}

/// Smoother state for one operator: interval plus inverse diagonal.
pub struct ChebyshevSetup {
    pub config: ChebyshevConfig,
    pub inv_diag: Vec<f64>,
}

/// Applies `steps` sweeps of the degree-`config.degree` Chebyshev iteration
/// for the diagonally preconditioned operator on [lambda_lo, lambda_hi].
pub fn chebyshev_smooth(
    op: &dyn LinearOp,
    setup: &ChebyshevSetup,
    rhs: &[f64],
    x: &mut [f64],
    steps: usize,
    project: Option<Projection>,
) {
    let n = rhs.len();
    let cfg = &setup.config;
    assert!(cfg.degree >= 1);
    let proj = |v: &mut [f64]| {
        if let Some(p) = project {
            p(v);
        }
    };
    let theta = 0.5 * (cfg.lambda_hi + cfg.lambda_lo);
    let delta = 0.5 * (cfg.lambda_hi - cfg.lambda_lo);
    let mut r = vec![0.0; n];
    let mut d = vec![0.0; n];

    let residual = |x: &[f64], r: &mut Vec<f64>| {
        op.apply(x, r);
        for i in 0..n {
            r[i] = (rhs[i] - r[i]) * setup.inv_diag[i];
        }
    };

    for _ in 0..steps {
        residual(x, &mut r);
        proj(&mut r);
        for i in 0..n {
            d[i] = r[i] / theta;
        }
        proj(&mut d);
        for i in 0..n {
            x[i] += d[i];
        }
        if cfg.degree >= 2 {
            let sigma = theta / delta.max(f64::MIN_POSITIVE);
            let mut rho = 1.0 / sigma;
            for _ in 2..=cfg.degree {
                residual(x, &mut r);
                proj(&mut r);
                let rho_new = 1.0 / (2.0 * sigma - rho);
                for i in 0..n {
                    d[i] = rho_new * rho * d[i] + 2.0 * rho_new / delta * r[i];
                }
                proj(&mut d);
                for i in 0..n {
                    x[i] += d[i];
                }
                rho = rho_new;
            }
        }
        proj(x);
    }
}

/// Power iteration on diag^{-1} op with a fixed-seed start vector.
pub fn estimate_spectral_bound(
    op: &dyn LinearOp,
    inv_diag: &[f64],
    project: Option<Projection>,
    iterations: usize,
) -> Result<f64, SpectrumError> {
    let n = inv_diag.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_CAFE);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    if let Some(p) = project {
        p(&mut v);
    }
    let nv = norm(&v);
    if nv == 0.0 {
        return Err(SpectrumError::ZeroOperator);
    }
    for vi in v.iter_mut() {
        *vi /= nv;
    }
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..iterations {
        op.apply(&v, &mut w);
        for i in 0..n {
            w[i] *= inv_diag[i];
        }
        if let Some(p) = project {
            p(&mut w);
        }
        lambda = dot(&v, &w);
        let nw = norm(&w);
        if !(nw > 0.0) || !nw.is_finite() {
            return Err(SpectrumError::ZeroOperator);
        }
        for i in 0..n {
            v[i] = w[i] / nw;
        }
    }
    if !(lambda > 0.0) {
        return Err(SpectrumError::ZeroOperator);
    }
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct DiagOp(Vec<f64>);
    impl LinearOp for DiagOp {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for i in 0..x.len() {
                y[i] = self.0[i] * x[i];
            }
        }
    }

    #[test]
    fn degree_one_on_point_interval_kills_single_mode() {
        let lambda = 3.7;
        let op = DiagOp(vec![lambda; 4]);
        let setup = ChebyshevSetup {
            config: ChebyshevConfig {
                degree: 1,
                lambda_lo: lambda,
                lambda_hi: lambda,
            },
            inv_diag: vec![1.0; 4],
        };
        let x_exact = [1.0, -2.0, 0.5, 0.25];
        let rhs: Vec<f64> = x_exact.iter().map(|v| lambda * v).collect();
        let mut x = vec![0.0; 4];
        chebyshev_smooth(&op, &setup, &rhs, &mut x, 1, None);
        for i in 0..4 {
            assert!((x[i] - x_exact[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_rhs_zero_guess_stays_zero() {
        let op = DiagOp(vec![2.0; 6]);
        let setup = ChebyshevSetup {
            config: ChebyshevConfig {
                degree: 3,
                lambda_lo: 0.2,
                lambda_hi: 2.2,
            },
            inv_diag: vec![0.5; 6],
        };
        let mut x = vec![0.0; 6];
        chebyshev_smooth(&op, &setup, &[0.0; 6], &mut x, 2, None);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    /// Chebyshev polynomial p_k with p_k(0) = 1, minimal on [lo, hi],
    /// evaluated by the same three-term recurrence the smoother realises.
    fn error_polynomial(k: usize, lo: f64, hi: f64, lambda: f64) -> f64 {
        // Error propagation e_{new} = p_k(lambda) e_old; evaluate by running
        // the smoother recurrence on the scalar problem lambda x = 0 from 1.
        let theta = 0.5 * (hi + lo);
        let delta = 0.5 * (hi - lo);
        let mut e = 1.0_f64;
        let mut d;
        // step 1
        let r = -lambda * e;
        d = r / theta;
        e += d;
        let sigma = theta / delta;
        let mut rho = 1.0 / sigma;
        for _ in 2..=k {
            let r = -lambda * e;
            let rho_new = 1.0 / (2.0 * sigma - rho);
            d = rho_new * rho * d + 2.0 * rho_new / delta * r;
            e += d;
            rho = rho_new;
        }
        e
    }

    #[test]
    fn damping_matches_explicit_polynomial_per_mode() {
        let eigs = vec![0.3, 0.7, 1.1, 1.9, 2.5];
        let (lo, hi) = (0.25, 2.6);
        let op = DiagOp(eigs.clone());
        let setup = ChebyshevSetup {
            config: ChebyshevConfig {
                degree: 3,
                lambda_lo: lo,
                lambda_hi: hi,
            },
            inv_diag: vec![1.0; 5],
        };
        // Solve op x = 0 starting from unit error in each coordinate.
        for mode in 0..5 {
            let mut x = vec![0.0; 5];
            x[mode] = 1.0;
            chebyshev_smooth(&op, &setup, &[0.0; 5], &mut x, 1, None);
            let expect = error_polynomial(3, lo, hi, eigs[mode]);
            assert!(
                (x[mode] - expect).abs() < 1e-12,
                "mode {mode}: {} vs {expect}",
                x[mode]
            );
        }
    }

    #[test]
    fn smoother_with_zero_guess_is_linear_in_rhs() {
        let op = DiagOp(vec![1.0, 2.0, 3.0, 4.0]);
        let setup = ChebyshevSetup {
            config: ChebyshevConfig {
                degree: 2,
                lambda_lo: 0.4,
                lambda_hi: 4.4,
            },
            inv_diag: vec![1.0; 4],
        };
        let a = [1.0, -1.0, 2.0, 0.5];
        let b = [0.3, 0.7, -0.2, 1.5];
        let (alpha, beta) = (1.7, -0.6);
        let run = |rhs: &[f64]| {
            let mut x = vec![0.0; 4];
            chebyshev_smooth(&op, &setup, rhs, &mut x, 1, None);
            x
        };
        let xa = run(&a);
        let xb = run(&b);
        let combo: Vec<f64> = (0..4).map(|i| alpha * a[i] + beta * b[i]).collect();
        let xc = run(&combo);
        for i in 0..4 {
            assert!((xc[i] - (alpha * xa[i] + beta * xb[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn power_iteration_finds_dominant_eigenvalue() {
        let op = DiagOp(vec![1.0, 2.0, 3.0]);
        let lambda = estimate_spectral_bound(&op, &[1.0; 3], None, 60).unwrap();
        assert!((lambda - 3.0).abs() < 0.03);
        // Homogeneity: scaling the operator scales the estimate.
        let op2 = DiagOp(vec![2.0, 4.0, 6.0]);
        let lambda2 = estimate_spectral_bound(&op2, &[1.0; 3], None, 60).unwrap();
        assert!((lambda2 - 2.0 * lambda).abs() < 1e-9 * lambda2.max(1.0));
    }

    #[test]
    fn zero_operator_is_an_error() {
        let op = DiagOp(vec![0.0; 3]);
        assert!(estimate_spectral_bound(&op, &[1.0; 3], None, 10).is_err());
    }
}
