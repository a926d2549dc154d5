// SPDX-License-Identifier: MIT OR Apache-2.0

//! Difference operators, the grouped total-variation objective and
//! optimality checks.
//!
//! The dual convention is `x = y + L* u`, with `u_k` in `-lambda * d||.||(x_{k+1} - x_k)`.
//! A dual certificate produced elsewhere must follow the same sign.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvError};
use crate::signal::{norm, Signal};

/// Default threshold on `||x_{k+1} - x_k||` above which a step counts as a jump.
pub const DEFAULT_JUMP_TOL: f64 = 1e-9;

/// Regularisation weight of the grouped TV penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvParams {
    lambda: f64,
}

impl TvParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(TvError::InvalidParameter(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// `(Lx)_k = x_{k+1} - x_k`, applied to every component.
pub fn first_difference(x: &Signal) -> Result<Signal> {
    let n = x.len();
    if n < 2 {
        return Err(TvError::Dimension(format!(
            "first difference needs at least 2 samples, got {n}"
        )));
    }
    let m = x.components();
    let mut out = Signal::zeros(m, n - 1);
    for k in 0..n - 1 {
        let (a, b) = (x.sample(k), x.sample(k + 1));
        for (o, (p, q)) in out.sample_mut(k).iter_mut().zip(a.iter().zip(b)) {
            *o = q - p;
        }
    }
    Ok(out)
}

/// Adjoint of [`first_difference`]: maps `M x (N-1)` to `M x N`.
pub fn adjoint_difference(u: &Signal) -> Signal {
    let m = u.components();
    let n = u.len() + 1;
    let mut out = Signal::zeros(m, n);
    for k in 0..n {
        let dst = out.sample_mut(k);
        for c in 0..m {
            let prev = if k > 0 { u.get(c, k - 1) } else { 0.0 };
            let next = if k < n - 1 { u.get(c, k) } else { 0.0 };
            dst[c] = prev - next;
        }
    }
    out
}

/// Grouped TV penalty `sum_k ||x_{k+1} - x_k||_2` (without `lambda`).
pub fn total_variation(x: &Signal) -> f64 {
    (1..x.len())
        .map(|k| {
            let (a, b) = (x.sample(k - 1), x.sample(k));
            a.iter()
                .zip(b)
                .map(|(p, q)| (q - p).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// `1/2 ||x - y||_F^2 + lambda * TV(x)`.
pub fn primal_objective(x: &Signal, y: &Signal, lambda: f64) -> Result<f64> {
    y.same_shape(x)?;
    let fidelity: f64 = x
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(0.5 * fidelity + lambda * total_variation(x))
}

/// Dual sequence `u` (and optionally the auxiliary magnitudes `z`), both `M x (N-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub u: Signal,
    pub z: Option<Signal>,
}

impl DualCertificate {
    pub fn new(u: Signal) -> Self {
        Self { u, z: None }
    }

    pub fn with_z(u: Signal, z: Signal) -> Result<Self> {
        u.same_shape(&z)?;
        Ok(Self { u, z: Some(z) })
    }

    /// Dual implied by a primal candidate through `x = y + L* u`, i.e.
    /// `u_k = sum_{j <= k} (y_j - x_j)`. The closing value `u_N` is dropped.
    pub fn from_primal(x: &Signal, y: &Signal) -> Result<Self> {
        y.same_shape(x)?;
        let m = x.components();
        let n = x.len();
        let mut u = Signal::zeros(m, n.saturating_sub(1));
        let mut acc = vec![0.0; m];
        for k in 0..n.saturating_sub(1) {
            for c in 0..m {
                acc[c] += y.get(c, k) - x.get(c, k);
            }
            u.sample_mut(k).copy_from_slice(&acc);
        }
        Ok(Self::new(u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub max_primal_residual: f64,
    pub max_dual_feasibility_violation: f64,
    pub max_gradient_link_violation: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktOptions {
    pub tol: f64,
    pub jump_tol: f64,
}

impl KktOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            jump_tol: DEFAULT_JUMP_TOL,
        }
    }
}

/// Checks the optimality conditions of the grouped TV problem for `(x, u)`
/// and, when `z` is supplied, the componentwise conditions linking `u`, `z`
/// and the sign of each jump.
pub fn verify_kkt(
    x: &Signal,
    y: &Signal,
    lambda: f64,
    certificate: &DualCertificate,
    options: KktOptions,
) -> Result<KktReport> {
    y.same_shape(x)?;
    let m = x.components();
    let n = x.len();
    let u = &certificate.u;
    if u.components() != m || u.len() + 1 != n.max(1) {
        return Err(TvError::ShapeMismatch {
            expected_rows: m,
            expected_cols: n.saturating_sub(1),
            rows: u.components(),
            cols: u.len(),
        });
    }

    let mut primal = 0.0f64;
    let recon = if n > 1 {
        adjoint_difference(u)
    } else {
        Signal::zeros(m, 1)
    };
    for k in 0..n {
        for c in 0..m {
            let r = (x.get(c, k) - y.get(c, k) - recon.get(c, k)).abs();
            primal = primal.max(r);
        }
    }

    let mut feas = 0.0f64;
    let mut link = 0.0f64;
    let mut diff = vec![0.0; m];
    for k in 0..n.saturating_sub(1) {
        for c in 0..m {
            diff[c] = x.get(c, k + 1) - x.get(c, k);
        }
        let uk = u.sample(k);
        let dn = norm(&diff);
        if dn > options.jump_tol {
            let r: f64 = uk
                .iter()
                .zip(&diff)
                .map(|(a, d)| (a + lambda * d / dn).powi(2))
                .sum::<f64>()
                .sqrt();
            link = link.max(r);
        } else {
            feas = feas.max(norm(uk) - lambda);
        }

        if let Some(z) = &certificate.z {
            let zk = z.sample(k);
            if let Some(neg) = zk.iter().find(|v| **v < 0.0) {
                feas = feas.max(-neg);
            }
            feas = feas.max((norm(zk) - lambda).abs());
            for c in 0..m {
                feas = feas.max(uk[c].abs() - zk[c]);
                if diff[c] < -options.jump_tol {
                    link = link.max((uk[c] - zk[c]).abs());
                } else if diff[c] > options.jump_tol {
                    link = link.max((uk[c] + zk[c]).abs());
                }
            }
        }
    }

    let feas = feas.max(0.0);
    let tol = options.tol;
    Ok(KktReport {
        max_primal_residual: primal,
        max_dual_feasibility_violation: feas,
        max_gradient_link_violation: link,
        tol,
        pass: primal <= tol && feas <= tol && link <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Signal {
        let data = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Signal::new(m, n, data).unwrap()
    }

    #[test]
    fn first_difference_examples() {
        let flat = Signal::from_components(&[vec![1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(first_difference(&flat).unwrap().as_slice(), &[0.0, 0.0]);

        let x = Signal::from_components(&[vec![0.0, 2.0, 5.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let d = first_difference(&x).unwrap();
        assert_eq!(d.component(0), vec![2.0, 3.0]);
        assert_eq!(d.component(1), vec![0.0, -1.0]);
    }

    #[test]
    fn first_difference_needs_two_samples() {
        let x = Signal::from_univariate(&[1.0]).unwrap();
        assert!(matches!(first_difference(&x), Err(TvError::Dimension(_))));
    }

    #[test]
    fn adjoint_examples() {
        let u = Signal::from_components(&[vec![1.0, 1.0]]).unwrap();
        assert_eq!(adjoint_difference(&u).as_slice(), &[-1.0, 0.0, 1.0]);
        let zero = Signal::zeros(2, 4);
        assert!(adjoint_difference(&zero)
            .as_slice()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn adjoint_identity_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(m, n) in &[(3usize, 50usize), (2, 100), (1, 2)] {
            let x = random(m, n, &mut rng);
            let u = random(m, n - 1, &mut rng);
            let lhs = first_difference(&x).unwrap().frobenius_dot(&u).unwrap();
            let rhs = x.frobenius_dot(&adjoint_difference(&u)).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn objective_hand_value() {
        let y = Signal::from_univariate(&[0.0, 2.0]).unwrap();
        let x = Signal::from_univariate(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(primal_objective(&x, &y, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(primal_objective(&x, &x, 3.0).unwrap(), 0.0);
        let z = Signal::from_univariate(&[0.0, 2.0, 2.0]).unwrap();
        assert!(primal_objective(&x, &z, 1.0).is_err());
    }

    #[test]
    fn objective_is_midpoint_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = random(2, 30, &mut rng);
        for _ in 0..50 {
            let a = random(2, 30, &mut rng);
            let b = random(2, 30, &mut rng);
            let mid: Vec<f64> = a
                .as_slice()
                .iter()
                .zip(b.as_slice())
                .map(|(p, q)| 0.5 * (p + q))
                .collect();
            let mid = Signal::new(2, 30, mid).unwrap();
            let f = |s: &Signal| primal_objective(s, &y, 0.7).unwrap();
            assert!(f(&mid) <= 0.5 * (f(&a) + f(&b)) + 1e-12);
        }
    }

    #[test]
    fn constant_mean_passes_with_large_lambda() {
        let y = Signal::from_components(&[vec![1.0, 3.0, 2.0, 6.0], vec![0.0, -1.0, 1.0, 0.0]])
            .unwrap();
        let means = [3.0, 0.0];
        let mut x = Signal::zeros(2, 4);
        for k in 0..4 {
            x.sample_mut(k).copy_from_slice(&means);
        }
        let cert = DualCertificate::from_primal(&x, &y).unwrap();
        let report = verify_kkt(&x, &y, 1e3, &cert, KktOptions::with_tol(1e-12)).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn noisy_identity_fails() {
        let y = Signal::from_univariate(&[0.0, 1.0, -0.5, 0.8]).unwrap();
        let cert = DualCertificate::new(Signal::zeros(1, 3));
        let report = verify_kkt(&y, &y, 0.1, &cert, KktOptions::with_tol(1e-6)).unwrap();
        assert!(!report.pass);
        assert!(report.max_gradient_link_violation > 1e-6);
    }

    #[test]
    fn componentwise_z_conditions() {
        // one downward jump in both components, u = +z at the jump
        let y = Signal::from_components(&[vec![2.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let lambda = 0.5f64;
        let z = [lambda * 2.0 / 5f64.sqrt(), lambda * 1.0 / 5f64.sqrt()];
        let x = Signal::from_components(&[vec![2.0 - z[0], z[0]], vec![1.0 - z[1], z[1]]]).unwrap();
        let u = Signal::from_components(&[vec![z[0]], vec![z[1]]]).unwrap();
        let zs = Signal::from_components(&[vec![z[0]], vec![z[1]]]).unwrap();
        let cert = DualCertificate::with_z(u, zs).unwrap();
        let report = verify_kkt(&x, &y, lambda, &cert, KktOptions::with_tol(1e-12)).unwrap();
        assert!(report.pass, "{report:?}");
    }
}
