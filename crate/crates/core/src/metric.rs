use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobian::JacobianPosterior;
use crate::randmat::{rng_from_seed, wishart_scalar_moments, ScalarWishart};
use crate::specfun::{kummer_1f1, kummer_1f1_derivative, log_gamma_ratio};

/// Directions with `vᵀΣv ≤ DETERMINISTIC_GUARD·‖v‖²` use the noiseless limit
/// `√(vᵀE[J]ᵀE[J]v)`. The threshold is relative so that the norm stays
/// exactly 1-homogeneous.
pub const DETERMINISTIC_GUARD: f64 = 1e-14;

/// Absolute slack used when checking norm inequalities.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Euclidean,
    Riemannian,
    Finsler,
    AlphaSigma,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Euclidean,
        MetricKind::Riemannian,
        MetricKind::Finsler,
        MetricKind::AlphaSigma,
    ];
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Euclidean => "euclid",
            MetricKind::Riemannian => "riemann",
            MetricKind::Finsler => "finsler",
            MetricKind::AlphaSigma => "alpha_sigma",
        })
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclid" | "euclidean" => Ok(MetricKind::Euclidean),
            "riemann" | "riemannian" => Ok(MetricKind::Riemannian),
            "finsler" => Ok(MetricKind::Finsler),
            "alpha_sigma" | "alpha-sigma" | "alphasigma" => Ok(MetricKind::AlphaSigma),
            other => Err(Error::Domain(format!("unknown metric kind '{other}'"))),
        }
    }
}

/// `α = 2 (Γ(D/2 + ½) / Γ(D/2))²`.
pub fn alpha_coefficient(dim_data: usize) -> f64 {
    let half = dim_data.max(1) as f64 / 2.0;
    let lr = log_gamma_ratio(half + 0.5, half).expect("positive gamma arguments");
    2.0 * (2.0 * lr).exp()
}

/// Upper bound on the relative gap `(‖v‖_R − ‖v‖_F)/‖v‖_R`:
/// `1/(D+ω) + ω/(D+ω)²`. Zero in the deterministic limit `ω = ∞`.
pub fn wishart_gap_bound(dim_data: usize, omega: f64) -> f64 {
    if omega.is_infinite() {
        return 0.0;
    }
    let s = dim_data as f64 + omega;
    1.0 / s + omega / (s * s)
}

/// Bound on the relative volume gap given the largest direction-wise gap
/// bound `m`: `1 − (1 − m)^q`.
pub fn volume_gap_bound(max_gap_bound: f64, q: usize) -> f64 {
    1.0 - (1.0 - max_gap_bound).powi(q as i32)
}

/// The three norms `‖v‖_{αΣ} ≤ ‖v‖_F ≤ ‖v‖_R` along one direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub v: Vec<f64>,
    pub lower: f64,
    pub finsler: f64,
    pub upper: f64,
    pub alpha: f64,
    pub omega: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeGap {
    pub gap: f64,
    pub wishart_bound: f64,
    pub jensen_bound: f64,
}

/// The metric structure induced by a Jacobian posterior at one latent point.
#[derive(Debug, Clone)]
pub struct MetricPoint {
    pub jac: JacobianPosterior,
    gram: DMatrix<f64>,
    log_ratio: f64,
}

impl MetricPoint {
    pub fn new(jac: JacobianPosterior) -> Self {
        let gram = jac.mean.transpose() * &jac.mean;
        let half = jac.dim_data as f64 / 2.0;
        let log_ratio = log_gamma_ratio(half + 0.5, half).expect("positive gamma arguments");
        Self { jac, gram, log_ratio }
    }

    pub fn from_parts(mean: DMatrix<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Ok(Self::new(JacobianPosterior::new(mean, cov)?))
    }

    pub fn dim_data(&self) -> usize {
        self.jac.dim_data
    }

    pub fn dim_latent(&self) -> usize {
        self.jac.dim_latent()
    }

    /// `E[J]ᵀE[J]`.
    pub fn mean_gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.jac.cov
    }

    /// `E[G] = E[J]ᵀE[J] + DΣ`.
    pub fn expected_metric(&self) -> DMatrix<f64> {
        &self.gram + &self.jac.cov * self.jac.dim_data as f64
    }

    pub fn alpha(&self) -> f64 {
        2.0 * (2.0 * self.log_ratio).exp()
    }

    fn check_dim(&self, v: &DVector<f64>) {
        assert_eq!(v.len(), self.dim_latent(), "tangent vector has the wrong dimension");
    }

    fn quad(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
        v.dot(&(m * v)).max(0.0)
    }

    /// `(vᵀΣv, vᵀE[J]ᵀE[J]v)`.
    fn sigma_and_signal(&self, v: &DVector<f64>) -> (f64, f64) {
        self.check_dim(v);
        (Self::quad(&self.jac.cov, v), Self::quad(&self.gram, v))
    }

    fn is_deterministic(sigma: f64, v: &DVector<f64>) -> bool {
        sigma <= DETERMINISTIC_GUARD * v.norm_squared()
    }

    pub fn riemannian_norm(&self, v: &DVector<f64>) -> f64 {
        let (sigma, signal) = self.sigma_and_signal(v);
        (signal + self.jac.dim_data as f64 * sigma).sqrt()
    }

    /// `‖v‖_{αΣ} = √(α vᵀΣv)`.
    pub fn alpha_sigma_norm(&self, v: &DVector<f64>) -> f64 {
        let (sigma, _) = self.sigma_and_signal(v);
        (self.alpha() * sigma).sqrt()
    }

    /// `√(vᵀE[J]ᵀE[J]v)`, the norm under the mean decoder.
    pub fn deterministic_norm(&self, v: &DVector<f64>) -> f64 {
        let (_, signal) = self.sigma_and_signal(v);
        signal.sqrt()
    }

    /// `ω = vᵀE[J]ᵀE[J]v / vᵀΣv`, or `+∞` when `v` lies (numerically) in the
    /// null space of `Σ`, including `v = 0`.
    pub fn omega(&self, v: &DVector<f64>) -> f64 {
        let (sigma, signal) = self.sigma_and_signal(v);
        if Self::is_deterministic(sigma, v) {
            f64::INFINITY
        } else {
            signal / sigma
        }
    }

    /// `E[√(vᵀGv)] = √(2vᵀΣv) Γ(D/2+½)/Γ(D/2) ₁F₁(−½, D/2, −ω/2)`.
    pub fn finsler_norm(&self, v: &DVector<f64>) -> Result<f64> {
        let (sigma, signal) = self.sigma_and_signal(v);
        if Self::is_deterministic(sigma, v) {
            return Ok(signal.sqrt());
        }
        let omega = signal / sigma;
        let b = self.jac.dim_data as f64 / 2.0;
        let m = kummer_1f1(-0.5, b, -omega / 2.0)?;
        Ok((2.0 * sigma).sqrt() * self.log_ratio.exp() * m)
    }

    /// Gradient of `F(v)` in `v`, using `∂ₓ₁F₁(a,b,x) = (a/b)₁F₁(a+1,b+1,x)`.
    pub fn finsler_gradient(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let (sigma, signal) = self.sigma_and_signal(v);
        let q = v.len();
        if Self::is_deterministic(sigma, v) {
            if signal == 0.0 {
                return Ok(DVector::zeros(q));
            }
            return Ok(&self.gram * v / signal.sqrt());
        }
        let omega = signal / sigma;
        let b = self.jac.dim_data as f64 / 2.0;
        let c = std::f64::consts::SQRT_2 * self.log_ratio.exp();
        let m = kummer_1f1(-0.5, b, -omega / 2.0)?;
        let dm = -0.5 * kummer_1f1_derivative(-0.5, b, -omega / 2.0)?;
        let sv = &self.jac.cov * v;
        let av = &self.gram * v;
        let root = sigma.sqrt();
        let domega = (av - &sv * omega) * (2.0 / sigma);
        Ok((&sv * (m / root) + domega * (root * dm)) * c)
    }

    pub fn norm(&self, kind: MetricKind, v: &DVector<f64>) -> Result<f64> {
        match kind {
            MetricKind::Euclidean => Ok(v.norm()),
            MetricKind::Riemannian => Ok(self.riemannian_norm(v)),
            MetricKind::Finsler => self.finsler_norm(v),
            MetricKind::AlphaSigma => Ok(self.alpha_sigma_norm(v)),
        }
    }

    /// Gradient of the squared norm `N(v)²` in `v`.
    pub fn norm_sq_gradient(&self, kind: MetricKind, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(v);
        match kind {
            MetricKind::Euclidean => Ok(v * 2.0),
            MetricKind::Riemannian => Ok(self.expected_metric() * v * 2.0),
            MetricKind::Finsler => Ok(self.finsler_gradient(v)? * (2.0 * self.finsler_norm(v)?)),
            MetricKind::AlphaSigma => Ok(&self.jac.cov * v * (2.0 * self.alpha())),
        }
    }

    /// One draw of `√(vᵀJᵀJv)` with `J` from the posterior.
    pub fn stochastic_norm_sample(&self, v: &DVector<f64>, seed: u64) -> f64 {
        let (sigma, _) = self.sigma_and_signal(v);
        let spread = sigma.sqrt();
        let center = &self.jac.mean * v;
        let mut rng = rng_from_seed(seed);
        center
            .iter()
            .map(|&m| {
                let xi: f64 = StandardNormal.sample(&mut rng);
                let x = m + spread * xi;
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn bound_report(&self, v: &DVector<f64>) -> Result<BoundReport> {
        let lower = self.alpha_sigma_norm(v);
        let finsler = self.finsler_norm(v)?;
        let upper = self.riemannian_norm(v);
        Ok(BoundReport {
            v: v.iter().copied().collect(),
            lower,
            finsler,
            upper,
            alpha: self.alpha(),
            omega: self.omega(v),
            violated: lower > finsler + BOUND_SLACK || finsler > upper + BOUND_SLACK,
        })
    }

    /// Relative gap between the Riemannian and Finsler norms with its two
    /// upper bounds: the closed form in `(D, ω)` and `Var[z]/(2E[z]²)` from
    /// the moments of `z = vᵀGv`.
    pub fn relative_gap(&self, v: &DVector<f64>) -> Result<RelativeGap> {
        let r = self.riemannian_norm(v);
        if r == 0.0 {
            return Err(Error::Domain("relative gap undefined for a zero-norm direction".into()));
        }
        let f = self.finsler_norm(v)?;
        let d = self.jac.dim_data;
        let omega = self.omega(v);
        let jensen_bound = if omega.is_infinite() {
            0.0
        } else {
            let (sigma, _) = self.sigma_and_signal(v);
            let (mean, second) = wishart_scalar_moments(&ScalarWishart::new(d, sigma, omega)?);
            (second - mean * mean) / (2.0 * mean * mean)
        };
        Ok(RelativeGap {
            gap: (r - f) / r,
            wishart_bound: wishart_gap_bound(d, omega),
            jensen_bound,
        })
    }

    /// `½ Hess(F²)(v)` by central differences, with step `1e-5·‖v‖`, of the
    /// analytic gradient of `F²`, symmetrized.
    pub fn fundamental_form(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(v);
        let scale = v.norm();
        if scale == 0.0 {
            return Err(Error::Domain("fundamental form needs a non-zero direction".into()));
        }
        let h = 1e-5 * scale;
        let q = v.len();
        let mut hess = DMatrix::zeros(q, q);
        for j in 0..q {
            let mut plus = v.clone();
            let mut minus = v.clone();
            plus[j] += h;
            minus[j] -= h;
            let diff = self.norm_sq_gradient(MetricKind::Finsler, &plus)?
                - self.norm_sq_gradient(MetricKind::Finsler, &minus)?;
            hess.set_column(j, &(diff / (2.0 * h)));
        }
        Ok((&hess + hess.transpose()) * 0.25)
    }

    /// Smallest `ω` over all directions: the smallest generalized eigenvalue
    /// of `(E[J]ᵀE[J], Σ)`. `Σ` is regularized by a relative `1e-12` ridge.
    pub fn min_omega(&self) -> f64 {
        let q = self.dim_latent();
        let cov = &self.jac.cov;
        let ridge = 1e-12 * (cov.trace().max(self.gram.trace()) / q as f64).max(f64::MIN_POSITIVE);
        let reg = cov + DMatrix::identity(q, q) * ridge;
        let Some(chol) = Cholesky::new(reg) else {
            return 0.0;
        };
        let l = chol.l();
        let linv = l
            .clone()
            .solve_lower_triangular(&DMatrix::identity(q, q))
            .unwrap_or_else(|| DMatrix::identity(q, q));
        let c = &linv * &self.gram * linv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        SymmetricEigen::new(c).eigenvalues.min().max(0.0)
    }

    /// The largest direction-wise gap bound, `1/(D+ω) + ω/(D+ω)²` at the
    /// smallest `ω`.
    pub fn max_gap_bound(&self) -> f64 {
        wishart_gap_bound(self.dim_data(), self.min_omega())
    }

    /// Pointwise bound on `(V_R − V_F)/V_R`.
    pub fn volume_gap_bound(&self) -> f64 {
        volume_gap_bound(self.max_gap_bound(), self.dim_latent())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn central(d: usize, q: usize) -> MetricPoint {
        MetricPoint::from_parts(DMatrix::zeros(d, q), DMatrix::identity(q, q)).unwrap()
    }

    fn sample_point() -> MetricPoint {
        let mean = DMatrix::from_row_slice(4, 2, &[0.5, -0.2, 1.1, 0.3, -0.7, 0.9, 0.2, 0.4]);
        let cov = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.5]);
        MetricPoint::from_parts(mean, cov).unwrap()
    }

    #[test]
    fn parses_metric_kinds() {
        for k in MetricKind::ALL {
            assert_eq!(k.to_string().parse::<MetricKind>().unwrap(), k);
        }
        assert!("hyperbolic".parse::<MetricKind>().is_err());
    }

    #[test]
    fn alpha_trivial_values() {
        assert!((alpha_coefficient(2) - PI / 2.0).abs() < 1e-14);
        assert!((alpha_coefficient(1) - 2.0 / PI).abs() < 1e-14);
        assert!((alpha_coefficient(1000) - 999.5).abs() < 1e-3);
        for d in 1..200 {
            let a = alpha_coefficient(d);
            assert!(a > 0.0 && a <= d as f64);
        }
    }

    #[test]
    fn riemannian_norm_values() {
        let p = central(4, 2);
        assert_eq!(p.riemannian_norm(&DVector::zeros(2)), 0.0);
        let v = DVector::from_vec(vec![0.6, 0.8]);
        assert!((p.riemannian_norm(&v) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn central_finsler_norm_is_chi_mean() {
        let p = central(2, 2);
        let v = DVector::from_vec(vec![1.0, 0.0]);
        assert!((p.finsler_norm(&v).unwrap() - (PI / 2.0).sqrt()).abs() < 1e-12);
        let p = central(7, 3);
        let v = DVector::from_vec(vec![0.3, -0.2, 0.5]);
        let sigma: f64 = v.norm_squared();
        let expected = (2.0 * sigma).sqrt() * log_gamma_ratio(4.0, 3.5).unwrap().exp();
        assert!((p.finsler_norm(&v).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn omega_values() {
        let p = central(3, 2);
        assert_eq!(p.omega(&DVector::from_vec(vec![1.0, 2.0])), 0.0);
        let mean = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let p = MetricPoint::from_parts(mean, DMatrix::identity(2, 2)).unwrap();
        for v in [[1.0, 0.0], [0.3, -0.7], [5.0, 2.0]] {
            assert!((p.omega(&DVector::from_row_slice(&v)) - 4.0).abs() < 1e-14);
        }
        let p = sample_point();
        let v = DVector::from_vec(vec![0.4, -1.3]);
        assert!((p.omega(&v) - p.omega(&(&v * 7.5))).abs() < 1e-12 * p.omega(&v));
    }

    #[test]
    fn deterministic_limit() {
        let mean = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.1]);
        let p = MetricPoint::from_parts(mean.clone(), DMatrix::zeros(2, 2)).unwrap();
        let v = DVector::from_vec(vec![0.2, -0.9]);
        let det = (&mean * &v).norm();
        assert_eq!(p.omega(&v), f64::INFINITY);
        assert!((p.finsler_norm(&v).unwrap() - det).abs() < 1e-15);
        assert!((p.stochastic_norm_sample(&v, 3) - det).abs() < 1e-12);
        let gap = p.relative_gap(&v).unwrap();
        assert_eq!(gap.wishart_bound, 0.0);
        assert!(gap.gap.abs() < 1e-15);
        // tiny but non-zero variance
        let p = MetricPoint::from_parts(mean, DMatrix::identity(2, 2) * 1e-12).unwrap();
        let r = p.bound_report(&v).unwrap();
        assert!((r.finsler - r.upper).abs() < 1e-6 * r.upper);
        assert!(!r.violated);
    }

    #[test]
    fn finsler_norm_is_homogeneous_and_reversible() {
        let p = sample_point();
        let v = DVector::from_vec(vec![0.4, -1.3]);
        let f = p.finsler_norm(&v).unwrap();
        assert_eq!(p.finsler_norm(&(-&v)).unwrap(), f);
        for lambda in [1e-3, 0.5, 3.0, 1e4] {
            let fl = p.finsler_norm(&(&v * lambda)).unwrap();
            assert!((fl - lambda * f).abs() < 1e-10 * lambda * f);
        }
    }

    #[test]
    fn finsler_gradient_matches_central_difference_and_euler() {
        let p = sample_point();
        let v = DVector::from_vec(vec![0.4, -1.3]);
        let g = p.finsler_gradient(&v).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut a = v.clone();
            let mut b = v.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (p.finsler_norm(&a).unwrap() - p.finsler_norm(&b).unwrap()) / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-7 * fd.abs().max(1.0));
        }
        let f = p.finsler_norm(&v).unwrap();
        assert!((g.dot(&v) - f).abs() < 1e-12 * f);
    }

    #[test]
    fn norm_sq_gradients_satisfy_euler() {
        let p = sample_point();
        let v = DVector::from_vec(vec![-0.8, 0.35]);
        for kind in MetricKind::ALL {
            let n = p.norm(kind, &v).unwrap();
            let g = p.norm_sq_gradient(kind, &v).unwrap();
            assert!((g.dot(&v) - 2.0 * n * n).abs() < 1e-12 * n * n, "{kind}");
        }
    }

    #[test]
    fn bounds_hold_on_sample_point() {
        let p = sample_point();
        for v in [[1.0, 0.0], [0.0, 1.0], [0.3, 0.9], [-2.0, 0.4]] {
            let v = DVector::from_row_slice(&v);
            let r = p.bound_report(&v).unwrap();
            assert!(!r.violated);
            assert!(r.lower <= r.finsler && r.finsler <= r.upper);
            let g = p.relative_gap(&v).unwrap();
            assert!(g.gap >= 0.0 && g.gap <= g.wishart_bound);
            assert!((g.jensen_bound - g.wishart_bound).abs() < 1e-12);
        }
    }

    #[test]
    fn wishart_bound_values() {
        assert!((wishart_gap_bound(10, 0.0) - 0.1).abs() < 1e-15);
        assert!((wishart_gap_bound(10, 10.0) - 0.075).abs() < 1e-15);
        assert_eq!(wishart_gap_bound(10, f64::INFINITY), 0.0);
    }

    #[test]
    fn fundamental_form_limits() {
        let p = central(5, 2);
        let v = DVector::from_vec(vec![0.3, 0.8]);
        let ff = p.fundamental_form(&v).unwrap();
        let expected = DMatrix::identity(2, 2) * p.alpha();
        assert!((&ff - &expected).amax() < 1e-3 * expected.amax());

        let mean = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.1]);
        let p = MetricPoint::from_parts(mean, DMatrix::zeros(2, 2)).unwrap();
        let ff = p.fundamental_form(&v).unwrap();
        assert!((&ff - p.mean_gram()).amax() < 1e-3 * p.mean_gram().amax());

        let p = sample_point();
        let ff = p.fundamental_form(&v).unwrap();
        let f = p.finsler_norm(&v).unwrap();
        assert!((v.dot(&(&ff * &v)) - f * f).abs() < 1e-4 * f * f);
        assert!(SymmetricEigen::new(ff).eigenvalues.min() > 0.0);
    }

    #[test]
    fn min_omega_matches_direction_scan() {
        let p = sample_point();
        let m = p.min_omega();
        let scan = (0..3600)
            .map(|k| {
                let t = k as f64 * PI / 3600.0;
                p.omega(&DVector::from_vec(vec![t.cos(), t.sin()]))
            })
            .fold(f64::INFINITY, f64::min);
        assert!(m <= scan + 1e-9);
        assert!(scan - m < 1e-4 * scan.max(1.0));
        assert!(p.volume_gap_bound() > 0.0 && p.volume_gap_bound() < 1.0);
    }
}
