use super::PathError;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Time-inhomogeneous diffusion `dX = b(t,X) dt + σ(t,X) dW` discretized by
/// the Euler map `f(x, ε) = x + b(t,x)·h + σ(t,x)·ε·√h`.
///
/// Implementors with an affine drift and state-independent volatility can
/// override [`Diffusion::euler_step`] with a specialised formula and provide
/// the closed-form [`Diffusion::inverse_step`].
pub trait Diffusion: Send + Sync {
    fn dim(&self) -> usize;

    fn initial_state(&self) -> Vec<f64>;

    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Row-major `d × d` volatility matrix.
    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]);

    fn euler_step(&self, t: f64, h: f64, x: &[f64], eps: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut b = vec![0.0; d];
        let mut s = vec![0.0; d * d];
        self.drift(t, x, &mut b);
        self.diffusion(t, x, &mut s);
        let sq = h.sqrt();
        for i in 0..d {
            let mut noise = 0.0;
            for j in 0..d {
                noise += s[i * d + j] * eps[j];
            }
            out[i] = x[i] + b[i] * h + noise * sq;
        }
    }

    /// Whether `x ↦ f(x, ε)` is invertible for every noise draw.
    fn invertible(&self) -> bool {
        false
    }

    /// Solve `f(x, ε) = y` for `x`.
    fn inverse_step(
        &self,
        _t: f64,
        _h: f64,
        _y: &[f64],
        _eps: &[f64],
        _out: &mut [f64],
    ) -> Result<(), PathError> {
        Err(PathError::UnsupportedSpec(
            "diffusion does not declare an inverse Euler step".into(),
        ))
    }

    /// Reject step sizes the scheme cannot handle.
    fn check_step(&self, _h: f64) -> Result<(), PathError> {
        Ok(())
    }
}

fn check_finite(v: &[f64], step: usize) -> Result<(), PathError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(PathError::NumericalOverflow { step, path: None })
    }
}

/// One forward Euler step. `step` only labels the error.
pub fn euler_step<D: Diffusion + ?Sized>(
    spec: &D,
    x: &[f64],
    t: f64,
    h: f64,
    eps: &[f64],
    step: usize,
) -> Result<Vec<f64>, PathError> {
    if !(h > 0.0) {
        return Err(PathError::InvalidGrid(format!(
            "step size must be positive, got {h}"
        )));
    }
    if eps.iter().any(|e| !e.is_finite()) {
        return Err(PathError::NumericalOverflow { step, path: None });
    }
    let mut out = vec![0.0; spec.dim()];
    spec.euler_step(t, h, x, eps, &mut out);
    check_finite(&out, step)?;
    Ok(out)
}

/// Inverse of [`euler_step`] for the same `(t, h, ε)`.
pub fn inverse_euler_step<D: Diffusion + ?Sized>(
    spec: &D,
    y: &[f64],
    t: f64,
    h: f64,
    eps: &[f64],
    step: usize,
) -> Result<Vec<f64>, PathError> {
    if !spec.invertible() {
        return Err(PathError::UnsupportedSpec(
            "diffusion is not invertible".into(),
        ));
    }
    let mut out = vec![0.0; spec.dim()];
    spec.inverse_step(t, h, y, eps, &mut out)?;
    check_finite(&out, step)?;
    Ok(out)
}

/// `dX = μ dt + σ dW` with per-coordinate constants.
#[derive(Debug, Clone)]
pub struct ArithmeticBrownian {
    pub x0: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl ArithmeticBrownian {
    pub fn new(x0: Vec<f64>, mu: Vec<f64>, sigma: Vec<f64>) -> Self {
        assert!(x0.len() == mu.len() && mu.len() == sigma.len());
        Self { x0, mu, sigma }
    }

    pub fn scalar(x0: f64, mu: f64, sigma: f64) -> Self {
        Self::new(vec![x0], vec![mu], vec![sigma])
    }
}

impl Diffusion for ArithmeticBrownian {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.x0.clone()
    }

    fn drift(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.mu);
    }

    fn diffusion(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out.fill(0.0);
        for i in 0..d {
            out[i * d + i] = self.sigma[i];
        }
    }

    fn euler_step(&self, _t: f64, h: f64, x: &[f64], eps: &[f64], out: &mut [f64]) {
        let sq = h.sqrt();
        for i in 0..x.len() {
            out[i] = x[i] + self.mu[i] * h + self.sigma[i] * sq * eps[i];
        }
    }

    fn invertible(&self) -> bool {
        true
    }

    fn inverse_step(
        &self,
        _t: f64,
        h: f64,
        y: &[f64],
        eps: &[f64],
        out: &mut [f64],
    ) -> Result<(), PathError> {
        let sq = h.sqrt();
        for i in 0..y.len() {
            out[i] = y[i] - self.mu[i] * h - self.sigma[i] * sq * eps[i];
        }
        Ok(())
    }
}

/// Ornstein–Uhlenbeck `dX = α(μ − X) dt + β dW`, independent coordinates.
#[derive(Debug, Clone)]
pub struct OrnsteinUhlenbeck {
    pub x0: Vec<f64>,
    pub alpha: Vec<f64>,
    pub mu: Vec<f64>,
    pub beta: Vec<f64>,
}

impl OrnsteinUhlenbeck {
    /// Mean-reversion times step above which the scheme is refused.
    pub const MAX_ALPHA_H: f64 = 0.5;

    pub fn new(x0: Vec<f64>, alpha: Vec<f64>, mu: Vec<f64>, beta: Vec<f64>) -> Self {
        let d = x0.len();
        assert!(alpha.len() == d && mu.len() == d && beta.len() == d);
        Self {
            x0,
            alpha,
            mu,
            beta,
        }
    }

    pub fn scalar(x0: f64, alpha: f64, mu: f64, beta: f64) -> Self {
        Self::new(vec![x0], vec![alpha], vec![mu], vec![beta])
    }
}

impl Diffusion for OrnsteinUhlenbeck {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.x0.clone()
    }

    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = self.alpha[i] * (self.mu[i] - x[i]);
        }
    }

    fn diffusion(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out.fill(0.0);
        for i in 0..d {
            out[i * d + i] = self.beta[i];
        }
    }

    fn euler_step(&self, _t: f64, h: f64, x: &[f64], eps: &[f64], out: &mut [f64]) {
        let sq = h.sqrt();
        for i in 0..x.len() {
            out[i] = x[i] + self.alpha[i] * (self.mu[i] - x[i]) * h + self.beta[i] * sq * eps[i];
        }
    }

    fn invertible(&self) -> bool {
        true
    }

    fn inverse_step(
        &self,
        _t: f64,
        h: f64,
        y: &[f64],
        eps: &[f64],
        out: &mut [f64],
    ) -> Result<(), PathError> {
        let sq = h.sqrt();
        for i in 0..y.len() {
            let denom = 1.0 - self.alpha[i] * h;
            if !(denom > 0.0) {
                return Err(PathError::SingularInverse(format!(
                    "1 - alpha*h = {denom} for coordinate {i}"
                )));
            }
            out[i] = (y[i] - self.alpha[i] * self.mu[i] * h - self.beta[i] * sq * eps[i]) / denom;
        }
        Ok(())
    }

    fn check_step(&self, h: f64) -> Result<(), PathError> {
        for (i, a) in self.alpha.iter().enumerate() {
            if a * h >= Self::MAX_ALPHA_H {
                return Err(PathError::StepSizeGuard(format!(
                    "alpha*h = {} >= {} for coordinate {i}",
                    a * h,
                    Self::MAX_ALPHA_H
                )));
            }
        }
        Ok(())
    }
}

/// Geometric Brownian motion `dX = μX dt + σX dW`, independent coordinates.
#[derive(Debug, Clone)]
pub struct GeometricBrownian {
    pub x0: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GeometricBrownian {
    pub fn new(x0: Vec<f64>, mu: Vec<f64>, sigma: Vec<f64>) -> Self {
        assert!(x0.len() == mu.len() && mu.len() == sigma.len());
        Self { x0, mu, sigma }
    }
}

impl Diffusion for GeometricBrownian {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.x0.clone()
    }

    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = self.mu[i] * x[i];
        }
    }

    fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out.fill(0.0);
        for i in 0..d {
            out[i * d + i] = self.sigma[i] * x[i];
        }
    }

    fn euler_step(&self, _t: f64, h: f64, x: &[f64], eps: &[f64], out: &mut [f64]) {
        let sq = h.sqrt();
        for i in 0..x.len() {
            out[i] = x[i] * (1.0 + self.mu[i] * h + self.sigma[i] * sq * eps[i]);
        }
    }

    fn invertible(&self) -> bool {
        true
    }

    fn inverse_step(
        &self,
        _t: f64,
        h: f64,
        y: &[f64],
        eps: &[f64],
        out: &mut [f64],
    ) -> Result<(), PathError> {
        let sq = h.sqrt();
        for i in 0..y.len() {
            let factor = 1.0 + self.mu[i] * h + self.sigma[i] * sq * eps[i];
            if factor == 0.0 {
                return Err(PathError::SingularInverse(format!(
                    "multiplicative factor vanishes for coordinate {i}"
                )));
            }
            out[i] = y[i] / factor;
        }
        Ok(())
    }
}

/// Affine drift with constant volatility: `dX = (A X + c) dt + B dW`.
///
/// The inverse step solves `(I + hA) x = y − c h − B ε √h`. The inverse of
/// `I + hA` is cached for the step size last passed to
/// [`LinearGaussian::prepare`]; without preparation it is recomputed, which
/// is correct but slow.
#[derive(Debug, Clone)]
pub struct LinearGaussian {
    x0: Vec<f64>,
    a: DMatrix<f64>,
    c: DVector<f64>,
    b: DMatrix<f64>,
    cached: Option<(f64, Arc<DMatrix<f64>>)>,
}

impl LinearGaussian {
    /// `a` and `b` are row-major `d × d`.
    pub fn new(x0: Vec<f64>, a: Vec<f64>, c: Vec<f64>, b: Vec<f64>) -> Self {
        let d = x0.len();
        assert!(a.len() == d * d && b.len() == d * d && c.len() == d);
        Self {
            x0,
            a: DMatrix::from_row_slice(d, d, &a),
            c: DVector::from_vec(c),
            b: DMatrix::from_row_slice(d, d, &b),
            cached: None,
        }
    }

    /// Cache `(I + hA)^{-1}` for step size `h`.
    pub fn prepare(&mut self, h: f64) -> Result<(), PathError> {
        let inv = self.step_inverse(h)?;
        self.cached = Some((h, Arc::new(inv)));
        Ok(())
    }

    pub fn drift_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    fn step_inverse(&self, h: f64) -> Result<DMatrix<f64>, PathError> {
        let d = self.x0.len();
        let m = DMatrix::<f64>::identity(d, d) + &self.a * h;
        m.try_inverse()
            .filter(|inv| inv.iter().all(|v| v.is_finite()))
            .ok_or_else(|| PathError::SingularInverse("I + hA is not invertible".into()))
    }
}

impl Diffusion for LinearGaussian {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.x0.clone()
    }

    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut acc = self.c[i];
            for j in 0..d {
                acc += self.a[(i, j)] * x[j];
            }
            out[i] = acc;
        }
    }

    fn diffusion(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = self.b[(i, j)];
            }
        }
    }

    fn euler_step(&self, _t: f64, h: f64, x: &[f64], eps: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let sq = h.sqrt();
        for i in 0..d {
            let mut drift = self.c[i];
            let mut noise = 0.0;
            for j in 0..d {
                drift += self.a[(i, j)] * x[j];
                noise += self.b[(i, j)] * eps[j];
            }
            out[i] = x[i] + drift * h + noise * sq;
        }
    }

    fn invertible(&self) -> bool {
        true
    }

    fn inverse_step(
        &self,
        _t: f64,
        h: f64,
        y: &[f64],
        eps: &[f64],
        out: &mut [f64],
    ) -> Result<(), PathError> {
        let d = self.dim();
        let sq = h.sqrt();
        let fresh;
        let inv: &DMatrix<f64> = match &self.cached {
            Some((hc, m)) if *hc == h => m,
            _ => {
                fresh = self.step_inverse(h)?;
                &fresh
            }
        };
        let mut rhs = [0.0f64; 16];
        let mut rhs_heap;
        let rhs: &mut [f64] = if d <= 16 {
            &mut rhs[..d]
        } else {
            rhs_heap = vec![0.0; d];
            &mut rhs_heap
        };
        for i in 0..d {
            let mut noise = 0.0;
            for j in 0..d {
                noise += self.b[(i, j)] * eps[j];
            }
            rhs[i] = y[i] - self.c[i] * h - noise * sq;
        }
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += inv[(i, j)] * rhs[j];
            }
            out[i] = acc;
        }
        Ok(())
    }

    fn check_step(&self, h: f64) -> Result<(), PathError> {
        for i in 0..self.dim() {
            let rate = -self.a[(i, i)];
            if rate * h >= OrnsteinUhlenbeck::MAX_ALPHA_H {
                return Err(PathError::StepSizeGuard(format!(
                    "mean reversion {rate} times h = {h} exceeds {} for coordinate {i}",
                    OrnsteinUhlenbeck::MAX_ALPHA_H
                )));
            }
        }
        self.step_inverse(h).map(|_| ())
    }
}

type CoefFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Diffusion given by arbitrary coefficient closures. Never invertible, so
/// the engine falls back to block recomputation.
#[derive(Clone)]
pub struct GeneralDiffusion {
    x0: Vec<f64>,
    drift: Arc<CoefFn>,
    diffusion: Arc<CoefFn>,
}

impl GeneralDiffusion {
    pub fn new(
        x0: Vec<f64>,
        drift: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            x0,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
        }
    }
}

impl std::fmt::Debug for GeneralDiffusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneralDiffusion")
            .field("dim", &self.x0.len())
            .finish()
    }
}

impl Diffusion for GeneralDiffusion {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.x0.clone()
    }

    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, out)
    }

    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, x, out)
    }
}
