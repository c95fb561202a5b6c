//! Noise-free Gaussian-process regression with a constant mean and a Matérn
//! 5/2 kernel.
//!
//! ```text
//! k(p, p') = v0 (1 + sqrt5 r + 5/3 r^2) exp(-sqrt5 r),   r^2 = sum ((p_i - p'_i) / l_i)^2
//! y(p*)    = mu0 + k*^T K^-1 (Y - mu0 1)
//! s^2(p*)  = v0 - k*^T K^-1 k*
//! ```
//!
//! The single variance parameter `v0` is both the kernel prefactor and the
//! prior variance, so `k(p, p) = v0` and predictions far from the data tend to
//! `(mu0, v0)`.
//!
//! Internally the model factors the correlation matrix `R = K / v0` plus a
//! diagonal jitter (`1e-10`, raised tenfold on failure up to `1e-4`, i.e.
//! relative to `v0`). The mean weights are then refined against the
//! jitter-free `R`, so the mean still interpolates the data. For fixed lengthscales the likelihood maximizers are
//!
//! ```text
//! mu0 = (1^T R^-1 Y) / (1^T R^-1 1),    v0 = (Y - mu0)^T R^-1 (Y - mu0) / W
//! ```
//!
//! so [`GpModel::fit`] searches only over log-lengthscales.

use rayon::prelude::*;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::optim::NelderMead;
use crate::rng;

const SQRT5: f64 = 2.236_067_977_499_79;
const JITTER_LO: f64 = 1e-10;
const JITTER_HI: f64 = 1e-4;
const REFINE_STEPS: usize = 8;

/// Constant mean, variance prefactor and per-dimension lengthscales.
#[derive(Debug, Clone, PartialEq)]
pub struct GpHyper {
    pub mu0: f64,
    pub sigma0_sq: f64,
    pub lengthscales: Vec<f64>,
}

impl GpHyper {
    pub fn new(mu0: f64, sigma0_sq: f64, lengthscales: Vec<f64>) -> Result<GpHyper> {
        if !mu0.is_finite() {
            return Err(Error::invalid("mu0", "must be finite"));
        }
        if !(sigma0_sq > 0.0) || !sigma0_sq.is_finite() {
            return Err(Error::invalid(
                "sigma0_sq",
                format!("must be positive and finite, got {sigma0_sq}"),
            ));
        }
        if lengthscales.is_empty() || lengthscales.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::invalid(
                "lengthscales",
                "must be a nonempty list of positive values",
            ));
        }
        Ok(GpHyper {
            mu0,
            sigma0_sq,
            lengthscales,
        })
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }
}

#[inline]
fn matern52_r(r: f64) -> f64 {
    let s = SQRT5 * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

#[inline]
fn scaled_distance(p: &[f64], q: &[f64], lengthscales: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .zip(lengthscales)
        .map(|((a, b), l)| {
            let d = (a - b) / l;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Kernel value `k(p, q)`.
pub fn matern52(p: &[f64], q: &[f64], hyper: &GpHyper) -> Result<f64> {
    for x in [p, q] {
        if x.len() != hyper.dim() {
            return Err(Error::DimensionMismatch {
                expected: hyper.dim(),
                got: x.len(),
            });
        }
    }
    Ok(hyper.sigma0_sq * matern52_r(scaled_distance(p, q, &hyper.lengthscales)))
}

/// Settings for [`GpModel::fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Lengthscales are fitted on at most this many leading observations.
    pub w_hyp: usize,
    pub n_starts: usize,
    /// Explicit lengthscale bounds per dimension; otherwise `bound_factors`
    /// times each dimension's data range.
    pub lengthscale_bounds: Option<Vec<(f64, f64)>>,
    pub bound_factors: (f64, f64),
    pub seed: u64,
    pub optimizer: NelderMead,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            w_hyp: 100,
            n_starts: 8,
            lengthscale_bounds: None,
            bound_factors: (1e-3, 1e3),
            seed: 0,
            optimizer: NelderMead {
                max_evals: 300,
                f_tol: 1e-10,
                x_tol: 1e-6,
                init_step: 0.1,
            },
        }
    }
}

/// Correlation matrix factor and the quantities derived from it for fixed
/// lengthscales.
struct Factored {
    chol: Cholesky,
    jitter: f64,
}

fn correlation_matrix(inputs: &[Vec<f64>], lengthscales: &[f64]) -> Vec<f64> {
    let w = inputs.len();
    let mut r = vec![0.0; w * w];
    for i in 0..w {
        r[i * w + i] = 1.0;
        for j in 0..i {
            let v = matern52_r(scaled_distance(&inputs[i], &inputs[j], lengthscales));
            r[i * w + j] = v;
            r[j * w + i] = v;
        }
    }
    r
}

fn factor(inputs: &[Vec<f64>], lengthscales: &[f64]) -> Result<Factored> {
    let r = correlation_matrix(inputs, lengthscales);
    let (chol, jitter) = Cholesky::factor_with_jitter(&r, inputs.len(), JITTER_LO, JITTER_HI)?;
    Ok(Factored { chol, jitter })
}

/// Weights `R^-1 r` for the mean, refined against the jitter-free `R` so the
/// mean interpolates the data even when the jitter is not negligible.
fn interpolating_weights(inputs: &[Vec<f64>], lengthscales: &[f64], chol: &Cholesky, rhs: &[f64]) -> Vec<f64> {
    let w = rhs.len();
    let r = correlation_matrix(inputs, lengthscales);
    let residual = |alpha: &[f64]| -> Vec<f64> {
        (0..w)
            .map(|i| rhs[i] - (0..w).map(|j| r[i * w + j] * alpha[j]).sum::<f64>())
            .collect()
    };
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut alpha = chol.solve(rhs);
    let mut res = residual(&alpha);
    for _ in 0..REFINE_STEPS {
        let step = chol.solve(&res);
        let next: Vec<f64> = alpha.iter().zip(&step).map(|(a, d)| a + d).collect();
        let next_res = residual(&next);
        if !(norm(&next_res) < norm(&res)) {
            break;
        }
        alpha = next;
        res = next_res;
    }
    alpha
}

/// Closed-form `(mu0, v0)` for a factored correlation matrix.
fn profile(f: &Factored, values: &[f64]) -> (f64, f64) {
    let w = values.len();
    let ones = f.chol.solve(&vec![1.0; w]);
    let mu0 = ones.iter().zip(values).map(|(a, y)| a * y).sum::<f64>() / ones.iter().sum::<f64>();
    let mut centered: Vec<f64> = values.iter().map(|y| y - mu0).collect();
    f.chol.solve_lower_in_place(&mut centered);
    let v0 = centered.iter().map(|x| x * x).sum::<f64>() / w as f64;
    (mu0, v0)
}

/// Negative profile log likelihood at the given lengthscales.
fn profile_nll(inputs: &[Vec<f64>], values: &[f64], lengthscales: &[f64]) -> f64 {
    let Ok(f) = factor(inputs, lengthscales) else {
        return f64::INFINITY;
    };
    let (_, v0) = profile(&f, values);
    if !(v0 > 0.0) {
        return f64::INFINITY;
    }
    let w = values.len() as f64;
    0.5 * (w * v0.ln() + f.chol.log_det() + w * (1.0 + (2.0 * std::f64::consts::PI).ln()))
}

fn data_ranges(inputs: &[Vec<f64>]) -> Vec<f64> {
    let dim = inputs[0].len();
    (0..dim)
        .map(|k| {
            let (lo, hi) = inputs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[k]), hi.max(p[k]))
            });
            if hi > lo {
                hi - lo
            } else {
                1.0
            }
        })
        .collect()
}

fn check_training_data(inputs: &[Vec<f64>], values: &[f64]) -> Result<usize> {
    if inputs.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            got: values.len(),
        });
    }
    if inputs.len() < 2 {
        return Err(Error::DegenerateData(format!(
            "at least 2 training points are required, got {}",
            inputs.len()
        )));
    }
    let dim = inputs[0].len();
    if dim == 0 {
        return Err(Error::DegenerateData("training points have no coordinates".into()));
    }
    for p in inputs {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateData("training inputs must be finite".into()));
        }
    }
    if values.iter().any(|y| !y.is_finite()) {
        return Err(Error::DegenerateData("training values must be finite".into()));
    }
    if inputs.iter().all(|p| p == &inputs[0]) {
        return Err(Error::DegenerateData("all training inputs coincide".into()));
    }
    Ok(dim)
}

/// Trained surrogate. Immutable; `predict` may be called concurrently.
#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    values: Vec<f64>,
    hyper: GpHyper,
    w_hyp: usize,
    chol: Cholesky,
    jitter: f64,
    /// `R^-1 (Y - mu0)`.
    alpha: Vec<f64>,
}

impl GpModel {
    /// Maximizes the likelihood over lengthscales on the first `w_hyp`
    /// observations, then sets `mu0` and `v0` from all of them.
    ///
    /// Constant `values` give a constant model with `v0` at machine-epsilon
    /// scale instead of an error.
    pub fn fit(inputs: &[Vec<f64>], values: &[f64], opts: &FitOptions) -> Result<GpModel> {
        let dim = check_training_data(inputs, values)?;
        if opts.w_hyp < 2 {
            return Err(Error::invalid("w_hyp", "must be at least 2"));
        }
        if opts.n_starts == 0 {
            return Err(Error::invalid("n_starts", "must be at least 1"));
        }
        let w_fit = values.len().min(opts.w_hyp);
        let (fit_in, fit_y) = (&inputs[..w_fit], &values[..w_fit]);
        let ranges = data_ranges(fit_in);

        if values.iter().all(|y| *y == values[0]) {
            let c = values[0];
            let hyper = GpHyper::new(c, f64::EPSILON * c.abs().max(1.0).powi(2), ranges)?;
            return GpModel::with_hyper(inputs, values, hyper, opts.w_hyp);
        }

        let bounds: Vec<(f64, f64)> = match &opts.lengthscale_bounds {
            Some(b) => {
                if b.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: b.len(),
                    });
                }
                if b.iter().any(|(lo, hi)| !(*lo > 0.0) || !(hi > lo)) {
                    return Err(Error::invalid("lengthscale_bounds", "need 0 < lower < upper"));
                }
                b.clone()
            }
            None => ranges
                .iter()
                .map(|r| (opts.bound_factors.0 * r, opts.bound_factors.1 * r))
                .collect(),
        };
        let lower: Vec<f64> = bounds.iter().map(|b| b.0.ln()).collect();
        let upper: Vec<f64> = bounds.iter().map(|b| b.1.ln()).collect();

        let starts: Vec<Vec<f64>> = (0..opts.n_starts)
            .map(|s| {
                if s == 0 {
                    ranges
                        .iter()
                        .zip(lower.iter().zip(&upper))
                        .map(|(r, (lo, hi))| r.ln().clamp(*lo, *hi))
                        .collect()
                } else {
                    rng::uniforms(opts.seed, s as u64, dim)
                        .iter()
                        .zip(lower.iter().zip(&upper))
                        .map(|(u, (lo, hi))| lo + u * (hi - lo))
                        .collect()
                }
            })
            .collect();

        let objective = |theta: &[f64]| {
            let ls: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
            profile_nll(fit_in, fit_y, &ls)
        };
        let best = starts
            .par_iter()
            .enumerate()
            .map(|(i, x0)| (i, opts.optimizer.minimize(objective, x0, &lower, &upper)))
            .reduce_with(|a, b| {
                // lowest value wins, earlier start on ties
                if b.1.value < a.1.value || (b.1.value == a.1.value && b.0 < a.0) {
                    b
                } else {
                    a
                }
            })
            .expect("at least one start");
        if !best.1.value.is_finite() {
            return Err(Error::NotPositiveDefinite { jitter: JITTER_HI });
        }
        let lengthscales: Vec<f64> = best.1.x.iter().map(|t| t.exp()).collect();
        GpModel::profiled(inputs, values, lengthscales, opts.w_hyp)
    }

    /// Keeps the lengthscales and refits `mu0`, `v0` on new data.
    pub fn refit(&self, inputs: &[Vec<f64>], values: &[f64]) -> Result<GpModel> {
        let dim = check_training_data(inputs, values)?;
        if dim != self.hyper.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.hyper.dim(),
                got: dim,
            });
        }
        GpModel::profiled(inputs, values, self.hyper.lengthscales.clone(), self.w_hyp)
    }

    /// Full fit while the data fits within `w_hyp`, lengthscale-frozen refit
    /// afterwards.
    pub fn update(&self, inputs: &[Vec<f64>], values: &[f64], opts: &FitOptions) -> Result<GpModel> {
        if values.len() <= opts.w_hyp {
            GpModel::fit(inputs, values, opts)
        } else {
            self.refit(inputs, values)
        }
    }

    fn profiled(inputs: &[Vec<f64>], values: &[f64], lengthscales: Vec<f64>, w_hyp: usize) -> Result<GpModel> {
        let f = factor(inputs, &lengthscales)?;
        let (mu0, v0) = profile(&f, values);
        let v0 = if v0 > 0.0 {
            v0
        } else {
            f64::EPSILON * mu0.abs().max(1.0).powi(2)
        };
        let hyper = GpHyper::new(mu0, v0, lengthscales)?;
        Ok(GpModel::from_factor(inputs, values, hyper, w_hyp, f))
    }

    /// Model with fixed hyperparameters.
    pub fn with_hyper(inputs: &[Vec<f64>], values: &[f64], hyper: GpHyper, w_hyp: usize) -> Result<GpModel> {
        if inputs.is_empty() {
            return Err(Error::DegenerateData("no training points".into()));
        }
        if inputs.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: values.len(),
            });
        }
        for p in inputs {
            if p.len() != hyper.dim() {
                return Err(Error::DimensionMismatch {
                    expected: hyper.dim(),
                    got: p.len(),
                });
            }
        }
        let f = factor(inputs, &hyper.lengthscales)?;
        Ok(GpModel::from_factor(inputs, values, hyper, w_hyp, f))
    }

    fn from_factor(inputs: &[Vec<f64>], values: &[f64], hyper: GpHyper, w_hyp: usize, f: Factored) -> GpModel {
        let centered: Vec<f64> = values.iter().map(|y| y - hyper.mu0).collect();
        let alpha = interpolating_weights(inputs, &hyper.lengthscales, &f.chol, &centered);
        GpModel {
            inputs: inputs.to_vec(),
            values: values.to_vec(),
            hyper,
            w_hyp,
            chol: f.chol,
            jitter: f.jitter,
            alpha,
        }
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.hyper.dim()
    }

    pub fn w_hyp(&self) -> usize {
        self.w_hyp
    }

    /// Diagonal jitter added to `K`, relative to `v0`.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn correlations(&self, p: &[f64]) -> Vec<f64> {
        assert_eq!(p.len(), self.dim(), "query point has the wrong dimension");
        self.inputs
            .iter()
            .map(|x| matern52_r(scaled_distance(p, x, &self.hyper.lengthscales)))
            .collect()
    }

    /// Predictive mean and variance at `p`; the variance is clamped at zero.
    ///
    /// # Panics
    /// If `p` does not have the model's dimension.
    pub fn predict(&self, p: &[f64]) -> (f64, f64) {
        let mut rho = self.correlations(p);
        let mean = self.hyper.mu0 + rho.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        self.chol.solve_lower_in_place(&mut rho);
        let explained = rho.iter().map(|x| x * x).sum::<f64>();
        (mean, (self.hyper.sigma0_sq * (1.0 - explained)).max(0.0))
    }

    /// Predictive mean only.
    ///
    /// # Panics
    /// If `p` does not have the model's dimension.
    pub fn predict_mean(&self, p: &[f64]) -> f64 {
        let rho = self.correlations(p);
        self.hyper.mu0 + rho.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `-1/2 (Y - mu0)^T K^-1 (Y - mu0) - 1/2 log det K - W/2 log 2 pi`, with
    /// `K` including its jitter.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let w = self.values.len() as f64;
        let v0 = self.hyper.sigma0_sq;
        let mut centered: Vec<f64> = self.values.iter().map(|y| y - self.hyper.mu0).collect();
        self.chol.solve_lower_in_place(&mut centered);
        let quad = centered.iter().map(|x| x * x).sum::<f64>() / v0;
        let log_det = w * v0.ln() + self.chol.log_det();
        -0.5 * quad - 0.5 * log_det - 0.5 * w * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn to_document(&self) -> GpDocument {
        GpDocument {
            kernel: KERNEL_TAG.to_string(),
            inputs: self
                .inputs
                .iter()
                .map(|p| p.iter().copied().map(ExactF64).collect())
                .collect(),
            values: self.values.iter().copied().map(ExactF64).collect(),
            mu0: ExactF64(self.hyper.mu0),
            sigma0_sq: ExactF64(self.hyper.sigma0_sq),
            lengthscales: self.hyper.lengthscales.iter().copied().map(ExactF64).collect(),
            w_hyp: self.w_hyp,
        }
    }

    pub fn from_document(doc: &GpDocument) -> Result<GpModel> {
        if doc.kernel != KERNEL_TAG {
            return Err(Error::Serialization(format!("unsupported kernel `{}`", doc.kernel)));
        }
        let inputs: Vec<Vec<f64>> = doc.inputs.iter().map(|p| p.iter().map(|x| x.0).collect()).collect();
        let values: Vec<f64> = doc.values.iter().map(|x| x.0).collect();
        let hyper = GpHyper::new(
            doc.mu0.0,
            doc.sigma0_sq.0,
            doc.lengthscales.iter().map(|x| x.0).collect(),
        )?;
        GpModel::with_hyper(&inputs, &values, hyper, doc.w_hyp)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model document serializes")
    }

    pub fn from_json(s: &str) -> Result<GpModel> {
        let doc: GpDocument = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        GpModel::from_document(&doc)
    }
}

const KERNEL_TAG: &str = "matern52";

/// On-disk form of a [`GpModel`]. The factorization is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpDocument {
    pub kernel: String,
    pub inputs: Vec<Vec<ExactF64>>,
    pub values: Vec<ExactF64>,
    pub mu0: ExactF64,
    pub sigma0_sq: ExactF64,
    pub lengthscales: Vec<ExactF64>,
    pub w_hyp: usize,
}

/// `f64` written as the hex string of its IEEE-754 bits (`"0x3ff0000000000000"`)
/// for an exact round trip. Plain JSON numbers are accepted on input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactF64(pub f64);

impl Serialize for ExactF64 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("0x{:016x}", self.0.to_bits()))
    }
}

impl<'de> Deserialize<'de> for ExactF64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ExactF64;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or a 0x-prefixed 16-digit hex string of f64 bits")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ExactF64, E> {
                Ok(ExactF64(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ExactF64, E> {
                Ok(ExactF64(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ExactF64, E> {
                Ok(ExactF64(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ExactF64, E> {
                let digits = v
                    .strip_prefix("0x")
                    .filter(|d| d.len() == 16)
                    .ok_or_else(|| E::custom(format!("malformed f64 bit string `{v}`")))?;
                u64::from_str_radix(digits, 16)
                    .map(|bits| ExactF64(f64::from_bits(bits)))
                    .map_err(|_| E::custom(format!("malformed f64 bit string `{v}`")))
            }
        }
        d.deserialize_any(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn hyper(mu0: f64, v0: f64, ls: &[f64]) -> GpHyper {
        GpHyper::new(mu0, v0, ls.to_vec()).unwrap()
    }

    fn random_points(seed: u64, w: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
        (0..w)
            .map(|i| rng::uniforms(seed, i as u64, dim).iter().map(|u| u * scale).collect())
            .collect()
    }

    /// Dense predictions with nalgebra: the mean from the jitter-free `K`, the
    /// variance with the model's jitter.
    fn dense_predict(model: &GpModel, p: &[f64]) -> (f64, f64) {
        let h = model.hyper();
        let x = model.inputs();
        let w = x.len();
        let kernel = |jitter: f64| {
            DMatrix::from_fn(w, w, |i, j| {
                matern52(&x[i], &x[j], h).unwrap() + if i == j { jitter * h.sigma0_sq } else { 0.0 }
            })
        };
        let ks = DVector::from_fn(w, |i, _| matern52(p, &x[i], h).unwrap());
        let y = DVector::from_iterator(w, model.values().iter().map(|v| v - h.mu0));
        let a = kernel(0.0).lu().solve(&y).unwrap();
        let b = kernel(model.jitter()).lu().solve(&ks).unwrap();
        (h.mu0 + ks.dot(&a), h.sigma0_sq - ks.dot(&b))
    }

    #[test]
    fn kernel_values() {
        let h = hyper(0.0, 2.5, &[1.0]);
        assert_eq!(matern52(&[0.3], &[0.3], &h).unwrap(), 2.5);
        assert_relative_eq!(
            matern52(&[0.0], &[1.0], &h).unwrap(),
            2.5 * 0.523_994_108_831_820_3,
            max_relative = 1e-15
        );
        let h2 = hyper(0.0, 1.0, &[2.0, 0.5]);
        // r^2 = (1/2)^2 + (0.25/0.5)^2 = 0.5
        assert_relative_eq!(
            matern52(&[0.0, 0.0], &[1.0, 0.25], &h2).unwrap(),
            matern52_r(0.5f64.sqrt()),
            max_relative = 1e-15
        );
        assert!(matches!(
            matern52(&[0.0], &[1.0, 2.0], &h),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn hyper_validation() {
        assert!(GpHyper::new(0.0, 0.0, vec![1.0]).is_err());
        assert!(GpHyper::new(0.0, 1.0, vec![]).is_err());
        assert!(GpHyper::new(0.0, 1.0, vec![-1.0]).is_err());
        assert!(GpHyper::new(f64::NAN, 1.0, vec![1.0]).is_err());
    }

    #[test]
    fn three_point_model_matches_dense_solve() {
        let x = vec![vec![0.0], vec![0.4], vec![1.0]];
        let y = vec![1.0, -0.5, 2.0];
        let m = GpModel::with_hyper(&x, &y, hyper(0.3, 1.7, &[0.6]), 100).unwrap();
        for p in [-0.5, 0.2, 0.7, 3.0] {
            let (mean, var) = m.predict(&[p]);
            let (dm, dv) = dense_predict(&m, &[p]);
            assert_relative_eq!(mean, dm, max_relative = 1e-10, epsilon = 1e-12);
            assert_relative_eq!(var, dv.max(0.0), max_relative = 1e-8, epsilon = 1e-12);
            assert_eq!(mean, m.predict_mean(&[p]));
        }
    }

    #[test]
    fn interpolates_training_data() {
        let x = random_points(3, 15, 2, 1.0);
        let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin() + p[1] * p[1]).collect();
        let m = GpModel::with_hyper(&x, &y, hyper(0.2, 1.0, &[0.3, 0.4]), 100).unwrap();
        for (p, v) in x.iter().zip(&y) {
            let (mean, var) = m.predict(p);
            assert!((mean - v).abs() <= 1e-8 * v.abs().max(1.0), "{mean} vs {v}");
            assert!(var <= 1e-6 * m.hyper().sigma0_sq);
        }
    }

    #[test]
    fn fitted_model_interpolates_despite_jitter() {
        // smooth data drives the fitted lengthscales up and R towards singular
        let x = random_points(3, 15, 2, 1.0);
        let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin() + p[1] * p[1]).collect();
        let m = GpModel::fit(&x, &y, &FitOptions::default()).unwrap();
        let first_solve = m.chol.solve(&y.iter().map(|v| v - m.hyper().mu0).collect::<Vec<_>>());
        let unrefined = first_solve.iter().fold(0.0f64, |a, b| a.max((m.jitter() * b).abs()));
        for (p, v) in x.iter().zip(&y) {
            let got = m.predict(p).0 - v;
            assert!(got.abs() <= 1e-8 * v.abs().max(1.0), "{got} (unrefined {unrefined})");
        }
    }

    #[test]
    fn far_field_tends_to_prior() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![0.2, 0.9]];
        let y = vec![1.0, 3.0, -2.0];
        let m = GpModel::with_hyper(&x, &y, hyper(0.7, 2.0, &[0.5, 0.3]), 100).unwrap();
        let (mean, var) = m.predict(&[0.5e6, 0.3e6]);
        assert_relative_eq!(mean, 0.7, max_relative = 1e-12);
        assert_relative_eq!(var, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_data_gives_constant_model() {
        let x = vec![vec![0.0], vec![0.5], vec![1.0], vec![2.0]];
        let y = vec![4.2; 4];
        let m = GpModel::fit(&x, &y, &FitOptions::default()).unwrap();
        assert_eq!(m.hyper().mu0, 4.2);
        assert!(m.hyper().sigma0_sq > 0.0 && m.hyper().sigma0_sq < 1e-12);
        for p in [-3.0, 0.25, 1.7, 50.0] {
            assert_eq!(m.predict(&[p]).0, 4.2);
        }
    }

    #[test]
    fn fit_rejects_bad_data() {
        let opts = FitOptions::default();
        assert!(matches!(
            GpModel::fit(&[vec![0.0]], &[1.0], &opts),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            GpModel::fit(&[vec![0.0], vec![0.0]], &[1.0, 2.0], &opts),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            GpModel::fit(&[vec![0.0], vec![1.0]], &[1.0], &opts),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            GpModel::fit(&[vec![0.0], vec![1.0, 2.0]], &[1.0, 2.0], &opts),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn recovers_lengthscale_of_a_gp_draw() {
        // draw on 50 points from a unit-variance GP with l = 0.5, sampled with nalgebra
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![5.0 * i as f64 / 49.0]).collect();
        let h = hyper(0.0, 1.0, &[0.5]);
        let k = DMatrix::from_fn(50, 50, |i, j| {
            matern52(&x[i], &x[j], &h).unwrap() + if i == j { 1e-10 } else { 0.0 }
        });
        let l = k.cholesky().unwrap().l();
        let z = DVector::from_vec(rng::normals(2024, 0, 50));
        let y: Vec<f64> = (l * z).iter().copied().collect();
        let m = GpModel::fit(
            &x,
            &y,
            &FitOptions {
                seed: 1,
                ..FitOptions::default()
            },
        )
        .unwrap();
        let fitted = m.hyper().lengthscales[0];
        assert!(fitted > 0.25 && fitted < 1.0, "fitted lengthscale {fitted}");
    }

    #[test]
    fn refit_freezes_lengthscales() {
        let x = random_points(9, 30, 2, 2.0);
        let y: Vec<f64> = x.iter().map(|p| p[0].cos() * p[1]).collect();
        let opts = FitOptions {
            w_hyp: 10,
            ..FitOptions::default()
        };
        let first = GpModel::fit(&x[..10], &y[..10], &opts).unwrap();
        let grown = first.update(&x, &y, &opts).unwrap();
        assert_eq!(grown.hyper().lengthscales, first.hyper().lengthscales);
        assert_eq!(grown.values().len(), 30);
        // fitting with W > w_hyp uses only the leading w_hyp points for lengthscales
        let direct = GpModel::fit(&x, &y, &opts).unwrap();
        assert_eq!(direct.hyper().lengthscales, first.hyper().lengthscales);
        assert_eq!(direct.hyper().mu0, grown.hyper().mu0);
    }

    #[test]
    fn fit_is_deterministic() {
        let x = random_points(4, 12, 3, 1.0);
        let y: Vec<f64> = x.iter().map(|p| p.iter().sum::<f64>().exp()).collect();
        let opts = FitOptions {
            seed: 77,
            ..FitOptions::default()
        };
        let a = GpModel::fit(&x, &y, &opts).unwrap();
        let b = GpModel::fit(&x, &y, &opts).unwrap();
        assert_eq!(a.hyper(), b.hyper());
    }

    #[test]
    fn fitted_hyper_is_a_likelihood_maximum() {
        let x = random_points(5, 20, 1, 3.0);
        let y: Vec<f64> = x.iter().map(|p| (2.0 * p[0]).sin()).collect();
        let m = GpModel::fit(&x, &y, &FitOptions::default()).unwrap();
        let best = m.log_marginal_likelihood();
        let h = m.hyper().clone();
        for (dmu, dv, dl) in [
            (0.05, 1.0, 1.0),
            (0.0, 1.2, 1.0),
            (0.0, 0.8, 1.0),
            (0.0, 1.0, 1.1),
            (0.0, 1.0, 0.9),
        ] {
            let other = GpHyper::new(h.mu0 + dmu, h.sigma0_sq * dv, vec![h.lengthscales[0] * dl]).unwrap();
            let lml = GpModel::with_hyper(&x, &y, other, 100)
                .unwrap()
                .log_marginal_likelihood();
            assert!(lml <= best + 1e-9, "{lml} > {best}");
        }
    }

    #[test]
    fn single_point_likelihood() {
        let m = GpModel::with_hyper(&[vec![0.2]], &[1.5], hyper(0.5, 2.0, &[1.0]), 100).unwrap();
        let var = 2.0 * (1.0 + m.jitter());
        let expected = -0.5 * (1.0f64).powi(2) / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln();
        assert_relative_eq!(m.log_marginal_likelihood(), expected, max_relative = 1e-14);
    }

    #[test]
    fn likelihood_matches_dense_determinant() {
        let x = random_points(21, 4, 2, 1.0);
        let y = vec![0.3, -1.2, 0.8, 2.0];
        let m = GpModel::with_hyper(&x, &y, hyper(0.1, 1.3, &[0.4, 0.7]), 100).unwrap();
        let h = m.hyper();
        let k = DMatrix::from_fn(4, 4, |i, j| {
            matern52(&x[i], &x[j], h).unwrap() + if i == j { m.jitter() * h.sigma0_sq } else { 0.0 }
        });
        let r = DVector::from_iterator(4, y.iter().map(|v| v - h.mu0));
        let quad = r.dot(&k.clone().lu().solve(&r).unwrap());
        let expected = -0.5 * quad - 0.5 * k.determinant().ln() - 2.0 * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(m.log_marginal_likelihood(), expected, max_relative = 1e-9);
    }

    #[test]
    fn log_det_grows_with_jitter() {
        let x = random_points(8, 6, 1, 1.0);
        let r = correlation_matrix(&x, &[0.3]);
        let mut last = f64::NEG_INFINITY;
        for jitter in [1e-10, 1e-8, 1e-6, 1e-4, 1e-2] {
            let mut a = r.clone();
            for i in 0..6 {
                a[i * 6 + i] += jitter;
            }
            let ld = Cholesky::factor(&a, 6).unwrap().log_det();
            assert!(ld > last);
            last = ld;
        }
    }

    #[test]
    fn kernel_matrix_eigenvalues_nonnegative() {
        let x = random_points(13, 10, 2, 1.0);
        let r = correlation_matrix(&x, &[0.5, 0.5]);
        let m = DMatrix::from_row_slice(10, 10, &r);
        assert_eq!(m, m.transpose());
        assert!(m.symmetric_eigenvalues().iter().all(|e| *e >= -1e-12));
    }

    #[test]
    fn document_round_trip_is_exact() {
        let x = random_points(6, 8, 2, 1.0);
        let y: Vec<f64> = x.iter().map(|p| 1.0 / 3.0 + p[0] - p[1]).collect();
        let m = GpModel::fit(&x, &y, &FitOptions::default()).unwrap();
        let back = GpModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back.hyper(), m.hyper());
        assert_eq!(back.inputs(), m.inputs());
        for p in random_points(7, 5, 2, 1.2) {
            assert_eq!(back.predict(&p), m.predict(&p));
        }
        let plain = r#"{"kernel":"matern52","inputs":[[0.0],[1.0]],"values":[1,2],
            "mu0":1.5,"sigma0_sq":"0x3ff0000000000000","lengthscales":[0.5],"w_hyp":100}"#;
        let m2 = GpModel::from_json(plain).unwrap();
        assert_eq!(m2.hyper().sigma0_sq, 1.0);
        assert!(GpModel::from_json(&plain.replace("matern52", "rbf")).is_err());
        assert!(GpModel::from_json(&plain.replace("\"0x3ff0000000000000\"", "\"0x3ff\"")).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn kernel_symmetric(p in prop::collection::vec(-5.0f64..5.0, 3), q in prop::collection::vec(-5.0f64..5.0, 3)) {
            let h = hyper(0.0, 1.3, &[0.5, 1.0, 2.0]);
            prop_assert_eq!(matern52(&p, &q, &h).unwrap(), matern52(&q, &p, &h).unwrap());
        }

        #[test]
        fn variance_bounded_by_prior(seed in 0u64..1000, px in -3.0f64..3.0, py in -3.0f64..3.0) {
            let x = random_points(seed, 8, 2, 1.0);
            let y: Vec<f64> = rng::normals(seed, 99, 8);
            let m = GpModel::with_hyper(&x, &y, hyper(0.0, 1.5, &[0.4, 0.8]), 100).unwrap();
            let (_, var) = m.predict(&[px, py]);
            prop_assert!((0.0..=1.5).contains(&var));
        }
    }
}
