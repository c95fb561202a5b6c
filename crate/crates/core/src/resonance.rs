//! Resonance frequency and quality factor from transmission samples or from a
//! complex eigenfrequency.
//!
//! The line shape is
//!
//! ```text
//! T(nu) = offset + amplitude / (1 + (2 (nu - nu0) / fwhm)^2),    Q = nu0 / fwhm
//! ```
//!
//! Fitting happens in scaled units (frequency and transmission each shifted to
//! the center of their range and divided by its span), with Levenberg-Marquardt
//! on `(nu0, ln fwhm, amplitude, offset)` and an analytic Jacobian. Several
//! starting widths and both peak and dip orientations are tried; the lowest
//! residual wins.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub nu0: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub q: f64,
    /// `sqrt(sum (T_model - T_i)^2)` in transmission units.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl LorentzianFit {
    pub fn eval(&self, nu: f64) -> f64 {
        lorentzian(nu, self.nu0, self.fwhm, self.amplitude, self.offset)
    }
}

pub fn lorentzian(nu: f64, nu0: f64, fwhm: f64, amplitude: f64, offset: f64) -> f64 {
    let u = 2.0 * (nu - nu0) / fwhm;
    offset + amplitude / (1.0 + u * u)
}

/// Starting point in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianGuess {
    pub nu0: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitOptions {
    /// Tried in addition to the automatic starts.
    pub initial_guess: Option<LorentzianGuess>,
    /// Holds the baseline at this value instead of fitting it.
    pub fixed_offset: Option<f64>,
    /// Defaults to 500 iterations per start.
    pub max_iter: Option<usize>,
}

const GRAD_TOL: f64 = 1e-10;
const STEP_TOL: f64 = 1e-14;

struct Scaled {
    x: Vec<f64>,
    t: Vec<f64>,
    x_mid: f64,
    x_span: f64,
    t_mid: f64,
    t_span: f64,
}

/// Parameters in scaled units: `[x0, ln w, a, b]`.
type Params = [f64; 4];

fn residuals_and_jacobian(s: &Scaled, p: &Params, fit_offset: bool, r: &mut [f64], jac: &mut [[f64; 4]]) {
    let w = p[1].exp();
    for i in 0..s.x.len() {
        let u = 2.0 * (s.x[i] - p[0]) / w;
        let d = 1.0 + u * u;
        r[i] = p[3] + p[2] / d - s.t[i];
        jac[i] = [
            4.0 * p[2] * u / (w * d * d),
            2.0 * p[2] * u * u / (d * d),
            1.0 / d,
            if fit_offset { 1.0 } else { 0.0 },
        ];
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

struct Outcome {
    params: Params,
    cost: f64,
    iterations: usize,
    converged: bool,
}

fn levenberg_marquardt(s: &Scaled, start: Params, fit_offset: bool, max_iter: usize) -> Outcome {
    let n = s.x.len();
    let k = if fit_offset { 4 } else { 3 };
    let mut p = start;
    let mut r = vec![0.0; n];
    let mut jac = vec![[0.0; 4]; n];
    residuals_and_jacobian(s, &p, fit_offset, &mut r, &mut jac);
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    let mut trial_r = vec![0.0; n];
    let mut trial_j = vec![[0.0; 4]; n];

    for iter in 0..max_iter {
        let mut jtj = [[0.0; 4]; 4];
        let mut grad = [0.0; 4];
        for i in 0..n {
            for a in 0..k {
                grad[a] += jac[i][a] * r[i];
                for b in 0..k {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }
        let scale = (0..k).map(|a| jtj[a][a]).fold(0.0f64, f64::max).sqrt() * cost.sqrt();
        let gmax = grad[..k].iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax <= GRAD_TOL * scale.max(f64::MIN_POSITIVE) || cost == 0.0 {
            return Outcome {
                params: p,
                cost,
                iterations: iter,
                converged: true,
            };
        }

        let mut stepped = false;
        while lambda < 1e16 {
            let mut a = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..k {
                    a[i * k + j] = jtj[i][j];
                }
                a[i * k + i] += lambda * jtj[i][i].max(1e-30);
            }
            let Some(ch) = Cholesky::factor(&a, k) else {
                lambda *= 10.0;
                continue;
            };
            let neg: Vec<f64> = grad[..k].iter().map(|g| -g).collect();
            let delta = ch.solve(&neg);
            let mut q = p;
            for i in 0..k {
                q[i] += delta[i];
            }
            residuals_and_jacobian(s, &q, fit_offset, &mut trial_r, &mut trial_j);
            let trial_cost = sum_sq(&trial_r);
            if trial_cost.is_finite() && trial_cost < cost {
                let step = delta.iter().map(|d| d.abs()).fold(0.0, f64::max);
                let size = q[..k].iter().map(|v| v.abs()).fold(0.0, f64::max);
                p = q;
                cost = trial_cost;
                std::mem::swap(&mut r, &mut trial_r);
                std::mem::swap(&mut jac, &mut trial_j);
                lambda = (lambda / 10.0).max(1e-12);
                stepped = true;
                if step <= STEP_TOL * (size + STEP_TOL) {
                    return Outcome {
                        params: p,
                        cost,
                        iterations: iter + 1,
                        converged: true,
                    };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            // no descent direction left at machine precision
            return Outcome {
                params: p,
                cost,
                iterations: iter + 1,
                converged: true,
            };
        }
    }
    Outcome {
        params: p,
        cost,
        iterations: max_iter,
        converged: false,
    }
}

/// Least-squares Lorentzian through `(frequency, transmission)` points.
pub fn fit_lorentzian(points: &[(f64, f64)], opts: &FitOptions) -> Result<LorentzianFit> {
    let fit_offset = opts.fixed_offset.is_none();
    let n_params = if fit_offset { 4 } else { 3 };
    if points.len() < n_params.max(4) {
        return Err(Error::DegenerateData(format!(
            "at least 4 points are required, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(f, t)| !f.is_finite() || !t.is_finite()) {
        return Err(Error::DegenerateData("points must be finite".into()));
    }
    let (x_lo, x_hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (f, _)| {
            (lo.min(*f), hi.max(*f))
        });
    let (t_lo, t_hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, t)| {
            (lo.min(*t), hi.max(*t))
        });
    if !(x_hi > x_lo) {
        return Err(Error::DegenerateData("all points share one frequency".into()));
    }
    if !(t_hi > t_lo) {
        return Err(Error::DegenerateData("transmission is flat".into()));
    }
    let s = Scaled {
        x: points
            .iter()
            .map(|(f, _)| (f - 0.5 * (x_lo + x_hi)) / (x_hi - x_lo))
            .collect(),
        t: points
            .iter()
            .map(|(_, t)| (t - 0.5 * (t_lo + t_hi)) / (t_hi - t_lo))
            .collect(),
        x_mid: 0.5 * (x_lo + x_hi),
        x_span: x_hi - x_lo,
        t_mid: 0.5 * (t_lo + t_hi),
        t_span: t_hi - t_lo,
    };
    let fixed_b = opts.fixed_offset.map(|b| (b - s.t_mid) / s.t_span);

    let mut starts: Vec<Params> = Vec::new();
    if let Some(g) = opts.initial_guess {
        if g.fwhm > 0.0 {
            starts.push([
                (g.nu0 - s.x_mid) / s.x_span,
                (g.fwhm / s.x_span).ln(),
                g.amplitude / s.t_span,
                fixed_b.unwrap_or((g.offset - s.t_mid) / s.t_span),
            ]);
        }
    }
    for peak in [true, false] {
        let (i_ext, _) = s.t.iter().enumerate().fold((0, f64::NAN), |(bi, bv), (i, v)| {
            let better = if peak { !(*v <= bv) } else { !(*v >= bv) };
            if better {
                (i, *v)
            } else {
                (bi, bv)
            }
        });
        let base = fixed_b.unwrap_or(if peak { -0.5 } else { 0.5 });
        let amp = s.t[i_ext] - base;
        let mut widths = vec![half_height_width(&s, i_ext, base, amp)];
        widths.extend([0.02, 0.1, 0.3, 1.0, 3.0].map(Some));
        for w in widths.into_iter().flatten() {
            starts.push([s.x[i_ext], w.ln(), amp, base]);
        }
    }

    let max_iter = opts.max_iter.unwrap_or(500);
    let mut best: Option<Outcome> = None;
    for start in starts {
        let out = levenberg_marquardt(&s, start, fit_offset, max_iter);
        let better = match &best {
            None => true,
            Some(b) => out.cost < b.cost || (out.converged && !b.converged && out.cost <= b.cost),
        };
        if better {
            best = Some(out);
        }
    }
    let best = best.expect("at least one start");
    if !best.converged {
        return Err(Error::NonConvergence(best.iterations));
    }
    let p = best.params;
    let fwhm = p[1].exp() * s.x_span;
    let nu0 = p[0] * s.x_span + s.x_mid;
    let amplitude = p[2] * s.t_span;
    let offset = opts.fixed_offset.unwrap_or(p[3] * s.t_span + s.t_mid);
    if !(fwhm > 0.0) || !fwhm.is_finite() {
        return Err(Error::NonConvergence(best.iterations));
    }
    let mut fit = LorentzianFit {
        nu0,
        fwhm,
        amplitude,
        offset,
        q: nu0 / fwhm,
        residual_norm: 0.0,
        iterations: best.iterations,
    };
    fit.residual_norm = points
        .iter()
        .map(|(f, t)| (fit.eval(*f) - t).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(fit)
}

/// Width between the half-height crossings around `i_ext`, linearly
/// interpolated, in scaled units.
fn half_height_width(s: &Scaled, i_ext: usize, base: f64, amp: f64) -> Option<f64> {
    let mut order: Vec<usize> = (0..s.x.len()).collect();
    order.sort_by(|&a, &b| s.x[a].total_cmp(&s.x[b]));
    let pos = order.iter().position(|&i| i == i_ext)?;
    let half = base + 0.5 * amp;
    let above = |i: usize| (s.t[i] - half) * amp.signum() >= 0.0;
    let crossing = |inner: usize, outer: usize| {
        let (ti, to) = (s.t[inner], s.t[outer]);
        let frac = if ti != to { (ti - half) / (ti - to) } else { 0.5 };
        s.x[inner] + frac * (s.x[outer] - s.x[inner])
    };
    let left = (0..pos)
        .rev()
        .find(|&k| !above(order[k]))
        .map(|k| crossing(order[k + 1], order[k]));
    let right = (pos + 1..order.len())
        .find(|&k| !above(order[k]))
        .map(|k| crossing(order[k - 1], order[k]));
    match (left, right) {
        (Some(l), Some(r)) if r > l => Some(r - l),
        (Some(l), None) => Some(2.0 * (s.x[i_ext] - l)).filter(|w| *w > 0.0),
        (None, Some(r)) => Some(2.0 * (r - s.x[i_ext])).filter(|w| *w > 0.0),
        _ => None,
    }
}

/// `Q = |Re(omega) / Im(omega)| / 2`.
pub fn q_from_complex_frequency(omega: Complex64) -> Result<f64> {
    if omega.im == 0.0 {
        return Err(Error::DivisionByZero(
            "complex frequency has zero imaginary part".into(),
        ));
    }
    Ok(0.5 * (omega.re / omega.im).abs())
}
