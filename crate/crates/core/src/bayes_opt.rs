//! Expected-improvement Bayesian optimization over a box.
//!
//! The loop evaluates a randomly shifted Halton design, then repeatedly fits a
//! [`GpModel`] to the successful evaluations and evaluates the point that
//! maximizes the acquisition. Acquisition maximization screens a dense random
//! candidate set and polishes the best few with Nelder-Mead.
//!
//! [`EiVariant::Standard`] is the usual nonnegative improvement
//! `E[max(0, f_min - f(p))]`. [`EiVariant::Raw`] is `E[min(0, f_min - f(p))]`,
//! the negated expected exceedance; it is never positive and, when
//! maximized, favors points confidently below `f_min`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gp::{FitOptions, GpModel};
use crate::optim::NelderMead;
use crate::rng;

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<BoDomain> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::invalid("domain", "needs at least one dimension"));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::invalid(
                "domain",
                "every lower bound must be finite and below its upper bound",
            ));
        }
        Ok(BoDomain { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<BoDomain> {
        BoDomain::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((x, lo), hi)| lo <= x && x <= hi)
    }

    /// Maps a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((u, lo), hi)| (lo + u * (hi - lo)).clamp(*lo, *hi))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EiVariant {
    #[default]
    Standard,
    Raw,
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// `E[max(0, f_min - F)]` for `F ~ N(y_hat, sigma^2)`.
pub fn ei_closed_form(y_hat: f64, sigma: f64, f_min: f64) -> f64 {
    let d = f_min - y_hat;
    if !(sigma > 0.0) {
        return d.max(0.0);
    }
    let z = d / sigma;
    (d * std_normal_cdf(z) + sigma * std_normal_pdf(z)).max(0.0)
}

/// `E[min(0, f_min - F)]` for `F ~ N(y_hat, sigma^2)`.
pub fn ei_raw_closed_form(y_hat: f64, sigma: f64, f_min: f64) -> f64 {
    let d = f_min - y_hat;
    if !(sigma > 0.0) {
        return d.min(0.0);
    }
    let z = d / sigma;
    (d * std_normal_cdf(-z) - sigma * std_normal_pdf(z)).min(0.0)
}

/// Acquisition value at `p`.
pub fn acquisition(model: &GpModel, p: &[f64], f_min: f64, variant: EiVariant) -> f64 {
    let (y_hat, var) = model.predict(p);
    let sigma = var.sqrt();
    match variant {
        EiVariant::Standard => ei_closed_form(y_hat, sigma, f_min),
        EiVariant::Raw => ei_raw_closed_form(y_hat, sigma, f_min),
    }
}

/// Nonnegative expected improvement at `p`.
pub fn expected_improvement(model: &GpModel, p: &[f64], f_min: f64) -> f64 {
    acquisition(model, p, f_min, EiVariant::Standard)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuggestOptions {
    pub candidates: usize,
    pub refine: usize,
    pub variant: EiVariant,
    pub polish: NelderMead,
}

impl Default for SuggestOptions {
    fn default() -> Self {
        SuggestOptions {
            candidates: 4096,
            refine: 8,
            variant: EiVariant::Standard,
            polish: NelderMead {
                max_evals: 200,
                f_tol: 1e-12,
                x_tol: 1e-9,
                init_step: 0.02,
            },
        }
    }
}

/// Approximate maximizer of the acquisition with default options.
pub fn suggest(model: &GpModel, domain: &BoDomain, f_min: f64, seed: u64) -> Vec<f64> {
    suggest_with(model, domain, f_min, seed, &SuggestOptions::default())
}

/// Approximate maximizer of the acquisition; deterministic given `seed`.
pub fn suggest_with(model: &GpModel, domain: &BoDomain, f_min: f64, seed: u64, opts: &SuggestOptions) -> Vec<f64> {
    let dim = domain.dim();
    let score = |p: &[f64]| acquisition(model, p, f_min, opts.variant);
    let mut screened: Vec<(usize, Vec<f64>, f64)> = (0..opts.candidates.max(1))
        .into_par_iter()
        .map(|i| {
            let p = domain.from_unit(&rng::uniforms(seed, i as u64, dim));
            let a = score(&p);
            (i, p, a)
        })
        .collect();
    // best acquisition first, candidate index breaks ties
    screened.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    screened.truncate(opts.refine.max(1));

    let polished: Vec<(usize, Vec<f64>, f64)> = screened
        .into_par_iter()
        .map(|(i, p, a)| {
            let m = opts.polish.minimize(|x| -score(x), &p, domain.lower(), domain.upper());
            if -m.value > a {
                (i, m.x, -m.value)
            } else {
                (i, p, a)
            }
        })
        .collect();
    polished
        .into_iter()
        .reduce(|best, c| {
            if c.2 > best.2 || (c.2 == best.2 && c.0 < best.0) {
                c
            } else {
                best
            }
        })
        .map(|c| c.1)
        .expect("at least one candidate")
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoOptions {
    pub budget: usize,
    /// Defaults to `max(4, 2 dim)`, capped at the budget.
    pub init_count: Option<usize>,
    pub seed: u64,
    pub fit: FitOptions,
    pub suggest: SuggestOptions,
}

impl Default for BoOptions {
    fn default() -> Self {
        BoOptions {
            budget: 50,
            init_count: None,
            seed: 0,
            fit: FitOptions::default(),
            suggest: SuggestOptions::default(),
        }
    }
}

/// One objective call. Failed calls keep their error message and are left out
/// of the surrogate's training data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub point: Vec<f64>,
    pub value: Option<f64>,
    pub error: Option<String>,
    /// How the point was chosen.
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Initial,
    Suggested,
    /// Uniform draw, used while fewer than two successful evaluations exist
    /// or when the surrogate cannot be fitted.
    Random,
}

/// History of a run.
#[derive(Debug, Clone)]
pub struct BoState {
    pub domain: BoDomain,
    pub evaluations: Vec<Evaluation>,
    /// Smallest successful value so far; `+inf` if none.
    pub f_min: f64,
    pub best_index: Option<usize>,
    pub budget: usize,
    pub init_count: usize,
    pub suggest_calls: usize,
    /// Surrogate fitted to all successful evaluations at the end of the run.
    pub model: Option<GpModel>,
}

/// Row of the optimization trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// 1-based evaluation number.
    pub iter: usize,
    pub point: Vec<f64>,
    pub value: Option<f64>,
    /// Running minimum after this evaluation; `None` until a call succeeds.
    pub f_min: Option<f64>,
}

impl BoState {
    fn new(domain: BoDomain, budget: usize, init_count: usize) -> BoState {
        BoState {
            domain,
            evaluations: Vec::with_capacity(budget),
            f_min: f64::INFINITY,
            best_index: None,
            budget,
            init_count,
            suggest_calls: 0,
            model: None,
        }
    }

    fn record(&mut self, point: Vec<f64>, outcome: std::result::Result<f64, String>, origin: Origin) {
        let (value, error) = match outcome {
            Ok(v) if v.is_finite() => (Some(v), None),
            Ok(v) => (None, Some(format!("objective returned {v}"))),
            Err(e) => (None, Some(e)),
        };
        if let Some(v) = value {
            if v < self.f_min {
                self.f_min = v;
                self.best_index = Some(self.evaluations.len());
            }
        }
        self.evaluations.push(Evaluation {
            point,
            value,
            error,
            origin,
        });
    }

    pub fn best_point(&self) -> Option<&[f64]> {
        self.best_index.map(|i| self.evaluations[i].point.as_slice())
    }

    pub fn failures(&self) -> usize {
        self.evaluations.iter().filter(|e| e.value.is_none()).count()
    }

    /// Successful points and values, in evaluation order.
    pub fn training_data(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.evaluations
            .iter()
            .filter_map(|e| e.value.map(|v| (e.point.clone(), v)))
            .unzip()
    }

    pub fn trace(&self) -> Vec<TraceRow> {
        let mut best: Option<f64> = None;
        self.evaluations
            .iter()
            .enumerate()
            .map(|(i, e)| {
                if let Some(v) = e.value {
                    best = Some(best.map_or(v, |b| b.min(v)));
                }
                TraceRow {
                    iter: i + 1,
                    point: e.point.clone(),
                    value: e.value,
                    f_min: best,
                }
            })
            .collect()
    }
}

fn surrogate(previous: Option<&GpModel>, inputs: &[Vec<f64>], values: &[f64], fit: &FitOptions) -> Result<GpModel> {
    match previous {
        Some(m) => m.update(inputs, values, fit),
        None => GpModel::fit(inputs, values, fit),
    }
}

/// Minimizes `objective` over `domain` within `opts.budget` calls.
pub fn minimize<F>(mut objective: F, domain: &BoDomain, opts: &BoOptions) -> Result<BoState>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, String>,
{
    let dim = domain.dim();
    let init_count = opts.init_count.unwrap_or_else(|| (2 * dim).max(4).min(opts.budget));
    if init_count < 2 {
        return Err(Error::invalid("init_count", "must be at least 2"));
    }
    if opts.budget < init_count {
        return Err(Error::invalid(
            "budget",
            format!("must be at least init_count = {init_count}, got {}", opts.budget),
        ));
    }
    let mut state = BoState::new(domain.clone(), opts.budget, init_count);
    let fit = FitOptions {
        seed: rng::derive(opts.seed, 1),
        ..opts.fit.clone()
    };
    let suggest_seed = rng::derive(opts.seed, 2);
    let random_seed = rng::derive(opts.seed, 3);

    for u in rng::shifted_halton(init_count, dim, rng::derive(opts.seed, 0)) {
        let p = domain.from_unit(&u);
        let outcome = objective(&p);
        state.record(p, outcome, Origin::Initial);
    }

    let mut model: Option<GpModel> = None;
    for iter in init_count..opts.budget {
        let (inputs, values) = state.training_data();
        let fitted = if values.len() >= 2 {
            surrogate(model.as_ref(), &inputs, &values, &fit).ok()
        } else {
            None
        };
        let (p, origin) = match &fitted {
            Some(m) => {
                state.suggest_calls += 1;
                let seed = rng::derive(suggest_seed, iter as u64);
                (
                    suggest_with(m, domain, state.f_min, seed, &opts.suggest),
                    Origin::Suggested,
                )
            }
            None => (
                domain.from_unit(&rng::uniforms(random_seed, iter as u64, dim)),
                Origin::Random,
            ),
        };
        if fitted.is_some() {
            model = fitted;
        }
        let outcome = objective(&p);
        state.record(p, outcome, origin);
    }

    let (inputs, values) = state.training_data();
    if values.len() >= 2 {
        state.model = surrogate(model.as_ref(), &inputs, &values, &fit).ok();
    }
    Ok(state)
}

/// Synthetic objectives with known minima.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    /// `sum (p_i - 0.3)^2` on `[0, 1]^dim`, minimum 0 at `p_i = 0.3`.
    Quadratic,
    /// `sum |p_i|` on `[-1, 1]^dim`, minimum 0 at the origin.
    Abs,
}

impl Builtin {
    pub fn parse(name: &str) -> Option<Builtin> {
        match name.strip_prefix("builtin:").unwrap_or(name) {
            "quadratic" => Some(Builtin::Quadratic),
            "abs" => Some(Builtin::Abs),
            _ => None,
        }
    }

    pub fn domain(self, dim: usize) -> Result<BoDomain> {
        match self {
            Builtin::Quadratic => BoDomain::cube(dim, 0.0, 1.0),
            Builtin::Abs => BoDomain::cube(dim, -1.0, 1.0),
        }
    }

    pub fn eval(self, p: &[f64]) -> f64 {
        match self {
            Builtin::Quadratic => p.iter().map(|x| (x - 0.3) * (x - 0.3)).sum(),
            Builtin::Abs => p.iter().map(|x| x.abs()).sum(),
        }
    }
}
