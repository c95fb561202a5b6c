//! Box-constrained Nelder-Mead minimization.
//!
//! Trial points are projected onto the box, so the simplex never leaves it.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below
    /// `f_tol (|f_best| + f_tol)`.
    pub f_tol: f64,
    /// Stop when every vertex is within `x_tol` of the best one in each
    /// coordinate.
    pub x_tol: f64,
    /// Initial step as a fraction of each box width.
    pub init_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_evals: 400,
            f_tol: 1e-10,
            x_tol: 1e-10,
            init_step: 0.1,
        }
    }
}

/// Best point and value found.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(*lo, *hi);
    }
}

impl NelderMead {
    /// Minimizes `f` from `x0` within `[lower, upper]`. Non-finite values are
    /// treated as `+inf`.
    pub fn minimize<F>(&self, mut f: F, x0: &[f64], lower: &[f64], upper: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = x0.len();
        let mut evals = 0;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut start = x0.to_vec();
        project(&mut start, lower, upper);
        let mut simplex = vec![start.clone()];
        for i in 0..n {
            let mut v = start.clone();
            let step = self.init_step * (upper[i] - lower[i]);
            // step away from the nearer wall
            v[i] = if v[i] + step <= upper[i] {
                v[i] + step
            } else {
                v[i] - step
            };
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evals)).collect();

        while evals < self.max_evals {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let (best, worst) = (values[0], values[n]);
            let spread_ok = worst.is_finite() && (worst - best) <= self.f_tol * (best.abs() + self.f_tol);
            let size_ok = simplex[1..]
                .iter()
                .all(|v| v.iter().zip(&simplex[0]).all(|(a, b)| (a - b).abs() <= self.x_tol));
            if spread_ok || size_ok {
                break;
            }

            let mut centroid = vec![0.0; n];
            for v in &simplex[..n] {
                for (c, vi) in centroid.iter_mut().zip(v) {
                    *c += vi / n as f64;
                }
            }
            let toward = |t: f64| {
                let mut p: Vec<f64> = centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect();
                project(&mut p, lower, upper);
                p
            };

            let xr = toward(-1.0);
            let fr = eval(&xr, &mut evals);
            if fr < values[0] {
                let xe = toward(-2.0);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
                continue;
            }
            // outside contraction when the reflection helped, inside otherwise
            let xc = toward(if fr < values[n] { -0.5 } else { 0.5 });
            let fc = eval(&xc, &mut evals);
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
                continue;
            }
            // shrink toward the best vertex
            for i in 1..=n {
                let mut p: Vec<f64> = simplex[0]
                    .iter()
                    .zip(&simplex[i])
                    .map(|(b, v)| b + 0.5 * (v - b))
                    .collect();
                project(&mut p, lower, upper);
                values[i] = eval(&p, &mut evals);
                simplex[i] = p;
            }
        }

        let mut best = 0;
        for i in 1..values.len() {
            if values[i] < values[best] {
                best = i;
            }
        }
        Minimum {
            x: simplex.swap_remove(best),
            value: values[best],
            evals,
        }
    }
}
