//! Closed-form performance model of the one-way quantum repeater.
//!
//! A message qubit is encoded in a tree cluster state and forwarded over
//! `m + 1` fiber segments. The figure of merit is the cost
//!
//! ```text
//! C = 1 / (Gamma_tcs f p_trans) * m L_att / (tau_ph L)
//! ```
//!
//! i.e. the inverse secret-key rate per station and attenuation length, in
//! units of the photon emission time. Lower is better.

use serde::{Deserialize, Serialize};

use crate::emitter::{beta_c, EmitterSpec, PurcellContext};
use crate::error::{Error, Result};

/// Branching vector `[b0, ..., bd]` of a tree cluster state.
///
/// Trailing zeros are stripped on construction, so `[4, 14, 0]` and `[4, 14]`
/// are the same tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct TreeVector(Vec<u32>);

impl TreeVector {
    pub fn new(mut branches: Vec<u32>) -> Result<Self> {
        while branches.len() > 1 && *branches.last().unwrap() == 0 {
            branches.pop();
        }
        match branches.first() {
            None => return Err(Error::invalid("tree", "branching vector is empty")),
            Some(0) => return Err(Error::invalid("tree", "b0 must be >= 1")),
            _ => {}
        }
        if branches.contains(&0) {
            return Err(Error::invalid("tree", "only trailing branch counts may be zero"));
        }
        Ok(TreeVector(branches))
    }

    /// Two-level tree; zero entries are allowed at the tail.
    pub fn two_level(b0: u32, b1: u32, b2: u32) -> Result<Self> {
        TreeVector::new(vec![b0, b1, b2])
    }

    pub fn branches(&self) -> &[u32] {
        &self.0
    }

    /// Depth `d` of `[b0, ..., bd]` after trailing zeros are removed.
    pub fn depth(&self) -> usize {
        self.0.len() - 1
    }

    /// `b_k`, with zero beyond the last level.
    pub fn get(&self, k: usize) -> u32 {
        self.0.get(k).copied().unwrap_or(0)
    }

    /// Total number of photons `sum_k prod_{j<=k} b_j`.
    pub fn photon_count(&self) -> u64 {
        let mut total = 0u64;
        let mut level = 1u64;
        for &b in &self.0 {
            level *= b as u64;
            total += level;
        }
        total
    }
}

impl TryFrom<Vec<u32>> for TreeVector {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        TreeVector::new(v)
    }
}

impl From<TreeVector> for Vec<u32> {
    fn from(t: TreeVector) -> Self {
        t.0
    }
}

impl std::fmt::Display for TreeVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "]")
    }
}

/// `1 - (1 - x)^n` without cancellation for small `x`.
fn one_minus_pow_complement(x: f64, n: u32) -> f64 {
    if n == 0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        -(n as f64 * (-x).ln_1p()).exp_m1()
    }
}

/// `x^n - y^n` for `0 <= y <= x`.
fn pow_difference(x: f64, y: f64, n: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ratio = y / x;
    if ratio <= 0.0 {
        return x.powi(n as i32);
    }
    -x.powi(n as i32) * (n as f64 * ratio.ln()).exp_m1()
}

/// Encoded-qubit transmission `eta_e` of a tree with single-photon transmission `eta`.
///
/// Evaluates `R_k = 1 - [1 - (1-mu)(1 - mu + mu R_{k+2})^{b_{k+1}}]^{b_k}` from the
/// deepest level upwards with `R_{d+1} = 0`, `b_{d+1} = 0`, `mu = 1 - eta`, then
/// `eta_e = [(1-mu+mu R_1)^{b0} - (mu R_1)^{b0}] (1-mu+mu R_2)^{b1}`.
pub fn encoded_transmission(eta: f64, tree: &TreeVector) -> f64 {
    let eta = eta.clamp(0.0, 1.0);
    let mu = 1.0 - eta;
    let d = tree.depth();
    // r[k] for k in 0..=d+2; r[k] = 0 for k > d
    let mut r = vec![0.0; d + 3];
    for k in (1..=d).rev() {
        let inner = eta * (eta + mu * r[k + 2]).powi(tree.get(k + 1) as i32);
        r[k] = one_minus_pow_complement(inner, tree.get(k));
    }
    let (r1, r2) = (r[1], r[2]);
    let head = pow_difference(eta + mu * r1, mu * r1, tree.get(0));
    (head * (eta + mu * r2).powi(tree.get(1) as i32)).clamp(0.0, 1.0)
}

/// Specialized two-level evaluator; numerically identical to [`encoded_transmission`].
#[inline]
pub(crate) fn encoded_transmission_2(eta: f64, b0: u32, b1: u32, b2: u32) -> f64 {
    let mu = 1.0 - eta;
    // R_3 = 0, R_4 = 0
    let (r1, r2) = if b1 == 0 {
        (0.0, 0.0)
    } else if b2 == 0 {
        (one_minus_pow_complement(eta, b1), 0.0)
    } else {
        let r2 = one_minus_pow_complement(eta, b2);
        let r1 = one_minus_pow_complement(eta * eta.powi(b2 as i32), b1);
        (r1, r2)
    };
    let head = pow_difference(eta + mu * r1, mu * r1, b0);
    (head * (eta + mu * r2).powi(b1 as i32)).clamp(0.0, 1.0)
}

/// Probability `eta_e^(m+1)` that a message crosses all `m + 1` segments.
pub fn message_transmission(eta_e: f64, m: u32) -> f64 {
    eta_e.powi(m as i32 + 1)
}

/// Single-photon transmission over one segment of length `l0_km`.
pub fn link_efficiency(eta_emitter: f64, eta_det: f64, l0_km: f64, l_att_km: f64) -> f64 {
    eta_det * eta_emitter * (-l0_km / l_att_km).exp()
}

/// Binary entropy in bits, continuously extended to `g(0) = g(1) = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// Secret-bit fraction of the six-state protocol after `m` re-encoding stations.
///
/// The transmission error is approximated as `(1 + m) eps_r` and the qubit error
/// rate is `Q = 2 eps_trans / 3`.
pub fn secret_fraction(eps_r: f64, m: u32) -> Result<f64> {
    if !(eps_r >= 0.0) {
        return Err(Error::Domain(format!("eps_r must be >= 0, got {eps_r}")));
    }
    let q = 2.0 * (1.0 + m as f64) * eps_r / 3.0;
    if q >= 1.0 {
        return Err(Error::Domain(format!("qubit error rate {q} >= 1")));
    }
    let inner = (1.0 - 1.5 * q) / (1.0 - q);
    if !(0.0..=1.0).contains(&inner) {
        return Err(Error::Domain(format!(
            "entropy argument {inner} outside [0, 1] (Q = {q})"
        )));
    }
    Ok(1.0 - binary_entropy(q) - q - (1.0 - q) * binary_entropy(inner))
}

/// `1 / Gamma_tcs` [s] for a tree of depth at most two.
pub fn tcs_period(tree: &TreeVector, tau_ph: f64, tau_cz: f64) -> Result<f64> {
    if tree.depth() > 2 {
        return Err(Error::Depth(tree.depth()));
    }
    Ok(tcs_period_2(tree.get(0), tree.get(1), tree.get(2), tau_ph, tau_cz))
}

#[inline]
pub(crate) fn tcs_period_2(b0: u32, b1: u32, b2: u32, tau_ph: f64, tau_cz: f64) -> f64 {
    let (b0, inner) = (b0 as f64, b1 as f64 * (1.0 + b2 as f64));
    b0 * (100.0 + inner) * tau_ph + b0 * (3.0 + inner) * tau_cz
}

/// Tree cluster state generation rate `Gamma_tcs` [1/s].
pub fn tcs_rate(tree: &TreeVector, tau_ph: f64, tau_cz: f64) -> Result<f64> {
    Ok(1.0 / tcs_period(tree, tau_ph, tau_cz)?)
}

/// Factors of the emitter-to-fiber efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyChain {
    pub beta_c: f64,
    pub beta_wg: f64,
    pub beta_f: f64,
    pub dw: f64,
}

impl EfficiencyChain {
    pub fn new(beta_c: f64, beta_wg: f64, beta_f: f64, dw: f64) -> Result<Self> {
        for (field, v) in [("beta_c", beta_c), ("beta_wg", beta_wg), ("beta_f", beta_f), ("dw", dw)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(field, format!("must be in [0, 1], got {v}")));
            }
        }
        Ok(EfficiencyChain {
            beta_c,
            beta_wg,
            beta_f,
            dw,
        })
    }

    /// Chain for `emitter` in a cavity with the given Purcell context.
    pub fn for_emitter(emitter: &EmitterSpec, purcell: PurcellContext, beta_wg: f64, beta_f: f64) -> Result<Self> {
        let f_p = purcell.effective();
        EfficiencyChain::new(beta_c(f_p), beta_wg, beta_f, emitter.dw_purcell(f_p))
    }

    /// `eta_emitter = beta_C beta_WG DW beta_F`.
    pub fn emitter_efficiency(&self) -> f64 {
        self.beta_c * self.beta_wg * self.dw * self.beta_f
    }
}

/// Protocol constants of a repeater line. Times in seconds, distances in km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RepeaterScenario {
    /// Total distance `L`.
    pub l_km: f64,
    /// Fiber attenuation length `L_att`.
    pub l_att_km: f64,
    /// Photon emission time `tau_ph`.
    pub tau_ph_s: f64,
    /// Controlled-Z gate time `tau_CZ`.
    pub tau_cz_s: f64,
    /// Re-encoding error probability per station.
    pub eps_r: f64,
    /// Detector efficiency.
    pub eta_det: f64,
    /// Minimal station spacing `L_min`.
    pub l_min_km: f64,
    /// Maximal number of photons in the tree.
    pub n_ph_max: u64,
}

impl Default for RepeaterScenario {
    fn default() -> Self {
        RepeaterScenario {
            l_km: 1000.0,
            l_att_km: 20.0,
            tau_ph_s: 10e-9,
            tau_cz_s: 100e-9,
            eps_r: 1e-4,
            eta_det: 0.995,
            l_min_km: 1.0,
            n_ph_max: 1000,
        }
    }
}

impl RepeaterScenario {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, bool, &str); 8] = [
            ("l_km", self.l_km > 0.0 && self.l_km.is_finite(), "must be > 0"),
            (
                "l_att_km",
                self.l_att_km > 0.0 && self.l_att_km.is_finite(),
                "must be > 0",
            ),
            (
                "tau_ph_s",
                self.tau_ph_s > 0.0 && self.tau_ph_s.is_finite(),
                "must be > 0",
            ),
            (
                "tau_cz_s",
                self.tau_cz_s >= 0.0 && self.tau_cz_s.is_finite(),
                "must be >= 0",
            ),
            ("eps_r", (0.0..1.0).contains(&self.eps_r), "must be in [0, 1)"),
            (
                "eta_det",
                self.eta_det > 0.0 && self.eta_det <= 1.0,
                "must be in (0, 1]",
            ),
            (
                "l_min_km",
                self.l_min_km > 0.0 && self.l_min_km.is_finite(),
                "must be > 0",
            ),
            ("n_ph_max", self.n_ph_max >= 1, "must be >= 1"),
        ];
        for (field, ok, reason) in checks {
            if !ok {
                return Err(Error::invalid(field, reason));
            }
        }
        Ok(())
    }

    /// Segment length `L / (m + 1)`.
    pub fn spacing(&self, m: u32) -> f64 {
        self.l_km / (m as f64 + 1.0)
    }

    /// Whether `m` stations respect the minimal spacing.
    pub fn admits(&self, m: u32) -> bool {
        m >= 1 && self.spacing(m) >= self.l_min_km * (1.0 - 1e-12)
    }

    /// Largest station count respecting the minimal spacing.
    pub fn max_stations(&self) -> u32 {
        let mut m = ((self.l_km / self.l_min_km).floor() as u32).saturating_sub(1);
        while m > 0 && !self.admits(m) {
            m -= 1;
        }
        while self.admits(m + 1) {
            m += 1;
        }
        m
    }
}

/// Cost of one configuration with every intermediate quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub l0_km: f64,
    pub eta: f64,
    pub eta_e: f64,
    pub p_trans: f64,
    pub f: f64,
    pub gamma_tcs: f64,
    pub cost: f64,
}

/// Cost of sending over `m` stations with the given tree and emitter efficiency.
///
/// A nonpositive secret fraction yields `cost = +inf`.
pub fn cost(scn: &RepeaterScenario, tree: &TreeVector, m: u32, eta_emitter: f64) -> Result<CostBreakdown> {
    if !scn.admits(m) {
        return Err(Error::invalid(
            "m",
            format!(
                "{m} stations violate the minimal spacing of {} km over {} km",
                scn.l_min_km, scn.l_km
            ),
        ));
    }
    if !(0.0..=1.0).contains(&eta_emitter) {
        return Err(Error::invalid("eta_emitter", "must be in [0, 1]"));
    }
    let period = tcs_period(tree, scn.tau_ph_s, scn.tau_cz_s)?;
    let f = secret_fraction(scn.eps_r, m)?;
    let l0_km = scn.spacing(m);
    let eta = link_efficiency(eta_emitter, scn.eta_det, l0_km, scn.l_att_km);
    let eta_e = encoded_transmission_2(eta, tree.get(0), tree.get(1), tree.get(2));
    let p_trans = message_transmission(eta_e, m);
    Ok(CostBreakdown {
        l0_km,
        eta,
        eta_e,
        p_trans,
        f,
        gamma_tcs: 1.0 / period,
        cost: assemble_cost(scn, period, f, p_trans, m),
    })
}

#[inline]
pub(crate) fn assemble_cost(scn: &RepeaterScenario, period: f64, f: f64, p_trans: f64, m: u32) -> f64 {
    if !(f > 0.0) || !(p_trans > 0.0) {
        return f64::INFINITY;
    }
    period / (f * p_trans) * (m as f64 * scn.l_att_km) / (scn.tau_ph_s * scn.l_km)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn t(b: &[u32]) -> TreeVector {
        TreeVector::new(b.to_vec()).unwrap()
    }

    #[test]
    fn tree_validation() {
        assert!(TreeVector::new(vec![]).is_err());
        assert!(TreeVector::new(vec![0, 2]).is_err());
        assert!(TreeVector::new(vec![3, 0, 2]).is_err());
        assert_eq!(t(&[4, 14, 0]), t(&[4, 14]));
        assert_eq!(t(&[1, 0, 0]).depth(), 0);
        assert_eq!(t(&[4, 14, 4]).to_string(), "[4,14,4]");
    }

    #[test]
    fn photon_counts() {
        assert_eq!(t(&[1, 0]).photon_count(), 1);
        assert_eq!(t(&[2, 2, 2]).photon_count(), 14);
        assert_eq!(t(&[4, 14, 4]).photon_count(), 284);
    }

    #[test]
    fn transmission_limits() {
        for b in [&[1u32][..], &[4, 14, 4], &[7, 3], &[2, 2, 2, 2]] {
            assert_eq!(encoded_transmission(1.0, &t(b)), 1.0);
            assert_eq!(encoded_transmission(0.0, &t(b)), 0.0);
        }
    }

    #[test]
    fn single_photon_tree_is_bare() {
        for eta in [0.1, 0.5, 0.9, 0.999] {
            assert_eq!(encoded_transmission(eta, &t(&[1, 0])), eta);
        }
    }

    #[test]
    fn transmission_frozen_value() {
        // exact rational evaluation of the recursion, 25 digits
        assert_relative_eq!(
            encoded_transmission(0.95, &t(&[4, 14, 4])),
            0.999_989_374_852_414_7,
            max_relative = 1e-14
        );
    }

    #[test]
    fn specialized_evaluator_agrees() {
        for &(b0, b1, b2) in &[(1, 0, 0), (4, 14, 4), (5, 28, 6), (3, 2, 0), (1000, 0, 0)] {
            for eta in [0.0, 0.3, 0.7, 0.95, 1.0] {
                let general = encoded_transmission(eta, &TreeVector::two_level(b0, b1, b2).unwrap());
                assert_eq!(encoded_transmission_2(eta, b0, b1, b2), general, "{b0} {b1} {b2} {eta}");
            }
        }
    }

    #[test]
    fn message_transmission_values() {
        assert_eq!(message_transmission(1.0, 17), 1.0);
        assert_relative_eq!(
            message_transmission(0.99, 9),
            0.904_382_075_008_804_5,
            max_relative = 1e-14
        );
        assert_eq!(message_transmission(0.7, 0), 0.7);
    }

    #[test]
    fn link_efficiency_values() {
        assert_eq!(link_efficiency(0.886, 1.0, 0.0, 20.0), 0.886);
        assert_relative_eq!(
            link_efficiency(1.0, 1.0, 20.0, 20.0),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            link_efficiency(0.886, 0.995, 1.0, 20.0),
            0.838_575_323_757_094_4,
            max_relative = 1e-14
        );
    }

    #[test]
    fn emitter_efficiency_values() {
        let chain = EfficiencyChain::new(0.9789, 0.929, 0.994, 0.980).unwrap();
        assert!((chain.emitter_efficiency() - 0.886).abs() < 3e-3);
        assert_eq!(
            EfficiencyChain::new(1.0, 1.0, 1.0, 1.0).unwrap().emitter_efficiency(),
            1.0
        );
        assert!(EfficiencyChain::new(1.1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn ideal_snv_chain() {
        let snv = crate::emitter::preset("SnV").unwrap();
        let ctx = PurcellContext::new(270.2, 0.0).unwrap();
        let chain = EfficiencyChain::for_emitter(&snv, ctx, 0.987, 0.994).unwrap();
        assert!((chain.beta_c - 0.9963).abs() < 1e-4);
        assert!((chain.emitter_efficiency() - 0.974).abs() < 3e-3);
    }

    #[test]
    fn secret_fraction_values() {
        for m in [0, 1, 10, 999] {
            assert_eq!(secret_fraction(0.0, m).unwrap(), 1.0);
        }
        // 50-digit evaluation of the entropy expression
        assert_relative_eq!(
            secret_fraction(1e-4, 9).unwrap(),
            0.987_007_279_761_817_7,
            max_relative = 1e-13
        );
        assert!(secret_fraction(0.5, 2).is_err());
        assert!(secret_fraction(-1e-3, 2).is_err());
    }

    #[test]
    fn secret_fraction_root() {
        // bisection to 50 digits of f(eps, 0) = 0
        let root = 0.189_289_624_915_231_77;
        assert!(secret_fraction(root * (1.0 - 1e-9), 0).unwrap() > 0.0);
        assert!(secret_fraction(root * (1.0 + 1e-9), 0).unwrap() < 0.0);
    }

    #[test]
    fn tcs_rate_values() {
        assert_relative_eq!(
            tcs_rate(&t(&[1, 1, 1]), 10e-9, 100e-9).unwrap(),
            657_894.736_842_105_3,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            tcs_period(&t(&[1, 0, 0]), 10e-9, 100e-9).unwrap(),
            100.0 * 10e-9 + 3.0 * 100e-9,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            tcs_period(&t(&[4, 14, 4]), 10e-9, 100e-9).unwrap(),
            680.0 * 10e-9 + 292.0 * 100e-9,
            max_relative = 1e-15
        );
        assert!(matches!(tcs_rate(&t(&[2, 2, 2, 2]), 1e-8, 1e-7), Err(Error::Depth(3))));
    }

    #[test]
    fn tcs_rate_decreases_with_branches() {
        let base = tcs_rate(&t(&[3, 4, 5]), 1e-8, 1e-7).unwrap();
        assert!(tcs_rate(&t(&[4, 4, 5]), 1e-8, 1e-7).unwrap() < base);
        assert!(tcs_rate(&t(&[3, 5, 5]), 1e-8, 1e-7).unwrap() < base);
        assert!(tcs_rate(&t(&[3, 4, 6]), 1e-8, 1e-7).unwrap() < base);
    }

    #[test]
    fn cost_frozen_values() {
        let scn = RepeaterScenario::default();
        // 50-digit end-to-end evaluation of the cost formula
        let c = cost(&scn, &t(&[4, 14, 4]), 499, 0.886).unwrap();
        assert_relative_eq!(c.eta, 0.797_677_522_617_960_9, max_relative = 1e-13);
        assert_relative_eq!(c.eta_e, 0.990_203_642_553_830_2, max_relative = 1e-13);
        assert_relative_eq!(c.p_trans, 0.007_282_152_927_349_726, max_relative = 1e-11);
        assert_relative_eq!(c.f, 0.634_354_917_847_986, max_relative = 1e-12);
        assert_relative_eq!(c.cost, 7_777_516.407_242_896, max_relative = 1e-11);
        let c = cost(&scn, &t(&[5, 28, 6]), 622, 0.886).unwrap();
        assert_relative_eq!(c.cost, 452_611.257_154_077_8, max_relative = 1e-11);
    }

    #[test]
    fn cost_smallest_tree_is_finite() {
        let scn = RepeaterScenario {
            eps_r: 0.0,
            ..Default::default()
        };
        let c = cost(&scn, &t(&[1, 0, 0]), 1, 1.0).unwrap();
        assert!(c.cost.is_finite() && c.cost > 0.0);
        assert_relative_eq!(c.cost, 1.361_605_451_814_488_4e22, max_relative = 1e-11);
    }

    #[test]
    fn cost_infeasible_cases() {
        let scn = RepeaterScenario {
            eps_r: 1e-3,
            ..Default::default()
        };
        // f < 0 at (1 + m) eps_r ~ 0.3
        let c = cost(&scn, &t(&[4, 14, 4]), 299, 0.95).unwrap();
        assert!(c.f < 0.0);
        assert_eq!(c.cost, f64::INFINITY);
        assert!(cost(&scn, &t(&[4, 14, 4]), 1000, 0.95).is_err());
        assert!(cost(&scn, &t(&[4, 14, 4]), 0, 0.95).is_err());
        let scn = RepeaterScenario {
            eps_r: 0.01,
            ..Default::default()
        };
        assert!(matches!(cost(&scn, &t(&[4, 14, 4]), 999, 0.95), Err(Error::Domain(_))));
    }

    #[test]
    fn station_bounds() {
        let scn = RepeaterScenario::default();
        assert_eq!(scn.max_stations(), 999);
        assert!(scn.admits(999));
        assert!(!scn.admits(1000));
        let scn = RepeaterScenario {
            l_km: 100.0,
            l_min_km: 3.0,
            ..Default::default()
        };
        assert_eq!(scn.max_stations(), 32);
    }

    #[test]
    fn scenario_json() {
        let scn = RepeaterScenario::default();
        let s = serde_json::to_string(&scn).unwrap();
        let back: RepeaterScenario = serde_json::from_str(&s).unwrap();
        assert_eq!(back, scn);
        assert!(RepeaterScenario { eta_det: 0.0, ..scn }.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn transmission_in_unit_interval_and_monotone(b0 in 1u32..30, b1 in 0u32..30, b2 in 0u32..10, eta in 0.0f64..1.0, d in 1e-4f64..0.1) {
                let b2 = if b1 == 0 { 0 } else { b2 };
                let tree = TreeVector::two_level(b0, b1, b2).unwrap();
                let lo = encoded_transmission(eta, &tree);
                let hi = encoded_transmission((eta + d).min(1.0), &tree);
                prop_assert!((0.0..=1.0).contains(&lo));
                prop_assert!(hi >= lo * (1.0 - 1e-12));
            }

            #[test]
            fn secret_fraction_decreasing(m in 0u32..1000, e in 1e-7f64..1e-3, de in 1e-8f64..1e-4) {
                let a = secret_fraction(e, m);
                let b = secret_fraction(e + de, m);
                if let (Ok(a), Ok(b)) = (a, b) {
                    if a > 0.0 {
                        prop_assert!(b < a);
                    }
                }
            }
        }
    }
}
