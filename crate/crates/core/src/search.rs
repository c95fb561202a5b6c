//! Exhaustive minimization of the repeater cost over two-level trees and
//! station counts.
//!
//! Every tree with at most `n_ph_max` photons is paired with every admissible
//! station count. Pruning is exact: a coarse pass seeds an incumbent, then
//! blocks of station counts are skipped when a lower bound on their cost
//! already exceeds it (see `StationTable::scan_pruned`). Ties are broken by
//! photon count, then station count, then the branching vector.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use rayon::prelude::*;
use serde::Serialize;

use crate::emitter::{self, EmitterSpec};
use crate::error::{Error, Result};
use crate::repeater::{
    assemble_cost, cost, encoded_transmission_2, link_efficiency, message_transmission, secret_fraction, tcs_period_2,
    CostBreakdown, RepeaterScenario, TreeVector,
};

/// Enumeration switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchOptions {
    /// Include trees `[b0]` (no second level).
    pub allow_zero_b1: bool,
    /// Include trees `[b0, b1]` (no third level).
    pub allow_zero_b2: bool,
    /// Skip station counts whose cost lower bound exceeds the incumbent.
    pub prune: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            allow_zero_b1: true,
            allow_zero_b2: true,
            prune: true,
        }
    }
}

/// Optimal configuration for one emitter efficiency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub eta_emitter: f64,
    pub c_min: f64,
    pub best_tree: TreeVector,
    pub best_m: u32,
    pub n_ph: u64,
    /// Generation rate with the scenario's `tau_ph` and `tau_cz` [1/s].
    pub gamma_tcs: f64,
    pub f: f64,
    pub p_trans: f64,
    pub breakdown: CostBreakdown,
}

/// All two-level trees with at most `n_ph_max` photons, in lexicographic order.
pub fn enumerate_trees(n_ph_max: u64, opts: &SearchOptions) -> Vec<[u32; 3]> {
    let mut trees = Vec::new();
    let n_max = n_ph_max as u128;
    let mut b0 = 1u128;
    while b0 <= n_max {
        if opts.allow_zero_b1 {
            trees.push([b0 as u32, 0, 0]);
        }
        let mut b1 = 1u128;
        while b0 * (1 + b1) <= n_max {
            if opts.allow_zero_b2 {
                trees.push([b0 as u32, b1 as u32, 0]);
            }
            let mut b2 = 1u128;
            while b0 * (1 + b1 * (1 + b2)) <= n_max {
                trees.push([b0 as u32, b1 as u32, b2 as u32]);
                b2 += 1;
            }
            b1 += 1;
        }
        b0 += 1;
    }
    trees
}

#[inline]
fn photons(b: &[u32; 3]) -> u64 {
    let (b0, b1, b2) = (b[0] as u64, b[1] as u64, b[2] as u64);
    b0 * (1 + b1 * (1 + b2))
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    n_ph: u64,
    m: u32,
    tree: [u32; 3],
}

impl Candidate {
    fn key_cmp(&self, other: &Candidate) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.n_ph.cmp(&other.n_ph))
            .then(self.m.cmp(&other.m))
            .then(self.tree.cmp(&other.tree))
    }
}

fn better(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.key_cmp(&x) == Ordering::Less { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

struct StationTable {
    m: Vec<u32>,
    eta: Vec<f64>,
    f: Vec<f64>,
    /// `m L_att / (f tau_ph L)`, nondecreasing in `m`.
    scale: Vec<f64>,
    /// Single-photon transmission as the spacing goes to zero.
    eta_limit: f64,
}

const TREE_CHUNK: usize = 64;
const SEED_STRIDE: usize = 16;
const BLOCK: usize = 16;

impl StationTable {
    fn new(scn: &RepeaterScenario, eta_emitter: f64) -> Self {
        let mut table = StationTable {
            m: Vec::new(),
            eta: Vec::new(),
            f: Vec::new(),
            scale: Vec::new(),
            eta_limit: scn.eta_det * eta_emitter,
        };
        for m in 1..=scn.max_stations() {
            // f decreases with m: once nonpositive or out of domain it stays so
            let f = match secret_fraction(scn.eps_r, m) {
                Ok(f) if f > 0.0 => f,
                _ => break,
            };
            table.m.push(m);
            table
                .eta
                .push(link_efficiency(eta_emitter, scn.eta_det, scn.spacing(m), scn.l_att_km));
            table.f.push(f);
            table
                .scale
                .push(m as f64 * scn.l_att_km / (f * scn.tau_ph_s * scn.l_km));
        }
        table
    }

    #[inline]
    fn evaluate(&self, scn: &RepeaterScenario, tree: &[u32; 3], i: usize) -> Option<Candidate> {
        let period = tcs_period_2(tree[0], tree[1], tree[2], scn.tau_ph_s, scn.tau_cz_s);
        let m = self.m[i];
        let eta_e = encoded_transmission_2(self.eta[i], tree[0], tree[1], tree[2]);
        let c = assemble_cost(scn, period, self.f[i], message_transmission(eta_e, m), m);
        c.is_finite().then(|| Candidate {
            cost: c,
            n_ph: photons(tree),
            m,
            tree: *tree,
        })
    }

    /// Best station count for one tree, skipping blocks whose cost lower bound
    /// exceeds the incumbent.
    ///
    /// Within a block `[lo, hi]`, `eta` grows with `m`, so
    /// `p_trans(m) <= eta_e(eta_hi)^(m_lo + 1)` and
    /// `C(m) >= period scale_lo / eta_e(eta_hi)^(m_lo + 1)`. The bound with
    /// `eta_e` at zero spacing is nondecreasing in `m` and ends the scan.
    fn scan_pruned(&self, scn: &RepeaterScenario, tree: &[u32; 3], incumbent: &AtomicU64) -> Option<Candidate> {
        let period = tcs_period_2(tree[0], tree[1], tree[2], scn.tau_ph_s, scn.tau_cz_s);
        let eta_e_max = encoded_transmission_2(self.eta_limit, tree[0], tree[1], tree[2]);
        // the margin absorbs rounding differences between the bound and `assemble_cost`
        let best_cost = || f64::from_bits(incumbent.load(AtomicOrdering::Relaxed)) * (1.0 + 1e-12);
        let mut local = None;
        let n = self.m.len();
        let mut lo = 0;
        while lo < n {
            let hi = (lo + BLOCK - 1).min(n - 1);
            let m_lo = self.m[lo];
            let tail_bound = period * self.scale[lo] / message_transmission(eta_e_max, m_lo);
            if tail_bound > best_cost() {
                break;
            }
            let eta_e_hi = encoded_transmission_2(self.eta[hi], tree[0], tree[1], tree[2]);
            let block_bound = period * self.scale[lo] / message_transmission(eta_e_hi, m_lo);
            if !(block_bound > best_cost()) {
                for i in lo..=hi {
                    local = better(local, self.evaluate(scn, tree, i));
                }
            }
            lo = hi + 1;
        }
        local
    }
}

/// Global minimum of the cost over the enumerated grid.
pub fn minimize_cost(scn: &RepeaterScenario, eta_emitter: f64, opts: &SearchOptions) -> Result<SearchResult> {
    let trees = enumerate_trees(scn.n_ph_max, opts);
    minimize_over(scn, eta_emitter, opts, &trees)
}

fn minimize_over(
    scn: &RepeaterScenario,
    eta_emitter: f64,
    opts: &SearchOptions,
    trees: &[[u32; 3]],
) -> Result<SearchResult> {
    scn.validate()?;
    if !(eta_emitter > 0.0 && eta_emitter <= 1.0) {
        return Err(Error::invalid(
            "eta_emitter",
            format!("must be in (0, 1], got {eta_emitter}"),
        ));
    }
    let table = StationTable::new(scn, eta_emitter);
    let incumbent = AtomicU64::new(f64::INFINITY.to_bits());
    if opts.prune {
        // a coarse pass over every SEED_STRIDE-th station count seeds the incumbent
        let seed = trees
            .par_chunks(TREE_CHUNK)
            .map(|chunk| {
                let mut local: Option<Candidate> = None;
                for tree in chunk {
                    for i in (SEED_STRIDE - 1..table.m.len()).step_by(SEED_STRIDE) {
                        local = better(local, table.evaluate(scn, tree, i));
                    }
                }
                local
            })
            .reduce(|| None, better);
        if let Some(c) = seed {
            incumbent.store(c.cost.to_bits(), AtomicOrdering::Relaxed);
        }
    }

    let best = trees
        .par_chunks(TREE_CHUNK)
        .map(|chunk| {
            let mut local: Option<Candidate> = None;
            for tree in chunk {
                let found = if opts.prune {
                    table.scan_pruned(scn, tree, &incumbent)
                } else {
                    (0..table.m.len()).fold(None, |acc, i| better(acc, table.evaluate(scn, tree, i)))
                };
                if let Some(c) = found {
                    // positive floats order like their bit patterns
                    incumbent.fetch_min(c.cost.to_bits(), AtomicOrdering::Relaxed);
                }
                local = better(local, found);
            }
            local
        })
        .reduce(|| None, better)
        .ok_or(Error::EmptyFeasibleSet)?;

    let tree = TreeVector::two_level(best.tree[0], best.tree[1], best.tree[2])?;
    let breakdown = cost(scn, &tree, best.m, eta_emitter)?;
    Ok(SearchResult {
        eta_emitter,
        c_min: breakdown.cost,
        n_ph: tree.photon_count(),
        best_tree: tree,
        best_m: best.m,
        gamma_tcs: breakdown.gamma_tcs,
        f: breakdown.f,
        p_trans: breakdown.p_trans,
        breakdown,
    })
}

/// Maps an emitter-to-fiber efficiency to a Purcell factor by piecewise-linear
/// interpolation between calibration points; constant beyond the end points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurcellCalibration {
    pub emitter: EmitterSpec,
    /// `(eta_emitter, f_p)` pairs sorted by efficiency.
    pub anchors: Vec<(f64, f64)>,
}

impl PurcellCalibration {
    pub fn new(emitter: EmitterSpec, mut anchors: Vec<(f64, f64)>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::invalid("anchors", "at least one calibration point required"));
        }
        if anchors.iter().any(|&(e, f)| !(e.is_finite() && f >= 0.0)) {
            return Err(Error::invalid(
                "anchors",
                "efficiencies must be finite, Purcell factors >= 0",
            ));
        }
        anchors.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(PurcellCalibration { emitter, anchors })
    }

    /// SnV with the realistic (88.6 %, F_P = 46.4) and ideal (97.4 %, F_P = 270.2) cavities.
    pub fn snv_default() -> Self {
        let snv = emitter::preset("SnV").expect("SnV preset exists");
        PurcellCalibration::new(snv, vec![(0.886, emitter::F_P_REAL), (0.974, emitter::F_P_IDEAL)])
            .expect("valid anchors")
    }

    pub fn purcell_factor(&self, eta: f64) -> f64 {
        let a = &self.anchors;
        if eta <= a[0].0 {
            return a[0].1;
        }
        if eta >= a[a.len() - 1].0 {
            return a[a.len() - 1].1;
        }
        let i = a.partition_point(|p| p.0 <= eta);
        let (lo, hi) = (a[i - 1], a[i]);
        lo.1 + (eta - lo.0) / (hi.0 - lo.0) * (hi.1 - lo.1)
    }

    /// Purcell-enhanced emission time [s] at efficiency `eta`.
    pub fn tau_ph(&self, eta: f64) -> f64 {
        self.emitter.purcell_lifetime(self.purcell_factor(eta))
    }
}

/// How the photon emission time depends on the emitter efficiency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EmissionTime {
    /// The scenario's `tau_ph` everywhere.
    Fixed,
    /// Purcell-enhanced lifetime; `tau_cz / tau_ph` is kept at the scenario ratio.
    PurcellEnhanced(PurcellCalibration),
}

impl EmissionTime {
    /// `(tau_ph, tau_cz)` [s] at efficiency `eta`.
    pub fn times(&self, scn: &RepeaterScenario, eta: f64) -> (f64, f64) {
        match self {
            EmissionTime::Fixed => (scn.tau_ph_s, scn.tau_cz_s),
            EmissionTime::PurcellEnhanced(cal) => {
                let tau = cal.tau_ph(eta);
                (tau, tau * scn.tau_cz_s / scn.tau_ph_s)
            }
        }
    }
}

/// One grid point of an efficiency sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eta_emitter: f64,
    pub tau_ph_s: f64,
    /// Generation rate under the sweep's emission-time model [1/s].
    pub gamma_tcs_hz: f64,
    pub result: std::result::Result<SearchResult, Error>,
}

/// CSV header of an efficiency sweep.
pub const SWEEP_COLUMNS: [&str; 11] = [
    "b0",
    "b1",
    "b2",
    "m",
    "N_ph",
    "eta",
    "eta_e",
    "p_trans",
    "f",
    "gamma_tcs_hz",
    "cost",
];

impl SweepRow {
    /// Fields in [`SWEEP_COLUMNS`] order. Failed points leave every field but `eta` empty.
    pub fn record(&self) -> [String; 11] {
        let eta = format!("{}", self.eta_emitter);
        match &self.result {
            Ok(r) => {
                let t = &r.best_tree;
                [
                    t.get(0).to_string(),
                    t.get(1).to_string(),
                    t.get(2).to_string(),
                    r.best_m.to_string(),
                    r.n_ph.to_string(),
                    eta,
                    format!("{}", r.breakdown.eta_e),
                    format!("{}", r.p_trans),
                    format!("{}", r.f),
                    format!("{}", self.gamma_tcs_hz),
                    format!("{}", r.c_min),
                ]
            }
            Err(_) => {
                let mut rec: [String; 11] = Default::default();
                rec[5] = eta;
                rec
            }
        }
    }
}

/// Minimizes the cost at every grid efficiency; failures are kept per row.
///
/// The cost does not depend on the absolute emission time when
/// `tau_cz / tau_ph` is fixed, so the optimum is found once per point and only
/// the reported generation rate follows `emission`.
pub fn sweep_efficiency(
    scn: &RepeaterScenario,
    eta_grid: &[f64],
    opts: &SearchOptions,
    emission: &EmissionTime,
) -> Vec<SweepRow> {
    let trees = enumerate_trees(scn.n_ph_max, opts);
    eta_grid
        .iter()
        .map(|&eta| {
            let (tau_ph, tau_cz) = emission.times(scn, eta);
            let result = minimize_over(scn, eta, opts, &trees);
            let gamma_tcs_hz = match &result {
                Ok(r) => {
                    let t = &r.best_tree;
                    1.0 / tcs_period_2(t.get(0), t.get(1), t.get(2), tau_ph, tau_cz)
                }
                Err(_) => f64::NAN,
            };
            SweepRow {
                eta_emitter: eta,
                tau_ph_s: tau_ph,
                gamma_tcs_hz,
                result,
            }
        })
        .collect()
}

/// `steps` evenly spaced points from `from` to `to` inclusive.
pub fn linear_grid(from: f64, to: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![from],
        n => (0..n).map(|i| from + (to - from) * i as f64 / (n - 1) as f64).collect(),
    }
}
