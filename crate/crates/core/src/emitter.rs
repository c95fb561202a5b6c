//! Photophysics of diamond color centers under Purcell enhancement.
//!
//! An emitter decays from its excited state with total rate `1/tau0`. A fraction
//! `dw0` (the bulk Debye-Waller factor) goes into the zero-phonon line, the rest
//! into the phonon sideband. Of the ZPL rate, the fraction `xi` belongs to the
//! single transition the cavity is tuned to; only that transition is enhanced,
//! `gamma31 -> gamma31 (1 + F_P)`.
//!
//! With `xi = 1` the model reduces to the NV form `DW = DW0 (1 + F) / (1 + DW0 F)`.
//!
//! Physical constants are CODATA 2018 exact or recommended values:
//!
//! | constant | value |
//! |----------|-------|
//! | vacuum permittivity `EPSILON_0` | 8.8541878128e-12 F/m |
//! | reduced Planck constant `HBAR` | 1.054571817e-34 J s |
//! | speed of light `C` | 299 792 458 m/s (exact) |
//! | Debye unit `DEBYE` | 3.33564e-30 C m |

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Vacuum permittivity [F/m], CODATA 2018.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Reduced Planck constant [J s], CODATA 2018.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum [m/s], exact.
pub const C: f64 = 299_792_458.0;
/// One Debye [C m].
pub const DEBYE: f64 = 3.335_64e-30;

/// Purcell factor of the idealized Sawfish-type cavity used for the preset table.
pub const F_P_IDEAL: f64 = 270.2;
/// Purcell factor for state-of-the-art scattering losses.
pub const F_P_REAL: f64 = 46.4;

/// Photophysical parameters of one color center. Stored in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EmitterRecord", into = "EmitterRecord")]
pub struct EmitterSpec {
    pub name: String,
    /// Bulk excited-state lifetime [s].
    pub tau0: f64,
    /// Bulk Debye-Waller factor, in (0, 1).
    pub dw0: f64,
    /// Fraction of the ZPL rate carried by the cavity-coupled transition, in (0, 1].
    pub xi: f64,
    /// ZPL optical frequency [Hz].
    pub zpl_frequency: f64,
}

/// JSON form of [`EmitterSpec`]: `{name, tau0_ns, dw0, xi, zpl_thz}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterRecord {
    pub name: String,
    pub tau0_ns: f64,
    pub dw0: f64,
    pub xi: f64,
    pub zpl_thz: f64,
}

impl TryFrom<EmitterRecord> for EmitterSpec {
    type Error = Error;

    fn try_from(r: EmitterRecord) -> Result<Self> {
        EmitterSpec::new(r.name, r.tau0_ns * 1e-9, r.dw0, r.xi, r.zpl_thz * 1e12)
    }
}

impl From<EmitterSpec> for EmitterRecord {
    fn from(s: EmitterSpec) -> Self {
        EmitterRecord {
            name: s.name,
            tau0_ns: s.tau0 * 1e9,
            dw0: s.dw0,
            xi: s.xi,
            zpl_thz: s.zpl_frequency * 1e-12,
        }
    }
}

/// Bulk decay rates [1/s].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRates {
    pub gamma_zpl: f64,
    pub gamma_psb: f64,
    pub gamma31: f64,
}

impl EmitterSpec {
    pub fn new(name: impl Into<String>, tau0: f64, dw0: f64, xi: f64, zpl_frequency: f64) -> Result<Self> {
        if !(tau0 > 0.0 && tau0.is_finite()) {
            return Err(Error::invalid("tau0", format!("must be > 0, got {tau0}")));
        }
        if !(dw0 > 0.0 && dw0 < 1.0) {
            return Err(Error::invalid("dw0", format!("must be in (0, 1), got {dw0}")));
        }
        if !(xi > 0.0 && xi <= 1.0) {
            return Err(Error::invalid("xi", format!("must be in (0, 1], got {xi}")));
        }
        if !(zpl_frequency > 0.0 && zpl_frequency.is_finite()) {
            return Err(Error::invalid(
                "zpl_frequency",
                format!("must be > 0, got {zpl_frequency}"),
            ));
        }
        Ok(EmitterSpec {
            name: name.into(),
            tau0,
            dw0,
            xi,
            zpl_frequency,
        })
    }

    /// Bulk ZPL, PSB and cavity-transition rates.
    pub fn decay_rates(&self) -> DecayRates {
        let total = 1.0 / self.tau0;
        let gamma_zpl = self.dw0 / self.tau0;
        let gamma_psb = total - gamma_zpl;
        DecayRates {
            gamma_zpl,
            gamma_psb,
            gamma31: self.xi * gamma_zpl,
        }
    }

    /// Debye-Waller factor with the cavity transition enhanced by `f_p`.
    pub fn dw_purcell(&self, f_p: f64) -> f64 {
        let r = self.decay_rates();
        let enhanced = r.gamma31 * f_p * (1.0 - self.dw0);
        (enhanced + self.dw0 * r.gamma_psb) / (enhanced + r.gamma_psb)
    }

    /// Excited-state lifetime [s] with the cavity transition enhanced by `f_p`.
    pub fn purcell_lifetime(&self, f_p: f64) -> f64 {
        let r = self.decay_rates();
        1.0 / (1.0 / self.tau0 + r.gamma31 * f_p)
    }

    /// Same emitter with a different branching fraction.
    pub fn with_xi(&self, xi: f64) -> Result<Self> {
        EmitterSpec::new(self.name.clone(), self.tau0, self.dw0, xi, self.zpl_frequency)
    }
}

/// Branching fraction `xi` for which `dw_purcell(f_p) == dw_target`.
pub fn calibrate_branching(dw0: f64, f_p: f64, dw_target: f64) -> Result<f64> {
    if !(dw0 > 0.0 && dw0 < 1.0) {
        return Err(Error::invalid("dw0", format!("must be in (0, 1), got {dw0}")));
    }
    if !(f_p > 0.0) {
        return Err(Error::invalid("f_p", format!("must be > 0, got {f_p}")));
    }
    if !(dw_target > dw0 && dw_target < 1.0) {
        return Err(Error::InfeasibleTarget(format!(
            "target Debye-Waller factor {dw_target} must lie strictly between dw0 = {dw0} and 1"
        )));
    }
    Ok((dw_target - dw0) / (dw0 * f_p * (1.0 - dw_target)))
}

/// Spontaneous emission rate `omega^3 n |mu|^2 / (3 pi eps0 hbar c^3)` [1/s].
///
/// `omega` is an angular frequency [rad/s], `mu` the transition dipole moment [C m].
pub fn radiative_rate(omega: f64, n: f64, mu: f64) -> f64 {
    omega.powi(3) * n * mu * mu / (3.0 * PI * EPSILON_0 * HBAR * C.powi(3))
}

/// Purcell factor of a dipole rotated by `alpha` [rad] away from the cavity field.
pub fn orientation_scaled_purcell(f_p_ideal: f64, alpha: f64) -> f64 {
    let c = alpha.cos();
    f_p_ideal * c * c
}

/// Probability of emission into the cavity mode, `F_P / (F_P + 1)`.
pub fn beta_c(f_p: f64) -> f64 {
    f_p / (f_p + 1.0)
}

/// A Purcell factor together with the dipole misalignment angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurcellContext {
    pub f_p: f64,
    /// Dipole rotation away from the ideal orientation [rad].
    pub alpha: f64,
}

impl PurcellContext {
    pub fn new(f_p: f64, alpha: f64) -> Result<Self> {
        if !(f_p >= 0.0 && f_p.is_finite()) {
            return Err(Error::invalid("f_p", format!("must be >= 0, got {f_p}")));
        }
        Ok(PurcellContext { f_p, alpha })
    }

    /// Purcell factor seen by the misaligned dipole.
    pub fn effective(&self) -> f64 {
        orientation_scaled_purcell(self.f_p, self.alpha)
    }
}

/// Where a preset's branching fraction was calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationAnchor {
    pub f_p: f64,
    pub dw_target: f64,
}

/// Built-in emitter with the reference table it was calibrated against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preset {
    pub spec: EmitterSpec,
    pub anchor: CalibrationAnchor,
    pub reference: ReferenceRow,
}

/// Published lifetimes [ns] and Debye-Waller factors at `F_P_IDEAL` / `F_P_REAL`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub tau_ideal_ns: f64,
    pub tau_real_ns: f64,
    pub dw_ideal: f64,
    pub dw_real: f64,
    pub eta_ideal: f64,
    pub eta_real: f64,
}

struct PresetRow {
    name: &'static str,
    tau0_ns: f64,
    dw0: f64,
    zpl_thz: f64,
    reference: ReferenceRow,
}

const PRESET_ROWS: [PresetRow; 4] = [
    PresetRow {
        name: "NV",
        tau0_ns: 12.2,
        dw0: 0.03,
        zpl_thz: 470.4,
        reference: ReferenceRow {
            tau_ideal_ns: 1.3,
            tau_real_ns: 5.1,
            dw_ideal: 0.893,
            dw_real: 0.594,
            eta_ideal: 0.874,
            eta_real: 0.538,
        },
    },
    PresetRow {
        name: "SiV",
        tau0_ns: 1.7,
        dw0: 0.80,
        zpl_thz: 406.7,
        reference: ReferenceRow {
            tau_ideal_ns: 0.01,
            tau_real_ns: 0.07,
            dw_ideal: 0.999,
            dw_real: 0.992,
            eta_ideal: 0.976,
            eta_real: 0.897,
        },
    },
    PresetRow {
        name: "GeV",
        tau0_ns: 3.8,
        dw0: 0.60,
        zpl_thz: 497.0,
        reference: ReferenceRow {
            tau_ideal_ns: 0.03,
            tau_real_ns: 0.19,
            dw_ideal: 0.996,
            dw_real: 0.980,
            eta_ideal: 0.974,
            eta_real: 0.886,
        },
    },
    PresetRow {
        name: "SnV",
        tau0_ns: 4.5,
        dw0: 0.60,
        zpl_thz: 484.3,
        reference: ReferenceRow {
            tau_ideal_ns: 0.04,
            tau_real_ns: 0.23,
            dw_ideal: 0.996,
            dw_real: 0.980,
            eta_ideal: 0.974,
            eta_real: 0.886,
        },
    },
];

/// Built-in NV, SiV, GeV and SnV presets.
///
/// `xi` is calibrated so that the realistic-cavity Debye-Waller factor
/// (`F_P_REAL`) matches the reference row exactly; the ideal-cavity values then
/// follow from the model.
pub fn presets() -> Vec<Preset> {
    PRESET_ROWS
        .iter()
        .map(|row| {
            let anchor = CalibrationAnchor {
                f_p: F_P_REAL,
                dw_target: row.reference.dw_real,
            };
            let xi = calibrate_branching(row.dw0, anchor.f_p, anchor.dw_target).expect("preset rows are feasible");
            let spec = EmitterSpec::new(row.name, row.tau0_ns * 1e-9, row.dw0, xi, row.zpl_thz * 1e12)
                .expect("preset rows are valid");
            Preset {
                spec,
                anchor,
                reference: row.reference,
            }
        })
        .collect()
}

/// Looks up a built-in preset by name (case-insensitive).
pub fn preset(name: &str) -> Result<EmitterSpec> {
    presets()
        .into_iter()
        .find(|p| p.spec.name.eq_ignore_ascii_case(name))
        .map(|p| p.spec)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

/// Parses a JSON array of emitter records, validating each entry.
pub fn load_emitters(json: &str) -> Result<Vec<EmitterSpec>> {
    serde_json::from_str(json).map_err(|e| Error::Serialization(e.to_string()))
}
