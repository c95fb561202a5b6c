//! Scenario files: emitter, efficiency chain, repeater line and sweep grid.

use std::path::Path;

use repeater_core::emitter::{self, EmitterRecord, EmitterSpec, PurcellContext};
use repeater_core::repeater::{EfficiencyChain, RepeaterScenario};
use repeater_core::search::{linear_grid, EmissionTime, PurcellCalibration};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Waveguide coupling of the realistic cavity.
pub const BETA_WG_REAL: f64 = 0.929;
/// Waveguide coupling of the ideal cavity.
pub const BETA_WG_IDEAL: f64 = 0.987;
/// Waveguide-to-fiber coupling.
pub const BETA_F: f64 = 0.994;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub emitter: EmitterChoice,
    pub chain: ChainInputs,
    pub repeater: RepeaterScenario,
    pub sweep: Option<SweepGrid>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile {
            emitter: EmitterChoice::Preset("SnV".into()),
            chain: ChainInputs::default(),
            repeater: RepeaterScenario::default(),
            sweep: None,
        }
    }
}

/// A preset name or an inline emitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EmitterChoice {
    Preset(String),
    Inline(EmitterRecord),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainInputs {
    pub f_p: f64,
    pub beta_wg: f64,
    pub beta_f: f64,
    /// Dipole misalignment.
    pub alpha_rad: f64,
}

impl Default for ChainInputs {
    fn default() -> Self {
        ChainInputs {
            f_p: emitter::F_P_REAL,
            beta_wg: BETA_WG_REAL,
            beta_f: BETA_F,
            alpha_rad: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub eta_from: f64,
    pub eta_to: f64,
    pub steps: usize,
    pub emission: Emission,
    /// `[eta_emitter, f_p]` pairs for the Purcell-enhanced emission time.
    pub purcell_anchors: Vec<(f64, f64)>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            eta_from: 0.85,
            eta_to: 0.99,
            steps: 29,
            emission: Emission::PurcellEnhanced,
            purcell_anchors: vec![(0.886, emitter::F_P_REAL), (0.974, emitter::F_P_IDEAL)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emission {
    Fixed,
    PurcellEnhanced,
}

impl SweepGrid {
    pub fn grid(&self) -> Vec<f64> {
        linear_grid(self.eta_from, self.eta_to, self.steps)
    }

    pub fn emission_time(&self, emitter: &EmitterSpec) -> Result<EmissionTime, CliError> {
        Ok(match self.emission {
            Emission::Fixed => EmissionTime::Fixed,
            Emission::PurcellEnhanced => {
                EmissionTime::PurcellEnhanced(PurcellCalibration::new(emitter.clone(), self.purcell_anchors.clone())?)
            }
        })
    }
}

/// Scenario with its emitter resolved against the active presets.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub file: ScenarioFile,
    pub emitter: EmitterSpec,
}

impl Resolved {
    pub fn chain(&self) -> Result<EfficiencyChain, CliError> {
        let c = &self.file.chain;
        let ctx = PurcellContext::new(c.f_p, c.alpha_rad)?;
        Ok(EfficiencyChain::for_emitter(&self.emitter, ctx, c.beta_wg, c.beta_f)?)
    }

    pub fn sweep(&self) -> SweepGrid {
        self.file.sweep.clone().unwrap_or_default()
    }
}

impl ScenarioFile {
    pub fn parse(text: &str, origin: &str) -> Result<ScenarioFile, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| CliError::Parse {
            origin: origin.to_string(),
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        file.repeater.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<ScenarioFile, CliError> {
        ScenarioFile::parse(&crate::io::read(path)?, &path.display().to_string())
    }

    pub fn resolve(self, presets: &[EmitterSpec]) -> Result<Resolved, CliError> {
        let emitter = match &self.emitter {
            EmitterChoice::Preset(name) => find_preset(presets, name)?,
            EmitterChoice::Inline(rec) => EmitterSpec::try_from(rec.clone())?,
        };
        Ok(Resolved { file: self, emitter })
    }
}

pub fn find_preset(presets: &[EmitterSpec], name: &str) -> Result<EmitterSpec, CliError> {
    presets
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
        .cloned()
        .ok_or_else(|| repeater_core::Error::UnknownPreset(name.to_string()).into())
}

/// Built-in presets, replaced or extended by name from an emitter file.
pub fn active_presets(overrides: Option<&Path>) -> Result<Vec<EmitterSpec>, CliError> {
    let mut out: Vec<EmitterSpec> = emitter::presets().into_iter().map(|p| p.spec).collect();
    if let Some(path) = overrides {
        let text = crate::io::read(path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let extra: Vec<EmitterSpec> = serde_path_to_error::deserialize(de).map_err(|e| CliError::Parse {
            origin: path.display().to_string(),
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        for spec in extra {
            match out.iter_mut().find(|p| p.name.eq_ignore_ascii_case(&spec.name)) {
                Some(slot) => *slot = spec,
                None => out.push(spec),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(ScenarioFile::parse("{}", "t").unwrap(), ScenarioFile::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = ScenarioFile::parse(r#"{"repeater": {"l_km": 500, "speed": 1}}"#, "t").unwrap_err();
        match err {
            CliError::Parse { path, .. } => assert_eq!(path, "repeater.speed"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_fail_on_load() {
        assert!(ScenarioFile::parse(r#"{"repeater": {"eta_det": 1.5}}"#, "t").is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let text = r#"{
            "emitter": {"name": "X", "tau0_ns": 3.0, "dw0": 0.5, "xi": 0.9, "zpl_thz": 400.0},
            "chain": {"f_p": 10.0},
            "repeater": {"l_km": 800.0, "eps_r": 1e-3},
            "sweep": {"steps": 5, "emission": "fixed"}
        }"#;
        let a = ScenarioFile::parse(text, "t").unwrap();
        let json = |s: &ScenarioFile| serde_json::to_string_pretty(s).unwrap();
        let b = ScenarioFile::parse(&json(&a), "t").unwrap();
        assert_eq!(a, b);
        assert_eq!(json(&a), json(&b));
    }

    #[test]
    fn preset_names_resolve() {
        let presets = active_presets(None).unwrap();
        let r = ScenarioFile::default().resolve(&presets).unwrap();
        assert_eq!(r.emitter.name, "SnV");
        let eta = r.chain().unwrap().emitter_efficiency();
        assert!((eta - 0.886).abs() < 0.003, "{eta}");
        let bad = ScenarioFile {
            emitter: EmitterChoice::Preset("XeV".into()),
            ..ScenarioFile::default()
        };
        assert!(bad.resolve(&presets).is_err());
    }
}
