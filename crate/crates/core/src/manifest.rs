//! Experiment manifests: one JSON object that fully determines a run.

use crate::config::PathSystem;
use crate::conventions::conventions;
use crate::error::{Error, Result};
use crate::flows::{FlowSpec, RadialProfile};
use crate::forms::FormIndex;
use crate::gg::{BaseInvariant, EstimateOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Braid,
    Estimate,
    ClosedForm,
    Embed,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Braid => "braid",
            Command::Estimate => "estimate",
            Command::ClosedForm => "closed-form",
            Command::Embed => "embed",
            Command::Verify => "verify",
        }
    }
}

/// What `estimate` averages over configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    SBar,
    SRaw,
    Signature,
    Lk,
    WordNorm,
    FormAction,
}

impl Invariant {
    pub fn base(self) -> Option<BaseInvariant> {
        match self {
            Invariant::SBar => Some(BaseInvariant::SBar),
            Invariant::SRaw => Some(BaseInvariant::SRaw),
            Invariant::Signature => Some(BaseInvariant::Signature),
            Invariant::Lk => Some(BaseInvariant::Lk),
            Invariant::WordNorm | Invariant::FormAction => None,
        }
    }
}

/// Command-specific knobs; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub power: u32,
    pub cancel_offset: bool,
    pub path_system: PathSystem,
    pub dt: Option<f64>,
    /// Direction constant for verified projections.
    pub c: f64,
    pub form: Option<FormIndex>,
    /// Profiles tabulated by `closed-form`; the flow's profile when empty.
    pub profiles: Vec<RadialProfile>,
    /// Point counts for `closed-form`; `[n]` when empty.
    pub ns: Vec<usize>,
    pub d: usize,
    pub p_values: Vec<f64>,
    pub t_steps: usize,
    /// Explicit planar loop for `braid`, as `[re, im]` per strand per sample.
    pub planar_loop: Option<Vec<Vec<[f64; 2]>>>,
    pub theta: Option<f64>,
    pub quick: bool,
    pub criteria: Vec<u32>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            power: 1,
            cancel_offset: false,
            path_system: PathSystem::Geodesic,
            dt: None,
            c: 4.0,
            form: None,
            profiles: Vec::new(),
            ns: Vec::new(),
            d: 2,
            p_values: vec![1.0, 1.5, 2.0, 3.0],
            t_steps: 40,
            planar_loop: None,
            theta: None,
            quick: false,
            criteria: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub command: Command,
    #[serde(default)]
    pub flow: Option<FlowSpec>,
    #[serde(default)]
    pub invariant: Option<Invariant>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub options: RunOptions,
}

fn default_n() -> usize {
    4
}

fn default_samples() -> usize {
    conventions().default_samples
}

impl ExperimentManifest {
    pub fn new(command: Command) -> Self {
        ExperimentManifest {
            command,
            flow: None,
            invariant: None,
            n: default_n(),
            samples: default_samples(),
            seed: 0,
            output: None,
            options: RunOptions::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let m: ExperimentManifest = serde_json::from_str(&text)?;
        Ok(m)
    }

    /// The flow, or `ω̃(u) = u` for unit time when none is given.
    pub fn flow_or_default(&self) -> FlowSpec {
        self.flow.clone().unwrap_or_else(|| FlowSpec::rotational(RadialProfile::height(), 1.0))
    }

    pub fn estimate_options(&self, workers: usize) -> EstimateOptions {
        EstimateOptions {
            path_system: self.options.path_system,
            dt: self.options.dt,
            power: self.options.power,
            cancel_offset: self.options.cancel_offset,
            workers,
            basepoint_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(f) = &self.flow {
            f.validate()?;
        }
        if self.options.power == 0 {
            return Err(Error::Invalid("power must be at least 1".into()));
        }
        if matches!(self.command, Command::Estimate | Command::Simulate | Command::Embed) && self.samples == 0 {
            return Err(Error::Invalid("samples must be positive".into()));
        }
        for p in &self.options.profiles {
            p.validate()?;
        }
        Ok(())
    }

    /// Hex SHA-256 of everything that affects the results (the output path
    /// does not).
    pub fn cache_key(&self) -> String {
        let mut m = self.clone();
        m.output = None;
        let bytes = serde_json::to_vec(&m).expect("manifest serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_manifest_fills_defaults() {
        let m: ExperimentManifest = serde_json::from_str(r#"{"command": "closed-form"}"#).unwrap();
        assert_eq!(m.command, Command::ClosedForm);
        assert_eq!(m.n, 4);
        assert_eq!(m.options.power, 1);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentManifest>(r#"{"command": "braid", "sampels": 3}"#).is_err());
    }

    #[test]
    fn output_path_does_not_change_the_key() {
        let mut a = ExperimentManifest::new(Command::Estimate);
        let k = a.cache_key();
        a.output = Some("x.jsonl".into());
        assert_eq!(a.cache_key(), k);
        a.seed = 1;
        assert_ne!(a.cache_key(), k);
    }
}
