//! `key=value` settings shared by every command.
//!
//! One assignment per line; blank lines and lines starting with `#` are
//! skipped. Keys mirror the model and synthesis configuration fields, and
//! `--set key=value` flags are applied after the file.

use std::path::Path;

use heartstate::model::ModelConfig;
use heartstate::synth::SynthConfig;

use crate::CliError;

pub const MODEL_KEYS: &[&str] = &[
    "input_h",
    "input_w",
    "in_channels",
    "d_model",
    "n_state",
    "n_blocks",
    "kernel_size",
    "conv_stride",
    "activation",
    "fps",
    "oscillator",
    "alpha_tn",
    "seed",
];

pub const SYNTH_KEYS: &[&str] = &[
    "h",
    "w",
    "channels",
    "duration_s",
    "hr_bpm",
    "pulse_amp",
    "trend_slope",
    "noise_sigma",
    "skin_fraction",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pairs: Vec<(String, String)>,
}

fn valid_keys() -> String {
    MODEL_KEYS
        .iter()
        .chain(SYNTH_KEYS)
        .copied()
        .collect::<Vec<_>>()
        .join(", ")
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut s = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            s.assign(line)
                .map_err(|e| CliError::Usage(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(s)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut s = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                Self::parse(&text)?
            }
            None => Self::default(),
        };
        for o in overrides {
            s.assign(o).map_err(|e| CliError::Usage(format!("--set {o}: {e}")))?;
        }
        Ok(s)
    }

    fn assign(&mut self, line: &str) -> Result<(), String> {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, found {line:?}"))?;
        let (k, v) = (k.trim(), v.trim());
        if !MODEL_KEYS.contains(&k) && !SYNTH_KEYS.contains(&k) {
            return Err(format!("unknown key {k:?}; valid keys: {}", valid_keys()));
        }
        self.pairs.retain(|(old, _)| old != k);
        self.pairs.push((k.to_string(), v.to_string()));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::Usage(format!("invalid value {v:?} for {key}")))
            })
            .transpose()
    }

    /// Overwrites the fields of `cfg` named in these settings.
    pub fn apply_model(&self, cfg: &mut ModelConfig) -> Result<(), CliError> {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.parsed(stringify!($field))? { cfg.$field = v; })*
            };
        }
        set!(input_h, input_w, in_channels, d_model, n_state, n_blocks, kernel_size, conv_stride, fps, oscillator, alpha_tn, seed);
        if let Some(v) = self.get("activation") {
            cfg.activation = v.parse().map_err(CliError::Usage)?;
        }
        Ok(())
    }

    pub fn apply_synth(&self, cfg: &mut SynthConfig) -> Result<(), CliError> {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.parsed(stringify!($field))? { cfg.$field = v; })*
            };
        }
        set!(h, w, channels, duration_s, hr_bpm, pulse_amp, trend_slope, noise_sigma, skin_fraction, fps, seed);
        Ok(())
    }
}
