//! Study configuration files: TOML tables laid over a named preset.

use std::fs;
use std::path::Path;

use delaybt_core::bench::{ExampleConfig, ExampleKind, SignalForm};
use toml::{Table, Value};

use crate::error::FileError;

/// Recursively overwrites `base` with every key present in `over`.
fn overlay(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => overlay(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Parses `text` as a partial configuration on top of `preset`.
pub fn parse_config(text: &str, preset: &ExampleConfig, path: &Path) -> Result<ExampleConfig, FileError> {
    let bad = |msg: String| FileError::Config {
        path: path.to_path_buf(),
        msg,
    };
    let over: Table = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
    let mut base = Table::try_from(preset).map_err(|e| bad(e.to_string()))?;
    // tagged signal forms are replaced whole so stale fields of another form do not leak in
    for key in ["u_form", "v_form", "initial", "example"] {
        if over.contains_key(key) {
            base.remove(key);
        }
    }
    overlay(&mut base, over);
    let mut cfg: ExampleConfig = Value::Table(base).try_into().map_err(|e: toml::de::Error| bad(e.to_string()))?;
    if let ExampleKind::FromFile(file) = &cfg.example {
        let p = Path::new(file);
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.example = ExampleKind::FromFile(dir.join(p).to_string_lossy().into_owned());
            }
        }
    }
    Ok(cfg)
}

/// Loads a configuration file over the preset called `name`.
pub fn load_config(path: &Path, name: &str) -> Result<ExampleConfig, FileError> {
    let preset = preset(name).ok_or_else(|| FileError::Config {
        path: path.to_path_buf(),
        msg: format!("unknown preset {:?}", name),
    })?;
    let text = fs::read_to_string(path).map_err(FileError::io(path))?;
    parse_config(&text, &preset, path)
}

pub fn preset(name: &str) -> Option<ExampleConfig> {
    ExampleConfig::preset(name)
}

/// Parses the command-line signal syntax `zero`, `const:<c>` or `sin:<freq>`.
pub fn parse_signal_form(s: &str) -> Result<SignalForm, String> {
    let s = s.trim();
    if s == "zero" {
        return Ok(SignalForm::Zero);
    }
    let (form, arg) = s
        .split_once(':')
        .ok_or_else(|| format!("expected zero, const:<c> or sin:<freq>, got {:?}", s))?;
    let value: f64 = arg.trim().parse().map_err(|e| format!("bad number {:?}: {}", arg, e))?;
    if !value.is_finite() {
        return Err(format!("{:?} is not finite", arg));
    }
    match form.trim() {
        "const" => Ok(SignalForm::Constant { value }),
        "sin" => Ok(SignalForm::Sine { freq: value }),
        other => Err(format!("unknown signal form {:?}", other)),
    }
}
