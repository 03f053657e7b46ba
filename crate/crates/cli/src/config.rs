//! Experiment configuration: a TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use shlab::error::{Error, Result};
use shlab::stats::{Thresholds, DEFAULT_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Classgroup,
    Embeddings,
    ShCycles,
    Duke,
    Atr,
    Stats,
}

#[derive(Debug, Parser)]
#[command(name = "shlab", about = "Stark-Heegner and ATR cycle experiments")]
pub struct Cli {
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Fundamental discriminant d_K.
    #[arg(long)]
    pub dk: Option<i64>,
    /// Conductor f.
    #[arg(long)]
    pub f: Option<i64>,
    /// Inert prime p.
    #[arg(long)]
    pub p: Option<u64>,
    #[arg(long)]
    pub disc_min: Option<i128>,
    #[arg(long)]
    pub disc_max: Option<i128>,
    /// Arc-length step between samples.
    #[arg(long)]
    pub step: Option<f64>,
    /// p-adic precision N in digits.
    #[arg(long)]
    pub precision: Option<u32>,
    /// Samples per cycle for sh-cycles (default: ⌈L/step⌉).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Boxes as "x1,x2,y1,y2;..." with `inf` allowed for y2.
    #[arg(long, allow_hyphen_values = true)]
    pub boxes: Option<String>,
    /// Base field D_F for atr mode.
    #[arg(long)]
    pub base: Option<i64>,
    /// δ as "m+n*sqrtD" for atr mode.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Every experiment parameter. Identical configurations give byte-identical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub dk: Option<i64>,
    pub f: i64,
    pub p: Option<u64>,
    pub disc_min: Option<i128>,
    pub disc_max: Option<i128>,
    pub step: f64,
    pub precision: u32,
    pub samples: Option<usize>,
    pub boxes: Option<String>,
    pub base: Option<i64>,
    pub delta: Option<String>,
    pub out: PathBuf,
    pub thresholds: Thresholds,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: None,
            dk: None,
            f: 1,
            p: None,
            disc_min: None,
            disc_max: None,
            step: DEFAULT_STEP,
            precision: 30,
            samples: None,
            boxes: None,
            base: None,
            delta: None,
            out: PathBuf::from("."),
            thresholds: Thresholds::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }

    /// The config file (if any) with flags applied on top.
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let mut c = match &cli.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        macro_rules! overlay {
            ($($field:ident),*) => { $( if cli.$field.is_some() { c.$field = cli.$field; } )* };
        }
        overlay!(mode, dk, p, disc_min, disc_max, samples, boxes, base, delta);
        if let Some(f) = cli.f {
            c.f = f;
        }
        if let Some(s) = cli.step {
            c.step = s;
        }
        if let Some(n) = cli.precision {
            c.precision = n;
        }
        if let Some(o) = cli.out {
            c.out = o;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode.is_none() {
            return Err(Error::InvalidInput("no mode given".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "step {} must be positive",
                self.step
            )));
        }
        if self.f < 1 {
            return Err(Error::InvalidInput(format!(
                "conductor {} must be positive",
                self.f
            )));
        }
        if self.precision < 4 {
            return Err(Error::InvalidInput(format!(
                "precision {} is too small",
                self.precision
            )));
        }
        if self.samples == Some(0) {
            return Err(Error::InvalidInput("samples must be at least 1".into()));
        }
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        self.mode.expect("validated")
    }

    pub fn require_dk(&self) -> Result<i64> {
        self.dk
            .ok_or_else(|| Error::InvalidInput("--dk is required for this mode".into()))
    }

    pub fn require_p(&self) -> Result<u64> {
        self.p
            .ok_or_else(|| Error::InvalidInput("--p is required for this mode".into()))
    }

    pub fn require_range(&self) -> Result<(i128, i128)> {
        match (self.disc_min, self.disc_max) {
            (Some(lo), Some(hi)) if lo <= hi => Ok((lo, hi)),
            (Some(lo), Some(hi)) => Err(Error::InvalidInput(format!("empty range [{lo}, {hi}]"))),
            _ => Err(Error::InvalidInput(
                "--disc-min and --disc-max are required for this mode".into(),
            )),
        }
    }
}
