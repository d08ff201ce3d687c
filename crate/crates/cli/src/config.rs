//! Run configuration: command-line flags, the equivalent JSON file, and
//! validation into typed inputs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anderson_corr::covariant::{CovariantPolynomial, ObservableSpec};
use anderson_corr::expansion::{BoundMode, ExpansionConfig};
use anderson_corr::walks::MAX_DIM;
use anderson_corr::{AnalyticDensity, Complex64, SignVector};
use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

pub const THREADS_ENV: &str = "ANDERSON_CORR_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    /// Density of states over an energy grid.
    Dos,
    /// Off-axis N-point function at the points given by `--z`.
    Green,
    /// Current-current boundary values over an (E₁, E₂) grid.
    Corr2,
    /// Series against a finite-box Monte Carlo oracle.
    Validate,
    /// Property and identity checks of the integral and walk machinery.
    #[default]
    Identities,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// `start:stop:count`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| if k + 1 == self.count { self.stop } else { self.start + step * k as f64 })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts[..] else {
            bail!("expected start:stop:count, got {s:?}");
        };
        let start: f64 = start.trim().parse().with_context(|| format!("bad grid start {start:?}"))?;
        let stop: f64 = stop.trim().parse().with_context(|| format!("bad grid stop {stop:?}"))?;
        let count: usize = count.trim().parse().with_context(|| format!("bad grid count {count:?}"))?;
        if !start.is_finite() || !stop.is_finite() {
            bail!("grid endpoints must be finite");
        }
        if count == 0 {
            bail!("grid count must be positive");
        }
        if count == 1 && start != stop {
            bail!("a one-point grid needs start == stop");
        }
        Ok(Grid { start, stop, count })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

impl TryFrom<String> for Grid {
    type Error = anyhow::Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Grid> for String {
    fn from(g: Grid) -> String {
        g.to_string()
    }
}

/// A complex point written as `0.3+0.4i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Point(pub Complex64);

impl FromStr for Point {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let z: Complex64 = s.trim().parse().map_err(|_| anyhow::anyhow!("expected a complex number like 0.3+0.4i, got {s:?}"))?;
        if !(z.re.is_finite() && z.im.is_finite()) {
            bail!("complex point {s:?} is not finite");
        }
        Ok(Point(z))
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<String> for Point {
    type Error = anyhow::Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Point> for String {
    fn from(p: Point) -> String {
        p.to_string()
    }
}

/// Everything a run needs; the JSON file form mirrors the flags field by field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    pub density: String,
    pub d: usize,
    pub lambda: f64,
    /// One spec per point; empty means the command's default.
    pub observables: Vec<String>,
    pub grid: Option<Grid>,
    pub grid2: Option<Grid>,
    pub z: Vec<Point>,
    pub sigma: Option<String>,
    /// Truncation order n_max.
    pub order: usize,
    pub gap: Option<f64>,
    pub delta: Option<f64>,
    #[serde(rename = "box")]
    pub box_l: usize,
    /// Distance of the energies from the real axis in grid sweeps.
    pub eps: f64,
    pub samples: usize,
    pub seed: u64,
    pub margin: Option<usize>,
    pub mode: BoundMode,
    pub threads: Option<usize>,
    pub deterministic: bool,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: CommandKind::Identities,
            density: "gaussian:sigma2=1,r=1".into(),
            d: 1,
            lambda: 0.05,
            observables: Vec::new(),
            grid: None,
            grid2: None,
            z: Vec::new(),
            sigma: None,
            order: 8,
            gap: None,
            delta: None,
            box_l: 20,
            eps: 0.4,
            samples: 2000,
            seed: 0x5eed,
            margin: None,
            mode: BoundMode::Exploratory,
            threads: None,
            deterministic: false,
            output: None,
            format: Format::Json,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "anderson-corr", version, about = "Random-walk expansion of Anderson-model correlation functions")]
pub struct Cli {
    /// Command to run; may instead come from the config file.
    #[arg(value_enum)]
    pub command: Option<CommandKind>,

    /// JSON run configuration; flags given alongside override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    pub emit_config: bool,

    /// Density spec, e.g. gaussian:sigma2=1,r=1 or cauchy:a=1,r=0.5.
    #[arg(long)]
    pub density: Option<String>,

    #[arg(long)]
    pub d: Option<usize>,

    /// Hopping strength λ.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,

    /// Observable per point (repeat the flag): identity | velocity:nu=0 | monomial:u0=(1,0),coef@(0,0)=rational1.
    #[arg(long = "observable")]
    pub observables: Vec<String>,

    /// Energy grid start:stop:count (inclusive).
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,

    /// Second energy grid for corr2; defaults to --grid.
    #[arg(long, allow_hyphen_values = true)]
    pub grid2: Option<Grid>,

    /// Complex points, e.g. 0.3+0.4i (repeat or comma-separate).
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    pub z: Vec<Point>,

    /// Half-plane pattern such as +- for boundary values.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<String>,

    /// Truncation order n_max.
    #[arg(long)]
    pub order: Option<usize>,

    /// Minimum energy gap Δ.
    #[arg(long)]
    pub gap: Option<f64>,

    /// Analyticity parameter δ of the tail bound.
    #[arg(long)]
    pub delta: Option<f64>,

    /// Half-width L of the oracle box.
    #[arg(long = "box")]
    pub box_l: Option<usize>,

    /// Distance from the real axis for grid sweeps.
    #[arg(long)]
    pub eps: Option<f64>,

    #[arg(long)]
    pub samples: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Required distance from the origin to the box boundary (default n_max).
    #[arg(long)]
    pub margin: Option<usize>,

    /// Fail instead of reporting an infinite tail outside the certified regime.
    #[arg(long)]
    pub certified: bool,

    /// Worker threads; falls back to ANDERSON_CORR_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,

    /// Bit-stable reductions in the Monte Carlo oracle.
    #[arg(long)]
    pub deterministic: bool,

    #[arg(long, short)]
    pub output: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| anyhow::anyhow!("{e}"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is serialisable")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Defaults, then the config file, then explicit flags.
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut cfg = match &cli.config {
            Some(path) => Self::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(c) = cli.command {
            cfg.command = c;
        } else if cli.config.is_none() {
            bail!("no command given (dos | green | corr2 | validate | identities)");
        }
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = &cli.$field {
                    cfg.$field = v.clone().into();
                }
            )*};
        }
        take!(density, d, lambda, order, box_l, eps, samples, seed, format);
        macro_rules! take_opt {
            ($($field:ident),*) => {$(
                if cli.$field.is_some() {
                    cfg.$field = cli.$field.clone();
                }
            )*};
        }
        take_opt!(grid, grid2, sigma, gap, delta, margin, threads, output);
        if !cli.observables.is_empty() {
            cfg.observables = cli.observables.clone();
        }
        if !cli.z.is_empty() {
            cfg.z = cli.z.clone();
        }
        if cli.certified {
            cfg.mode = BoundMode::Certified;
        }
        if cli.deterministic {
            cfg.deterministic = true;
        }
        Ok(cfg)
    }

    /// `--threads`, then the config file, then the environment.
    pub fn thread_count(&self) -> Result<Option<usize>> {
        if let Some(n) = self.threads {
            return Ok(Some(n));
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map(Some)
                .with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count")),
            Err(_) => Ok(None),
        }
    }

    /// Checks every field against what the chosen command needs.
    pub fn resolve(&self) -> Result<Resolved> {
        let density: AnalyticDensity = self.density.parse().with_context(|| "field `density`")?;
        if self.d == 0 || self.d > MAX_DIM {
            bail!("field `d`: dimension must be in 1..={MAX_DIM}, got {}", self.d);
        }
        if !self.lambda.is_finite() {
            bail!("field `lambda`: must be finite");
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            bail!("field `eps`: must be positive");
        }
        if self.threads == Some(0) {
            bail!("field `threads`: must be positive");
        }
        for (name, v) in [("gap", self.gap), ("delta", self.delta)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    bail!("field `{name}`: must be positive");
                }
            }
        }
        let margin = self.margin.unwrap_or(self.order);
        let points = match self.command {
            CommandKind::Corr2 => 2,
            CommandKind::Green | CommandKind::Validate if self.grid.is_none() => self.z.len().max(1),
            _ => 1,
        };
        let default_obs = match self.command {
            CommandKind::Corr2 => "velocity:nu=0",
            _ => "identity",
        };
        let specs: Vec<String> = if self.observables.is_empty() {
            vec![default_obs.to_string(); points]
        } else {
            self.observables.clone()
        };
        if specs.len() != points {
            bail!("field `observables`: {} given for a {points}-point function", specs.len());
        }
        let observables = specs
            .iter()
            .map(|s| {
                s.parse::<ObservableSpec>()
                    .and_then(|o| o.to_polynomial(self.d, self.lambda))
                    .with_context(|| format!("field `observables`: {s:?}"))
            })
            .collect::<Result<Vec<CovariantPolynomial>>>()?;
        let sigma = match &self.sigma {
            Some(s) => Some(s.parse::<SignVector>().with_context(|| "field `sigma`")?),
            None => None,
        };
        let mut expansion = ExpansionConfig::new(self.d, self.lambda, self.order, density.clone(), observables.clone());
        expansion.gap = self.gap;
        expansion.delta = self.delta;
        expansion.mode = self.mode;

        match self.command {
            CommandKind::Dos => {
                if !self.z.is_empty() {
                    bail!("field `z`: dos sweeps real energies; use `grid`");
                }
            }
            CommandKind::Green | CommandKind::Validate => {
                if self.grid.is_some() && !self.z.is_empty() {
                    bail!("field `z`: give either `z` or `grid`, not both");
                }
                if self.z.iter().any(|p| p.0.im == 0.0) {
                    bail!("field `z`: points must be off the real axis");
                }
                if self.command == CommandKind::Validate && self.z.len() > 2 {
                    bail!("field `z`: the oracle handles at most two points, got {}", self.z.len());
                }
            }
            CommandKind::Corr2 => {
                let sigma = sigma.clone().unwrap_or_else(|| "+-".parse().expect("valid"));
                if sigma.0.len() != 2 {
                    bail!("field `sigma`: corr2 needs two signs, got {sigma}");
                }
            }
            CommandKind::Identities => {}
        }
        if self.command == CommandKind::Validate {
            if self.samples < 2 {
                bail!("field `samples`: at least 2 needed");
            }
            if self.box_l < margin {
                bail!("field `box`: half-width {} is below the margin {margin}", self.box_l);
            }
        }
        if self.command != CommandKind::Identities {
            expansion.validate().with_context(|| "invalid expansion parameters")?;
        }
        Ok(Resolved { density, observables, sigma, expansion, margin })
    }
}

/// Typed inputs derived from a validated [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub density: AnalyticDensity,
    pub observables: Vec<CovariantPolynomial>,
    pub sigma: Option<SignVector>,
    pub expansion: ExpansionConfig,
    pub margin: usize,
}
