//! Run configuration: a TOML file, overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use tradecraft_agents::{Desk, HttpConfig, PipelineConfig, TierConfig};
use tradecraft_core::strategies::Baseline;
use tradecraft_core::{BacktestConfig, MarketDataStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Scripted,
    Http,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyBlock {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentsBlock {
    pub backend: BackendKind,
    pub fixture: Option<PathBuf>,
    pub research_rounds: u32,
    pub risk_rounds: u32,
    pub max_steps: u32,
    pub temperature: f64,
    pub concurrent_analysts: bool,
    pub prompt_dir: Option<PathBuf>,
    pub models: TierConfig,
    pub http: HttpConfig,
}

impl Default for AgentsBlock {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            backend: BackendKind::Scripted,
            fixture: None,
            research_rounds: p.research_rounds,
            risk_rounds: p.risk_rounds,
            max_steps: p.max_steps,
            temperature: p.temperature,
            concurrent_analysts: p.concurrent_analysts,
            prompt_dir: None,
            models: p.tiers,
            http: HttpConfig::default(),
        }
    }
}

impl AgentsBlock {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            research_rounds: self.research_rounds,
            risk_rounds: self.risk_rounds,
            max_steps: self.max_steps,
            temperature: self.temperature,
            concurrent_analysts: self.concurrent_analysts,
            tiers: self.models.clone(),
        }
    }
}

/// The on-disk config document.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub tickers: Option<Vec<String>>,
    #[serde(default, deserialize_with = "toml_date")]
    pub from: Option<NaiveDate>,
    #[serde(default, deserialize_with = "toml_date")]
    pub to: Option<NaiveDate>,
    pub data: Option<Vec<PathBuf>>,
    pub out: Option<PathBuf>,
    pub strategy: Option<StrategyBlock>,
    pub agents: Option<AgentsBlock>,
    pub backtest: Option<BacktestConfig>,
}

/// Accepts a bare TOML date (`2024-10-08`) or a quoted one.
fn toml_date<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<NaiveDate>, D::Error> {
    use serde::de::Error;
    let text = match toml::Value::deserialize(d)? {
        toml::Value::String(s) => s,
        toml::Value::Datetime(dt) if dt.time.is_none() && dt.offset.is_none() => dt.to_string(),
        other => return Err(D::Error::custom(format!("expected a date, got {other}"))),
    };
    text.parse()
        .map(Some)
        .map_err(|e| D::Error::custom(format!("date {text:?}: {e}")))
}

impl FileConfig {
    /// Parses `path`; relative paths inside are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.data.iter_mut().flatten().for_each(rebase);
        cfg.out.iter_mut().for_each(rebase);
        if let Some(a) = cfg.agents.as_mut() {
            a.fixture.iter_mut().for_each(rebase);
            a.prompt_dir.iter_mut().for_each(rebase);
        }
        Ok(cfg)
    }
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("parameter {k:?}: {v:?} is not a number"))?;
    Ok((k.trim().to_string(), v))
}

/// Flags shared by `backtest` and `compare`.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Comma-separated ticker symbols.
    #[arg(long, value_delimiter = ',')]
    pub tickers: Vec<String>,
    /// First trading day (YYYY-MM-DD).
    #[arg(long)]
    pub from: Option<NaiveDate>,
    /// Last trading day (YYYY-MM-DD).
    #[arg(long)]
    pub to: Option<NaiveDate>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Data file or directory; repeatable. A directory supplies
    /// `<TICKER>.csv` and, when present, `<TICKER>.json`.
    #[arg(long)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub capital: Option<f64>,
    #[arg(long)]
    pub cost_bps: Option<f64>,
    /// Disable short positions.
    #[arg(long)]
    pub no_short: bool,
    /// Annual risk-free rate for the Sharpe ratio, e.g. 0.04.
    #[arg(long)]
    pub risk_free: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Baseline strategy name.
    #[arg(long, conflicts_with = "agents")]
    pub strategy: Option<String>,
    /// Strategy parameter override, e.g. --param fast=12; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Run the agent pipeline instead of a baseline.
    #[arg(long)]
    pub agents: bool,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Scripted backend fixture.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone)]
pub enum Mode {
    Strategy(Baseline),
    Agents(AgentsBlock),
}

impl Mode {
    pub fn label(&self) -> String {
        match self {
            Mode::Strategy(b) => b.name().to_string(),
            Mode::Agents(_) => "agents".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tickers: Vec<String>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub data: Vec<PathBuf>,
    pub out: PathBuf,
    pub mode: Mode,
    pub backtest: BacktestConfig,
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        resolve(file, args)
    }
}

fn resolve(file: FileConfig, args: &RunArgs) -> Result<RunConfig> {
    let c = &args.common;
    let mut strategy = file.strategy;
    let mut agents = file.agents;
    if let Some(name) = &args.strategy {
        let params = strategy
            .filter(|s| &s.name == name)
            .map(|s| s.params)
            .unwrap_or_default();
        strategy = Some(StrategyBlock {
            name: name.clone(),
            params,
        });
        agents = None;
    }
    if args.agents {
        agents = Some(agents.unwrap_or_default());
        strategy = None;
    }
    let mode = match (strategy, agents) {
        (Some(_), Some(_)) => bail!("config sets both [strategy] and [agents]; choose one"),
        (None, None) => bail!("no strategy or agents configured; pass --strategy NAME or --agents"),
        (Some(mut s), None) => {
            if args.backend.is_some() || args.fixture.is_some() {
                bail!("--backend and --fixture only apply to agent runs");
            }
            s.params.extend(args.params.iter().cloned());
            Mode::Strategy(Baseline::from_params(&s.name, &s.params)?)
        }
        (None, Some(mut a)) => {
            if !args.params.is_empty() {
                bail!("--param only applies to strategy runs");
            }
            if let Some(b) = args.backend {
                a.backend = b;
            }
            if let Some(f) = &args.fixture {
                a.fixture = Some(f.clone());
            }
            Desk::new(a.pipeline())?;
            match (a.backend, &a.fixture) {
                (BackendKind::Scripted, None) => {
                    bail!("the scripted backend needs --fixture or agents.fixture")
                }
                (BackendKind::Scripted, Some(f)) => require_exists(f)?,
                (BackendKind::Http, _) => {}
            }
            if let Some(d) = &a.prompt_dir {
                if !d.is_dir() {
                    bail!("prompt directory {} does not exist", d.display());
                }
            }
            Mode::Agents(a)
        }
    };

    let mut backtest = file.backtest.unwrap_or_default();
    if let Some(v) = c.capital {
        backtest.initial_capital = v;
    }
    if let Some(v) = c.cost_bps {
        backtest.cost_bps = v;
    }
    if c.no_short {
        backtest.allow_short = false;
    }
    if let Some(v) = c.risk_free {
        backtest.risk_free_rate = v;
    }
    backtest.validate()?;

    let data = if c.data.is_empty() {
        file.data.unwrap_or_default()
    } else {
        c.data.clone()
    };
    if data.is_empty() {
        bail!("no data given; pass --data PATH or set data in the config");
    }
    for p in &data {
        require_exists(p)?;
    }
    let tickers = if c.tickers.is_empty() {
        file.tickers.unwrap_or_default()
    } else {
        c.tickers.clone()
    };
    let from = c.from.or(file.from);
    let to = c.to.or(file.to);
    if let (Some(f), Some(t)) = (from, to) {
        if f > t {
            bail!("--from {f} is after --to {t}");
        }
    }
    Ok(RunConfig {
        tickers: tickers
            .iter()
            .map(|t| t.trim().to_ascii_uppercase())
            .collect(),
        from,
        to,
        data,
        out: c
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("out")),
        mode,
        backtest,
    })
}

pub fn require_exists(p: &Path) -> Result<()> {
    if !p.exists() {
        bail!("{}: no such file or directory", p.display());
    }
    Ok(())
}

/// Loads every data path. Files ending in `.csv` are OHLCV bars for the
/// ticker named by the file stem; `.json` files are auxiliary documents.
/// Directories are searched for `<TICKER>.csv` / `<TICKER>.json`.
pub fn load_store(data: &[PathBuf], tickers: &[String]) -> Result<MarketDataStore> {
    let mut store = MarketDataStore::new();
    for path in data {
        if path.is_dir() {
            if tickers.is_empty() {
                bail!("data directory {} needs --tickers", path.display());
            }
            for t in tickers {
                let csv = path.join(format!("{t}.csv"));
                require_exists(&csv)?;
                store.load_ohlcv(&csv, t)?;
                let aux = path.join(format!("{t}.json"));
                if aux.is_file() {
                    store.load_aux_json(&aux)?;
                }
            }
        } else {
            load_file(&mut store, path)?;
        }
    }
    Ok(store)
}

/// Loads one file and returns (kind, ticker, records).
pub fn load_file(
    store: &mut MarketDataStore,
    path: &Path,
) -> Result<(&'static str, String, usize)> {
    require_exists(path)?;
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("csv") => {
            let ticker = path
                .file_stem()
                .and_then(|s| s.to_str())
                .map(str::to_ascii_uppercase)
                .with_context(|| {
                    format!(
                        "{}: cannot derive a ticker from the file name",
                        path.display()
                    )
                })?;
            let n = store.load_ohlcv(path, &ticker)?;
            Ok(("ohlcv", ticker, n))
        }
        Some("json") => {
            let ticker = store.load_aux_json(path)?;
            let s = store
                .summary()
                .into_iter()
                .find(|s| s.ticker == ticker)
                .expect("ticker just loaded");
            Ok((
                "aux",
                ticker,
                s.news + s.sentiment + s.insider + s.fundamentals,
            ))
        }
        _ => bail!("{}: expected a .csv or .json file", path.display()),
    }
}
