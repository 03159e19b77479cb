use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;
use tradecraft_agents::llm::RequestLogEntry;
use tradecraft_agents::prompts::PromptSet;
use tradecraft_agents::tools::ToolRegistry;
use tradecraft_agents::{
    AgentDecisionSource, ChatBackend, Desk, HttpBackend, RecordingBackend, ScriptedBackend,
};
use tradecraft_core::backtest::{export_report, StrategySource};
use tradecraft_core::marketdata::TickerSummary;
use tradecraft_core::{run_backtest, BacktestReport, MarketDataStore};

use crate::config::{
    load_file, load_store, AgentsBlock, BackendKind, CommonArgs, Mode, RunArgs, RunConfig,
};

/// An error paired with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

pub fn runtime(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: error.into(),
    }
}

pub type CmdResult<T = ()> = std::result::Result<T, Failure>;

#[derive(Debug, Serialize)]
pub struct ManifestFile {
    pub path: String,
    pub kind: &'static str,
    pub ticker: String,
    pub records: usize,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub files: Vec<ManifestFile>,
    pub tickers: Vec<TickerSummary>,
}

pub fn ingest(paths: &[PathBuf], out: Option<&Path>) -> CmdResult {
    let mut store = MarketDataStore::new();
    let mut files = Vec::new();
    for path in paths {
        let (kind, ticker, records) = load_file(&mut store, path).map_err(usage)?;
        files.push(ManifestFile {
            path: path.display().to_string(),
            kind,
            ticker,
            records,
        });
    }
    let manifest = Manifest {
        files,
        tickers: store.summary(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    match out {
        Some(p) => write_file(p, text.as_bytes()).map_err(runtime)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// One finished run for one ticker.
pub struct RunOutcome {
    pub ticker: String,
    pub label: String,
    pub report: BacktestReport,
    pub request_log: Option<Vec<RequestLogEntry>>,
}

/// A resolved run with its data loaded.
pub struct Prepared {
    pub config: RunConfig,
    pub store: MarketDataStore,
    pub tickers: Vec<String>,
}

pub fn prepare(args: &RunArgs) -> CmdResult<Prepared> {
    let config = RunConfig::resolve(args).map_err(usage)?;
    let store = load_store(&config.data, &config.tickers).map_err(usage)?;
    let tickers = if config.tickers.is_empty() {
        store
            .summary()
            .into_iter()
            .filter(|s| s.bars > 0)
            .map(|s| s.ticker)
            .collect()
    } else {
        config.tickers.clone()
    };
    if tickers.is_empty() {
        return Err(usage(anyhow!("no tickers with price data")));
    }
    for t in &tickers {
        if !store.summary().iter().any(|s| &s.ticker == t && s.bars > 0) {
            return Err(usage(anyhow!("no price data loaded for {t}")));
        }
    }
    if let Mode::Agents(a) = &config.mode {
        // Fail before any work when the credential is absent.
        if a.backend == BackendKind::Http {
            make_backend(a).map_err(usage)?;
        }
    }
    Ok(Prepared {
        config,
        store,
        tickers,
    })
}

fn span(
    store: &MarketDataStore,
    ticker: &str,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
) -> (NaiveDate, NaiveDate) {
    let s = store
        .summary()
        .into_iter()
        .find(|s| s.ticker == ticker)
        .expect("ticker checked in prepare");
    (
        from.unwrap_or_else(|| s.first_bar.expect("ticker has bars")),
        to.unwrap_or_else(|| s.last_bar.expect("ticker has bars")),
    )
}

fn make_backend(a: &AgentsBlock) -> Result<Arc<dyn ChatBackend>> {
    Ok(match a.backend {
        BackendKind::Scripted => {
            let path = a
                .fixture
                .as_ref()
                .context("the scripted backend needs a fixture")?;
            Arc::new(ScriptedBackend::from_path(path)?)
        }
        BackendKind::Http => {
            let models = vec![a.models.quick.clone(), a.models.deep.clone()];
            Arc::new(HttpBackend::from_env(a.http.clone(), models)?)
        }
    })
}

/// Runs one ticker. `out_dir` receives session logs in agents mode.
pub fn run_one(p: &Prepared, ticker: &str, out_dir: Option<&Path>) -> CmdResult<RunOutcome> {
    let cfg = &p.config;
    let (start, end) = span(&p.store, ticker, cfg.from, cfg.to);
    let label = cfg.mode.label();
    match &cfg.mode {
        Mode::Strategy(b) => {
            let mut source = StrategySource {
                strategy: b.clone(),
            };
            let report = run_backtest(&mut source, ticker, start, end, &p.store, &cfg.backtest)
                .map_err(runtime)?;
            Ok(RunOutcome {
                ticker: ticker.to_string(),
                label,
                report,
                request_log: None,
            })
        }
        Mode::Agents(a) => {
            let mut desk = Desk::new(a.pipeline()).map_err(usage)?;
            if let Some(dir) = &a.prompt_dir {
                desk = desk.with_prompts(PromptSet::with_overrides(dir).map_err(usage)?);
            }
            if let Some(dir) = out_dir {
                desk = desk.with_session_dir(dir.join("sessions"));
            }
            let recorder = Arc::new(RecordingBackend::new(make_backend(a).map_err(usage)?));
            let mut source = AgentDecisionSource::new(desk, recorder.clone());
            let report = run_backtest(&mut source, ticker, start, end, &p.store, &cfg.backtest)
                .map_err(runtime)?;
            // Analysts run concurrently, so their requests interleave. Group
            // them per role; later stages are already sequential.
            let mut log = recorder.log();
            log.sort_by_key(|e| {
                (
                    e.day,
                    if e.role.is_analyst() {
                        e.role as u8
                    } else {
                        u8::MAX
                    },
                )
            });
            Ok(RunOutcome {
                ticker: ticker.to_string(),
                label,
                report,
                request_log: Some(log),
            })
        }
    }
}

pub fn backtest(args: &RunArgs) -> CmdResult {
    let p = prepare(args)?;
    for ticker in &p.tickers {
        let dir = p.config.out.join(ticker);
        let outcome = run_one(&p, ticker, Some(&dir))?;
        export_report(&outcome.report, &dir).map_err(runtime)?;
        if let Some(log) = &outcome.request_log {
            let mut text = serde_json::to_string_pretty(log).expect("request log serializes");
            text.push('\n');
            write_file(&dir.join("request_log.json"), text.as_bytes()).map_err(runtime)?;
        }
        let m = outcome.report.metrics.as_ref();
        tracing::info!(
            ticker = ticker.as_str(),
            source = outcome.label.as_str(),
            trades = outcome.report.trades.len(),
            cr = m.map(|m| m.cumulative_return_pct),
            "backtest finished"
        );
        println!("{}", dir.display());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub ticker: String,
    pub strategy: String,
    pub cr: Option<f64>,
    pub ar: Option<f64>,
    pub sr: Option<f64>,
    pub mdd: Option<f64>,
}

impl CompareRow {
    fn from_outcome(o: &RunOutcome) -> Self {
        let m = o.report.metrics.as_ref();
        Self {
            ticker: o.ticker.clone(),
            strategy: o.label.clone(),
            cr: m.map(|m| m.cumulative_return_pct),
            ar: m.map(|m| m.annualized_return_pct),
            sr: m.and_then(|m| m.sharpe_annualized),
            mdd: m.map(|m| m.max_drawdown_pct),
        }
    }
}

pub const COMPARE_COLUMNS: [&str; 6] = ["ticker", "strategy", "CR%", "AR%", "SR", "MDD%"];

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.digits$}"))
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut s = COMPARE_COLUMNS.join(",");
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.ticker,
            r.strategy,
            cell(r.cr, 6),
            cell(r.ar, 6),
            cell(r.sr, 6),
            cell(r.mdd, 6)
        );
    }
    s
}

pub fn compare_table(rows: &[CompareRow]) -> String {
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.ticker.clone(),
                r.strategy.clone(),
                cell(r.cr, 2),
                cell(r.ar, 2),
                cell(r.sr, 2),
                cell(r.mdd, 2),
            ]
        })
        .collect();
    let mut widths = COMPARE_COLUMNS.map(str::len);
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i < 2 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut s = line(&COMPARE_COLUMNS);
    s.push('\n');
    for row in &body {
        s.push_str(&line(&row.iter().map(String::as_str).collect::<Vec<_>>()));
        s.push('\n');
    }
    s
}

pub fn compare(configs: &[PathBuf], strategies: &[String], common: &CommonArgs) -> CmdResult {
    if configs.is_empty() && strategies.is_empty() {
        return Err(usage(anyhow!(
            "nothing to compare; pass --strategy NAME or --config FILE at least once"
        )));
    }
    let mut jobs = Vec::new();
    for c in configs {
        jobs.push(RunArgs {
            config: Some(c.clone()),
            common: common.clone(),
            ..Default::default()
        });
    }
    for s in strategies {
        jobs.push(RunArgs {
            strategy: Some(s.clone()),
            common: common.clone(),
            ..Default::default()
        });
    }
    let prepared = jobs.iter().map(prepare).collect::<CmdResult<Vec<_>>>()?;
    let tasks: Vec<(&Prepared, &String)> = prepared
        .iter()
        .flat_map(|p| p.tickers.iter().map(move |t| (p, t)))
        .collect();
    let outcomes = tasks
        .par_iter()
        .map(|(p, t)| run_one(p, t, None))
        .collect::<CmdResult<Vec<_>>>()?;
    let rows: Vec<CompareRow> = outcomes.iter().map(CompareRow::from_outcome).collect();

    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    write_file(&out.join("compare.csv"), compare_csv(&rows).as_bytes()).map_err(runtime)?;
    let table = compare_table(&rows);
    write_file(&out.join("compare.txt"), table.as_bytes()).map_err(runtime)?;
    print!("{table}");
    Ok(())
}

pub fn schemas() -> CmdResult {
    println!("{}", ToolRegistry::standard().schemas_json());
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(strategy: &str, cr: f64, sr: Option<f64>) -> CompareRow {
        CompareRow {
            ticker: "AAPL".into(),
            strategy: strategy.into(),
            cr: Some(cr),
            ar: Some(cr / 2.0),
            sr,
            mdd: Some(3.0),
        }
    }

    #[test]
    fn csv_has_fixed_columns() {
        let csv = compare_csv(&[row("macd", 12.5, Some(1.25)), row("sma", -1.0, None)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "ticker,strategy,CR%,AR%,SR,MDD%");
        assert_eq!(lines[1], "AAPL,macd,12.500000,6.250000,1.250000,3.000000");
        assert_eq!(lines[2], "AAPL,sma,-1.000000,-0.500000,n/a,3.000000");
    }

    #[test]
    fn table_aligns_columns() {
        let t = compare_table(&[row("buy_and_hold", 12.5, Some(1.25))]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("ticker  strategy    "));
        assert!(lines[1].ends_with("3.00"));
        assert_eq!(lines[0].find("MDD%").map(|i| i + 4), Some(lines[1].len()));
    }
}
