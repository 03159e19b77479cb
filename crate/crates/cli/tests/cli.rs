use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use tradecraft_testkit::shipped;

fn fixtures() -> PathBuf {
    shipped::fixtures_dir()
}

fn tradecraft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tradecraft"))
        .args(args)
        .env_remove("TRADECRAFT_API_KEY")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn agents_run(out: &Path, fixture: &Path) -> Output {
    let data = fixtures();
    tradecraft(&[
        "backtest",
        "--agents",
        "--backend",
        "scripted",
        "--fixture",
        s(fixture),
        "--data",
        s(&data),
        "--tickers",
        "AAPL",
        "--from",
        "2024-10-08",
        "--to",
        "2024-10-14",
        "--out",
        s(out),
    ])
}

#[test]
fn ingest_lists_prices_and_news() {
    let tmp = TempDir::new().unwrap();
    let manifest = tmp.path().join("manifest.json");
    let (csv, json) = (fixtures().join("AAPL.csv"), fixtures().join("AAPL.json"));
    let o = tradecraft(&["ingest", s(&csv), s(&json), "--out", s(&manifest)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    let files = m["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    assert_eq!(files[0]["kind"], "ohlcv");
    assert_eq!(files[0]["records"], 250);
    assert_eq!(files[1]["kind"], "aux");
    assert_eq!(m["tickers"][0]["ticker"], "AAPL");
    assert_eq!(m["tickers"][0]["first_bar"], "2024-01-02");
    assert!(m["tickers"][0]["news"].as_u64().unwrap() > 0);
}

#[test]
fn ingest_errors_exit_2_with_location() {
    let o = tradecraft(&["ingest", "/no/such/prices.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/no/such/prices.csv"), "{}", stderr(&o));

    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("DUP.csv");
    fs::write(
        &path,
        "date,open,high,low,close,adj_close,volume\n\
         2024-01-02,10,11,9,10.5,10.5,100\n\
         2024-01-03,10,11,9,10.5,10.5,100\n\
         2024-01-03,10,11,9,10.5,10.5,100\n",
    )
    .unwrap();
    let o = tradecraft(&["ingest", s(&path)]);
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("line 4: duplicate bar"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn buy_and_hold_starts_at_initial_capital() {
    let tmp = TempDir::new().unwrap();
    let data = fixtures().join("AAPL.csv");
    let o = tradecraft(&[
        "backtest",
        "--strategy",
        "buy_and_hold",
        "--data",
        s(&data),
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let equity = fs::read_to_string(tmp.path().join("AAPL/equity.csv")).unwrap();
    let mut lines = equity.lines();
    assert_eq!(lines.next(), Some("date,equity"));
    assert_eq!(lines.next(), Some("2024-01-02,100000"));
    assert_eq!(equity.lines().count(), 251);
    let trades = fs::read_to_string(tmp.path().join("AAPL/trades.csv")).unwrap();
    assert!(trades.starts_with("date,action,units,price,cost\n2024-01-02,open_long,"));
    let metrics: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("AAPL/metrics.json")).unwrap())
            .unwrap();
    assert!(metrics["cumulative_return_pct"].is_f64());
}

#[test]
fn config_file_and_flag_overrides() {
    let tmp = TempDir::new().unwrap();
    let cfg = fixtures().join("configs/macd.toml");
    let o = tradecraft(&[
        "backtest",
        "--config",
        s(&cfg),
        "--out",
        s(tmp.path()),
        "--cost-bps",
        "0",
        "--param",
        "fast=8",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let trades = fs::read_to_string(tmp.path().join("AAPL/trades.csv")).unwrap();
    assert!(
        trades.lines().skip(1).all(|l| l.ends_with(",0")),
        "cost override applied"
    );
}

#[test]
fn invalid_configuration_exits_2() {
    let data = fixtures().join("AAPL.csv");
    let d = s(&data);
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "backtest",
            "--strategy",
            "macd",
            "--param",
            "fast=26",
            "--param",
            "slow=12",
            "--data",
            d,
        ],
        vec!["backtest", "--strategy", "nope", "--data", d],
        vec![
            "backtest",
            "--strategy",
            "macd",
            "--param",
            "speed=3",
            "--data",
            d,
        ],
        vec!["backtest", "--data", d],
        vec!["backtest", "--strategy", "macd", "--agents", "--data", d],
        vec!["backtest", "--strategy", "macd"],
        vec![
            "backtest",
            "--strategy",
            "macd",
            "--data",
            d,
            "--from",
            "2024-05-01",
            "--to",
            "2024-04-01",
        ],
        vec![
            "backtest",
            "--strategy",
            "macd",
            "--data",
            d,
            "--capital",
            "-5",
        ],
        vec!["backtest", "--agents", "--data", d],
        vec![
            "backtest",
            "--agents",
            "--fixture",
            "/no/such/script.json",
            "--data",
            d,
        ],
        vec![
            "backtest",
            "--strategy",
            "macd",
            "--data",
            d,
            "--tickers",
            "MSFT",
        ],
        vec!["backtest", "--config", "/no/such/run.toml"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = tradecraft(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains("error"), "{args:?}");
    }
}

#[test]
fn config_file_problems_exit_2() {
    let tmp = TempDir::new().unwrap();
    let write = |name: &str, body: &str| {
        let p = tmp.path().join(name);
        fs::write(&p, body).unwrap();
        p
    };
    let data = format!("data = [\"{}\"]\n", fixtures().join("AAPL.csv").display());
    let unknown = write(
        "unknown.toml",
        &format!("{data}[strategy]\nname = \"sma\"\n[backtest]\ncapital = 1\n"),
    );
    let both = write(
        "both.toml",
        &format!("{data}[strategy]\nname = \"sma\"\n[agents]\nbackend = \"http\"\n"),
    );
    let secret = write(
        "secret.toml",
        &format!("{data}[agents]\nbackend = \"http\"\n[agents.http]\napi_key = \"sk-x\"\n"),
    );
    let bad_path = write(
        "bad_path.toml",
        "data = [\"missing.csv\"]\n[strategy]\nname = \"sma\"\n",
    );
    for p in [&unknown, &both, &secret, &bad_path] {
        let o = tradecraft(&["backtest", "--config", s(p)]);
        assert_eq!(code(&o), 2, "{}: {}", p.display(), stderr(&o));
    }
    let o = tradecraft(&["backtest", "--config", s(&bad_path)]);
    assert!(
        stderr(&o).contains(s(&tmp.path().join("missing.csv"))),
        "{}",
        stderr(&o)
    );
}

#[test]
fn http_backend_requires_the_credential_variable() {
    let cfg = fixtures().join("configs/agents_http.toml");
    let o = tradecraft(&["backtest", "--config", s(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("TRADECRAFT_API_KEY"), "{}", stderr(&o));
}

#[test]
fn scripted_agents_write_session_logs_and_replay_identically() {
    let tmp = TempDir::new().unwrap();
    let script = fixtures().join("scripted_5day.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = agents_run(out, &script);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let mut sessions: Vec<String> = fs::read_dir(a.join("AAPL/sessions"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    sessions.sort();
    assert_eq!(
        sessions,
        [
            "2024-10-08.json",
            "2024-10-09.json",
            "2024-10-10.json",
            "2024-10-11.json",
            "2024-10-14.json"
        ]
    );
    for name in [
        "trades.csv",
        "equity.csv",
        "metrics.json",
        "request_log.json",
    ] {
        assert_eq!(
            fs::read(a.join("AAPL").join(name)).unwrap(),
            fs::read(b.join("AAPL").join(name)).unwrap(),
            "{name}"
        );
    }
    for name in &sessions {
        let rel = Path::new("AAPL/sessions").join(name);
        assert_eq!(
            fs::read(a.join(&rel)).unwrap(),
            fs::read(b.join(&rel)).unwrap(),
            "{name}"
        );
    }
    let equity = fs::read_to_string(a.join("AAPL/equity.csv")).unwrap();
    assert_eq!(equity.lines().count(), 6);
}

#[test]
fn stage_failures_exit_1_and_name_the_stage() {
    let tmp = TempDir::new().unwrap();
    let entries: Vec<Value> =
        serde_json::from_str(&fs::read_to_string(fixtures().join("scripted_5day.json")).unwrap())
            .unwrap();
    let truncated: Vec<&Value> = entries
        .iter()
        .filter(|e| !(e["role"] == "FundManager" && e["day"] == "2024-10-10"))
        .collect();
    let script = tmp.path().join("truncated.json");
    fs::write(&script, serde_json::to_string(&truncated).unwrap()).unwrap();
    let o = agents_run(&tmp.path().join("out"), &script);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("stage fund_manager"), "{err}");
    assert!(err.contains("2024-10-10"), "{err}");
}

#[test]
fn compare_tabulates_each_strategy() {
    let tmp = TempDir::new().unwrap();
    let data = fixtures().join("AAPL.csv");
    let o = tradecraft(&[
        "compare",
        "--strategy",
        "macd",
        "--strategy",
        "sma",
        "--strategy",
        "macd",
        "--data",
        s(&data),
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("compare.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "ticker,strategy,CR%,AR%,SR,MDD%");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("AAPL,macd,"));
    assert!(lines[2].starts_with("AAPL,sma,"));
    assert_eq!(lines[1], lines[3]);
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        table,
        fs::read_to_string(tmp.path().join("compare.txt")).unwrap()
    );
    assert!(table.lines().next().unwrap().contains("MDD%"));
}

#[test]
fn compare_accepts_configs_and_rejects_an_empty_list() {
    let tmp = TempDir::new().unwrap();
    let cfgs = [
        fixtures().join("configs/macd.toml"),
        fixtures().join("configs/agents_scripted.toml"),
    ];
    let o = tradecraft(&[
        "compare",
        "--config",
        s(&cfgs[0]),
        "--config",
        s(&cfgs[1]),
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("compare.csv")).unwrap();
    let names: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(names, ["macd", "agents"]);

    let o = tradecraft(&["compare", "--data", s(&fixtures())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn schemas_command_prints_the_published_file() {
    let o = tradecraft(&["schemas"]);
    assert_eq!(code(&o), 0);
    let published = fs::read_to_string(fixtures().join("../schemas/tools.json")).unwrap();
    assert_eq!(String::from_utf8(o.stdout).unwrap(), published);
}
