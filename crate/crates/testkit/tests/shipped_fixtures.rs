use tradecraft_testkit::fixtures::{ohlcv_csv, random_walk};
use tradecraft_testkit::shipped;

#[test]
fn committed_fixtures_match_the_generator() {
    let bars = random_walk(shipped::SEED, shipped::BARS, shipped::start());
    let dir = shipped::fixtures_dir();
    let read = |name: &str| std::fs::read_to_string(dir.join(name)).unwrap();
    assert_eq!(read("AAPL.csv"), ohlcv_csv(&bars), "rerun gen-fixtures");
    assert_eq!(
        read("AAPL.json"),
        shipped::aux_json(&bars),
        "rerun gen-fixtures"
    );
    assert_eq!(
        read("scripted_5day.json"),
        shipped::script_json(&bars),
        "rerun gen-fixtures"
    );
}
