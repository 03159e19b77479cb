use std::path::PathBuf;

use tradecraft_core::marketdata::FUNDAMENTAL_METRICS;

#[test]
fn aux_schema_lists_the_metric_vocabulary() {
    let path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas/market_aux.schema.json");
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let names = &schema["properties"]["fundamentals"]["items"]["properties"]["metrics"]
        ["propertyNames"]["enum"];
    let names: Vec<&str> = names
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(names, FUNDAMENTAL_METRICS);
    let top: Vec<&String> = schema["properties"].as_object().unwrap().keys().collect();
    assert_eq!(
        top,
        [
            "fundamentals",
            "insider",
            "news",
            "profile",
            "sentiment",
            "ticker"
        ]
    );
}
