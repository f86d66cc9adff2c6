use serde::Deserialize;
use xpikesim_core::aimc::quantize_weights;
use xpikesim_core::RealMatrix;

#[derive(Deserialize)]
struct Case {
    name: String,
    weights: Vec<f64>,
    scale: f64,
    ints: Vec<i32>,
}

#[derive(Deserialize)]
struct Golden {
    max_level: i32,
    cases: Vec<Case>,
}

#[test]
fn matches_the_shared_golden_vector() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../testdata/quantizer_parity.json")).unwrap();
    let golden: Golden = serde_json::from_str(&text).unwrap();
    assert!(golden.cases.iter().any(|c| c.weights.len() == 100));
    for case in golden.cases {
        let w = RealMatrix::from_vec(1, case.weights.len(), case.weights).unwrap();
        let q = quantize_weights(&w, golden.max_level);
        assert_eq!(q.scale, case.scale, "{}", case.name);
        assert_eq!(q.ints.as_slice(), case.ints.as_slice(), "{}", case.name);
    }
}
