//! Result envelopes, number rendering and CSV artifacts.

use std::fmt::Write as _;

use mvdyn::pcfunc::PCFunction;
use mvdyn::{Rational, Scalar};
use serde::Serialize;
use serde_json::{json, Value};

/// Exact string plus float rendering.
pub fn num(x: &Rational) -> Value {
    json!({ "exact": x.to_repr(), "float": x.to_f64() })
}

/// A function in its exchange form plus float values.
pub fn function(f: &PCFunction<Rational>) -> Value {
    let mut v = serde_json::to_value(f).expect("functions serialize");
    v["values_float"] = f.values().iter().map(Scalar::to_f64).collect();
    v
}

#[derive(Serialize)]
pub struct Envelope {
    pub command: String,
    pub system: Option<String>,
    pub params: Value,
    pub seed: u64,
    pub result: Value,
}

/// Shortest round-trip float text, always with a decimal point.
pub fn float(x: f64) -> String {
    format!("{x:?}")
}

/// Headerless `x_left,x_right,value,float` rows, one per piece.
pub fn plot_rows(f: &PCFunction<Rational>) -> String {
    let mut out = String::new();
    for (lo, hi, v) in f.pieces() {
        let _ = writeln!(out, "{},{},{},{}", lo.to_repr(), hi.to_repr(), v.to_repr(), float(v.to_f64()));
    }
    out
}

/// Plot rows for a density known only by its cell values.
pub fn cell_rows(cells: &[f64]) -> String {
    let n = cells.len() as i64;
    let mut out = String::new();
    for (i, v) in cells.iter().enumerate() {
        let lo = Rational::ratio(i as i64, n);
        let hi = Rational::ratio(i as i64 + 1, n);
        let _ = writeln!(out, "{},{},{},{}", lo.to_repr(), hi.to_repr(), float(*v), float(*v));
    }
    out
}
