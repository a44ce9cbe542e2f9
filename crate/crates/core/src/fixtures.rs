//! Bundled example networks and the raw three-level matrix pair.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::network::{parse_network, SpinNetwork};

pub const FIG1: &str = include_str!("../fixtures/fig1.json");
pub const FIG2: &str = include_str!("../fixtures/fig2.json");
pub const TRIANGLE: &str = include_str!("../fixtures/triangle.json");
pub const TRIANGLE_TAIL: &str = include_str!("../fixtures/triangle_tail.json");
pub const PAIR: &str = include_str!("../fixtures/pair.json");
pub const EXAMPLE1: &str = include_str!("../fixtures/example1.json");

/// (file name, contents) for every bundled fixture.
pub const ALL: &[(&str, &str)] = &[
    ("fig1.json", FIG1),
    ("fig2.json", FIG2),
    ("triangle.json", TRIANGLE),
    ("triangle_tail.json", TRIANGLE_TAIL),
    ("pair.json", PAIR),
    ("example1.json", EXAMPLE1),
];

/// Chain 2-3-4-5 forking at 5 into 6 and 7.
pub fn fig1() -> SpinNetwork {
    parse_network(FIG1).expect("bundled fixture")
}

/// Vertex 2 joined to 3 and 4, then 4-5 forking into 6 and 7.
pub fn fig2() -> SpinNetwork {
    parse_network(FIG2).expect("bundled fixture")
}

/// Triangle 2-3-4 with pendant 1.
pub fn triangle() -> SpinNetwork {
    parse_network(TRIANGLE).expect("bundled fixture")
}

/// Triangle 2-3-4, tail 4-5, pendant 1.
pub fn triangle_tail() -> SpinNetwork {
    parse_network(TRIANGLE_TAIL).expect("bundled fixture")
}

/// Two spins joined only by the control edge.
pub fn pair() -> SpinNetwork {
    parse_network(PAIR).expect("bundled fixture")
}

pub fn network(name: &str) -> Option<SpinNetwork> {
    match name {
        "fig1" => Some(fig1()),
        "fig2" => Some(fig2()),
        "triangle" => Some(triangle()),
        "triangle_tail" => Some(triangle_tail()),
        "pair" => Some(pair()),
        _ => None,
    }
}

/// Parse a list of matrices written as nested `[re, im]` pairs.
pub fn parse_matrices(v: &Value) -> Result<Vec<CMat>> {
    let bad = |why: &str| Error::Schema { field: "hamiltonians".into(), reason: why.into() };
    let list = v.as_array().ok_or_else(|| bad("expected a list of matrices"))?;
    list.iter()
        .map(|m| {
            let rows = m.as_array().ok_or_else(|| bad("matrix must be a list of rows"))?;
            let n = rows.len();
            let mut out = CMat::zeros(n, n);
            for (r, row) in rows.iter().enumerate() {
                let row = row.as_array().filter(|x| x.len() == n).ok_or_else(|| bad("matrix must be square"))?;
                for (k, z) in row.iter().enumerate() {
                    let pair = z.as_array().filter(|p| p.len() == 2).ok_or_else(|| bad("entries are [re, im]"))?;
                    let re = pair[0].as_f64().ok_or_else(|| bad("non-numeric entry"))?;
                    let im = pair[1].as_f64().ok_or_else(|| bad("non-numeric entry"))?;
                    out[(r, k)] = c(re, im);
                }
            }
            Ok(out)
        })
        .collect()
}

/// H0 = (omega/2) diag(-1, 0, 1) and the uniform tridiagonal H1.
pub fn example1() -> Vec<CMat> {
    let v: Value = serde_json::from_str(EXAMPLE1).expect("bundled fixture");
    parse_matrices(&v["hamiltonians"]).expect("bundled fixture")
}
