//! Bundled public triangles (cumulative paid amounts).

use crate::io::{parse_triangle, TriangleKind};
use crate::triangle::{Mode, RunOffTriangle};

pub const AUTOBI_CSV: &str = include_str!("../data/corpus/autobi.csv");
pub const GENINS_CSV: &str = include_str!("../data/corpus/genins.csv");
pub const UKMOTOR_CSV: &str = include_str!("../data/corpus/ukmotor.csv");
/// Contains one decreasing cumulative value; loads only in lenient mode.
pub const RAA_CSV: &str = include_str!("../data/raa.csv");

fn load(text: &str, label: &str, mode: Mode) -> RunOffTriangle {
    parse_triangle(text, TriangleKind::Cumulative, mode)
        .expect("bundled triangle parses")
        .with_origin_label(label)
}

/// Automobile bodily injury paid claims, accident years 1969-1976.
pub fn autobi() -> RunOffTriangle {
    load(AUTOBI_CSV, "1969", Mode::Strict)
}

/// Taylor & Ashe general insurance triangle.
pub fn genins() -> RunOffTriangle {
    load(GENINS_CSV, "1", Mode::Strict)
}

/// UK motor paid claims, accident years 2007-2013.
pub fn ukmotor() -> RunOffTriangle {
    load(UKMOTOR_CSV, "2007", Mode::Strict)
}

/// Reinsurance Association of America triangle, accident years 1981-1990.
pub fn raa() -> RunOffTriangle {
    load(RAA_CSV, "1981", Mode::Lenient)
}

/// Named bundled triangles that load in strict mode.
pub fn corpus() -> Vec<(&'static str, RunOffTriangle)> {
    vec![
        ("autobi", autobi()),
        ("genins", genins()),
        ("ukmotor", ukmotor()),
    ]
}
