use crate::error::{Error, Result, ScenarioErrorKind};

use super::format::parse_scenario;
use super::spec::ScenarioSpec;

/// Checked-in scenario files transcribed from the published parameter tables.
pub const BUILTINS: &[(&str, &str)] = &[
    ("kt_set1", include_str!("../../scenarios/kt_set1.scn")),
    ("kt_set2", include_str!("../../scenarios/kt_set2.scn")),
    ("dv_set1", include_str!("../../scenarios/dv_set1.scn")),
    ("dv_set2", include_str!("../../scenarios/dv_set2.scn")),
    ("dv_set3", include_str!("../../scenarios/dv_set3.scn")),
    ("dv_set4", include_str!("../../scenarios/dv_set4.scn")),
    ("bidir", include_str!("../../scenarios/bidir.scn")),
    ("twist", include_str!("../../scenarios/twist.scn")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

/// Text of a builtin scenario file.
pub fn builtin_text(name: &str) -> Result<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| Error::Scenario {
        location: "scenario name".into(),
        kind: ScenarioErrorKind::UnknownBuiltin { name: name.into(), valid: builtin_names().join(", ") },
    })
}

pub fn builtin(name: &str) -> Result<ScenarioSpec> {
    parse_scenario(builtin_text(name)?)
}
