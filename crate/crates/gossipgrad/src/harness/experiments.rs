//! Shipped experiment configurations at desk scale.

use super::config::{parse_config_str, ExperimentConfig};
use crate::error::Error;
use crate::Result;
use std::path::Path;

const FIG1_QUADRATIC: &str = r#"
name = "fig1_quadratic"
horizon = 50000
stride = 100
init_radius = 25.0
transient_window = 3000

[seeds]
count = 20
base = 100

[problem]
family = "quadratic"
d = 10
n = 20
samples = 500
alphas = [0.0, 0.1, 0.3, 1.0]
seed = 1

[topology]
kind = "ring"
self_weight = 0.3

[[algorithms]]
kind = "dsgd"

[algorithms.schedule]
kind = "inverse_time"
a0 = 10.0
a1 = 500.0

[[algorithms]]
kind = "csgd"

[algorithms.schedule]
kind = "inverse_time"
a0 = 10.0
a1 = 500.0
"#;

const FIG2_SCALING: &str = r#"
name = "fig2_scaling"
horizon = 50000
stride = 100
init_radius = 25.0
transient_window = 3000
n_sweep = [10, 20, 30, 40]

[seeds]
count = 20
base = 100

[problem]
family = "quadratic"
d = 10
n = 20
samples = 500
alphas = [1.0]
seed = 1

[topology]
kind = "ring"
self_weight = 0.5

[[algorithms]]
kind = "dsgd"

[algorithms.schedule]
kind = "inverse_time"
a0 = 7.0
a1 = 500.0

[[algorithms]]
kind = "csgd"

[algorithms.schedule]
kind = "inverse_time"
a0 = 7.0
a1 = 500.0
"#;

const FIG3_LOGISTIC: &str = r#"
name = "fig3_logistic"
horizon = 20000
stride = 50

[seeds]
count = 20
base = 100

[problem]
family = "logistic"
d = 5
n = 30
samples = 5
ridge = 1.0
alphas = [0.0, 1.0]
seed = 1

[topology]
kind = "ring"
self_weight = 0.3

[[algorithms]]
kind = "dsgd"

[algorithms.schedule]
kind = "inverse_time"
a0 = 5.0
a1 = 100.0

[[algorithms]]
kind = "csgd"

[algorithms.schedule]
kind = "inverse_time"
a0 = 5.0
a1 = 100.0

[[algorithms]]
kind = "gt"

[algorithms.schedule]
kind = "inverse_time"
a0 = 5.0
a1 = 100.0

[[algorithms]]
kind = "ed"

[algorithms.schedule]
kind = "inverse_time"
a0 = 5.0
a1 = 100.0
"#;

const FIG5_TD: &str = r#"
name = "fig5_td"
horizon = 200000
stride = 500

[seeds]
count = 20
base = 100

[problem]
family = "gridworld"
n = 10
seed = 1

[topology]
kind = "ring"
self_weight = 0.8

[[algorithms]]
kind = "td"

[algorithms.schedule]
kind = "inverse_time"
a0 = 24.0
a1 = 3600.0
"#;

const LEMMA_CHECKS: &str = r#"
name = "lemma_checks"
horizon = 1500
stride = 1

[seeds]
count = 100
base = 1000

[problem]
family = "quadratic"
d = 10
n = 20
samples = 500
seed = 1

[topology]
kind = "ring"
self_weight = 0.3

[[algorithms]]
kind = "dsgd"

[algorithms.schedule]
kind = "constant"
gamma = 0.004
"#;

pub const SHIPPED: &[(&str, &str)] = &[
    ("fig1_quadratic", FIG1_QUADRATIC),
    ("fig2_scaling", FIG2_SCALING),
    ("fig3_logistic", FIG3_LOGISTIC),
    ("fig5_td", FIG5_TD),
    ("lemma_checks", LEMMA_CHECKS),
];

pub fn list() -> Vec<&'static str> {
    SHIPPED.iter().map(|(name, _)| *name).collect()
}

pub fn get(name: &str) -> Option<&'static str> {
    SHIPPED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// Resolve a shipped experiment name or a filesystem path to a parsed
/// config.
pub fn resolve(name_or_path: &str) -> Result<ExperimentConfig> {
    if let Some(text) = get(name_or_path) {
        return parse_config_str(text);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return super::config::parse_config(path);
    }
    Err(Error::Validation(format!(
        "unknown experiment `{name_or_path}`: not a shipped name ({}) or an existing file",
        list().join(", ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_shipped_configs_parse_and_validate() {
        for (name, text) in SHIPPED {
            let cfg = parse_config_str(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&cfg.name, name);
        }
    }

    #[test]
    fn shipped_set_is_complete() {
        for name in [
            "fig1_quadratic",
            "fig2_scaling",
            "fig3_logistic",
            "fig5_td",
            "lemma_checks",
        ] {
            assert!(get(name).is_some(), "{name} missing");
        }
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(resolve("no_such_experiment").is_err());
    }

    #[test]
    fn fig1_describe_reports_anchor_gap() {
        let cfg = resolve("fig1_quadratic").unwrap();
        let text = crate::harness::describe(&cfg).unwrap();
        assert!(text.contains("rho = 0.034"), "{text}");
    }
}
