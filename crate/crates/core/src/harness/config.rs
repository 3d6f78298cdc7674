//! Experiment configuration: a flat `key = value` file, validated before any
//! work and hashed into every report.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::Color;
use crate::interchange::ModCounting;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[default]
    Simulate,
    Profile,
    VerifySpread,
    VerifyCollapse,
    VerifyMajorization,
    Paths,
    Bootstrap,
    Uniformity,
    Duality,
    Meancut,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::Simulate,
        ExperimentKind::Profile,
        ExperimentKind::VerifySpread,
        ExperimentKind::VerifyCollapse,
        ExperimentKind::VerifyMajorization,
        ExperimentKind::Paths,
        ExperimentKind::Bootstrap,
        ExperimentKind::Uniformity,
        ExperimentKind::Duality,
        ExperimentKind::Meancut,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Profile => "profile",
            ExperimentKind::VerifySpread => "verify-spread",
            ExperimentKind::VerifyCollapse => "verify-collapse",
            ExperimentKind::VerifyMajorization => "verify-majorization",
            ExperimentKind::Paths => "paths",
            ExperimentKind::Bootstrap => "bootstrap",
            ExperimentKind::Uniformity => "uniformity",
            ExperimentKind::Duality => "duality",
            ExperimentKind::Meancut => "meancut",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileVariant {
    Card,
    Ratio,
    #[default]
    Both,
}

/// All knobs of every experiment. Fields irrelevant to the chosen
/// experiment are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub replicas: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    // simulation
    pub n: usize,
    pub phases: usize,
    pub phase_length: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_exponent: Option<f64>,
    pub counting: ModCounting,
    pub snapshot_profile: bool,

    // graphs
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<PathBuf>,
    pub color: Color,
    /// Size of the random graph family used when no graph file is given.
    pub seeds: usize,

    // profiles and verification
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    pub variant: ProfileVariant,
    pub witnesses: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub k: Vec<usize>,
    pub t_grid: Vec<f64>,
    pub orderings: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domination_time: Option<f64>,

    // expansion parameters
    pub gamma: f64,
    pub d: f64,

    // paths
    #[serde(skip_serializing_if = "Option::is_none")]
    pub walks_per_source: Option<usize>,
    pub lazy: bool,

    // statistical tests
    pub time: f64,
    pub set_size: usize,
    pub r_grid: Vec<f64>,
    pub simulation_only: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::default(),
            seed: 0,
            replicas: 1,
            out: None,
            n: 16,
            phases: 4,
            phase_length: 5.0,
            a_exponent: None,
            counting: ModCounting::default(),
            snapshot_profile: false,
            graph: None,
            color: Color::Red,
            seeds: 20,
            kmax: None,
            variant: ProfileVariant::default(),
            witnesses: false,
            k: Vec::new(),
            t_grid: vec![0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            orderings: 50,
            domination_time: None,
            gamma: 0.25,
            d: 4.0,
            walks_per_source: None,
            lazy: false,
            time: 2.0,
            set_size: 4,
            r_grid: vec![0.3, 0.5, 0.7],
            simulation_only: false,
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            experiment: kind,
            ..Default::default()
        };
        match kind {
            ExperimentKind::Uniformity => {
                c.n = 3;
                c.time = 100.0;
                c.replicas = 100_000;
            }
            ExperimentKind::Duality | ExperimentKind::Meancut => {
                c.n = 8;
                c.replicas = 100_000;
            }
            ExperimentKind::Bootstrap => c.phase_length = 2.0,
            _ => {}
        }
        c
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn emit(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Hex SHA-256 of the emitted form, so equal configurations hash equally
    /// however they were written. The output directory is not part of it.
    pub fn hash(&self) -> Result<String> {
        let keyed = ExperimentConfig {
            out: None,
            ..self.clone()
        };
        Ok(hex::encode(Sha256::digest(keyed.emit()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n < 3 && self.graph.is_none() {
            return bad(format!("n must be >= 3, got {}", self.n));
        }
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed must be below 2^63, got {}", self.seed));
        }
        if self.replicas == 0 {
            return bad("replicas must be >= 1".into());
        }
        if self.phases == 0 {
            return bad("phases must be >= 1".into());
        }
        if !(self.phase_length > 0.0 && self.phase_length.is_finite()) {
            return bad(format!(
                "phase_length must be > 0, got {}",
                self.phase_length
            ));
        }
        if let Some(a) = self.a_exponent {
            if !(a > 8.0 && a.is_finite()) {
                return bad(format!("a_exponent must be > 8, got {a}"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be > 0, got {}", self.gamma));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return bad(format!("d must be > 0, got {}", self.d));
        }
        if !(self.time >= 0.0 && self.time.is_finite()) {
            return bad(format!("time must be >= 0, got {}", self.time));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return bad("t_grid must be a nonempty list of finite times >= 0".into());
        }
        if self.r_grid.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return bad("r_grid entries must lie in (0, 1)".into());
        }
        if self.seeds == 0 {
            return bad("seeds must be >= 1".into());
        }
        if let Some(t) = self.domination_time {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("domination_time must be > 0, got {t}"));
            }
        }
        if self.walks_per_source == Some(0) {
            return bad("walks_per_source must be >= 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_round_trips() {
        for kind in ExperimentKind::ALL {
            let c = ExperimentConfig::for_experiment(kind);
            let text = c.emit().unwrap();
            assert_eq!(ExperimentConfig::parse(&text).unwrap(), c);
            assert_eq!(kind.as_str().parse::<ExperimentKind>().unwrap(), kind);
        }
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = ExperimentConfig::parse("experiment = \"paths\"\nseed = 9\ngamma = 0.5\n").unwrap();
        assert_eq!(c.experiment, ExperimentKind::Paths);
        assert_eq!(c.seed, 9);
        assert_eq!(c.n, 16);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::parse("nodes = 5\n").is_err());
        assert!(ExperimentConfig::parse("gamma = -1.0\n").is_err());
        assert!(ExperimentConfig::parse("r_grid = [1.5]\n").is_err());
        assert!(ExperimentConfig::parse("a_exponent = 3.0\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.out = Some(PathBuf::from("elsewhere"));
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed = 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }

    proptest! {
        #[test]
        fn arbitrary_configs_round_trip(
            seed in 0..=i64::MAX as u64,
            n in 3usize..4096,
            phase_length in 1e-3f64..1e3,
            gamma in 1e-3f64..1.0,
            times in prop::collection::vec(0.0f64..100.0, 1..12),
            ks in prop::collection::vec(1usize..64, 0..5),
            lazy in any::<bool>(),
            walks in prop::option::of(1usize..10_000),
        ) {
            let c = ExperimentConfig {
                experiment: ExperimentKind::VerifyCollapse,
                seed,
                n,
                phase_length,
                gamma,
                t_grid: times,
                k: ks,
                lazy,
                walks_per_source: walks,
                color: Color::Blue,
                out: Some(PathBuf::from("runs/a")),
                ..Default::default()
            };
            let back = ExperimentConfig::parse(&c.emit().unwrap()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
