//! Run configuration: per-problem defaults, config file parsing, flag
//! overrides, and the effective-config echo written next to every output.
//!
//! The file format is plain key-value text with bracketed sections:
//!
//! ```text
//! [problem]
//! id = plume-case1
//! repr = grid(100)
//!
//! [solve]
//! updates = 3
//! points = 500
//! explore_mean = 0
//! explore_var = 4
//! exploit_frac = 0.7
//!
//! [optimizer]
//! iterations = 50
//! samples = 100
//!
//! [assess]
//! trajectories = 1000
//! framework = grid(1000)
//!
//! [run]
//! seed = 1
//! workers = 0
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown sections or keys are
//! rejected so typos fail loudly. Every key has a per-problem default, so a
//! config file only needs the values it wants to change. CLI flags override
//! file values. `workers = 0` means "use all available cores"; results do
//! not depend on the worker count.

use crate::CliError;
use soed::{ExploreMeasure, KwSettings, ProblemId, Repr};
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub repr: Repr,
    pub updates: usize,
    pub points: usize,
    pub explore: ExploreMeasure,
    pub exploit_frac: f64,
    pub kw: KwSettings,
    pub trajectories: usize,
    pub framework: Repr,
    pub seed: u64,
    pub workers: usize,
}

impl RunConfig {
    /// Defaults reproduce the reference setup for each problem.
    pub fn defaults(problem: ProblemId) -> Self {
        let kw = KwSettings {
            iterations: 50,
            mc_samples: 100,
        };
        match problem {
            ProblemId::Lg => RunConfig {
                problem,
                repr: Repr::Analytical,
                updates: 3,
                points: 1000,
                explore: ExploreMeasure {
                    mean: 1.25,
                    var: 0.25,
                },
                exploit_frac: 0.7,
                kw,
                trajectories: 1000,
                framework: Repr::Analytical,
                seed: 1,
                workers: 0,
            },
            ProblemId::PlumeCase1 | ProblemId::PlumeCase2 => RunConfig {
                problem,
                repr: Repr::Grid { nodes: 100 },
                updates: 3,
                points: 500,
                explore: ExploreMeasure { mean: 0.0, var: 4.0 },
                exploit_frac: 0.7,
                kw,
                trajectories: 1000,
                framework: Repr::Grid { nodes: 1000 },
                seed: 1,
                workers: 0,
            },
            ProblemId::PlumeCase3 => RunConfig {
                problem,
                repr: Repr::Grid { nodes: 100 },
                updates: 10,
                points: 500,
                explore: ExploreMeasure {
                    mean: -2.5,
                    var: 0.1,
                },
                exploit_frac: 0.95,
                kw,
                trajectories: 1000,
                framework: Repr::Grid { nodes: 100 },
                seed: 1,
                workers: 0,
            },
        }
    }

    /// Effective-config text. Parsing this back yields an identical config,
    /// which is what makes reruns from the echo reproduce a run exactly.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# effective configuration (rerun with --config <this file>)");
        let _ = writeln!(s, "[problem]");
        let _ = writeln!(s, "id = {}", self.problem.as_str());
        let _ = writeln!(s, "repr = {}", self.repr);
        let _ = writeln!(s);
        let _ = writeln!(s, "[solve]");
        let _ = writeln!(s, "updates = {}", self.updates);
        let _ = writeln!(s, "points = {}", self.points);
        let _ = writeln!(s, "explore_mean = {:.16e}", self.explore.mean);
        let _ = writeln!(s, "explore_var = {:.16e}", self.explore.var);
        let _ = writeln!(s, "exploit_frac = {:.16e}", self.exploit_frac);
        let _ = writeln!(s);
        let _ = writeln!(s, "[optimizer]");
        let _ = writeln!(s, "iterations = {}", self.kw.iterations);
        let _ = writeln!(s, "samples = {}", self.kw.mc_samples);
        let _ = writeln!(s);
        let _ = writeln!(s, "[assess]");
        let _ = writeln!(s, "trajectories = {}", self.trajectories);
        let _ = writeln!(s, "framework = {}", self.framework);
        let _ = writeln!(s);
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "workers = {}", self.workers);
        s
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let check_repr = |repr: &Repr, field: &str| -> Result<(), CliError> {
            match repr {
                Repr::Analytical if self.problem != ProblemId::Lg => Err(CliError::Config(format!(
                    "{field}: analytical representation requires --problem lg"
                ))),
                Repr::Grid { nodes } if *nodes < 10 => Err(CliError::Config(format!(
                    "{field}: grid needs at least 10 nodes, got {nodes}"
                ))),
                _ => Ok(()),
            }
        };
        check_repr(&self.repr, "[problem] repr")?;
        check_repr(&self.framework, "[assess] framework")?;
        if self.updates == 0 {
            return Err(CliError::Config("[solve] updates: must be at least 1".into()));
        }
        if self.points == 0 {
            return Err(CliError::Config("[solve] points: must be at least 1".into()));
        }
        if !(self.explore.var.is_finite() && self.explore.var > 0.0) {
            return Err(CliError::Config(format!(
                "[solve] explore_var: must be positive and finite, got {}",
                self.explore.var
            )));
        }
        if !(0.0..=1.0).contains(&self.exploit_frac) {
            return Err(CliError::Config(format!(
                "[solve] exploit_frac: must lie in [0, 1], got {}",
                self.exploit_frac
            )));
        }
        if self.kw.iterations == 0 || self.kw.mc_samples == 0 {
            return Err(CliError::Config(
                "[optimizer] iterations and samples must be at least 1".into(),
            ));
        }
        if self.trajectories == 0 {
            return Err(CliError::Config(
                "[assess] trajectories: must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Raw key-value pairs from a config file, keyed by "section.key".
#[derive(Debug, Default)]
pub struct ConfigFile {
    pairs: Vec<(String, String)>,
}

const KNOWN_KEYS: &[&str] = &[
    "problem.id",
    "problem.repr",
    "solve.updates",
    "solve.points",
    "solve.explore_mean",
    "solve.explore_var",
    "solve.exploit_frac",
    "optimizer.iterations",
    "optimizer.samples",
    "assess.trajectories",
    "assess.framework",
    "run.seed",
    "run.workers",
];

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut section = String::new();
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::Config(format!("line {}: unclosed section header", idx + 1)))?
                    .trim();
                section = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`, got `{line}`", idx + 1))
            })?;
            if section.is_empty() {
                return Err(CliError::Config(format!(
                    "line {}: key outside any [section]",
                    idx + 1
                )));
            }
            let path = format!("{}.{}", section, key.trim());
            if !KNOWN_KEYS.contains(&path.as_str()) {
                return Err(CliError::Config(format!(
                    "line {}: unknown key [{}] {}",
                    idx + 1,
                    section,
                    key.trim()
                )));
            }
            pairs.push((path, value.trim().to_string()));
        }
        Ok(ConfigFile { pairs })
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        // Last occurrence wins, mirroring flag-override behavior.
        self.pairs
            .iter()
            .rev()
            .find(|(k, _)| k == path)
            .map(|(_, v)| v.as_str())
    }

    /// Problem id named in the file, if any.
    pub fn problem(&self) -> Result<Option<ProblemId>, CliError> {
        match self.get("problem.id") {
            None => Ok(None),
            Some(v) => ProblemId::parse(v)
                .map(Some)
                .map_err(|e| CliError::Config(format!("[problem] id: {e}"))),
        }
    }

    /// Overlay file values onto `cfg` (problem id is resolved separately).
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        fn num<T: std::str::FromStr>(v: &str, path: &str) -> Result<T, CliError> {
            v.parse()
                .map_err(|_| CliError::Config(format!("{path}: cannot parse `{v}`")))
        }
        for (path, v) in &self.pairs {
            match path.as_str() {
                "problem.id" => {}
                "problem.repr" => {
                    cfg.repr = Repr::parse(v).map_err(|e| CliError::Config(format!("[problem] repr: {e}")))?
                }
                "solve.updates" => cfg.updates = num(v, "[solve] updates")?,
                "solve.points" => cfg.points = num(v, "[solve] points")?,
                "solve.explore_mean" => cfg.explore.mean = num(v, "[solve] explore_mean")?,
                "solve.explore_var" => cfg.explore.var = num(v, "[solve] explore_var")?,
                "solve.exploit_frac" => cfg.exploit_frac = num(v, "[solve] exploit_frac")?,
                "optimizer.iterations" => cfg.kw.iterations = num(v, "[optimizer] iterations")?,
                "optimizer.samples" => cfg.kw.mc_samples = num(v, "[optimizer] samples")?,
                "assess.trajectories" => cfg.trajectories = num(v, "[assess] trajectories")?,
                "assess.framework" => {
                    cfg.framework =
                        Repr::parse(v).map_err(|e| CliError::Config(format!("[assess] framework: {e}")))?
                }
                "run.seed" => cfg.seed = num(v, "[run] seed")?,
                "run.workers" => cfg.workers = num(v, "[run] workers")?,
                _ => unreachable!("unknown keys rejected at parse time"),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        for id in [
            ProblemId::Lg,
            ProblemId::PlumeCase1,
            ProblemId::PlumeCase2,
            ProblemId::PlumeCase3,
        ] {
            let mut cfg = RunConfig::defaults(id);
            cfg.seed = 42;
            cfg.points = 123;
            let echo = cfg.echo();
            let file = ConfigFile::parse(&echo).unwrap();
            assert_eq!(file.problem().unwrap(), Some(id));
            let mut rebuilt = RunConfig::defaults(id);
            file.apply(&mut rebuilt).unwrap();
            assert_eq!(rebuilt.echo(), echo);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ConfigFile::parse("[solve]\npoint = 5\n").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert!(err.to_string().contains("unknown key"));
    }

    #[test]
    fn analytical_repr_needs_lg() {
        let mut cfg = RunConfig::defaults(ProblemId::PlumeCase1);
        cfg.repr = Repr::Analytical;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let text = "# top comment\n\n[run]\n# inner\nseed = 9\n";
        let file = ConfigFile::parse(text).unwrap();
        assert_eq!(file.get("run.seed"), Some("9"));
    }
}
