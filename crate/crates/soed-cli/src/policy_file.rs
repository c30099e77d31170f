//! Versioned text format for persisted policies.
//!
//! Two kinds exist. A `lookahead` policy stores the fitted value-function
//! coefficients for every policy update, one line per (update, stage):
//!
//! ```text
//! soed-policy v1
//! kind lookahead
//! problem plume-case1
//! repr grid(100)
//! horizon 2
//! updates 3
//! basis 10 1 s u z s^2 u^2 z^2 s*u s*z u*z
//! value 1 1 <c0> ... <c9>
//! ...
//! ```
//!
//! `value l k ...` holds the coefficients of the approximate value of the
//! state reached after k experiments, fitted during policy update l. A
//! `batch` policy stores a fixed design vector instead:
//!
//! ```text
//! soed-policy v1
//! kind batch
//! problem plume-case2
//! repr grid(100)
//! horizon 2
//! designs <d0> <d1>
//! ```
//!
//! Coefficients and designs are printed with 17 significant digits so a
//! written file reproduces the in-memory policy bit for bit.

use crate::CliError;
use soed::{FeatureBasis, LinearValue, ProblemId, Repr, Solution};
use std::fmt::Write as _;

const MAGIC: &str = "soed-policy v1";

#[derive(Debug, Clone)]
pub enum PolicyKind {
    Lookahead {
        horizon: usize,
        by_update: Vec<Vec<LinearValue>>,
    },
    Batch {
        designs: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct PolicyFile {
    pub problem: ProblemId,
    pub repr: Repr,
    pub kind: PolicyKind,
}

impl PolicyFile {
    pub fn from_solution(problem: ProblemId, repr: Repr, horizon: usize, solution: &Solution) -> Self {
        PolicyFile {
            problem,
            repr,
            kind: PolicyKind::Lookahead {
                horizon,
                by_update: solution.by_update.clone(),
            },
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        match &self.kind {
            PolicyKind::Lookahead { horizon, by_update } => {
                let _ = writeln!(s, "kind lookahead");
                let _ = writeln!(s, "problem {}", self.problem.as_str());
                let _ = writeln!(s, "repr {}", self.repr);
                let _ = writeln!(s, "horizon {horizon}");
                let _ = writeln!(s, "updates {}", by_update.len());
                let basis = &by_update[0][0].basis;
                let _ = write!(s, "basis {}", basis.len());
                for name in basis.names() {
                    let _ = write!(s, " {name}");
                }
                let _ = writeln!(s);
                for (l, values) in by_update.iter().enumerate() {
                    for (j, v) in values.iter().enumerate() {
                        let _ = write!(s, "value {} {}", l + 1, j + 1);
                        for c in &v.coef {
                            let _ = write!(s, " {c:.16e}");
                        }
                        let _ = writeln!(s);
                    }
                }
            }
            PolicyKind::Batch { designs } => {
                let _ = writeln!(s, "kind batch");
                let _ = writeln!(s, "problem {}", self.problem.as_str());
                let _ = writeln!(s, "repr {}", self.repr);
                let _ = write!(s, "designs");
                for d in designs {
                    let _ = write!(s, " {d:.16e}");
                }
                let _ = writeln!(s);
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let bad = |msg: String| CliError::Config(format!("policy file: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(MAGIC) {
            return Err(bad(format!("expected `{MAGIC}` on the first line")));
        }
        let mut kind_tag = None;
        let mut problem = None;
        let mut repr = None;
        let mut horizon = None;
        let mut updates = None;
        let mut basis: Option<FeatureBasis> = None;
        let mut values: Vec<(usize, usize, Vec<f64>)> = Vec::new();
        let mut designs: Option<Vec<f64>> = None;
        for line in lines {
            let line = line.trim();
            let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
            match head {
                "kind" => kind_tag = Some(rest.trim().to_string()),
                "problem" => {
                    problem = Some(ProblemId::parse(rest.trim()).map_err(|e| bad(e.to_string()))?)
                }
                "repr" => repr = Some(Repr::parse(rest.trim()).map_err(|e| bad(e.to_string()))?),
                "horizon" => {
                    horizon = Some(rest.trim().parse().map_err(|_| bad(format!("bad horizon `{rest}`")))?)
                }
                "updates" => {
                    updates = Some(rest.trim().parse::<usize>().map_err(|_| bad(format!("bad updates `{rest}`")))?)
                }
                "basis" => {
                    let mut parts = rest.split_whitespace();
                    let n: usize = parts
                        .next()
                        .and_then(|p| p.parse().ok())
                        .ok_or_else(|| bad("basis line needs a term count".into()))?;
                    let b = match n {
                        6 => FeatureBasis { physical: false },
                        10 => FeatureBasis { physical: true },
                        _ => return Err(bad(format!("unsupported basis size {n}"))),
                    };
                    let names: Vec<&str> = parts.collect();
                    if names != b.names() {
                        return Err(bad("basis term names do not match the declared size".into()));
                    }
                    basis = Some(b);
                }
                "value" => {
                    let mut parts = rest.split_whitespace();
                    let l: usize = parts
                        .next()
                        .and_then(|p| p.parse().ok())
                        .ok_or_else(|| bad("value line needs an update index".into()))?;
                    let k: usize = parts
                        .next()
                        .and_then(|p| p.parse().ok())
                        .ok_or_else(|| bad("value line needs a stage index".into()))?;
                    let coef: Vec<f64> = parts
                        .map(|p| p.parse().map_err(|_| bad(format!("bad coefficient `{p}`"))))
                        .collect::<Result<_, _>>()?;
                    values.push((l, k, coef));
                }
                "designs" => {
                    designs = Some(
                        rest.split_whitespace()
                            .map(|p| p.parse().map_err(|_| bad(format!("bad design `{p}`"))))
                            .collect::<Result<_, _>>()?,
                    );
                }
                other => return Err(bad(format!("unknown line `{other}`"))),
            }
        }
        let problem = problem.ok_or_else(|| bad("missing problem line".into()))?;
        let repr = repr.ok_or_else(|| bad("missing repr line".into()))?;
        match kind_tag.as_deref() {
            Some("lookahead") => {
                let horizon = horizon.ok_or_else(|| bad("missing horizon line".into()))?;
                let updates = updates.ok_or_else(|| bad("missing updates line".into()))?;
                let basis = basis.ok_or_else(|| bad("missing basis line".into()))?;
                if horizon < 1 || updates < 1 {
                    return Err(bad("horizon and updates must be at least 1".into()));
                }
                let per_update = horizon - 1;
                let mut by_update = vec![vec![None; per_update]; updates];
                for (l, k, coef) in values {
                    if l < 1 || l > updates || k < 1 || k > per_update {
                        return Err(bad(format!("value {l} {k} is out of range")));
                    }
                    if coef.len() != basis.len() {
                        return Err(bad(format!(
                            "value {l} {k} has {} coefficients, expected {}",
                            coef.len(),
                            basis.len()
                        )));
                    }
                    by_update[l - 1][k - 1] = Some(LinearValue { basis, coef });
                }
                let by_update: Vec<Vec<LinearValue>> = by_update
                    .into_iter()
                    .enumerate()
                    .map(|(l, row)| {
                        row.into_iter()
                            .enumerate()
                            .map(|(k, v)| {
                                v.ok_or_else(|| bad(format!("missing value line for update {} stage {}", l + 1, k + 1)))
                            })
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<_, _>>()?;
                Ok(PolicyFile {
                    problem,
                    repr,
                    kind: PolicyKind::Lookahead { horizon, by_update },
                })
            }
            Some("batch") => {
                let designs = designs.ok_or_else(|| bad("missing designs line".into()))?;
                if designs.is_empty() {
                    return Err(bad("designs line is empty".into()));
                }
                Ok(PolicyFile {
                    problem,
                    repr,
                    kind: PolicyKind::Batch { designs },
                })
            }
            Some(other) => Err(bad(format!("unknown kind `{other}`"))),
            None => Err(bad("missing kind line".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_lookahead() -> PolicyFile {
        let basis = FeatureBasis { physical: true };
        let mk = |offset: f64| LinearValue {
            basis,
            coef: (0..basis.len()).map(|i| offset + i as f64 * 0.5).collect(),
        };
        PolicyFile {
            problem: ProblemId::PlumeCase3,
            repr: Repr::Grid { nodes: 100 },
            kind: PolicyKind::Lookahead {
                horizon: 4,
                by_update: vec![vec![mk(1.0), mk(2.0), mk(3.0)], vec![mk(-1.0), mk(0.25), mk(7.0)]],
            },
        }
    }

    #[test]
    fn lookahead_round_trips_exactly() {
        let original = sample_lookahead();
        let text = original.render();
        let parsed = PolicyFile::parse(&text).unwrap();
        assert_eq!(parsed.render(), text);
        match (&original.kind, &parsed.kind) {
            (
                PolicyKind::Lookahead { by_update: a, .. },
                PolicyKind::Lookahead { by_update: b, .. },
            ) => {
                for (ra, rb) in a.iter().zip(b) {
                    for (va, vb) in ra.iter().zip(rb) {
                        assert_eq!(va.coef, vb.coef);
                    }
                }
            }
            _ => panic!("kind changed in round trip"),
        }
    }

    #[test]
    fn batch_round_trips_exactly() {
        let original = PolicyFile {
            problem: ProblemId::PlumeCase2,
            repr: Repr::Grid { nodes: 100 },
            kind: PolicyKind::Batch {
                designs: vec![-1.2345678901234567, 0.1],
            },
        };
        let text = original.render();
        let parsed = PolicyFile::parse(&text).unwrap();
        match parsed.kind {
            PolicyKind::Batch { designs } => {
                assert_eq!(designs, vec![-1.2345678901234567, 0.1]);
            }
            _ => panic!("expected batch kind"),
        }
    }

    #[test]
    fn missing_value_lines_are_reported() {
        let mut text = sample_lookahead().render();
        let cut = text.find("value 2 3").unwrap();
        text.truncate(cut);
        let err = PolicyFile::parse(&text).unwrap_err();
        assert!(err.to_string().contains("update 2 stage 3"));
    }

    #[test]
    fn rejects_wrong_magic() {
        assert!(PolicyFile::parse("soed-policy v9\nkind batch\n").is_err());
    }
}
