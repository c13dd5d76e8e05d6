//! Differences between two run directories.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::{HarnessError, Manifest};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DiffEntry {
    /// A metric present in either run whose values differ.
    Metric { key: String, a: Option<f64>, b: Option<f64> },
    /// A check whose pass/fail flag differs (or exists in one run only).
    Check { name: String, a: Option<bool>, b: Option<bool> },
    /// Experiment, version or overall verdict.
    Header { key: String, a: String, b: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diff {
    pub entries: Vec<DiffEntry>,
}

impl Diff {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn metric(&self, key: &str) -> Option<(Option<f64>, Option<f64>)> {
        self.entries.iter().find_map(|e| match e {
            DiffEntry::Metric { key: k, a, b } if k == key => Some((*a, *b)),
            _ => None,
        })
    }
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".into(), |x| x.to_string())
}

fn num(v: &Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6e}"))
}

impl fmt::Display for Diff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return writeln!(f, "no differences");
        }
        writeln!(f, "{:<28} {:>16} {:>16} {:>14}", "entry", "a", "b", "b - a")?;
        for e in &self.entries {
            match e {
                DiffEntry::Metric { key, a, b } => {
                    let delta = match (a, b) {
                        (Some(x), Some(y)) => format!("{:.6e}", y - x),
                        _ => "-".into(),
                    };
                    writeln!(f, "{key:<28} {:>16} {:>16} {delta:>14}", num(a), num(b))?;
                }
                DiffEntry::Check { name, a, b } => {
                    writeln!(f, "{:<28} {:>16} {:>16}", format!("check {name}"), opt(a), opt(b))?;
                }
                DiffEntry::Header { key, a, b } => writeln!(f, "{key:<28} {a:>16} {b:>16}")?,
            }
        }
        Ok(())
    }
}

/// Compares the manifests in two run directories: headers, every metric
/// (exact comparison), and every check flag.
pub fn compare_report(run_a: &Path, run_b: &Path) -> Result<Diff, HarnessError> {
    let a = Manifest::read(run_a)?;
    let b = Manifest::read(run_b)?;
    let mut entries = Vec::new();
    for (key, x, y) in [
        ("experiment", a.experiment.clone(), b.experiment.clone()),
        ("version", a.version.clone(), b.version.clone()),
        ("passed", a.passed.to_string(), b.passed.to_string()),
    ] {
        if x != y {
            entries.push(DiffEntry::Header { key: key.into(), a: x, b: y });
        }
    }
    let keys: BTreeSet<&String> = a.metrics.keys().chain(b.metrics.keys()).collect();
    for key in keys {
        let (x, y) = (a.metrics.get(key).copied(), b.metrics.get(key).copied());
        if x != y {
            entries.push(DiffEntry::Metric { key: key.clone(), a: x, b: y });
        }
    }
    let flags =
        |m: &Manifest| -> BTreeMap<String, bool> { m.checks.iter().map(|c| (c.name.clone(), c.passed)).collect() };
    let (fa, fb) = (flags(&a), flags(&b));
    let names: BTreeSet<&String> = fa.keys().chain(fb.keys()).collect();
    for name in names {
        let (x, y) = (fa.get(name).copied(), fb.get(name).copied());
        if x != y {
            entries.push(DiffEntry::Check { name: name.clone(), a: x, b: y });
        }
    }
    Ok(Diff { entries })
}
