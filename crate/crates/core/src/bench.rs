//! Benchmark manifests and assembly audits.
//!
//! A manifest lists the expected number of pairs for every
//! `(subset, criterion, language)` cell. Assembly groups labelled pairs into
//! benchmark order and compares actual counts with the manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Criterion, Language, PreferencePair};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read manifest {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse manifest: {0}")]
    Parse(String),
    #[error("invalid manifest: {0}")]
    Invalid(String),
    #[error("pair {id} names unknown subset {subset:?}")]
    UnknownSubset { id: String, subset: String },
    #[error("cell {subset}/{criterion}/{language} holds {actual} pairs, manifest allows {expected}")]
    CellOverflow { subset: String, criterion: Criterion, language: Language, expected: u64, actual: u64 },
    #[error("duplicate pair id {0}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Cell {
    pub subset: String,
    pub criterion: Criterion,
    pub language: Language,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    name: String,
    total: i64,
    #[serde(default)]
    group: Vec<GroupFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupFile {
    subset: String,
    criterion: Criterion,
    counts: BTreeMap<Language, i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkManifest {
    pub name: String,
    pub cells: BTreeMap<Cell, u64>,
    pub total: u64,
}

/// The composition of the code reward benchmark shipped with the crate.
pub const CODE_REWARD_BENCH: &str = include_str!("../manifests/code_reward_bench.toml");

impl BenchmarkManifest {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let file: ManifestFile = toml::from_str(text).map_err(|e| BenchError::Parse(e.to_string()))?;
        let mut cells = BTreeMap::new();
        for g in file.group {
            for (language, n) in g.counts {
                let count = u64::try_from(n).map_err(|_| {
                    BenchError::Invalid(format!("negative count {n} for {}/{}/{language}", g.subset, g.criterion))
                })?;
                let cell = Cell { subset: g.subset.clone(), criterion: g.criterion, language };
                if cells.insert(cell, count).is_some() {
                    return Err(BenchError::Invalid(format!(
                        "cell {}/{}/{language} listed twice",
                        g.subset, g.criterion
                    )));
                }
            }
        }
        let total = u64::try_from(file.total).map_err(|_| BenchError::Invalid("negative total".into()))?;
        let manifest = BenchmarkManifest { name: file.name, cells, total };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| BenchError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn code_reward_bench() -> Self {
        Self::from_toml(CODE_REWARD_BENCH).expect("bundled manifest is valid")
    }

    pub fn cell_sum(&self) -> u64 {
        self.cells.values().sum()
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let sum = self.cell_sum();
        if sum != self.total {
            return Err(BenchError::Invalid(format!("total {} != sum of cells {sum}", self.total)));
        }
        Ok(())
    }

    pub fn subsets(&self) -> BTreeSet<&str> {
        self.cells.keys().map(|c| c.subset.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditRow {
    #[serde(flatten)]
    pub cell: Cell,
    pub expected: u64,
    pub actual: u64,
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AuditReport {
    /// Every manifest cell, plus any labelled cell the manifest lacks
    /// (expected 0).
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    pub fn is_exact(&self) -> bool {
        self.rows.iter().all(|r| r.delta == 0)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &AuditRow> {
        self.rows.iter().filter(|r| r.delta != 0)
    }

    pub fn actual_total(&self) -> u64 {
        self.rows.iter().map(|r| r.actual).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("subset,criterion,language,expected,actual,delta\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.cell.subset, r.cell.criterion, r.cell.language, r.expected, r.actual, r.delta
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditMode {
    #[default]
    Lenient,
    Strict,
}

/// Group `pairs` into benchmark order `(criterion, language, subset, id)`
/// and audit per-cell counts against `manifest`. Strict mode fails when a
/// cell receives more pairs than expected.
pub fn assemble(
    mut pairs: Vec<PreferencePair>,
    manifest: &BenchmarkManifest,
    mode: AuditMode,
) -> Result<(Vec<PreferencePair>, AuditReport), BenchError> {
    let subsets = manifest.subsets();
    let mut ids = BTreeSet::new();
    let mut actual: BTreeMap<Cell, u64> = BTreeMap::new();
    for p in &pairs {
        if !subsets.contains(p.subset.as_str()) {
            return Err(BenchError::UnknownSubset { id: p.id.clone(), subset: p.subset.clone() });
        }
        if !ids.insert(p.id.as_str()) {
            return Err(BenchError::DuplicateId(p.id.clone()));
        }
        let cell = Cell { subset: p.subset.clone(), criterion: p.criterion, language: p.language };
        *actual.entry(cell).or_insert(0) += 1;
    }
    let mut rows = Vec::new();
    let keys: BTreeSet<&Cell> = manifest.cells.keys().chain(actual.keys()).collect();
    for cell in keys {
        let expected = manifest.cells.get(cell).copied().unwrap_or(0);
        let got = actual.get(cell).copied().unwrap_or(0);
        if mode == AuditMode::Strict && got > expected {
            return Err(BenchError::CellOverflow {
                subset: cell.subset.clone(),
                criterion: cell.criterion,
                language: cell.language,
                expected,
                actual: got,
            });
        }
        rows.push(AuditRow { cell: cell.clone(), expected, actual: got, delta: got as i64 - expected as i64 });
    }
    pairs.sort_by(|a, b| {
        (a.criterion, a.language, &a.subset, &a.id).cmp(&(b.criterion, b.language, &b.subset, &b.id))
    });
    Ok((pairs, AuditReport { rows }))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Marginals {
    pub by_criterion: BTreeMap<Criterion, u64>,
    pub by_language: BTreeMap<Language, u64>,
    pub total: u64,
}

impl Marginals {
    pub fn criterion_sum(&self) -> u64 {
        self.by_criterion.values().sum()
    }

    pub fn language_sum(&self) -> u64 {
        self.by_language.values().sum()
    }
}

pub fn audit_totals(manifest: &BenchmarkManifest) -> Marginals {
    let mut m = Marginals { total: manifest.total, ..Default::default() };
    for (cell, n) in &manifest.cells {
        *m.by_criterion.entry(cell.criterion).or_insert(0) += n;
        *m.by_language.entry(cell.language).or_insert(0) += n;
    }
    m
}

/// Criterion x language table with row and column totals, as markdown.
pub fn marginals_table(manifest: &BenchmarkManifest) -> String {
    let m = audit_totals(manifest);
    let mut grid: BTreeMap<(Criterion, Language), u64> = BTreeMap::new();
    for (cell, n) in &manifest.cells {
        *grid.entry((cell.criterion, cell.language)).or_insert(0) += n;
    }
    let langs: Vec<Language> = m.by_language.keys().copied().collect();
    let mut out = String::from("| Criterion |");
    for l in &langs {
        let _ = write!(out, " {l} |");
    }
    out.push_str(" Total |\n|---|");
    out.push_str(&"---:|".repeat(langs.len() + 1));
    out.push('\n');
    for (c, total) in &m.by_criterion {
        let _ = write!(out, "| {} |", c.label());
        for l in &langs {
            let _ = write!(out, " {} |", grid.get(&(*c, *l)).copied().unwrap_or(0));
        }
        let _ = writeln!(out, " {total} |");
    }
    out.push_str("| Total |");
    for l in &langs {
        let _ = write!(out, " {} |", m.by_language[l]);
    }
    let _ = writeln!(out, " {} |", m.total);
    out
}
