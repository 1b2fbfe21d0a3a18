use std::path::Path;

use cama_core::attack::{AttackType, Method};
use cama_core::gnn::Arch;
use serde::{Deserialize, Serialize};

use crate::config::Mode;
use crate::HarnessError;

pub const RESULTS_VERSION: u32 = 1;

/// Rounds to two decimals, the precision accuracies are reported at.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

/// One (dataset, mode, victim, surrogate, attack type, method) cell.
/// Accuracies are percentages with two decimals; `change` is attacked minus
/// clean, so drops are negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub mode: Mode,
    pub victim: Arch,
    pub surrogate: Option<Arch>,
    pub attack_type: AttackType,
    pub method: Method,
    pub clean_acc: f64,
    pub attacked_acc: f64,
    pub change: f64,
    /// Mean flips per perturbed graph.
    pub mean_flips: f64,
    /// Mean average degree of the nodes picked by a feature attack.
    pub mean_avg_degree: Option<f64>,
    pub graphs: usize,
    pub skipped: usize,
    pub successes: usize,
    pub fold_clean: Vec<f64>,
    pub fold_attacked: Vec<f64>,
}

impl ResultRow {
    /// Builds a row from per-fold accuracies in [0, 1], applying the
    /// reporting precision.
    #[allow(clippy::too_many_arguments)]
    pub fn from_folds(
        dataset: &str,
        mode: Mode,
        victim: Arch,
        surrogate: Option<Arch>,
        attack_type: AttackType,
        method: Method,
        fold_clean: &[f64],
        fold_attacked: &[f64],
        mean_flips: f64,
        mean_avg_degree: Option<f64>,
        counts: (usize, usize, usize),
    ) -> Self {
        let pct = |v: &[f64]| v.iter().map(|x| round2(100.0 * x)).collect::<Vec<_>>();
        let mean = |v: &[f64]| round2(100.0 * v.iter().sum::<f64>() / v.len().max(1) as f64);
        let clean_acc = mean(fold_clean);
        let attacked_acc = mean(fold_attacked);
        Self {
            dataset: dataset.to_string(),
            mode,
            victim,
            surrogate,
            attack_type,
            method,
            clean_acc,
            attacked_acc,
            change: round2(attacked_acc - clean_acc),
            mean_flips: round4(mean_flips),
            mean_avg_degree: mean_avg_degree.map(round4),
            graphs: counts.0,
            skipped: counts.1,
            successes: counts.2,
            fold_clean: pct(fold_clean),
            fold_attacked: pct(fold_attacked),
        }
    }

    pub fn key(&self) -> (String, Mode, Arch, Option<Arch>, AttackType, Method) {
        (self.dataset.clone(), self.mode, self.victim, self.surrogate, self.attack_type, self.method)
    }

    /// Accuracy drop in points, positive when the attack hurts.
    pub fn drop(&self) -> f64 {
        -self.change
    }
}

const HEADER: [&str; 16] = [
    "dataset",
    "mode",
    "victim",
    "surrogate",
    "attack_type",
    "method",
    "clean_acc",
    "attacked_acc",
    "change",
    "mean_flips",
    "mean_avg_degree",
    "graphs",
    "skipped",
    "successes",
    "fold_clean",
    "fold_attacked",
];

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(";")
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T, HarnessError> {
    field.parse().map_err(|_| HarnessError::Parse(format!("bad {what}: {field:?}")))
}

fn split(field: &str) -> Result<Vec<f64>, HarnessError> {
    if field.is_empty() {
        return Ok(vec![]);
    }
    field.split(';').map(|x| parse(x, "fold accuracy")).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub version: u32,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new() -> Self {
        Self { version: RESULTS_VERSION, rows: vec![] }
    }

    /// Adds a row; a second row with the same key is an error.
    pub fn push(&mut self, row: ResultRow) -> Result<(), HarnessError> {
        if self.rows.iter().any(|r| r.key() == row.key()) {
            return Err(HarnessError::Parse(format!("duplicate row for {:?}", row.key())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.dataset.clone(),
                r.mode.as_str().to_string(),
                r.victim.to_string(),
                r.surrogate.map(|a| a.to_string()).unwrap_or_default(),
                r.attack_type.to_string(),
                r.method.to_string(),
                format!("{:.2}", r.clean_acc),
                format!("{:.2}", r.attacked_acc),
                format!("{:.2}", r.change),
                format!("{:.4}", r.mean_flips),
                r.mean_avg_degree.map(|d| format!("{d:.4}")).unwrap_or_default(),
                r.graphs.to_string(),
                r.skipped.to_string(),
                r.successes.to_string(),
                join(&r.fold_clean),
                join(&r.fold_attacked),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Parse(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        if reader.headers()?.iter().collect::<Vec<_>>() != HEADER {
            return Err(HarnessError::Parse("unexpected CSV header".into()));
        }
        let mut table = Self::new();
        for record in reader.records() {
            let f = record?;
            let mode = match &f[1] {
                "whitebox" => Mode::Whitebox,
                "blackbox" => Mode::Blackbox,
                "poison" => Mode::Poison,
                other => return Err(HarnessError::Parse(format!("bad mode {other:?}"))),
            };
            let surrogate = if f[3].is_empty() { None } else { Some(parse(&f[3], "surrogate")?) };
            let degree = if f[10].is_empty() { None } else { Some(parse(&f[10], "mean_avg_degree")?) };
            table.push(ResultRow {
                dataset: f[0].to_string(),
                mode,
                victim: parse(&f[2], "victim")?,
                surrogate,
                attack_type: parse(&f[4], "attack_type")?,
                method: parse(&f[5], "method")?,
                clean_acc: parse(&f[6], "clean_acc")?,
                attacked_acc: parse(&f[7], "attacked_acc")?,
                change: parse(&f[8], "change")?,
                mean_flips: parse(&f[9], "mean_flips")?,
                mean_avg_degree: degree,
                graphs: parse(&f[11], "graphs")?,
                skipped: parse(&f[12], "skipped")?,
                successes: parse(&f[13], "successes")?,
                fold_clean: split(&f[14])?,
                fold_attacked: split(&f[15])?,
            })?;
        }
        Ok(table)
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes `results.csv` and `results.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        crate::output::write_file(&dir.join("results.csv"), &self.to_csv()?)?;
        crate::output::write_file(&dir.join("results.json"), &self.to_json()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: Method) -> ResultRow {
        ResultRow::from_folds(
            "MUTAG",
            Mode::Whitebox,
            Arch::Gcn,
            None,
            AttackType::Structure,
            method,
            &[0.8, 0.9, 2.0 / 3.0],
            &[0.7, 0.5, 1.0 / 3.0],
            1.5,
            Some(2.123456),
            (30, 4, 9),
        )
    }

    #[test]
    fn change_is_attacked_minus_clean() {
        let r = row(Method::Cama);
        assert_eq!(r.clean_acc, 78.89);
        assert_eq!(r.attacked_acc, 51.11);
        assert!((r.change - (r.attacked_acc - r.clean_acc)).abs() < 1e-9);
        assert_eq!(r.drop(), 27.78);
        assert_eq!(r.fold_clean, vec![80.0, 90.0, 66.67]);
    }

    #[test]
    fn empty_table_is_header_only() {
        let csv = ResultTable::new().to_csv().unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert_eq!(ResultTable::from_csv(&csv).unwrap(), ResultTable::new());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let mut t = ResultTable::new();
        t.push(row(Method::Cama)).unwrap();
        let csv = t.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(ResultTable::from_csv(&csv).unwrap(), t);
        t.push(row(Method::Random)).unwrap();
        let mut blackbox = row(Method::Cama);
        blackbox.mode = Mode::Blackbox;
        blackbox.surrogate = Some(Arch::Gcn);
        blackbox.victim = Arch::Gin0;
        blackbox.mean_avg_degree = None;
        t.push(blackbox).unwrap();
        assert_eq!(ResultTable::from_csv(&t.to_csv().unwrap()).unwrap(), t);
        assert_eq!(ResultTable::from_json(&t.to_json().unwrap()).unwrap(), t);
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let mut t = ResultTable::new();
        t.push(row(Method::Cama)).unwrap();
        assert!(t.push(row(Method::Cama)).is_err());
    }
}
