//! File formats: unit-level and summary CSV, summary JSON, science tables,
//! run configuration, and the text/CSV renderers used by the CLI.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::FactorialDesign;
use crate::error::{Error, Result};
use crate::estimation::{Alternative, Correction, EffectInference, GroupSummary, InferenceTable, ObservedDataset, Record};
use crate::exec::Execution;
use crate::nonlinear::NonlinearTable;
use crate::power::Criterion;
use crate::sim::PotentialOutcomesTable;

/// Name of the outcome column in unit-level files.
pub const OUTCOME_COLUMN: &str = "y";
pub const TREATMENT_COLUMN: &str = "treatment";

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path)
        .map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader)
}

fn binary(value: &str, row: usize, column: &str) -> Result<u8> {
    match value {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::parse(row, format!("column {column:?} must be 0 or 1, got {other:?}"))),
    }
}

/// Reads unit-level data: either one 0/1 column per factor, or a 1-based
/// `treatment` column, plus the outcome column `y`.
///
/// `factors` fixes the factor columns and their order; without it every
/// column other than `y` is a factor, in header order. A `treatment` file
/// without `factors` gets `K = ⌈log₂ max index⌉` factors named `A, B, …`.
pub fn read_unit_csv(path: &Path, factors: Option<&[String]>) -> Result<ObservedDataset> {
    parse_unit_csv(open(path)?, factors)
}

pub fn parse_unit_csv<R: Read>(reader: R, factors: Option<&[String]>) -> Result<ObservedDataset> {
    let mut rdr = csv_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let y = find(OUTCOME_COLUMN)
        .ok_or_else(|| Error::input(format!("missing outcome column {OUTCOME_COLUMN:?}")))?;
    if let Some(t) = find(TREATMENT_COLUMN) {
        let mut raw = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| Error::parse(row, e.to_string()))?;
            let treatment: usize = rec[t]
                .parse()
                .map_err(|_| Error::parse(row, format!("treatment index {:?} is not a positive integer", &rec[t])))?;
            if treatment == 0 {
                return Err(Error::parse(row, "treatment indices start at 1"));
            }
            raw.push((row, treatment, binary(&rec[y], row, OUTCOME_COLUMN)?));
        }
        if raw.is_empty() {
            return Err(Error::input("no records"));
        }
        let design = match factors {
            Some(f) => FactorialDesign::new(f.iter().cloned())?,
            None => {
                let max = raw.iter().map(|r| r.1).max().unwrap_or(1);
                let k = (max.next_power_of_two().trailing_zeros() as usize).max(1);
                log::info!("treatment column with no factor names; assuming K = {k}");
                FactorialDesign::with_factors(k)?
            }
        };
        let mut records = Vec::with_capacity(raw.len());
        for (row, treatment, outcome) in raw {
            if treatment > design.treatments() {
                return Err(Error::parse(
                    row,
                    format!("unknown treatment index {treatment}; the design has {}", design.treatments()),
                ));
            }
            records.push(Record { treatment, outcome });
        }
        return ObservedDataset::new(design, records);
    }

    let names: Vec<String> = match factors {
        Some(f) => f.to_vec(),
        None => header.iter().filter(|h| *h != OUTCOME_COLUMN).cloned().collect(),
    };
    if names.is_empty() {
        return Err(Error::input("no factor columns and no treatment column"));
    }
    let columns = names
        .iter()
        .map(|n| find(n).ok_or_else(|| Error::input(format!("missing factor column {n:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let design = FactorialDesign::new(names.iter().cloned())?;
    let mut records = Vec::new();
    let mut levels = vec![0u8; columns.len()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::parse(row, e.to_string()))?;
        for (slot, (&c, name)) in levels.iter_mut().zip(columns.iter().zip(&names)) {
            *slot = binary(&rec[c], row, name)?;
        }
        records.push(Record {
            treatment: design.treatment_index(&levels)?,
            outcome: binary(&rec[y], row, OUTCOME_COLUMN)?,
        });
    }
    if records.is_empty() {
        return Err(Error::input("no records"));
    }
    ObservedDataset::new(design, records)
}

/// Reads a summary with columns `treatment, n, n1`, one row per treatment.
pub fn read_summary_csv(path: &Path, factors: Option<&[String]>) -> Result<GroupSummary> {
    parse_summary_csv(open(path)?, factors)
}

pub fn parse_summary_csv<R: Read>(reader: R, factors: Option<&[String]>) -> Result<GroupSummary> {
    let mut rdr = csv_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::input(format!("summary is missing column {name:?}")))
    };
    let (t, n, n1) = (col(TREATMENT_COLUMN)?, col("n")?, col("n1")?);
    let mut rows: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::parse(row, e.to_string()))?;
        let int = |c: usize, what: &str| -> Result<u64> {
            rec[c]
                .parse()
                .map_err(|_| Error::parse(row, format!("{what} {:?} is not a non-negative integer", &rec[c])))
        };
        let treatment = int(t, "treatment")? as usize;
        let (arm_n, arm_n1) = (int(n, "n")?, int(n1, "n1")?);
        if arm_n1 > arm_n {
            return Err(Error::parse(row, format!("n1 = {arm_n1} exceeds n = {arm_n}")));
        }
        if rows.insert(treatment, (arm_n, arm_n1)).is_some() {
            return Err(Error::parse(row, format!("duplicate treatment {treatment}")));
        }
    }
    if rows.is_empty() {
        return Err(Error::input("no records"));
    }
    let j = rows.len();
    if !j.is_power_of_two() || j < 2 {
        return Err(Error::input(format!("{j} treatments do not form a 2^K design")));
    }
    if let Some((&bad, _)) = rows.iter().find(|(&t, _)| t == 0 || t > j) {
        return Err(Error::input(format!("treatment index {bad} outside 1..={j}")));
    }
    let design = match factors {
        Some(f) => FactorialDesign::new(f.iter().cloned())?,
        None => FactorialDesign::with_factors(j.trailing_zeros() as usize)?,
    };
    if design.treatments() != j {
        return Err(Error::input(format!(
            "{} factors need {} treatments, summary has {j}",
            design.k(),
            design.treatments()
        )));
    }
    let counts: Vec<(u64, u64)> = rows.into_values().collect();
    GroupSummary::from_counts(design, &counts)
}

/// Serialized group summary, also embedded in `analyze` JSON output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub factors: Vec<String>,
    pub arms: Vec<SummaryArm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryArm {
    pub treatment: usize,
    pub n: u64,
    pub n1: u64,
}

impl SummaryFile {
    pub fn from_summary(summary: &GroupSummary) -> Self {
        Self {
            factors: summary.design().factor_names().to_vec(),
            arms: summary
                .arms()
                .iter()
                .map(|a| SummaryArm { treatment: a.treatment, n: a.n, n1: a.n1 })
                .collect(),
        }
    }

    pub fn to_summary(&self) -> Result<GroupSummary> {
        let design = FactorialDesign::new(self.factors.iter().cloned())?;
        let mut arms = self.arms.clone();
        arms.sort_by_key(|a| a.treatment);
        if arms.iter().enumerate().any(|(i, a)| a.treatment != i + 1) {
            return Err(Error::input("summary arms must list treatments 1..J once each"));
        }
        let counts: Vec<(u64, u64)> = arms.iter().map(|a| (a.n, a.n1)).collect();
        GroupSummary::from_counts(design, &counts)
    }
}

/// Reads a JSON summary: either a bare [`SummaryFile`] or any object with a
/// `summary` field holding one (such as `analyze` output).
pub fn read_summary_json(path: &Path) -> Result<GroupSummary> {
    let value: serde_json::Value = serde_json::from_reader(std::io::BufReader::new(open(path)?))?;
    let inner = value.get("summary").cloned().unwrap_or(value);
    let file: SummaryFile = serde_json::from_value(inner)?;
    file.to_summary()
}

/// CSV or JSON by extension.
pub fn read_summary(path: &Path, factors: Option<&[String]>) -> Result<GroupSummary> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let summary = if is_json { read_summary_json(path)? } else { read_summary_csv(path, factors)? };
    if let Some(f) = factors {
        if is_json && summary.design().factor_names() != f {
            log::warn!("factor names from the command line differ from the summary file; using the file's");
        }
    }
    Ok(summary)
}

/// Science tables are stored as CSV with one row per unit and columns
/// `y1, …, yJ` holding `Y_i(1), …, Y_i(J)`.
pub fn read_population_csv(path: &Path, factors: Option<&[String]>) -> Result<PotentialOutcomesTable> {
    parse_population_csv(open(path)?, factors)
}

pub fn parse_population_csv<R: Read>(reader: R, factors: Option<&[String]>) -> Result<PotentialOutcomesTable> {
    let mut rdr = csv_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let j = header.len();
    if !j.is_power_of_two() || j < 2 {
        return Err(Error::input(format!("{j} outcome columns do not form a 2^K design")));
    }
    for (t, h) in header.iter().enumerate() {
        if *h != format!("y{}", t + 1) {
            return Err(Error::input(format!("expected column \"y{}\", found {h:?}", t + 1)));
        }
    }
    let design = match factors {
        Some(f) => FactorialDesign::new(f.iter().cloned())?,
        None => FactorialDesign::with_factors(j.trailing_zeros() as usize)?,
    };
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::parse(row, e.to_string()))?;
        let values = rec
            .iter()
            .zip(&header)
            .map(|(v, h)| binary(v, row, h))
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::input("no records"));
    }
    PotentialOutcomesTable::from_rows(design, &rows)
}

pub fn population_csv(table: &PotentialOutcomesTable) -> String {
    let j = table.design().treatments();
    let mut out = (1..=j).map(|t| format!("y{t}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for i in 0..table.n_units() {
        let row: Vec<String> = table.row(i).iter().map(u8::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimand {
    Linear,
    LogFe,
    LogitFe,
}

impl std::str::FromStr for Estimand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "logfe" => Ok(Self::LogFe),
            "logitfe" => Ok(Self::LogitFe),
            other => Err(Error::input(format!("unknown estimand {other:?}"))),
        }
    }
}

/// JSON run configuration. Every key is optional; command-line flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub population: Option<PathBuf>,
    pub factors: Option<Vec<String>>,
    pub alpha: Option<f64>,
    pub alternative: Option<Alternative>,
    pub correction: Option<Correction>,
    pub estimand: Option<Vec<Estimand>>,
    pub haldane: Option<bool>,
    pub clip: Option<bool>,
    pub family: Option<Vec<String>>,
    pub criterion: Option<Criterion>,
    pub seed: Option<u64>,
    pub draws: Option<usize>,
    pub populations: Option<usize>,
    pub n: Option<u64>,
    pub n_grid: Option<String>,
    pub target_power: Option<f64>,
    pub effect: Option<Vec<String>>,
    pub joint: Option<Vec<String>>,
    pub proportions: Option<String>,
    pub pilot_arm_size: Option<u64>,
    pub plan: Option<String>,
    pub cap: Option<u64>,
    pub execution: Option<Execution>,
    pub json_out: Option<PathBuf>,
    pub csv_out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let config: Self = serde_json::from_reader(std::io::BufReader::new(open(path)?))?;
        if let Some(a) = config.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::input(format!("config alpha must lie in (0, 1), got {a}")));
            }
        }
        Ok(config)
    }
}

fn interval_text(row: &EffectInference) -> String {
    let lo = row.interval.lower.map_or("-inf".to_string(), |x| format!("{x:.4}"));
    let hi = row.interval.upper.map_or("inf".to_string(), |x| format!("{x:.4}"));
    format!("[{lo}, {hi}]")
}

fn inference_rows_text(out: &mut String, rows: &[&EffectInference], adjusted: bool) {
    let w = rows.iter().map(|r| r.label.chars().count()).max().unwrap_or(0).max(6);
    let _ = writeln!(
        out,
        "{:<w$} {:>9} {:>8} {:>9} {:>20} {:>8}{}",
        "effect",
        "estimate",
        "se",
        "z",
        "interval",
        "p",
        if adjusted { format!(" {:>8}", "p adj") } else { String::new() }
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<w$} {:>9.4} {:>8.4} {:>9.4} {:>20} {:>8.4}{}",
            r.label,
            r.estimate,
            r.se,
            r.statistic,
            interval_text(r),
            r.p_raw,
            if adjusted { format!(" {:>8.4}", r.p_adjusted) } else { String::new() }
        );
    }
}

pub fn inference_text(table: &InferenceTable) -> String {
    let mut out = format!(
        "linear effects ({}, alpha = {}, family size {}, SE = {:.4})\n",
        table.correction, table.alpha, table.family_size, table.se
    );
    let rows: Vec<&EffectInference> = table.rows.iter().collect();
    inference_rows_text(&mut out, &rows, table.correction == Correction::Bonferroni);
    out
}

pub fn nonlinear_text(table: &NonlinearTable) -> String {
    let mut out = format!(
        "{} effects ({}, alpha = {}{})\n",
        table.kind.name(),
        table.correction,
        table.alpha,
        if table.haldane { ", Haldane" } else { "" }
    );
    let rows: Vec<&EffectInference> = table.rows.iter().map(|r| &r.inference).collect();
    inference_rows_text(&mut out, &rows, table.correction == Correction::Bonferroni);
    for r in table.rows.iter().filter(|r| r.clamped) {
        let _ = writeln!(out, "note: variance estimate for {} was negative and set to zero", r.inference.label);
    }
    out
}

pub fn summary_text(summary: &GroupSummary) -> String {
    let names = summary.design().factor_names();
    let mut out = format!("{:<10} {} {:>5} {:>5} {:>7} {:>7}\n", "treatment", names.join(" "), "n", "n1", "p", "s2");
    for arm in summary.arms() {
        let levels = summary.design().treatment_levels(arm.treatment).unwrap_or_default();
        let lv: Vec<String> = levels
            .iter()
            .zip(names)
            .map(|(l, n)| format!("{:>w$}", l, w = n.chars().count()))
            .collect();
        let s2 = arm.variance().map_or("undef".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            out,
            "{:<10} {} {:>5} {:>5} {:>7.4} {:>7}",
            arm.treatment,
            lv.join(" "),
            arm.n,
            arm.n1,
            arm.proportion(),
            s2
        );
    }
    out
}

/// Flat CSV of inference rows, one per (estimand, effect).
pub fn inference_csv(linear: &InferenceTable, nonlinear: &[NonlinearTable]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "estimand", "effect", "label", "estimate", "se", "statistic", "lower", "upper", "p_raw", "p_adjusted", "reject",
    ])?;
    let mut put = |name: &str, r: &EffectInference| -> Result<()> {
        w.write_record([
            name.to_string(),
            r.effect.to_string(),
            r.label.clone(),
            r.estimate.to_string(),
            r.se.to_string(),
            r.statistic.to_string(),
            r.interval.lower.map_or(String::new(), |v| v.to_string()),
            r.interval.upper.map_or(String::new(), |v| v.to_string()),
            r.p_raw.to_string(),
            r.p_adjusted.to_string(),
            r.reject.to_string(),
        ])?;
        Ok(())
    };
    for r in &linear.rows {
        put("linear", r)?;
    }
    for t in nonlinear {
        for r in &t.rows {
            put(t.kind.name(), &r.inference)?;
        }
    }
    into_string(w)
}

pub(crate) fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::input(e.to_string()))
}

pub(crate) fn write_output(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| Error::input(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{estimate_effects, summarize};

    fn lawyer_units() -> String {
        let counts = [2, 2, 2, 3, 5, 2, 5, 6];
        let mut s = String::from("race,gender,income,y\n");
        for (j, &c) in counts.iter().enumerate() {
            let (r, g, i) = ((j >> 2) & 1, (j >> 1) & 1, j & 1);
            for u in 0..12 {
                let _ = writeln!(s, "{r},{g},{i},{}", (u < c) as u8);
            }
        }
        s
    }

    #[test]
    fn unit_and_summary_ingestion_agree() {
        let data = parse_unit_csv(lawyer_units().as_bytes(), None).unwrap();
        assert_eq!(data.len(), 96);
        let a = summarize(&data).unwrap();
        let names: Vec<String> = ["race", "gender", "income"].map(String::from).to_vec();
        let csv = "treatment,n,n1\n1,12,2\n2,12,2\n3,12,2\n4,12,3\n5,12,5\n6,12,2\n7,12,5\n8,12,6\n";
        let b = parse_summary_csv(csv.as_bytes(), Some(&names)).unwrap();
        assert_eq!(a, b);
        let l = crate::ContrastMatrix::new(a.design());
        assert_eq!(estimate_effects(&a, &l), estimate_effects(&b, &l));
    }

    #[test]
    fn unit_errors_cite_rows() {
        let mut text = lawyer_units();
        let lines: Vec<&str> = text.lines().collect();
        let mut lines: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        lines[17] = "2,0,0,1".into();
        text = lines.join("\n");
        let err = parse_unit_csv(text.as_bytes(), None).unwrap_err();
        assert!(err.to_string().starts_with("row 17:"), "{err}");
        assert_eq!(err.exit_code(), 2);
        let err = parse_unit_csv("race,gender,income,y\n".as_bytes(), None).unwrap_err();
        assert!(err.to_string().contains("no records"));
        assert!(parse_unit_csv("a,b\n0,1\n".as_bytes(), None).is_err());
    }

    #[test]
    fn treatment_column_form() {
        let text = "treatment,y\n1,0\n2,1\n3,1\n4,0\n4,1\n";
        let d = parse_unit_csv(text.as_bytes(), None).unwrap();
        assert_eq!(d.design().k(), 2);
        let names = vec!["A".to_string()];
        let err = parse_unit_csv(text.as_bytes(), Some(&names)).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }

    #[test]
    fn summary_checks() {
        let dup = "treatment,n,n1\n1,4,2\n1,4,1\n";
        assert!(parse_summary_csv(dup.as_bytes(), None).unwrap_err().to_string().contains("duplicate"));
        let over = "treatment,n,n1\n1,4,5\n2,4,1\n";
        assert!(parse_summary_csv(over.as_bytes(), None).is_err());
        let single = "treatment,n,n1\n1,1,1\n2,4,1\n";
        let s = parse_summary_csv(single.as_bytes(), None).unwrap();
        assert_eq!(s.variances().unwrap_err().exit_code(), 3);
    }

    #[test]
    fn population_round_trip() {
        let text = "y1,y2\n1,0\n0,0\n1,1\n";
        let t = parse_population_csv(text.as_bytes(), None).unwrap();
        assert_eq!(t.n_units(), 3);
        assert_eq!(population_csv(&t), text);
        assert!(parse_population_csv("y1,y3\n1,0\n".as_bytes(), None).is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let c: RunConfig = serde_json::from_str(r#"{"alpha": 0.1, "correction": "bonferroni"}"#).unwrap();
        assert_eq!(c.correction, Some(Correction::Bonferroni));
        assert!(serde_json::from_str::<RunConfig>(r#"{"alpah": 0.1}"#).is_err());
    }
}
