//! Rating input for offline evaluation and the tables it produces.
//!
//! Two inputs are accepted: the service's JSONL rating log, or a CSV file
//! with the header `item_id,system,dimension,comparison,worker_id,score,is_test`
//! and an optional trailing `expected` column carrying the key of test rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use metaphor_forge_core::eval::ratings::{
    check_score, Comparison, CorrelationRow, Dimension, EvalItem, GroupKey, GroupMean, RatingRecord, System,
    TestKeys,
};
use serde::Deserialize;
use thiserror::Error;

use crate::annotation::log::{parse_log, LogRecord};

#[derive(Debug, Error)]
pub enum RatingsIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: line {line}: {reason}")]
    Invalid { path: PathBuf, line: usize, reason: String },
}

/// Everything `evaluate` needs: the ratings, the items they refer to (only
/// system and comparison are known) and the test keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatingSet {
    pub records: Vec<RatingRecord>,
    pub items: BTreeMap<String, EvalItem>,
    pub keys: TestKeys,
}

impl RatingSet {
    fn add(
        &mut self,
        line: usize,
        system: System,
        comparison: Comparison,
        record: RatingRecord,
        expected: Option<u8>,
    ) -> Result<(), (usize, String)> {
        if record.is_test_item {
            if let Some(e) = expected {
                let key = (record.item_id.clone(), record.dimension);
                match self.keys.insert(key, e) {
                    Some(prev) if prev != e => {
                        return Err((line, format!("conflicting expected scores {prev} and {e}")));
                    }
                    _ => {}
                }
            }
        } else {
            let item = self.items.entry(record.item_id.clone()).or_insert_with(|| EvalItem {
                item_id: record.item_id.clone(),
                x: String::new(),
                y: String::new(),
                y_prime: (system != System::Gold).then(String::new),
                system,
                comparison,
            });
            if item.system != system || item.comparison != comparison {
                return Err((
                    line,
                    format!(
                        "item {:?} seen as {}/{} and {system}/{comparison}",
                        item.item_id, item.system, item.comparison
                    ),
                ));
            }
        }
        self.records.push(record);
        Ok(())
    }
}

pub fn from_log_records(records: &[LogRecord]) -> Result<RatingSet, String> {
    let mut set = RatingSet::default();
    for (i, r) in records.iter().enumerate() {
        set.add(i + 1, r.system, r.comparison, r.rating(), r.expected)
            .map_err(|(_, reason)| reason)?;
    }
    Ok(set)
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    item_id: String,
    system: String,
    dimension: String,
    comparison: String,
    worker_id: String,
    score: i64,
    is_test: String,
    #[serde(default)]
    expected: Option<u8>,
}

fn parse_flag(s: &str) -> Result<bool, String> {
    match s.trim().to_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" | "" => Ok(false),
        other => Err(format!("bad is_test value {other:?}")),
    }
}

pub fn read_ratings_csv<R: io::Read>(r: R, path: &Path) -> Result<RatingSet, RatingsIoError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(r);
    let mut set = RatingSet::default();
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        // line 1 is the header
        let line = i + 2;
        let invalid = |reason: String| RatingsIoError::Invalid {
            path: path.to_owned(),
            line,
            reason,
        };
        let row = row.map_err(|source| RatingsIoError::Csv {
            path: path.to_owned(),
            source,
        })?;
        let system: System = row.system.parse().map_err(|e: _| invalid(format!("{e}")))?;
        let dimension: Dimension = row.dimension.parse().map_err(|e: _| invalid(format!("{e}")))?;
        let comparison: Comparison = row.comparison.parse().map_err(|e: _| invalid(format!("{e}")))?;
        let score = check_score(row.score).map_err(|e| invalid(e.to_string()))?;
        let record = RatingRecord {
            item_id: row.item_id,
            dimension,
            worker_id: row.worker_id,
            score,
            is_test_item: parse_flag(&row.is_test).map_err(invalid)?,
        };
        set.add(line, system, comparison, record, row.expected)
            .map_err(|(_, reason)| invalid(reason))?;
    }
    Ok(set)
}

/// Reads either format; a file whose first non-blank byte is `{` is a log.
pub fn read_ratings(path: &Path) -> Result<RatingSet, RatingsIoError> {
    let bytes = fs::read(path).map_err(|source| RatingsIoError::Io {
        path: path.to_owned(),
        source,
    })?;
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    if first == Some(&b'{') {
        let invalid = |line, reason| RatingsIoError::Invalid {
            path: path.to_owned(),
            line,
            reason,
        };
        let (records, _, torn) = parse_log(&bytes).map_err(|(l, r)| invalid(l, r))?;
        if torn {
            log::warn!("{}: ignoring an incomplete final record", path.display());
        }
        from_log_records(&records).map_err(|r| invalid(0, r))
    } else {
        read_ratings_csv(bytes.as_slice(), path)
    }
}

pub fn write_means<W: Write>(means: &BTreeMap<GroupKey, GroupMean>, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["system", "dimension", "comparison", "mean", "count"])?;
    for (k, m) in means {
        out.write_record([
            k.system.as_str(),
            k.dimension.as_str(),
            k.comparison.map_or("", Comparison::as_str),
            &format!("{:.4}", m.mean),
            &m.count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_correlations<W: Write>(rows: &[CorrelationRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["comparison", "a", "b", "n", "rho", "p_value"])?;
    for r in rows {
        out.write_record([
            r.comparison.as_str(),
            r.a.as_str(),
            r.b.as_str(),
            &r.n.to_string(),
            &format!("{:.4}", r.rho),
            &format!("{:.4}", r.p_value),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// A grouped bar chart of the means, one group per system.
pub fn means_svg(means: &BTreeMap<GroupKey, GroupMean>) -> String {
    const BAR: f64 = 22.0;
    const GAP: f64 = 18.0;
    const HEIGHT: f64 = 200.0;
    const TOP: f64 = 20.0;
    const LEFT: f64 = 40.0;
    let colors = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759"];
    let series: Vec<(Dimension, Option<Comparison>)> = {
        let mut s: Vec<_> = means.keys().map(|k| (k.dimension, k.comparison)).collect();
        s.sort();
        s.dedup();
        s
    };
    let systems: Vec<System> = {
        let mut s: Vec<_> = means.keys().map(|k| k.system).collect();
        s.dedup();
        s
    };
    let group_w = series.len() as f64 * BAR + GAP;
    let width = LEFT + systems.len() as f64 * group_w + 160.0;
    let total_h = TOP + HEIGHT + 40.0;
    let y = |v: f64| TOP + HEIGHT * (1.0 - v / 4.0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{total_h}" font-family="sans-serif" font-size="11">"#
    );
    for tick in 0..=4 {
        let ty = y(f64::from(tick));
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{ty}" x2="{}" y2="{ty}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{tick}</text>"##,
            width - 160.0,
            LEFT - 6.0,
            ty + 4.0
        );
    }
    for (g, sys) in systems.iter().enumerate() {
        let x0 = LEFT + GAP / 2.0 + g as f64 * group_w;
        for (s, (d, c)) in series.iter().enumerate() {
            let key = GroupKey {
                system: *sys,
                dimension: *d,
                comparison: *c,
            };
            if let Some(m) = means.get(&key) {
                let x = x0 + s as f64 * BAR;
                let _ = writeln!(
                    svg,
                    r#"<rect x="{x}" y="{:.2}" width="{}" height="{:.2}" fill="{}"><title>{:.2}</title></rect>"#,
                    y(m.mean),
                    BAR - 2.0,
                    HEIGHT * m.mean / 4.0,
                    colors[s % colors.len()],
                    m.mean
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{sys}</text>"#,
            x0 + series.len() as f64 * BAR / 2.0,
            TOP + HEIGHT + 16.0
        );
    }
    for (s, (d, c)) in series.iter().enumerate() {
        let lx = width - 150.0;
        let ly = TOP + 14.0 * s as f64;
        let label = match c {
            Some(c) => format!("{d} ({c})"),
            None => d.to_string(),
        };
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{ly}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{label}</text>"#,
            colors[s % colors.len()],
            lx + 14.0,
            ly + 9.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_keys() {
        let text = "item_id,system,dimension,comparison,worker_id,score,is_test,expected\n\
                    a,lexrep,fluency,x_yprime,w1,3,false,\n\
                    t,gold,fluency,x_yprime,w1,4,true,4\n";
        let set = read_ratings_csv(text.as_bytes(), Path::new("r.csv")).unwrap();
        assert_eq!(set.records.len(), 2);
        assert_eq!(set.items.len(), 1);
        assert_eq!(set.keys[&("t".to_string(), Dimension::Fluency)], 4);
    }

    #[test]
    fn csv_without_expected_column_and_bad_rows() {
        let ok = "item_id,system,dimension,comparison,worker_id,score,is_test\na,gold,fluency,x_yprime,w,2,0\n";
        assert_eq!(read_ratings_csv(ok.as_bytes(), Path::new("r")).unwrap().records.len(), 1);
        let bad = "item_id,system,dimension,comparison,worker_id,score,is_test\na,gold,fluency,x_yprime,w,7,0\n";
        match read_ratings_csv(bad.as_bytes(), Path::new("r")) {
            Err(RatingsIoError::Invalid { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        let clash = "item_id,system,dimension,comparison,worker_id,score,is_test\n\
                     a,gold,fluency,x_yprime,w,2,0\na,lexrep,fluency,x_yprime,w,2,0\n";
        assert!(read_ratings_csv(clash.as_bytes(), Path::new("r")).is_err());
    }

    #[test]
    fn svg_has_one_bar_per_group() {
        let mut m = BTreeMap::new();
        m.insert(
            GroupKey::new(System::Lexrep, Dimension::Fluency, Comparison::XYPrime),
            GroupMean { mean: 3.0, count: 2 },
        );
        m.insert(
            GroupKey::new(System::Gold, Dimension::Paraphrase, Comparison::XYPrime),
            GroupMean { mean: 4.0, count: 1 },
        );
        let svg = means_svg(&m);
        assert_eq!(svg.matches("<rect").count(), 2 + 2);
        assert!(svg.ends_with("</svg>\n"));
    }
}
