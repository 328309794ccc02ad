use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::stats::{permutation_test, spearman};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RatingError {
    #[error("unknown {kind} {value:?}")]
    UnknownName { kind: &'static str, value: String },
    #[error("score {0} is outside 1..=4")]
    ScoreOutOfRange(i64),
    #[error("gold item {0:?} cannot carry a system output")]
    GoldWithOutput(String),
    #[error("gold item {0:?} has no y' to compare against y")]
    GoldYComparison(String),
    #[error("item {0:?} needs a system output")]
    MissingOutput(String),
}

macro_rules! named_enum {
    ($ty:ident, $kind:literal, { $($var:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$var),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$var => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = RatingError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $($name => Ok($ty::$var),)+
                    other => Err(RatingError::UnknownName { kind: $kind, value: other.to_string() }),
                }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Gold,
    Lexrep,
    MetaphorMasking,
}

named_enum!(System, "system", { Gold => "gold", Lexrep => "lexrep", MetaphorMasking => "metaphor_masking" });

/// Which pair of sentences a paraphrase judgment compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "x_yprime")]
    XYPrime,
    #[serde(rename = "y_yprime")]
    YYPrime,
}

named_enum!(Comparison, "comparison", { XYPrime => "x_yprime", YYPrime => "y_yprime" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Metaphoricity,
    Fluency,
    Paraphrase,
}

named_enum!(Dimension, "dimension", {
    Metaphoricity => "metaphoricity",
    Fluency => "fluency",
    Paraphrase => "paraphrase",
});

/// A sentence under evaluation. For gold items the rated sentence is `y`
/// and the paraphrase judgment compares `x` with `y`; that comparison is
/// filed under [`Comparison::XYPrime`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub item_id: String,
    pub x: String,
    pub y: String,
    pub y_prime: Option<String>,
    pub system: System,
    pub comparison: Comparison,
}

impl EvalItem {
    pub fn new(
        item_id: impl Into<String>,
        x: impl Into<String>,
        y: impl Into<String>,
        y_prime: Option<String>,
        system: System,
        comparison: Comparison,
    ) -> Result<Self, RatingError> {
        let item_id = item_id.into();
        match (system, &y_prime, comparison) {
            (System::Gold, Some(_), _) => return Err(RatingError::GoldWithOutput(item_id)),
            (System::Gold, None, Comparison::YYPrime) => return Err(RatingError::GoldYComparison(item_id)),
            (System::Lexrep | System::MetaphorMasking, None, _) => return Err(RatingError::MissingOutput(item_id)),
            _ => {}
        }
        Ok(Self {
            item_id,
            x: x.into(),
            y: y.into(),
            y_prime,
            system,
            comparison,
        })
    }

    /// The sentence judged for fluency and metaphoricity.
    pub fn rated_sentence(&self) -> &str {
        self.y_prime.as_deref().unwrap_or(&self.y)
    }

    /// The pair shown for a paraphrase judgment.
    pub fn paraphrase_pair(&self) -> (&str, &str) {
        let left = match self.comparison {
            Comparison::XYPrime => &self.x,
            Comparison::YYPrime => &self.y,
        };
        (left, self.rated_sentence())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub item_id: String,
    pub dimension: Dimension,
    pub worker_id: String,
    pub score: u8,
    pub is_test_item: bool,
}

impl RatingRecord {
    pub fn new(
        item_id: impl Into<String>,
        dimension: Dimension,
        worker_id: impl Into<String>,
        score: i64,
        is_test_item: bool,
    ) -> Result<Self, RatingError> {
        Ok(Self {
            item_id: item_id.into(),
            dimension,
            worker_id: worker_id.into(),
            score: check_score(score)?,
            is_test_item,
        })
    }
}

pub fn check_score(score: i64) -> Result<u8, RatingError> {
    if (1..=4).contains(&score) {
        Ok(score as u8)
    } else {
        Err(RatingError::ScoreOutOfRange(score))
    }
}

/// Expected scores of quality-control items, keyed by item and dimension.
pub type TestKeys = BTreeMap<(String, Dimension), u8>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// A test answer fails when it differs from the key by more than this.
    pub max_deviation: u8,
    /// Workers who rated fewer distinct items than this are dropped.
    pub min_tasks: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            max_deviation: 1,
            min_tasks: 2,
        }
    }
}

/// Workers that fail a test item or rated too few distinct items.
pub fn rejected_workers(records: &[RatingRecord], keys: &TestKeys, config: &FilterConfig) -> BTreeSet<String> {
    let mut items: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut rejected = BTreeSet::new();
    for r in records {
        items.entry(&r.worker_id).or_default().insert(&r.item_id);
        if let Some(&want) = keys.get(&(r.item_id.clone(), r.dimension)) {
            if r.score.abs_diff(want) > config.max_deviation {
                rejected.insert(r.worker_id.clone());
            }
        }
    }
    for (w, set) in items {
        if set.len() < config.min_tasks {
            rejected.insert(w.to_string());
        }
    }
    rejected
}

/// Drops every record of the workers named by [`rejected_workers`].
pub fn filter_workers(records: &[RatingRecord], keys: &TestKeys, config: &FilterConfig) -> Vec<RatingRecord> {
    let rejected = rejected_workers(records, keys, config);
    records
        .iter()
        .filter(|r| !rejected.contains(&r.worker_id))
        .cloned()
        .collect()
}

/// Grouping key of the means table. The comparison is set only for the
/// paraphrase dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub system: System,
    pub dimension: Dimension,
    pub comparison: Option<Comparison>,
}

impl GroupKey {
    pub fn new(system: System, dimension: Dimension, comparison: Comparison) -> Self {
        Self {
            system,
            dimension,
            comparison: (dimension == Dimension::Paraphrase).then_some(comparison),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub mean: f64,
    pub count: usize,
}

fn mean_of(sum: u64, count: usize) -> f64 {
    sum as f64 / count as f64
}

/// Means of the non-test records grouped by [`GroupKey`]. Records whose item
/// is unknown are ignored; groups without records are absent.
pub fn mean_scores(records: &[RatingRecord], items: &BTreeMap<String, EvalItem>) -> BTreeMap<GroupKey, GroupMean> {
    let mut acc: BTreeMap<GroupKey, (u64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.is_test_item) {
        let Some(item) = items.get(&r.item_id) else { continue };
        let e = acc
            .entry(GroupKey::new(item.system, r.dimension, item.comparison))
            .or_default();
        e.0 += u64::from(r.score);
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (s, c))| {
            (
                k,
                GroupMean {
                    mean: mean_of(s, c),
                    count: c,
                },
            )
        })
        .collect()
}

/// Per-item mean of each dimension over non-test records.
pub fn item_means(records: &[RatingRecord]) -> BTreeMap<(String, Dimension), f64> {
    let mut acc: BTreeMap<(String, Dimension), (u64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.is_test_item) {
        let e = acc.entry((r.item_id.clone(), r.dimension)).or_default();
        e.0 += u64::from(r.score);
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, c))| (k, mean_of(s, c))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub a: Dimension,
    pub b: Dimension,
    pub comparison: Comparison,
    pub n: usize,
    pub rho: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationConfig {
    pub shuffles: usize,
    pub seed: u64,
    /// Whether gold items take part.
    pub include_gold: bool,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            shuffles: 10_000,
            seed: 0,
            include_gold: false,
        }
    }
}

/// Spearman correlation between per-item means of each pair of dimensions,
/// computed separately for each paraphrase comparison. Pairs with fewer
/// than two items or a constant side are omitted.
pub fn dimension_correlations(
    records: &[RatingRecord],
    items: &BTreeMap<String, EvalItem>,
    config: &CorrelationConfig,
) -> Vec<CorrelationRow> {
    let means = item_means(records);
    let pairs = [
        (Dimension::Fluency, Dimension::Paraphrase),
        (Dimension::Metaphoricity, Dimension::Paraphrase),
        (Dimension::Metaphoricity, Dimension::Fluency),
    ];
    let mut out = Vec::new();
    for comparison in Comparison::ALL.iter().copied() {
        for (a, b) in pairs {
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for item in items.values() {
                if item.comparison != comparison || (!config.include_gold && item.system == System::Gold) {
                    continue;
                }
                let ma = means.get(&(item.item_id.clone(), a));
                let mb = means.get(&(item.item_id.clone(), b));
                if let (Some(&x), Some(&y)) = (ma, mb) {
                    xs.push(x);
                    ys.push(y);
                }
            }
            let Ok(rho) = spearman(&xs, &ys) else { continue };
            let Ok(p_value) = permutation_test(&xs, &ys, config.shuffles, config.seed) else {
                continue;
            };
            out.push(CorrelationRow {
                a,
                b,
                comparison,
                n: xs.len(),
                rho,
                p_value,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(item: &str, dim: Dimension, worker: &str, score: i64) -> RatingRecord {
        RatingRecord::new(item, dim, worker, score, false).unwrap()
    }

    fn test_rec(item: &str, worker: &str, score: i64) -> RatingRecord {
        RatingRecord::new(item, Dimension::Fluency, worker, score, true).unwrap()
    }

    #[test]
    fn item_invariants() {
        assert!(EvalItem::new("g", "x", "y", Some("z".into()), System::Gold, Comparison::XYPrime).is_err());
        assert!(EvalItem::new("g", "x", "y", None, System::Gold, Comparison::YYPrime).is_err());
        assert!(EvalItem::new("l", "x", "y", None, System::Lexrep, Comparison::XYPrime).is_err());
        let i = EvalItem::new("l", "x", "y", Some("z".into()), System::Lexrep, Comparison::YYPrime).unwrap();
        assert_eq!(i.paraphrase_pair(), ("y", "z"));
    }

    #[test]
    fn score_range() {
        assert_eq!(
            RatingRecord::new("i", Dimension::Fluency, "w", 5, false),
            Err(RatingError::ScoreOutOfRange(5))
        );
        assert!(RatingRecord::new("i", Dimension::Fluency, "w", 0, false).is_err());
    }

    #[test]
    fn names_round_trip() {
        for s in System::ALL {
            assert_eq!(s.as_str().parse::<System>().unwrap(), *s);
        }
        assert_eq!("y_yprime".parse::<Comparison>().unwrap(), Comparison::YYPrime);
        assert!("style".parse::<Dimension>().is_err());
    }

    #[test]
    fn filtering_rules() {
        let keys: TestKeys = [(("t1".to_string(), Dimension::Fluency), 4)].into_iter().collect();
        let mut records = vec![rec("a", Dimension::Fluency, "solo", 3)];
        for i in 0..10 {
            records.push(rec(&alloc::format!("i{i}"), Dimension::Fluency, "steady", 3));
        }
        records.push(test_rec("t1", "steady", 3));
        records.push(rec("a", Dimension::Fluency, "careless", 2));
        records.push(test_rec("t1", "careless", 1));
        let kept = filter_workers(&records, &keys, &FilterConfig::default());
        assert!(kept.iter().all(|r| r.worker_id == "steady"));
        assert_eq!(kept.len(), 11);
        assert_eq!(filter_workers(&kept, &keys, &FilterConfig::default()), kept);
    }

    #[test]
    fn means_are_grouped() {
        let items: BTreeMap<String, EvalItem> = [
            EvalItem::new("l1", "x", "y", Some("z".into()), System::Lexrep, Comparison::XYPrime).unwrap(),
            EvalItem::new("g1", "x", "y", None, System::Gold, Comparison::XYPrime).unwrap(),
        ]
        .into_iter()
        .map(|i| (i.item_id.clone(), i))
        .collect();
        let mut records = Vec::new();
        for (w, s) in ["w1", "w2", "w3", "w4", "w5"].iter().zip([3, 4, 4, 4, 4]) {
            records.push(rec("l1", Dimension::Fluency, w, s));
        }
        records.push(rec("g1", Dimension::Paraphrase, "w1", 4));
        let m = mean_scores(&records, &items);
        let flu = m[&GroupKey::new(System::Lexrep, Dimension::Fluency, Comparison::XYPrime)];
        assert_eq!(flu.mean, 3.8);
        assert_eq!(flu.count, 5);
        let key = GroupKey::new(System::Gold, Dimension::Paraphrase, Comparison::XYPrime);
        assert_eq!(key.comparison, Some(Comparison::XYPrime));
        assert_eq!(m[&key].mean, 4.0);
        assert!(!m.contains_key(&GroupKey::new(System::Gold, Dimension::Fluency, Comparison::XYPrime)));
        assert!(mean_scores(&[], &items).is_empty());
    }

    #[test]
    fn correlation_rows() {
        let mut items = BTreeMap::new();
        let mut records = Vec::new();
        for i in 0..6 {
            let id = alloc::format!("m{i}");
            items.insert(
                id.clone(),
                EvalItem::new(&id, "x", "y", Some("z".into()), System::MetaphorMasking, Comparison::XYPrime).unwrap(),
            );
            records.push(rec(&id, Dimension::Fluency, "w", 1 + (i % 4)));
            records.push(rec(&id, Dimension::Paraphrase, "w", 1 + (i % 4)));
            records.push(rec(&id, Dimension::Metaphoricity, "w", 2));
        }
        let rows = dimension_correlations(&records, &items, &CorrelationConfig { shuffles: 200, ..Default::default() });
        // metaphoricity is constant, so only fluency/paraphrase survives
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].a, rows[0].b), (Dimension::Fluency, Dimension::Paraphrase));
        assert!((rows[0].rho - 1.0).abs() < 1e-12);
        assert_eq!(rows[0].n, 6);
    }
}
