//! Task assignment and rating bookkeeping.
//!
//! An assignment is a lease: it holds one of the `ratings_per_item` slots of
//! its (item, dimension) until it is answered or expires, so concurrent
//! workers never push a pair past the cap.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::{Duration, Instant};

use metaphor_forge_core::eval::ratings::{
    filter_workers, mean_scores, rejected_workers, Dimension, EvalItem, FilterConfig, GroupKey, GroupMean,
    RatingRecord, TestKeys,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::log::{LogRecord, RatingLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreConfig {
    pub ratings_per_item: usize,
    /// Every `test_every`-th assignment of a worker is a test item.
    pub test_every: u64,
    pub lease_ttl: Duration,
    pub filter: FilterConfig,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            ratings_per_item: 5,
            test_every: 10,
            lease_ttl: Duration::from_secs(600),
            filter: FilterConfig::default(),
        }
    }
}

/// A quality-control item with its expected score per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestItem {
    #[serde(flatten)]
    pub item: EvalItem,
    pub expected: BTreeMap<Dimension, u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub task_id: String,
    pub item_id: String,
    pub dimension: Dimension,
    pub sentences: Vec<String>,
    #[serde(skip)]
    pub is_test: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ack {
    pub task_id: String,
    pub item_id: String,
    pub dimension: Dimension,
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub worker: Option<String>,
    pub worker_ratings: usize,
    pub total_ratings: usize,
    pub complete_items: usize,
    pub total_items: usize,
    pub open_slots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    #[serde(flatten)]
    pub key: GroupKey,
    #[serde(flatten)]
    pub mean: GroupMean,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub rejected_workers: Vec<String>,
}

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error("task {0:?} was not issued to this worker or has expired")]
    UnknownTask(String),
    #[error("task {0:?} has already been answered")]
    Duplicate(String),
    #[error("score {0} is outside 1..=4")]
    OutOfRange(i64),
    #[error("rating log: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("duplicate item id {0:?}")]
    DuplicateItem(String),
    #[error("log line for unknown item {0:?}")]
    UnknownItem(String),
}

#[derive(Debug, Clone)]
struct Lease {
    worker: String,
    pair: Pair,
    issued: Instant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Pair {
    Item(usize, Dimension),
    Test(usize, Dimension),
}

#[derive(Debug, Default)]
struct WorkerState {
    assigned: u64,
    outstanding: Option<String>,
}

pub struct Store {
    config: StoreConfig,
    items: Vec<EvalItem>,
    tests: Vec<TestItem>,
    by_id: HashMap<String, Pair>,
    log: Option<RatingLog>,
    records: Vec<LogRecord>,
    /// Committed plus leased ratings per regular (item, dimension).
    taken: HashMap<(usize, Dimension), usize>,
    committed: HashMap<(usize, Dimension), usize>,
    rated: HashSet<(String, String, Dimension)>,
    answered: HashMap<String, String>,
    leases: HashMap<String, Lease>,
    workers: HashMap<String, WorkerState>,
    nonce: u64,
    next_task: u64,
}

impl Store {
    pub fn new(
        items: Vec<EvalItem>,
        tests: Vec<TestItem>,
        config: StoreConfig,
        log: Option<(RatingLog, Vec<LogRecord>)>,
    ) -> Result<Self, StoreError> {
        let mut by_id = HashMap::new();
        for (i, it) in items.iter().enumerate() {
            if by_id.insert(it.item_id.clone(), Pair::Item(i, Dimension::Fluency)).is_some() {
                return Err(StoreError::DuplicateItem(it.item_id.clone()));
            }
        }
        for (i, t) in tests.iter().enumerate() {
            if by_id.insert(t.item.item_id.clone(), Pair::Test(i, Dimension::Fluency)).is_some() {
                return Err(StoreError::DuplicateItem(t.item.item_id.clone()));
            }
        }
        let nonce = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0)
            ^ u64::from(std::process::id()).rotate_left(32);
        let (log, old) = match log {
            Some((l, r)) => (Some(l), r),
            None => (None, Vec::new()),
        };
        let mut store = Self {
            config,
            items,
            tests,
            by_id,
            log,
            records: Vec::new(),
            taken: HashMap::new(),
            committed: HashMap::new(),
            rated: HashSet::new(),
            answered: HashMap::new(),
            leases: HashMap::new(),
            workers: HashMap::new(),
            nonce,
            next_task: 0,
        };
        for r in old {
            store.commit(r)?;
        }
        Ok(store)
    }

    fn pair_of(&self, item_id: &str, dimension: Dimension) -> Option<Pair> {
        self.by_id.get(item_id).map(|p| match *p {
            Pair::Item(i, _) => Pair::Item(i, dimension),
            Pair::Test(i, _) => Pair::Test(i, dimension),
        })
    }

    fn commit(&mut self, r: LogRecord) -> Result<(), StoreError> {
        let pair = self
            .pair_of(&r.item_id, r.dimension)
            .ok_or_else(|| StoreError::UnknownItem(r.item_id.clone()))?;
        if let Pair::Item(i, d) = pair {
            *self.committed.entry((i, d)).or_default() += 1;
            *self.taken.entry((i, d)).or_default() += 1;
        }
        self.rated.insert((r.worker_id.clone(), r.item_id.clone(), r.dimension));
        self.answered.insert(r.task_id.clone(), r.worker_id.clone());
        self.records.push(r);
        Ok(())
    }

    fn item(&self, pair: Pair) -> (&EvalItem, Dimension) {
        match pair {
            Pair::Item(i, d) => (&self.items[i], d),
            Pair::Test(i, d) => (&self.tests[i].item, d),
        }
    }

    fn expire(&mut self, now: Instant) {
        let ttl = self.config.lease_ttl;
        let stale: Vec<String> = self
            .leases
            .iter()
            .filter(|(_, l)| now.duration_since(l.issued) >= ttl)
            .map(|(k, _)| k.clone())
            .collect();
        for id in stale {
            self.release(&id);
        }
    }

    fn release(&mut self, task_id: &str) -> Option<Lease> {
        let lease = self.leases.remove(task_id)?;
        if let Pair::Item(i, d) = lease.pair {
            if let Some(n) = self.taken.get_mut(&(i, d)) {
                *n -= 1;
            }
        }
        if let Some(w) = self.workers.get_mut(&lease.worker) {
            if w.outstanding.as_deref() == Some(task_id) {
                w.outstanding = None;
            }
        }
        Some(lease)
    }

    fn has_rated(&self, worker: &str, item_id: &str, d: Dimension) -> bool {
        self.rated.contains(&(worker.to_string(), item_id.to_string(), d))
    }

    fn pick_regular(&self, worker: &str) -> Option<Pair> {
        let cap = self.config.ratings_per_item;
        let mut best: Option<(usize, Pair)> = None;
        for (i, it) in self.items.iter().enumerate() {
            for &d in Dimension::ALL {
                let n = self.taken.get(&(i, d)).copied().unwrap_or(0);
                if n >= cap || self.has_rated(worker, &it.item_id, d) {
                    continue;
                }
                if best.is_none_or(|(m, _)| n < m) {
                    best = Some((n, Pair::Item(i, d)));
                }
            }
        }
        best.map(|(_, p)| p)
    }

    fn pick_test(&self, worker: &str) -> Option<Pair> {
        let mut best: Option<(usize, Pair)> = None;
        for (i, t) in self.tests.iter().enumerate() {
            for &d in t.expected.keys() {
                if self.has_rated(worker, &t.item.item_id, d) {
                    continue;
                }
                let n = self
                    .records
                    .iter()
                    .filter(|r| r.item_id == t.item.item_id && r.dimension == d)
                    .count();
                if best.is_none_or(|(m, _)| n < m) {
                    best = Some((n, Pair::Test(i, d)));
                }
            }
        }
        best.map(|(_, p)| p)
    }

    fn assignment(&self, task_id: &str, pair: Pair) -> Assignment {
        let (item, dimension) = self.item(pair);
        let sentences = match dimension {
            Dimension::Paraphrase => {
                let (a, b) = item.paraphrase_pair();
                vec![a.to_string(), b.to_string()]
            }
            _ => vec![item.rated_sentence().to_string()],
        };
        Assignment {
            task_id: task_id.to_string(),
            item_id: item.item_id.clone(),
            dimension,
            sentences,
            is_test: matches!(pair, Pair::Test(..)),
        }
    }

    /// The next task for `worker`, or `None` when nothing is left. A worker
    /// with an unanswered task gets the same task back.
    pub fn next_task(&mut self, worker: &str, now: Instant) -> Option<Assignment> {
        self.expire(now);
        if let Some(id) = self.workers.get(worker).and_then(|w| w.outstanding.clone()) {
            let pair = self.leases[&id].pair;
            return Some(self.assignment(&id, pair));
        }
        let k = self.config.test_every;
        let assigned = self.workers.get(worker).map_or(0, |w| w.assigned);
        let test_slot = k > 0 && (assigned + 1).is_multiple_of(k);
        let pair = if test_slot {
            self.pick_test(worker).or_else(|| self.pick_regular(worker))
        } else {
            self.pick_regular(worker)
        }?;

        let task_id = loop {
            self.next_task += 1;
            let id = format!("{:x}-{}", self.nonce, self.next_task);
            if !self.answered.contains_key(&id) {
                break id;
            }
        };
        if let Pair::Item(i, d) = pair {
            *self.taken.entry((i, d)).or_default() += 1;
        }
        self.leases.insert(
            task_id.clone(),
            Lease {
                worker: worker.to_string(),
                pair,
                issued: now,
            },
        );
        let w = self.workers.entry(worker.to_string()).or_default();
        w.assigned += 1;
        w.outstanding = Some(task_id.clone());
        Some(self.assignment(&task_id, pair))
    }

    /// Validates the answer, appends it to the log and only then records it.
    pub fn submit(&mut self, worker: &str, task_id: &str, score: i64) -> Result<Ack, SubmitError> {
        if let Some(owner) = self.answered.get(task_id) {
            return Err(if owner == worker {
                SubmitError::Duplicate(task_id.to_string())
            } else {
                SubmitError::UnknownTask(task_id.to_string())
            });
        }
        let pair = match self.leases.get(task_id) {
            Some(l) if l.worker == worker => l.pair,
            _ => return Err(SubmitError::UnknownTask(task_id.to_string())),
        };
        if !(1..=4).contains(&score) {
            return Err(SubmitError::OutOfRange(score));
        }
        let (item, dimension) = self.item(pair);
        if self.has_rated(worker, &item.item_id, dimension) {
            return Err(SubmitError::Duplicate(task_id.to_string()));
        }
        let expected = match pair {
            Pair::Test(i, d) => self.tests[i].expected.get(&d).copied(),
            Pair::Item(..) => None,
        };
        let record = LogRecord {
            task_id: task_id.to_string(),
            item_id: item.item_id.clone(),
            system: item.system,
            dimension,
            comparison: item.comparison,
            worker_id: worker.to_string(),
            score: score as u8,
            is_test: matches!(pair, Pair::Test(..)),
            expected,
        };
        if let Some(log) = self.log.as_mut() {
            log.append(&record)?;
        }
        // the lease slot turns into a committed rating
        self.release(task_id);
        let ack = Ack {
            task_id: record.task_id.clone(),
            item_id: record.item_id.clone(),
            dimension,
            score: record.score,
        };
        self.commit(record).expect("item of a leased task is known");
        Ok(ack)
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn ratings(&self) -> Vec<RatingRecord> {
        self.records.iter().map(LogRecord::rating).collect()
    }

    pub fn test_keys(&self) -> TestKeys {
        let mut keys = TestKeys::new();
        for t in &self.tests {
            for (&d, &s) in &t.expected {
                keys.insert((t.item.item_id.clone(), d), s);
            }
        }
        keys
    }

    pub fn items_by_id(&self) -> BTreeMap<String, EvalItem> {
        self.items.iter().map(|i| (i.item_id.clone(), i.clone())).collect()
    }

    /// Committed ratings of an (item, dimension).
    pub fn rating_count(&self, item_id: &str, dimension: Dimension) -> usize {
        match self.pair_of(item_id, dimension) {
            Some(Pair::Item(i, d)) => self.committed.get(&(i, d)).copied().unwrap_or(0),
            Some(Pair::Test(..)) => self
                .records
                .iter()
                .filter(|r| r.item_id == item_id && r.dimension == dimension)
                .count(),
            None => 0,
        }
    }

    pub fn is_complete(&self, item_id: &str) -> bool {
        Dimension::ALL
            .iter()
            .all(|&d| self.rating_count(item_id, d) >= self.config.ratings_per_item)
    }

    pub fn progress(&self, worker: Option<&str>) -> Progress {
        let cap = self.config.ratings_per_item;
        let open_slots = (0..self.items.len())
            .flat_map(|i| Dimension::ALL.iter().map(move |&d| (i, d)))
            .map(|k| cap.saturating_sub(self.committed.get(&k).copied().unwrap_or(0)))
            .sum();
        Progress {
            worker: worker.map(str::to_string),
            worker_ratings: worker.map_or(0, |w| self.records.iter().filter(|r| r.worker_id == w).count()),
            total_ratings: self.records.len(),
            complete_items: self.items.iter().filter(|i| self.is_complete(&i.item_id)).count(),
            total_items: self.items.len(),
            open_slots,
        }
    }

    /// Means per group after worker filtering.
    pub fn summary(&self) -> Summary {
        let ratings = self.ratings();
        let keys = self.test_keys();
        let kept = filter_workers(&ratings, &keys, &self.config.filter);
        let rows = mean_scores(&kept, &self.items_by_id())
            .into_iter()
            .map(|(key, mean)| SummaryRow { key, mean })
            .collect();
        Summary {
            rows,
            rejected_workers: rejected_workers(&ratings, &keys, &self.config.filter)
                .into_iter()
                .collect(),
        }
    }
}
