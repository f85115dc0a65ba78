//! Mobility traces and per-user mobility profiling.
//!
//! A profile maps each location to the predicted probability that the
//! user visits it during one future period. Two estimators are provided:
//! a frequency count over past periods and a Poisson-process model of
//! per-period visit counts. Profiling quality is scored with ROC/AUC
//! against held-out periods.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::location::{LocationId, LocationSet};

const DAY_SECS: i64 = 86_400;

/// Bucketing granularity for visit periods. Days are UTC calendar days;
/// weeks are Monday-aligned seven-day blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Period {
    Daily,
    Weekly,
}

impl Period {
    pub fn len_secs(self) -> i64 {
        match self {
            Period::Daily => DAY_SECS,
            Period::Weekly => 7 * DAY_SECS,
        }
    }

    /// Index of the period containing `t` (epoch seconds). The +3 day
    /// shift aligns week boundaries to Mondays (epoch day 0 was a
    /// Thursday).
    pub fn index(self, t: i64) -> i64 {
        match self {
            Period::Daily => t.div_euclid(DAY_SECS),
            Period::Weekly => (t.div_euclid(DAY_SECS) + 3).div_euclid(7),
        }
    }
}

/// One observation: a user seen at a location at a point in time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub user: String,
    pub time: i64,
    pub location: LocationId,
}

/// A time-ordered event log with a train/test split boundary.
///
/// Events strictly before `split_time` are the profiling (training)
/// window; events at or after it are the held-out evaluation window.
#[derive(Debug, Clone)]
pub struct TraceSet {
    events: Vec<TraceEvent>,
    period: Period,
    split_time: i64,
    start_time: i64,
    end_time: i64, // exclusive
    by_user: BTreeMap<String, Vec<u32>>,
}

impl TraceSet {
    /// Builds a trace set, deriving the observation window from the
    /// events themselves.
    pub fn new(events: Vec<TraceEvent>, period: Period, split_time: i64) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::invalid("trace set must contain events"));
        }
        let start = events.iter().map(|e| e.time).min().unwrap();
        let end = events.iter().map(|e| e.time).max().unwrap() + 1;
        Self::with_window(events, period, split_time, start, end)
    }

    /// Builds a trace set with an explicit observation window
    /// `[start_time, end_time)`.
    pub fn with_window(
        mut events: Vec<TraceEvent>,
        period: Period,
        split_time: i64,
        start_time: i64,
        end_time: i64,
    ) -> Result<Self> {
        if events.iter().any(|e| e.time < 0) {
            return Err(Error::invalid("event times must be non-negative"));
        }
        if !(start_time < split_time && split_time <= end_time) {
            return Err(Error::invalid(format!(
                "split boundary {split_time} outside observed range [{start_time}, {end_time})"
            )));
        }
        events.sort_by(|a, b| {
            a.time.cmp(&b.time).then_with(|| a.user.cmp(&b.user)).then_with(|| {
                a.location.cmp(&b.location)
            })
        });
        let mut by_user: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for (i, e) in events.iter().enumerate() {
            by_user.entry(e.user.clone()).or_default().push(i as u32);
        }
        Ok(TraceSet { events, period, split_time, start_time, end_time, by_user })
    }

    /// Loads the traces CSV format: header `user,timestamp,loc_id`.
    pub fn load_csv(path: impl AsRef<Path>, period: Period, split_time: i64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text, period, split_time)
    }

    pub fn parse_csv(text: &str, period: Period, split_time: i64) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) =
            lines.next().ok_or_else(|| Error::parse(1, "empty file, expected header"))?;
        if header.trim_end_matches('\r').trim() != "user,timestamp,loc_id" {
            return Err(Error::parse(
                1,
                format!("bad header {header:?}, expected user,timestamp,loc_id"),
            ));
        }
        let mut events = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut f = line.split(',');
            let user = f
                .next()
                .ok_or_else(|| Error::parse(lineno, "missing user column"))?
                .trim()
                .to_string();
            let time: i64 = f
                .next()
                .ok_or_else(|| Error::parse(lineno, "missing timestamp column"))?
                .trim()
                .parse()
                .map_err(|e| Error::parse(lineno, format!("bad timestamp: {e}")))?;
            let loc: usize = f
                .next()
                .ok_or_else(|| Error::parse(lineno, "missing loc_id column"))?
                .trim()
                .parse()
                .map_err(|e| Error::parse(lineno, format!("bad loc_id: {e}")))?;
            if f.next().is_some() {
                return Err(Error::parse(lineno, "too many columns"));
            }
            events.push(TraceEvent { user, time, location: LocationId(loc) });
        }
        Self::new(events, period, split_time)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("user,timestamp,loc_id\n");
        for e in &self.events {
            out.push_str(&format!("{},{},{}\n", e.user, e.time, e.location.0));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn period(&self) -> Period {
        self.period
    }

    pub fn split_time(&self) -> i64 {
        self.split_time
    }

    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.by_user.keys().map(|s| s.as_str())
    }

    pub fn has_user(&self, user: &str) -> bool {
        self.by_user.contains_key(user)
    }

    pub fn user_events(&self, user: &str) -> Option<impl Iterator<Item = &TraceEvent>> {
        self.by_user.get(user).map(|ids| ids.iter().map(|&i| &self.events[i as usize]))
    }

    /// Number of whole periods in the training window.
    pub fn train_period_count(&self) -> usize {
        let first = self.period.index(self.start_time);
        let last = self.period.index(self.split_time - 1);
        (last - first + 1) as usize
    }

    /// Number of whole periods in the held-out window.
    pub fn test_period_count(&self) -> usize {
        let first = self.period.index(self.split_time);
        let last = self.period.index(self.end_time - 1);
        (last - first + 1) as usize
    }

    /// Checks that every event's location exists in `ls`.
    pub fn validate_against(&self, ls: &LocationSet) -> Result<()> {
        for e in &self.events {
            if e.location.0 >= ls.len() {
                return Err(Error::invalid(format!(
                    "trace event for user {} references unknown location {}",
                    e.user, e.location
                )));
            }
        }
        Ok(())
    }
}

/// Per-user map from location to predicted next-period visit probability.
#[derive(Debug, Clone)]
pub struct MobilityProfile {
    pub user: String,
    pub probs: Vec<f64>,
}

impl MobilityProfile {
    pub fn prob(&self, l: LocationId) -> f64 {
        self.probs[l.0]
    }
}

fn user_train_events<'a>(
    traces: &'a TraceSet,
    user: &str,
) -> Result<impl Iterator<Item = &'a TraceEvent>> {
    let iter = traces
        .user_events(user)
        .ok_or_else(|| Error::NotFound(format!("user {user}")))?;
    Ok(iter.filter(|e| e.time < traces.split_time))
}

/// Frequency profiling: the fraction of training periods with at least
/// one visit to each location.
pub fn profile_frequency(traces: &TraceSet, ls: &LocationSet, user: &str) -> Result<MobilityProfile> {
    let periods = traces.train_period_count();
    let mut seen: BTreeSet<(i64, usize)> = BTreeSet::new();
    for e in user_train_events(traces, user)? {
        seen.insert((traces.period().index(e.time), e.location.0));
    }
    let mut probs = vec![0.0; ls.len()];
    for (_, loc) in seen {
        probs[loc] += 1.0;
    }
    for p in &mut probs {
        *p /= periods as f64;
    }
    Ok(MobilityProfile { user: user.to_string(), probs })
}

/// Poisson profiling: the mean per-period visit count lambda per location
/// gives visit probability `1 - exp(-lambda)`.
pub fn profile_poisson(traces: &TraceSet, ls: &LocationSet, user: &str) -> Result<MobilityProfile> {
    let periods = traces.train_period_count() as f64;
    let mut counts = vec![0.0f64; ls.len()];
    for e in user_train_events(traces, user)? {
        counts[e.location.0] += 1.0;
    }
    let probs = counts.into_iter().map(|c| 1.0 - (-c / periods).exp()).collect();
    Ok(MobilityProfile { user: user.to_string(), probs })
}

/// Locations whose profiled probability strictly exceeds the threshold.
pub fn frequent_locations(profile: &MobilityProfile, delta: f64) -> Result<Vec<LocationId>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("threshold {delta} must lie in (0, 1)")));
    }
    Ok(profile
        .probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > delta)
        .map(|(i, _)| LocationId(i))
        .collect())
}

/// Uniform draw over the user's frequent locations; `None` when the user
/// has none and therefore uploads nothing.
pub fn pick_frequent_location(
    profile: &MobilityProfile,
    delta: f64,
    rng: &mut (impl Rng + ?Sized),
) -> Result<Option<LocationId>> {
    let frequent = frequent_locations(profile, delta)?;
    if frequent.is_empty() {
        return Ok(None);
    }
    let i = rng.random_range(0..frequent.len());
    Ok(Some(frequent[i]))
}

/// ROC curve and AUC for a set of scored binary outcomes. Equal scores
/// are swept together, which averages ties in the AUC.
pub fn roc_auc(samples: &[(f64, bool)]) -> Result<(Vec<(f64, f64)>, f64)> {
    let pos = samples.iter().filter(|s| s.1).count();
    let neg = samples.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "ROC needs both label classes ({pos} positive, {neg} negative)"
        )));
    }
    let mut sorted: Vec<(f64, bool)> = samples.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores must not be NaN"));

    let mut curve = vec![(0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut auc = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        let mut dtp = 0usize;
        let mut dfp = 0usize;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                dtp += 1;
            } else {
                dfp += 1;
            }
            i += 1;
        }
        let (fpr0, tpr0) = *curve.last().unwrap();
        tp += dtp;
        fp += dfp;
        let fpr1 = fp as f64 / neg as f64;
        let tpr1 = tp as f64 / pos as f64;
        auc += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0;
        curve.push((fpr1, tpr1));
    }
    Ok((curve, auc))
}
