use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// Default satisfied-latency threshold `T`, seconds.
pub const DEFAULT_APDEX_THRESHOLD_S: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ApdexClass {
    Satisfied,
    Tolerating,
    Frustrated,
    Failed,
}

/// One timed request. Timestamps are monotonic seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestTimer {
    pub kind: String,
    pub start_s: f64,
    pub end_s: f64,
    pub threshold_s: f64,
    /// The request errored; classified as failed whatever its latency.
    pub failed: bool,
}

impl RequestTimer {
    pub fn new(kind: impl Into<String>, start_s: f64, end_s: f64, threshold_s: f64) -> Result<Self, ProtocolError> {
        if !(end_s >= start_s) {
            return Err(ProtocolError::InvalidTimer(format!(
                "end {end_s} before start {start_s}"
            )));
        }
        if !(threshold_s > 0.0) {
            return Err(ProtocolError::InvalidTimer(format!(
                "threshold {threshold_s} must be positive"
            )));
        }
        Ok(RequestTimer {
            kind: kind.into(),
            start_s,
            end_s,
            threshold_s,
            failed: false,
        })
    }

    pub fn mark_failed(mut self) -> Self {
        self.failed = true;
        self
    }

    pub fn latency_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Satisfied up to `T` inclusive, tolerating up to `4T` inclusive, frustrated beyond.
pub fn classify_request(timer: &RequestTimer) -> ApdexClass {
    let latency = timer.latency_s();
    if timer.failed {
        ApdexClass::Failed
    } else if latency <= timer.threshold_s {
        ApdexClass::Satisfied
    } else if latency <= 4.0 * timer.threshold_s {
        ApdexClass::Tolerating
    } else {
        ApdexClass::Frustrated
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApdexCounters {
    pub satisfied: u64,
    pub tolerating: u64,
    pub frustrated: u64,
    pub failed: u64,
}

impl ApdexCounters {
    pub fn total(&self) -> u64 {
        self.satisfied + self.tolerating + self.frustrated + self.failed
    }

    pub fn record(&mut self, class: ApdexClass) {
        match class {
            ApdexClass::Satisfied => self.satisfied += 1,
            ApdexClass::Tolerating => self.tolerating += 1,
            ApdexClass::Frustrated => self.frustrated += 1,
            ApdexClass::Failed => self.failed += 1,
        }
    }
}

/// `(satisfied + tolerating / 2) / total`.
pub fn apdex(c: &ApdexCounters) -> Result<f64, ProtocolError> {
    let total = c.total();
    if total == 0 {
        return Err(ProtocolError::NoSamples);
    }
    Ok((c.satisfied as f64 + c.tolerating as f64 / 2.0) / total as f64)
}

/// Per-request-kind counters, printed one row per kind in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApdexTable {
    pub rows: Vec<(String, ApdexCounters)>,
}

impl ApdexTable {
    pub fn record(&mut self, kind: &str, class: ApdexClass) {
        match self.rows.iter_mut().find(|(k, _)| k == kind) {
            Some((_, c)) => c.record(class),
            None => {
                let mut c = ApdexCounters::default();
                c.record(class);
                self.rows.push((kind.to_string(), c));
            }
        }
    }

    pub fn counters(&self, kind: &str) -> Option<&ApdexCounters> {
        self.rows.iter().find(|(k, _)| k == kind).map(|(_, c)| c)
    }

    /// Columns: request, `C_s`, `C_t`, `C_total`, score.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16}{:>6}{:>6}{:>9}  Apdex Score",
            "Request", "C_s", "C_t", "C_total"
        );
        for (kind, c) in &self.rows {
            let score = apdex(c).map(|s| format!("{s:?}")).unwrap_or_else(|_| "n/a".into());
            let _ = writeln!(
                out,
                "{:<16}{:>6}{:>6}{:>9}  {}",
                kind,
                c.satisfied,
                c.tolerating,
                c.total(),
                score
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn timer(latency: f64) -> RequestTimer {
        RequestTimer::new("detect", 10.0, 10.0 + latency, 0.5).unwrap()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_request(&timer(0.3)), ApdexClass::Satisfied);
        assert_eq!(
            classify_request(&RequestTimer::new("d", 0.0, 0.5, 0.5).unwrap()),
            ApdexClass::Satisfied
        );
        assert_eq!(classify_request(&timer(1.2)), ApdexClass::Tolerating);
        assert_eq!(
            classify_request(&RequestTimer::new("d", 0.0, 2.0, 0.5).unwrap()),
            ApdexClass::Tolerating
        );
        assert_eq!(classify_request(&timer(2.5)), ApdexClass::Frustrated);
        assert_eq!(classify_request(&timer(0.1).mark_failed()), ApdexClass::Failed);
    }

    #[test]
    fn timer_validation() {
        assert!(RequestTimer::new("d", 2.0, 1.0, 0.5).is_err());
        assert!(RequestTimer::new("d", 1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn table_one_scores() {
        let detect = ApdexCounters {
            satisfied: 97,
            tolerating: 3,
            frustrated: 0,
            failed: 0,
        };
        let track = ApdexCounters {
            satisfied: 98,
            tolerating: 2,
            frustrated: 0,
            failed: 0,
        };
        assert_eq!(apdex(&detect).unwrap(), 0.985);
        assert_eq!(apdex(&track).unwrap(), 0.99);
        let none = ApdexCounters {
            satisfied: 0,
            tolerating: 0,
            frustrated: 6,
            failed: 4,
        };
        assert_eq!(apdex(&none).unwrap(), 0.0);
        assert_eq!(apdex(&ApdexCounters::default()), Err(ProtocolError::NoSamples));
    }

    #[test]
    fn render_shape() {
        let mut t = ApdexTable::default();
        for i in 0..100 {
            t.record(
                "Object Detect",
                if i < 3 {
                    ApdexClass::Tolerating
                } else {
                    ApdexClass::Satisfied
                },
            );
        }
        let text = t.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("Request"));
        assert!(lines[1].starts_with("Object Detect"));
        assert!(lines[1].ends_with(" 97     3      100  0.985"), "{}", lines[1]);
    }

    fn counters() -> impl Strategy<Value = ApdexCounters> {
        (0u64..50, 0u64..50, 0u64..50, 0u64..50)
            .prop_filter("nonempty", |(a, b, c, d)| a + b + c + d > 0)
            .prop_map(|(satisfied, tolerating, frustrated, failed)| ApdexCounters {
                satisfied,
                tolerating,
                frustrated,
                failed,
            })
    }

    proptest! {
        #[test]
        fn score_in_unit_interval(c in counters()) {
            let s = apdex(&c).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s == 1.0, c.satisfied == c.total());
        }

        #[test]
        fn reclassifying_frustrated_never_lowers(c in counters()) {
            prop_assume!(c.frustrated > 0);
            let base = apdex(&c).unwrap();
            let tol = ApdexCounters { frustrated: c.frustrated - 1, tolerating: c.tolerating + 1, ..c };
            let sat = ApdexCounters { frustrated: c.frustrated - 1, satisfied: c.satisfied + 1, ..c };
            prop_assert!(apdex(&tol).unwrap() >= base);
            prop_assert!(apdex(&sat).unwrap() >= apdex(&tol).unwrap());
        }

        #[test]
        fn classification_monotone_in_latency(a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(classify_request(&timer(lo)) <= classify_request(&timer(hi)));
        }
    }
}
