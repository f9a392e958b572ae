//! Threshold-SINR reception over the segments of a transmission.

use crate::units::{db_to_linear, linear_to_db, SimTime};

/// Tracks the worst SINR seen by each segment of a frame or burst.
///
/// For a Wi-Fi PPDU segment 0 is the PHY preamble and segments 1.. are the
/// MPDUs; a MPDU decodes iff both its own worst SINR and the preamble's reach
/// the MCS threshold. For an NR-U burst every segment is a code-block group.
#[derive(Clone, Debug)]
pub struct Reception {
    pub threshold_db: f64,
    pub has_preamble: bool,
    segments: Vec<(SimTime, SimTime)>,
    worst_db: Vec<f64>,
    since: SimTime,
    current_db: f64,
    /// Integral of linear SINR over the data portion, in ns.
    sinr_area: f64,
    data_span: (SimTime, SimTime),
}

impl Reception {
    pub fn new(threshold_db: f64, has_preamble: bool, segments: Vec<(SimTime, SimTime)>, start: SimTime) -> Self {
        let data_span =
            (segments[if has_preamble && segments.len() > 1 { 1 } else { 0 }].0, segments.last().unwrap().1);
        Reception {
            threshold_db,
            has_preamble,
            worst_db: vec![f64::INFINITY; segments.len()],
            segments,
            since: start,
            current_db: f64::INFINITY,
            sinr_area: 0.0,
            data_span,
        }
    }

    /// Sets the SINR that holds from the last flush onwards.
    pub fn set_current(&mut self, sinr_db: f64) {
        self.current_db = sinr_db;
    }

    /// Applies the current SINR to `[since, now)`.
    pub fn flush(&mut self, now: SimTime) {
        if now <= self.since {
            return;
        }
        let (a, b) = (self.since, now);
        for (seg, worst) in self.segments.iter().zip(self.worst_db.iter_mut()) {
            if seg.0 < b && a < seg.1 {
                *worst = worst.min(self.current_db);
            }
        }
        let lo = a.max(self.data_span.0);
        let hi = b.min(self.data_span.1);
        if hi > lo {
            self.sinr_area += db_to_linear(self.current_db) * (hi - lo).0 as f64;
        }
        self.since = now;
    }

    fn data_segments(&self) -> std::ops::Range<usize> {
        if self.has_preamble {
            1..self.segments.len()
        } else {
            0..self.segments.len()
        }
    }

    /// Decoding outcome of each data segment.
    pub fn outcomes(&self) -> Vec<bool> {
        let preamble = if self.has_preamble { self.worst_db[0] } else { f64::INFINITY };
        self.data_segments().map(|i| self.worst_db[i].min(preamble) >= self.threshold_db).collect()
    }

    pub fn data_segment_spans(&self) -> &[(SimTime, SimTime)] {
        &self.segments[self.data_segments()]
    }

    /// Time-averaged SINR over the data portion observed so far.
    pub fn mean_sinr_db(&self) -> f64 {
        let span = (self.since.min(self.data_span.1).saturating_sub(self.data_span.0)).0 as f64;
        if span <= 0.0 {
            return self.current_db;
        }
        linear_to_db(self.sinr_area / span)
    }

    pub fn worst_db(&self) -> &[f64] {
        &self.worst_db
    }
}
