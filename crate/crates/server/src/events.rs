// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Sequenced server-push events with a replay buffer for resuming clients.

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use defectchain_core::telemetry::SensorReading;
use defectchain_core::DefectRecord;
use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::broadcast::{self, error::RecvError};

/// At most one telemetry event per sensor per interval (10 per second).
pub const TELEMETRY_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Telemetry,
    DefectCommitted,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Telemetry => "telemetry",
            EventKind::DefectCommitted => "defect_committed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub data: Value,
}

#[derive(Debug, Clone, Serialize)]
struct DefectCommitted<'a> {
    record: &'a DefectRecord,
    block_number: u64,
}

struct Inner {
    next_seq: u64,
    ring: VecDeque<StreamEvent>,
    last_emit: HashMap<String, Instant>,
}

pub struct EventHub {
    inner: Mutex<Inner>,
    tx: broadcast::Sender<StreamEvent>,
    capacity: usize,
}

impl EventHub {
    /// `capacity` bounds both the replay buffer and each client's queue; a
    /// client that falls further behind is disconnected.
    pub fn new(capacity: usize) -> Self {
        let (tx, _) = broadcast::channel(capacity.max(1));
        EventHub {
            inner: Mutex::new(Inner { next_seq: 1, ring: VecDeque::new(), last_emit: HashMap::new() }),
            tx,
            capacity: capacity.max(1),
        }
    }

    fn push(&self, inner: &mut Inner, kind: EventKind, data: Value) -> u64 {
        let seq = inner.next_seq;
        inner.next_seq += 1;
        let ev = StreamEvent { seq, kind, data };
        if inner.ring.len() == self.capacity {
            inner.ring.pop_front();
        }
        inner.ring.push_back(ev.clone());
        let _ = self.tx.send(ev);
        seq
    }

    /// Publishes a reading unless its sensor was published less than
    /// [`TELEMETRY_INTERVAL`] ago.
    pub fn publish_telemetry(&self, reading: &SensorReading) -> Option<u64> {
        let mut inner = self.inner.lock().expect("event hub lock");
        let now = Instant::now();
        if let Some(t) = inner.last_emit.get(&reading.sensor_id) {
            if now.duration_since(*t) < TELEMETRY_INTERVAL {
                return None;
            }
        }
        inner.last_emit.insert(reading.sensor_id.clone(), now);
        let data = serde_json::to_value(reading).expect("reading serializes");
        Some(self.push(&mut inner, EventKind::Telemetry, data))
    }

    pub fn publish_defect(&self, record: &DefectRecord, block_number: u64) -> u64 {
        let mut inner = self.inner.lock().expect("event hub lock");
        let data = serde_json::to_value(DefectCommitted { record, block_number }).expect("record serializes");
        self.push(&mut inner, EventKind::DefectCommitted, data)
    }

    /// Buffered events after `last_seq` plus a receiver for everything
    /// newer, with no gap or overlap between the two.
    pub fn subscribe(&self, last_seq: u64) -> (Vec<StreamEvent>, broadcast::Receiver<StreamEvent>) {
        let inner = self.inner.lock().expect("event hub lock");
        let rx = self.tx.subscribe();
        let backlog = inner.ring.iter().filter(|e| e.seq > last_seq).cloned().collect();
        (backlog, rx)
    }

    pub fn last_seq(&self) -> u64 {
        self.inner.lock().expect("event hub lock").next_seq - 1
    }
}

/// Live events newer than `after`. Ends when the client lags past its
/// queue, so a slow reader is dropped rather than slowing commits.
pub fn live_events(rx: broadcast::Receiver<StreamEvent>, after: u64) -> impl Stream<Item = StreamEvent> {
    stream::unfold((rx, after), |(mut rx, high)| async move {
        loop {
            match rx.recv().await {
                Ok(e) if e.seq <= high => continue,
                Ok(e) => {
                    let seq = e.seq;
                    return Some((e, (rx, seq)));
                }
                Err(RecvError::Lagged(_)) | Err(RecvError::Closed) => return None,
            }
        }
    })
}
