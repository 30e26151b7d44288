//! Latest-wins slot for hand positions.

use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub seq: u64,
    pub position: [f64; 3],
}

#[derive(Debug, Default)]
struct Slot {
    latest: Option<Pose>,
    /// `latest` has not been taken by the loop yet.
    fresh: bool,
    last_seq: Option<u64>,
    received: u64,
    dropped: u64,
}

/// Holds only the most recent hand pose. Poses overwritten before the loop
/// consumed them, and poses with a non-increasing seq, count as dropped.
#[derive(Debug, Default)]
pub struct PoseMailbox {
    slot: Mutex<Slot>,
}

impl PoseMailbox {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `pose`; returns false if it was discarded as out of order.
    pub fn post(&self, pose: Pose) -> bool {
        let mut s = self.slot.lock().unwrap();
        s.received += 1;
        if s.last_seq.is_some_and(|last| pose.seq <= last) {
            s.dropped += 1;
            return false;
        }
        if s.fresh {
            s.dropped += 1;
        }
        s.last_seq = Some(pose.seq);
        s.latest = Some(pose);
        s.fresh = true;
        true
    }

    /// The newest pose if it arrived since the previous call.
    pub fn take_fresh(&self) -> Option<Pose> {
        let mut s = self.slot.lock().unwrap();
        if s.fresh {
            s.fresh = false;
            s.latest
        } else {
            None
        }
    }

    /// The newest pose regardless of freshness.
    pub fn latest(&self) -> Option<Pose> {
        self.slot.lock().unwrap().latest
    }

    /// Forgets the stored pose at the end of a drag. The next drag may
    /// start its seq numbering afresh.
    pub fn clear(&self) {
        let mut s = self.slot.lock().unwrap();
        s.latest = None;
        s.fresh = false;
        s.last_seq = None;
    }

    /// (received, dropped)
    pub fn counters(&self) -> (u64, u64) {
        let s = self.slot.lock().unwrap();
        (s.received, s.dropped)
    }
}
