//! Timestamped detection events of one detector channel.

use std::fmt;
use std::str::FromStr;

use rayon::slice::ParallelSliceMut;

use crate::error::{invalid, Error, Result};
use crate::grid::TICKS_PER_SECOND;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Channel {
    Idler = 0,
    Signal1 = 1,
    Signal2 = 2,
}

impl Channel {
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Channel::Idler),
            1 => Some(Channel::Signal1),
            2 => Some(Channel::Signal2),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Idler => "idler",
            Channel::Signal1 => "signal1",
            Channel::Signal2 => "signal2",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idler" => Ok(Channel::Idler),
            "signal1" => Ok(Channel::Signal1),
            "signal2" => Ok(Channel::Signal2),
            other => Err(invalid(format!("unknown channel `{other}`"))),
        }
    }
}

/// Strictly increasing femtosecond timestamps within `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    channel: Channel,
    timestamps: Vec<u64>,
    duration: u64,
}

impl EventStream {
    /// Validates ordering and range; use [`EventStream::from_unsorted`] for raw data.
    pub fn new(channel: Channel, timestamps: Vec<u64>, duration: u64) -> Result<Self> {
        if let Some(i) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::Unsorted {
                stream: channel.name(),
                index: i + 1,
            });
        }
        if let Some(&last) = timestamps.last() {
            if last > duration {
                return Err(invalid(format!(
                    "{channel} timestamp {last} lies beyond the duration {duration}"
                )));
            }
        }
        if duration > i64::MAX as u64 {
            return Err(invalid("duration exceeds the signed tick range"));
        }
        Ok(Self {
            channel,
            timestamps,
            duration,
        })
    }

    /// Sorts, removes duplicate ticks and clamps to `[0, duration]`.
    pub fn from_unsorted(channel: Channel, mut timestamps: Vec<u64>, duration: u64) -> Self {
        for t in &mut timestamps {
            *t = (*t).min(duration);
        }
        timestamps.par_sort_unstable();
        timestamps.dedup();
        Self {
            channel,
            timestamps,
            duration,
        }
    }

    pub fn empty(channel: Channel, duration: u64) -> Self {
        Self {
            channel,
            timestamps: Vec::new(),
            duration,
        }
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    pub fn into_timestamps(self) -> Vec<u64> {
        self.timestamps
    }

    pub fn duration_ticks(&self) -> u64 {
        self.duration
    }

    pub fn duration_seconds(&self) -> f64 {
        self.duration as f64 / TICKS_PER_SECOND
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Events with `start <= t < end`, keeping the full duration.
    pub fn slice_ticks(&self, start: u64, end: u64) -> &[u64] {
        let lo = self.timestamps.partition_point(|&t| t < start);
        let hi = self.timestamps.partition_point(|&t| t < end);
        &self.timestamps[lo..hi]
    }

    /// Union of two streams of the same duration, relabelled.
    pub fn merged(&self, other: &EventStream, channel: Channel) -> EventStream {
        let mut all = Vec::with_capacity(self.len() + other.len());
        all.extend_from_slice(&self.timestamps);
        all.extend_from_slice(&other.timestamps);
        EventStream::from_unsorted(channel, all, self.duration.max(other.duration))
    }
}
