//! The `.evt` multi-channel timestamp format.
//!
//! Layout, all integers little-endian: the 8-byte magic `SPDCEVT1`, a `u32`
//! channel count, then per channel a `u8` channel id, a `u64` event count, a
//! `u64` duration in femtosecond ticks and that many `u64` timestamps in
//! ascending order.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::stream::{Channel, EventStream};

pub const MAGIC: &[u8; 8] = b"SPDCEVT1";
/// Bytes before the first channel block.
pub const FILE_HEADER_BYTES: u64 = 12;
/// Bytes of each channel block before its timestamps.
pub const CHANNEL_HEADER_BYTES: u64 = 17;

const CHUNK_EVENTS: usize = 1 << 16;

/// Exact size of a file holding `streams`.
pub fn encoded_len(streams: &[EventStream]) -> u64 {
    FILE_HEADER_BYTES
        + streams
            .iter()
            .map(|s| CHANNEL_HEADER_BYTES + 8 * s.len() as u64)
            .sum::<u64>()
}

pub fn encode<W: Write>(streams: &[EventStream], mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    let count =
        u32::try_from(streams.len()).map_err(|_| Error::Format("too many channels".into()))?;
    w.write_all(&count.to_le_bytes())?;
    for s in streams {
        w.write_all(&[s.channel().id()])?;
        w.write_all(&(s.len() as u64).to_le_bytes())?;
        w.write_all(&s.duration_ticks().to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * CHUNK_EVENTS);
        for chunk in s.timestamps().chunks(CHUNK_EVENTS) {
            buf.clear();
            buf.extend(chunk.iter().flat_map(|t| t.to_le_bytes()));
            w.write_all(&buf)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn truncated(e: std::io::Error, what: &str) -> Error {
    if e.kind() == ErrorKind::UnexpectedEof {
        Error::Format(format!("file is truncated inside {what}"))
    } else {
        Error::Io(e)
    }
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| truncated(e, what))?;
    Ok(u64::from_le_bytes(b))
}

pub fn decode<R: Read>(mut r: R) -> Result<Vec<EventStream>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| truncated(e, "the magic"))?;
    if &magic != MAGIC {
        return Err(Error::Format("not an SPDCEVT1 event file".into()));
    }
    let mut count = [0u8; 4];
    r.read_exact(&mut count)
        .map_err(|e| truncated(e, "the channel count"))?;
    let channels = u32::from_le_bytes(count);
    let mut out: Vec<EventStream> = Vec::new();
    for _ in 0..channels {
        let mut id = [0u8; 1];
        r.read_exact(&mut id)
            .map_err(|e| truncated(e, "a channel header"))?;
        let channel = Channel::from_id(id[0])
            .ok_or_else(|| Error::Format(format!("unknown channel id {}", id[0])))?;
        if out.iter().any(|s| s.channel() == channel) {
            return Err(Error::Format(format!("channel {channel} appears twice")));
        }
        let events = read_u64(&mut r, "a channel header")?;
        let duration = read_u64(&mut r, "a channel header")?;
        let what = format!("channel {channel} ({events} declared events)");
        let mut timestamps = Vec::new();
        let mut remaining = events;
        let mut buf = vec![0u8; 8 * CHUNK_EVENTS];
        while remaining > 0 {
            let n = remaining.min(CHUNK_EVENTS as u64) as usize;
            r.read_exact(&mut buf[..8 * n])
                .map_err(|e| truncated(e, &what))?;
            timestamps.extend(
                buf[..8 * n]
                    .chunks_exact(8)
                    .map(|b| u64::from_le_bytes(b.try_into().unwrap())),
            );
            remaining -= n as u64;
        }
        out.push(EventStream::new(channel, timestamps, duration)?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format(
            "trailing bytes after the last channel".into(),
        ));
    }
    Ok(out)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_events(streams: &[EventStream], path: &Path) -> Result<()> {
    super::atomic_write(path, |file| encode(streams, BufWriter::new(file)))
}

pub fn read_events(path: &Path) -> Result<Vec<EventStream>> {
    let file = File::open(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    decode(BufReader::new(file))
}
