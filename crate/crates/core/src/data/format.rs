//! Little-endian sample files:
//!
//! ```text
//! "SNNE" | version u16 = 1 | label u16 | duration_ms f32 | n_events u32
//!        | n_events × (time_ms f32, unit u16)
//! ```

use std::fs;
use std::path::Path;

use super::{DataError, Event, EventSample};

pub const MAGIC: &[u8; 4] = b"SNNE";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 4 + 4;
const EVENT_LEN: usize = 4 + 2;

pub fn encode_sample(sample: &EventSample) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + EVENT_LEN * sample.events.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&sample.label.to_le_bytes());
    out.extend_from_slice(&sample.duration_ms.to_le_bytes());
    out.extend_from_slice(&(sample.events.len() as u32).to_le_bytes());
    for ev in &sample.events {
        out.extend_from_slice(&ev.time_ms.to_le_bytes());
        out.extend_from_slice(&ev.unit.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], DataError> {
        let end = self.pos + N;
        if end > self.buf.len() {
            return Err(DataError::Truncated { offset: self.pos, needed: N });
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.buf[self.pos..end]);
        self.pos = end;
        Ok(out)
    }
}

pub fn decode_sample(buf: &[u8]) -> Result<EventSample, DataError> {
    let mut cur = Cursor { buf, pos: 0 };
    let magic: [u8; 4] = cur.take()?;
    if &magic != MAGIC {
        return Err(DataError::BadMagic { offset: 0 });
    }
    let version = u16::from_le_bytes(cur.take()?);
    if version != VERSION {
        return Err(DataError::Version { found: version, offset: 4 });
    }
    let label = u16::from_le_bytes(cur.take()?);
    let duration_ms = f32::from_le_bytes(cur.take()?);
    let n_events = u32::from_le_bytes(cur.take()?) as usize;
    let needed = n_events * EVENT_LEN;
    if buf.len() - cur.pos < needed {
        return Err(DataError::Truncated { offset: cur.pos, needed });
    }
    let mut events = Vec::with_capacity(n_events);
    let mut last = f32::NEG_INFINITY;
    for index in 0..n_events {
        let offset = cur.pos;
        let time_ms = f32::from_le_bytes(cur.take()?);
        let unit = u16::from_le_bytes(cur.take()?);
        if time_ms < last {
            return Err(DataError::Unsorted { index, offset });
        }
        last = time_ms;
        events.push(Event { time_ms, unit });
    }
    if cur.pos != buf.len() {
        return Err(DataError::Trailing { offset: cur.pos, extra: buf.len() - cur.pos });
    }
    Ok(EventSample { events, label, duration_ms })
}

pub fn read_sample(path: impl AsRef<Path>) -> Result<EventSample, DataError> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|source| DataError::Io { path: path.into(), source })?;
    decode_sample(&buf)
}

pub fn write_sample(sample: &EventSample, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    if let Some(index) = sample.events.windows(2).position(|w| w[1].time_ms < w[0].time_ms) {
        return Err(DataError::Unsorted { index: index + 1, offset: HEADER_LEN + (index + 1) * EVENT_LEN });
    }
    fs::write(path, encode_sample(sample)).map_err(|source| DataError::Io { path: path.into(), source })
}
