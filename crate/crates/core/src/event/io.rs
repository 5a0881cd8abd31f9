//! Native event file formats and the N-MNIST AER importer.
//!
//! Two interchangeable on-disk forms exist for event streams:
//!
//! * JSON-lines: a header line `{"channels":U,"duration":D}` followed by one
//!   object per event `{"t":..,"c":..,"p":1|-1}`.
//! * Packed binary: little-endian header (u32 magic `0x4C534D45`,
//!   u32 channels, u64 duration in microseconds, u64 count) followed by
//!   16-byte records of (u64 t, u32 c, i8 p, 3 pad bytes).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream};

/// Magic number of the packed event format ("EMSL" in little-endian order).
pub const EVENT_MAGIC: u32 = 0x4C53_4D45;

#[derive(Serialize, Deserialize)]
struct JsonHeader {
    channels: u32,
    duration: u64,
}

#[derive(Serialize, Deserialize)]
struct JsonEvent {
    t: u64,
    c: u32,
    p: i8,
}

/// Write a stream in the JSON-lines form.
pub fn write_events_jsonl<W: Write>(mut w: W, stream: &EventStream) -> Result<()> {
    let header = JsonHeader {
        channels: stream.num_channels(),
        duration: stream.duration(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for ev in stream.events() {
        let rec = JsonEvent {
            t: ev.t,
            c: ev.channel,
            p: ev.polarity,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a stream from the JSON-lines form.
pub fn read_events_jsonl<R: Read>(r: R) -> Result<EventStream> {
    let mut lines = BufReader::new(r).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::BadFormat("missing JSONL header line".into()))??;
    let header: JsonHeader = serde_json::from_str(&header_line)?;
    let mut events = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonEvent = serde_json::from_str(&line)?;
        events.push(Event {
            t: rec.t,
            channel: rec.c,
            polarity: rec.p,
        });
    }
    EventStream::new(events, header.channels, header.duration)
}

/// Write a stream in the packed binary form.
pub fn write_events_packed<W: Write>(mut w: W, stream: &EventStream) -> Result<()> {
    w.write_u32::<LittleEndian>(EVENT_MAGIC)?;
    w.write_u32::<LittleEndian>(stream.num_channels())?;
    w.write_u64::<LittleEndian>(stream.duration())?;
    w.write_u64::<LittleEndian>(stream.events().len() as u64)?;
    for ev in stream.events() {
        w.write_u64::<LittleEndian>(ev.t)?;
        w.write_u32::<LittleEndian>(ev.channel)?;
        w.write_i8(ev.polarity)?;
        w.write_all(&[0u8; 3])?;
    }
    Ok(())
}

/// Read a stream from the packed binary form.
pub fn read_events_packed<R: Read>(mut r: R) -> Result<EventStream> {
    let magic = r.read_u32::<LittleEndian>()?;
    if magic != EVENT_MAGIC {
        return Err(Error::BadFormat(format!(
            "bad event magic {magic:#010x}, expected {EVENT_MAGIC:#010x}"
        )));
    }
    let channels = r.read_u32::<LittleEndian>()?;
    let duration = r.read_u64::<LittleEndian>()?;
    let count = r.read_u64::<LittleEndian>()?;
    let mut events = Vec::with_capacity(count as usize);
    let mut pad = [0u8; 3];
    for _ in 0..count {
        let t = r.read_u64::<LittleEndian>()?;
        let channel = r.read_u32::<LittleEndian>()?;
        let polarity = r.read_i8()?;
        r.read_exact(&mut pad)?;
        events.push(Event {
            t,
            channel,
            polarity,
        });
    }
    EventStream::new(events, channels, duration)
}

/// Read a stream from a file, sniffing packed vs. JSON-lines by magic bytes.
pub fn read_events_file(path: &Path) -> Result<EventStream> {
    let mut f = File::open(path)?;
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    let is_packed = u32::from_le_bytes(magic) == EVENT_MAGIC;
    let f = File::open(path)?;
    if is_packed {
        read_events_packed(BufReader::new(f))
    } else {
        read_events_jsonl(BufReader::new(f))
    }
}

/// Write a stream to a file in the packed binary form.
pub fn write_events_file(path: &Path, stream: &EventStream) -> Result<()> {
    let f = File::create(path)?;
    let mut w = BufWriter::new(f);
    write_events_packed(&mut w, stream)?;
    w.flush()?;
    Ok(())
}

/// N-MNIST frame width/height (34 x 34 sensor).
pub const NMNIST_SIDE: usize = 34;

/// Import one N-MNIST sample from its 5-byte big-endian AER record format:
/// byte0 X, byte1 Y, byte2 carries the polarity in bit 7 and timestamp bits
/// 22..16 in bits 6..0, bytes 3-4 hold timestamp bits 15..0; timestamps in
/// microseconds. Channels are mapped row-major as `y * 34 + x`.
pub fn read_nmnist_aer<R: Read>(mut r: R) -> Result<EventStream> {
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if raw.len() % 5 != 0 {
        return Err(Error::BadFormat(format!(
            "AER byte length {} is not a multiple of 5",
            raw.len()
        )));
    }
    let mut events = Vec::with_capacity(raw.len() / 5);
    let mut max_t = 0u64;
    for rec in raw.chunks_exact(5) {
        let x = rec[0] as u32;
        let y = rec[1] as u32;
        let polarity = if rec[2] & 0x80 != 0 { 1i8 } else { -1i8 };
        let t = ((rec[2] as u64 & 0x7F) << 16) | ((rec[3] as u64) << 8) | rec[4] as u64;
        if x as usize >= NMNIST_SIDE || y as usize >= NMNIST_SIDE {
            return Err(Error::BadFormat(format!(
                "AER coordinate ({x},{y}) outside 34x34 frame"
            )));
        }
        max_t = max_t.max(t);
        events.push(Event {
            t,
            channel: y * NMNIST_SIDE as u32 + x,
            polarity,
        });
    }
    // A few samples in the wild carry slightly out-of-order timestamps.
    events.sort_by_key(|e| e.t);
    EventStream::new(events, (NMNIST_SIDE * NMNIST_SIDE) as u32, max_t)
}
