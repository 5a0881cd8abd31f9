//! Event streams, binary spike tensors, and the encoders that convert raw
//! signals (images, waveforms, native event files) into them.

pub mod io;

use ndarray::{Array2, ArrayView2, s};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

/// One timestamped input event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Timestamp in microseconds.
    pub t: u64,
    /// Channel (pixel or frequency band) index.
    pub channel: u32,
    /// Polarity, +1 or -1.
    pub polarity: i8,
}

/// Sparse list of timestamped channel events with polarity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    events: Vec<Event>,
    num_channels: u32,
    /// Stream extent in microseconds; at least the last timestamp.
    duration: u64,
}

impl EventStream {
    /// Build a stream, validating ordering, channel bounds, polarity, and
    /// duration.
    pub fn new(events: Vec<Event>, num_channels: u32, duration: u64) -> Result<Self> {
        let mut last = 0u64;
        for (i, ev) in events.iter().enumerate() {
            if ev.t < last {
                return Err(Error::InvalidStream(format!(
                    "timestamps decrease at event {i}"
                )));
            }
            if ev.channel >= num_channels {
                return Err(Error::InvalidStream(format!(
                    "channel {} out of range at event {i}",
                    ev.channel
                )));
            }
            if ev.polarity != 1 && ev.polarity != -1 {
                return Err(Error::InvalidStream(format!(
                    "polarity {} at event {i}",
                    ev.polarity
                )));
            }
            last = ev.t;
        }
        if duration < last {
            return Err(Error::InvalidStream(format!(
                "duration {duration} precedes last timestamp {last}"
            )));
        }
        Ok(Self {
            events,
            num_channels,
            duration,
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn num_channels(&self) -> u32 {
        self.num_channels
    }

    pub fn duration(&self) -> u64 {
        self.duration
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Dense binary T x U spike matrix; the form all dynamics consume.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTensor {
    data: Array2<u8>,
}

impl SpikeTensor {
    /// All-zero tensor with `t` steps and `u` channels.
    pub fn zeros(t: usize, u: usize) -> Self {
        assert!(t >= 1 && u >= 1, "SpikeTensor needs T >= 1 and U >= 1");
        Self {
            data: Array2::zeros((t, u)),
        }
    }

    /// Wrap an existing binary matrix.
    pub fn from_array(data: Array2<u8>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::DimensionMismatch(
                "spike tensor needs T >= 1 and U >= 1".into(),
            ));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::DimensionMismatch(
                "spike tensor entries must be 0 or 1".into(),
            ));
        }
        Ok(Self { data })
    }

    /// Number of time steps T.
    pub fn steps(&self) -> usize {
        self.data.nrows()
    }

    /// Number of channels U.
    pub fn channels(&self) -> usize {
        self.data.ncols()
    }

    pub fn get(&self, t: usize, u: usize) -> u8 {
        self.data[(t, u)]
    }

    pub fn set(&mut self, t: usize, u: usize, v: u8) {
        debug_assert!(v <= 1);
        self.data[(t, u)] = v;
    }

    pub fn view(&self) -> ArrayView2<'_, u8> {
        self.data.view()
    }

    /// Total number of ones.
    pub fn popcount(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Spike row at step `t` as a contiguous slice.
    pub fn row(&self, t: usize) -> &[u8] {
        self.data.row(t).to_slice().expect("row-major layout")
    }
}

/// Bin an event stream into a T-step spike tensor.
///
/// An event at timestamp `t` lands in row `floor(t*T/duration)` clamped to
/// `[0, T-1]`; multiple events in one cell OR-combine. With
/// `merge_polarity = false` the channel count doubles and negative-polarity
/// events occupy the upper half.
pub fn bin_events(stream: &EventStream, t_steps: usize, merge_polarity: bool) -> Result<SpikeTensor> {
    assert!(t_steps >= 1, "need T >= 1");
    if stream.duration() == 0 {
        return Err(Error::ZeroDurationStream);
    }
    let base_u = stream.num_channels() as usize;
    let u = if merge_polarity { base_u } else { 2 * base_u };
    let mut out = SpikeTensor::zeros(t_steps, u);
    let dur = stream.duration() as u128;
    for ev in stream.events() {
        let row = ((ev.t as u128 * t_steps as u128) / dur).min(t_steps as u128 - 1) as usize;
        let col = if merge_polarity || ev.polarity == 1 {
            ev.channel as usize
        } else {
            base_u + ev.channel as usize
        };
        out.set(row, col, 1);
    }
    Ok(out)
}

/// Rate-encode an image with pixel values in [0, 1] as independent
/// Bernoulli(p) spikes at each of `t_steps` steps, flattened row-major to
/// `U = H*W` channels. Deterministic given the seed.
pub fn rate_encode<F: Scalar>(image: ArrayView2<'_, F>, t_steps: usize, seed: u64) -> Result<SpikeTensor> {
    assert!(t_steps >= 1, "need T >= 1");
    let (h, w) = image.dim();
    let u = h * w;
    for (i, &p) in image.iter().enumerate() {
        if !(p >= F::zero() && p <= F::one()) {
            return Err(Error::PixelOutOfRange {
                index: i,
                value: p.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let mut rng = seed::rng(seed, 0x7261_7465); // "rate"
    let mut out = SpikeTensor::zeros(t_steps, u);
    for t in 0..t_steps {
        for (i, &p) in image.iter().enumerate() {
            if F::uniform_01(&mut rng) < p {
                out.set(t, i, 1);
            }
        }
    }
    Ok(out)
}

/// Delta-modulator threshold encoding of a real-valued signal.
///
/// A reference tracks the signal: whenever the sample exceeds the reference
/// by `delta` a +1 event is emitted and the reference steps up by `delta`
/// (repeating while still exceeded); symmetric for -`delta` with -1 events.
/// Timestamps are sample indices.
pub fn threshold_encode<F: Scalar>(signal: &[F], delta: F) -> Result<EventStream> {
    assert!(delta > F::zero(), "delta must be positive");
    assert!(!signal.is_empty(), "signal must be non-empty");
    for (i, &x) in signal.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFiniteSample(i));
        }
    }
    let mut reference = signal[0];
    let mut events = Vec::new();
    for (k, &x) in signal.iter().enumerate() {
        while x - reference >= delta {
            events.push(Event {
                t: k as u64,
                channel: 0,
                polarity: 1,
            });
            reference += delta;
        }
        while reference - x >= delta {
            events.push(Event {
                t: k as u64,
                channel: 0,
                polarity: -1,
            });
            reference -= delta;
        }
    }
    let duration = (signal.len() - 1) as u64;
    EventStream::new(events, 1, duration)
}

/// Center-crop a tensor whose channels are an H x W grid down to h x w.
pub fn center_crop(
    tensor: &SpikeTensor,
    full_h: usize,
    full_w: usize,
    crop_h: usize,
    crop_w: usize,
) -> Result<SpikeTensor> {
    if tensor.channels() != full_h * full_w {
        return Err(Error::DimensionMismatch(format!(
            "tensor has {} channels, expected {}x{}={}",
            tensor.channels(),
            full_h,
            full_w,
            full_h * full_w
        )));
    }
    if crop_h > full_h || crop_w > full_w {
        return Err(Error::DimensionMismatch(format!(
            "crop {crop_h}x{crop_w} exceeds frame {full_h}x{full_w}"
        )));
    }
    let r0 = (full_h - crop_h) / 2;
    let c0 = (full_w - crop_w) / 2;
    let t_steps = tensor.steps();
    let mut out = SpikeTensor::zeros(t_steps, crop_h * crop_w);
    for t in 0..t_steps {
        for r in 0..crop_h {
            for c in 0..crop_w {
                let src = (r0 + r) * full_w + (c0 + c);
                out.set(t, r * crop_w + c, tensor.get(t, src));
            }
        }
    }
    Ok(out)
}

/// Flip each entry independently with probability `p`. Deterministic given
/// the seed; `p = 0` is the identity and `p = 1` the bitwise complement.
pub fn inject_input_noise(tensor: &SpikeTensor, p: f64, seed: u64) -> Result<SpikeTensor> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::DimensionMismatch(format!(
            "flip probability {p} outside [0, 1]"
        )));
    }
    let mut rng = seed::rng(seed, 0x666C_6970); // "flip"
    let mut out = tensor.clone();
    for t in 0..out.steps() {
        for u in 0..out.channels() {
            if <f64 as Scalar>::uniform_01(&mut rng) < p {
                let v = out.get(t, u);
                out.set(t, u, 1 - v);
            }
        }
    }
    Ok(out)
}

/// Export a spike raster as a native event stream (step index as timestamp,
/// neuron index as channel) for inspection with the event tooling.
pub fn raster_to_stream(raster: &SpikeTensor) -> EventStream {
    let mut events = Vec::new();
    for t in 0..raster.steps() {
        for u in 0..raster.channels() {
            if raster.get(t, u) == 1 {
                events.push(Event {
                    t: t as u64,
                    channel: u as u32,
                    polarity: 1,
                });
            }
        }
    }
    EventStream::new(events, raster.channels() as u32, raster.steps() as u64)
        .expect("raster events are ordered and in range")
}

/// View of the tensor restricted to steps `[0, t_end)`.
pub fn clip_steps(tensor: &SpikeTensor, t_end: usize) -> SpikeTensor {
    assert!(t_end >= 1 && t_end <= tensor.steps());
    SpikeTensor {
        data: tensor.data.slice(s![..t_end, ..]).to_owned(),
    }
}
