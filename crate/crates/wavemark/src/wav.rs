//! Bit-exact reader and writer for 16-bit PCM RIFF/WAVE files.
//!
//! Samples are normalized by dividing by 32768, so every 16-bit code maps to
//! a value in [-1, 1) that round-trips exactly through [`write_wav`] and
//! [`read_wav`].

use crate::error::{Error, Result};

/// A mono audio signal: normalized sample amplitudes plus a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    /// Sample amplitudes, nominally in [-1, 1].
    pub samples: Vec<f64>,
    /// Sample rate in Hz.
    pub sample_rate: u32,
}

impl AudioBuffer {
    /// Builds a buffer, rejecting a zero sample rate and non-finite samples.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate);
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample);
        }
        Ok(AudioBuffer { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

const SCALE: f64 = 32768.0;

/// Parses a RIFF/WAVE byte stream into an [`AudioBuffer`].
///
/// Only PCM (format code 1) with 16 bits per sample is accepted. Integer
/// sample `v` maps to `v / 32768`. Multi-channel files are reduced to channel
/// 0 with a warning; unknown chunks (LIST, fact, ...) are skipped.
pub fn read_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    let mut r = Reader { bytes, pos: 0 };

    let riff = r.take(4)?;
    if riff != b"RIFF" {
        return Err(Error::MalformedWav("missing RIFF magic".into()));
    }
    let _riff_size = r.u32()?;
    let wave = r.take(4)?;
    if wave != b"WAVE" {
        return Err(Error::MalformedWav("missing WAVE form type".into()));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;

    while r.remaining() >= 8 {
        let id: [u8; 4] = r.take(4)?.try_into().unwrap();
        let size = r.u32()? as usize;
        let body = r.take(size.min(r.remaining()))?;
        match &id {
            b"fmt " => fmt = Some(FmtChunk::parse(body)?),
            b"data" => {
                if body.len() < size {
                    return Err(Error::MalformedWav("data chunk truncated".into()));
                }
                data = Some(body);
                // Anything after data is ignored.
                break;
            }
            _ => {}
        }
        // Chunks are word-aligned; odd sizes carry a pad byte.
        if size % 2 == 1 && r.remaining() > 0 {
            r.take(1)?;
        }
    }

    let fmt = fmt.ok_or_else(|| Error::MalformedWav("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::MalformedWav("missing data chunk".into()))?;

    if fmt.format != 1 {
        return Err(Error::UnsupportedWavFormat(fmt.format));
    }
    if fmt.bits_per_sample != 16 {
        return Err(Error::UnsupportedBitDepth(fmt.bits_per_sample));
    }
    if fmt.channels == 0 {
        return Err(Error::MalformedWav("zero channels".into()));
    }
    if fmt.sample_rate == 0 {
        return Err(Error::InvalidSampleRate);
    }
    if fmt.channels > 1 {
        log::warn!(
            "WAV has {} channels; taking channel 0 only",
            fmt.channels
        );
    }

    let frame_bytes = 2 * fmt.channels as usize;
    let frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(frames);
    for f in 0..frames {
        let off = f * frame_bytes;
        let v = i16::from_le_bytes([data[off], data[off + 1]]);
        samples.push(v as f64 / SCALE);
    }
    Ok(AudioBuffer { samples, sample_rate: fmt.sample_rate })
}

/// Serializes an [`AudioBuffer`] to a canonical 44-byte-header WAV file.
///
/// Samples are quantized with `round(s * 32768)` and clamped to the 16-bit
/// range, so grid values `v / 32768` survive exactly. Output bytes are fully
/// determined by the buffer contents.
pub fn write_wav(buf: &AudioBuffer) -> Result<Vec<u8>> {
    if buf.samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteSample);
    }
    let data_len = buf.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&buf.sample_rate.to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &buf.samples {
        let q = (s * SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::MalformedWav("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

impl FmtChunk {
    fn parse(body: &[u8]) -> Result<Self> {
        if body.len() < 16 {
            return Err(Error::MalformedWav("fmt chunk too small".into()));
        }
        Ok(FmtChunk {
            format: u16::from_le_bytes([body[0], body[1]]),
            channels: u16::from_le_bytes([body[2], body[3]]),
            sample_rate: u32::from_le_bytes([body[4], body[5], body[6], body[7]]),
            bits_per_sample: u16::from_le_bytes([body[14], body[15]]),
        })
    }
}
