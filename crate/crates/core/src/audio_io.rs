//! RIFF/WAVE ingestion and 16-bit PCM output.
//!
//! Reading accepts integer PCM at 8, 16, 24 or 32 bits and 32-bit IEEE float,
//! including the `WAVE_FORMAT_EXTENSIBLE` wrapper, with any channel count.
//! Channels are averaged down to mono. Writing always produces a canonical
//! 44-byte header followed by mono 16-bit PCM.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_IEEE_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Mono samples together with the rate they were taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl SampleBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::contract(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|x| x * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Sub-range `[start, end)` in samples, sharing the rate.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            samples: self.samples[start..end].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<SampleBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

pub fn write_wav(buffer: &SampleBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_wav(buffer)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy)]
struct FmtChunk {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits_per_sample: u16,
}

fn u16_at(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk> {
    if body.len() < 16 {
        return Err(Error::WavFormat {
            chunk: "fmt",
            reason: format!("expected at least 16 bytes, found {}", body.len()),
        });
    }
    let mut fmt = FmtChunk {
        format_tag: u16_at(body, 0),
        channels: u16_at(body, 2),
        sample_rate: u32_at(body, 4),
        block_align: u16_at(body, 12),
        bits_per_sample: u16_at(body, 14),
    };
    if fmt.format_tag == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) then the sub-format GUID,
        // whose first two bytes carry the effective format tag.
        if body.len() < 40 {
            return Err(Error::WavFormat {
                chunk: "fmt",
                reason: "extensible format shorter than 40 bytes".into(),
            });
        }
        fmt.format_tag = u16_at(body, 24);
    }
    if fmt.channels == 0 {
        return Err(Error::WavFormat {
            chunk: "fmt",
            reason: "zero channels".into(),
        });
    }
    if fmt.sample_rate == 0 {
        return Err(Error::WavFormat {
            chunk: "fmt",
            reason: "zero sample rate".into(),
        });
    }
    match (fmt.format_tag, fmt.bits_per_sample) {
        (FORMAT_PCM, 8 | 16 | 24 | 32) | (FORMAT_IEEE_FLOAT, 32) => {}
        (FORMAT_PCM, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "{bits}-bit integer PCM"
            )))
        }
        (FORMAT_IEEE_FLOAT, bits) => {
            return Err(Error::UnsupportedFormat(format!("{bits}-bit float")))
        }
        (tag, _) => {
            return Err(Error::UnsupportedFormat(format!(
                "codec tag 0x{tag:04x}"
            )))
        }
    }
    let expected_align = fmt.channels as usize * (fmt.bits_per_sample as usize / 8);
    if fmt.block_align as usize != expected_align {
        return Err(Error::WavFormat {
            chunk: "fmt",
            reason: format!(
                "block align {} inconsistent with {} channels of {} bits",
                fmt.block_align, fmt.channels, fmt.bits_per_sample
            ),
        });
    }
    Ok(fmt)
}

fn decode_sample(fmt: &FmtChunk, b: &[u8]) -> f64 {
    match (fmt.format_tag, fmt.bits_per_sample) {
        (FORMAT_PCM, 8) => (b[0] as f64 - 128.0) / 128.0,
        (FORMAT_PCM, 16) => i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
        (FORMAT_PCM, 24) => {
            // sign-extend through the top byte of an i32
            let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
            v as f64 / 8_388_608.0
        }
        (FORMAT_PCM, 32) => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
        (FORMAT_IEEE_FLOAT, 32) => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        _ => unreachable!("format validated in parse_fmt"),
    }
}

/// Decodes an in-memory RIFF/WAVE image to a mono buffer.
pub fn decode_wav(bytes: &[u8]) -> Result<SampleBuffer> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" {
        return Err(Error::WavFormat {
            chunk: "RIFF",
            reason: "missing RIFF signature".into(),
        });
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::WavFormat {
            chunk: "RIFF",
            reason: "form type is not WAVE".into(),
        });
    }

    let mut fmt = None;
    let mut data: Option<&[u8]> = None;
    let mut off = 12;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let size = u32_at(bytes, off + 4) as usize;
        let body_start = off + 8;
        let body_end = body_start.saturating_add(size);
        match id {
            b"fmt " => {
                if body_end > bytes.len() {
                    return Err(Error::WavFormat {
                        chunk: "fmt",
                        reason: "chunk extends past end of file".into(),
                    });
                }
                fmt = Some(parse_fmt(&bytes[body_start..body_end])?);
            }
            b"data" => {
                if body_end > bytes.len() {
                    return Err(Error::WavFormat {
                        chunk: "data",
                        reason: format!(
                            "declares {size} bytes but only {} remain",
                            bytes.len() - body_start
                        ),
                    });
                }
                data = Some(&bytes[body_start..body_end]);
            }
            _ => {}
        }
        // chunks are word aligned
        off = body_end.saturating_add(size & 1);
    }

    let fmt = fmt.ok_or(Error::WavFormat {
        chunk: "fmt",
        reason: "chunk not found".into(),
    })?;
    let data = data.ok_or(Error::WavFormat {
        chunk: "data",
        reason: "chunk not found".into(),
    })?;
    if data.is_empty() {
        return Err(Error::EmptyAudio);
    }
    let block = fmt.block_align as usize;
    if data.len() % block != 0 {
        return Err(Error::WavFormat {
            chunk: "data",
            reason: format!("{} bytes is not a whole number of {block}-byte frames", data.len()),
        });
    }

    let channels = fmt.channels as usize;
    let width = fmt.bits_per_sample as usize / 8;
    let samples = data
        .chunks_exact(block)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(width)
                .map(|s| decode_sample(&fmt, s))
                .sum();
            sum / channels as f64
        })
        .collect();
    SampleBuffer::new(samples, fmt.sample_rate as f64)
}

/// Encodes a buffer as mono 16-bit PCM with a canonical 44-byte header.
pub fn encode_wav(buffer: &SampleBuffer) -> Result<Vec<u8>> {
    if let Some(i) = buffer.samples().iter().position(|x| !x.is_finite()) {
        return Err(Error::Validation(format!("sample {i} is not finite")));
    }
    let rate = buffer.sample_rate_hz().round();
    if rate < 1.0 || rate > u32::MAX as f64 {
        return Err(Error::contract(format!(
            "sample rate {} cannot be stored in a WAV header",
            buffer.sample_rate_hz()
        )));
    }
    let rate = rate as u32;
    let data_len = buffer.len() * 2;
    if data_len > (u32::MAX - 36) as usize {
        return Err(Error::contract("buffer too long for a RIFF container"));
    }

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &x in buffer.samples() {
        out.extend_from_slice(&quantize_i16(x).to_le_bytes());
    }
    Ok(out)
}

fn quantize_i16(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * 32767.0).round() as i16
}
