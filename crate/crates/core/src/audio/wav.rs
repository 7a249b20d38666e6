use std::fs;
use std::io::Write;
use std::path::Path;

use super::Waveform;
use crate::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xfffe;

/// Sample encodings accepted by [`decode_wav`] and produced by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

fn decode_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Decode {
        offset: offset as u64,
        message: message.into(),
    }
}

fn u16_at(bytes: &[u8], at: usize) -> Result<u16> {
    bytes
        .get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| decode_err(at, "unexpected end of file"))
}

fn u32_at(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| decode_err(at, "unexpected end of file"))
}

struct Format {
    encoding: WavEncoding,
    channels: u16,
    sample_rate: u32,
}

fn parse_fmt(bytes: &[u8], at: usize, size: usize) -> Result<Format> {
    if size < 16 {
        return Err(decode_err(
            at,
            format!("fmt chunk too short ({size} bytes)"),
        ));
    }
    let mut tag = u16_at(bytes, at)?;
    let channels = u16_at(bytes, at + 2)?;
    let sample_rate = u32_at(bytes, at + 4)?;
    let bits = u16_at(bytes, at + 14)?;
    if tag == FORMAT_EXTENSIBLE {
        if size < 40 {
            return Err(decode_err(at, "extensible fmt chunk too short"));
        }
        // first two bytes of the sub-format GUID carry the actual format tag
        tag = u16_at(bytes, at + 24)?;
    }
    let encoding = match (tag, bits) {
        (FORMAT_PCM, 16) => WavEncoding::Pcm16,
        (FORMAT_FLOAT, 32) => WavEncoding::Float32,
        (tag, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "format tag {tag} with {bits} bits per sample"
            )))
        }
    };
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedFormat(format!("{channels} channels")));
    }
    if sample_rate == 0 {
        return Err(decode_err(at + 4, "sample rate is zero"));
    }
    Ok(Format {
        encoding,
        channels,
        sample_rate,
    })
}

/// Decodes an in-memory RIFF/WAVE file into a mono waveform.
///
/// PCM16 is scaled by 1/32768, stereo is averaged per frame and every
/// sample is clipped to [−1, 1].
pub fn decode_wav(bytes: &[u8], source_id: &str) -> Result<Waveform> {
    if bytes.len() < 12 {
        return Err(decode_err(bytes.len(), "file shorter than a RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(decode_err(
            0,
            format!(
                "bad magic {:?}, expected \"RIFF\"",
                String::from_utf8_lossy(&bytes[0..4])
            ),
        ));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(decode_err(8, "missing WAVE form type"));
    }

    let mut format = None;
    let mut data = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4)? as usize;
        let body = at + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                decode_err(
                    at,
                    format!("chunk {:?} truncated", String::from_utf8_lossy(id)),
                )
            })?;
        match id {
            b"fmt " => format = Some(parse_fmt(bytes, body, size)?),
            b"data" => data = Some((body, end)),
            _ => {}
        }
        at = end + (size & 1);
    }

    let format = format.ok_or_else(|| decode_err(12, "no fmt chunk"))?;
    let (start, end) = data.ok_or_else(|| decode_err(12, "no data chunk"))?;
    let width = match format.encoding {
        WavEncoding::Pcm16 => 2,
        WavEncoding::Float32 => 4,
    };
    let frame = width * format.channels as usize;
    let payload = &bytes[start..end];
    if payload.len() % frame != 0 {
        return Err(decode_err(
            start + payload.len() - payload.len() % frame,
            "partial sample frame at end of data",
        ));
    }

    let decode_one = |b: &[u8]| -> f32 {
        match format.encoding {
            WavEncoding::Pcm16 => f32::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0,
            WavEncoding::Float32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
        }
    };
    let samples: Vec<f32> = payload
        .chunks_exact(frame)
        .map(|f| {
            let v = if format.channels == 1 {
                decode_one(f)
            } else {
                (decode_one(&f[..width]) + decode_one(&f[width..])) * 0.5
            };
            if v.is_nan() {
                0.0
            } else {
                v.clamp(-1.0, 1.0)
            }
        })
        .collect();

    Waveform::new(samples, format.sample_rate, source_id)
        .map_err(|_| decode_err(start, "data chunk holds no samples"))
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes, &path.to_string_lossy())
}

/// Writes mono samples as a WAV file.
pub fn write_wav(
    path: impl AsRef<Path>,
    samples: &[f32],
    sample_rate: u32,
    encoding: WavEncoding,
) -> Result<()> {
    let path = path.as_ref();
    let (tag, width) = match encoding {
        WavEncoding::Pcm16 => (FORMAT_PCM, 2u16),
        WavEncoding::Float32 => (FORMAT_FLOAT, 4u16),
    };
    let data_len = samples.len() as u32 * u32::from(width);
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * u32::from(width)).to_le_bytes());
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&(width * 8).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        match encoding {
            WavEncoding::Pcm16 => {
                let v = (s.clamp(-1.0, 1.0) * 32768.0)
                    .round()
                    .clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            WavEncoding::Float32 => out.extend_from_slice(&s.to_le_bytes()),
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}
