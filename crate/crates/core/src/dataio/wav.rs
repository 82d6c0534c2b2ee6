//! Minimal RIFF/WAVE reader and writer.
//!
//! Reads PCM 16/24/32-bit and 32-bit float, mono or first channel of
//! multi-channel files, including WAVE_FORMAT_EXTENSIBLE wrappers. Samples
//! are scaled to [-1, 1] by the type's full-scale divisor.

use std::io::Read;
use std::path::Path;

use super::DataError;
use crate::audio::AudioSignal;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

fn corrupt(path: &Path, msg: impl Into<String>) -> DataError {
    DataError::CorruptFile(format!("{}: {}", path.display(), msg.into()))
}

pub fn read_wav(path: &Path) -> Result<AudioSignal, DataError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| DataError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(corrupt(path, "missing RIFF/WAVE header"));
    }

    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        if body_start + size > bytes.len() {
            return Err(corrupt(path, format!("chunk {:?} truncated", String::from_utf8_lossy(id))));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(corrupt(path, "fmt chunk too small"));
                }
                let mut format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                if format == FORMAT_EXTENSIBLE {
                    if size < 26 {
                        return Err(corrupt(path, "extensible fmt chunk too small"));
                    }
                    format = u16::from_le_bytes(body[24..26].try_into().unwrap());
                }
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => {
                data = Some(body);
                // keep scanning is unnecessary once both chunks are in hand
                if fmt.is_some() {
                    break;
                }
            }
            _ => {}
        }
        pos = body_start + size + (size & 1); // chunks are word-aligned
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| corrupt(path, "no fmt chunk"))?;
    let data = data.ok_or_else(|| corrupt(path, "no data chunk"))?;
    if channels == 0 || rate == 0 {
        return Err(corrupt(path, "zero channels or sample rate"));
    }

    let bytes_per_sample = (bits / 8) as usize;
    let frame = bytes_per_sample * channels as usize;
    if frame == 0 || data.len() % frame != 0 {
        return Err(corrupt(path, "data chunk not a whole number of frames"));
    }
    let n_frames = data.len() / frame;

    let samples: Vec<f64> = match (format, bits) {
        (FORMAT_PCM, 16) => (0..n_frames)
            .map(|i| {
                let b = &data[i * frame..i * frame + 2];
                i16::from_le_bytes(b.try_into().unwrap()) as f64 / 32768.0
            })
            .collect(),
        (FORMAT_PCM, 24) => (0..n_frames)
            .map(|i| {
                let b = &data[i * frame..i * frame + 3];
                let raw = ((b[2] as i32) << 16 | (b[1] as i32) << 8 | b[0] as i32) << 8 >> 8;
                raw as f64 / 8_388_608.0
            })
            .collect(),
        (FORMAT_PCM, 32) => (0..n_frames)
            .map(|i| {
                let b = &data[i * frame..i * frame + 4];
                i32::from_le_bytes(b.try_into().unwrap()) as f64 / 2_147_483_648.0
            })
            .collect(),
        (FORMAT_FLOAT, 32) => (0..n_frames)
            .map(|i| {
                let b = &data[i * frame..i * frame + 4];
                f32::from_le_bytes(b.try_into().unwrap()) as f64
            })
            .collect(),
        (f, b) => {
            return Err(DataError::UnsupportedFormat(format!(
                "{}: format {f}, {b}-bit",
                path.display()
            )));
        }
    };
    Ok(AudioSignal::new(samples, rate))
}

/// Write mono 16-bit PCM; samples are clamped to [-1, 1] and rounded.
pub fn write_wav_16bit(path: &Path, sig: &AudioSignal) -> Result<(), DataError> {
    let n = sig.samples.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sig.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sig.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &sig.samples {
        let q = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    std::fs::write(path, out)
        .map_err(|e| DataError::Io { path: path.display().to_string(), msg: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_rules() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let sig = AudioSignal::new(vec![32767.0 / 32768.0, 0.0, -1.0], 16_000);
        write_wav_16bit(&path, &sig).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate_hz, 16_000);
        assert!((back.samples[0] - 32767.0 / 32768.0).abs() < 1e-12);
        assert_eq!(back.samples[1], 0.0);
        assert_eq!(back.samples[2], -1.0);
    }

    #[test]
    fn round_trip_is_bit_identical_on_quantized_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.wav");
        let mut state = 5u64;
        let samples: Vec<f64> = (0..2000)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                let q = (state >> 40) as i64 as i16;
                q as f64 / 32768.0
            })
            .collect();
        let sig = AudioSignal::new(samples.clone(), 44_100);
        write_wav_16bit(&path, &sig).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.samples, samples);
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        std::fs::write(&path, b"RIFF\x10\x00\x00\x00WAVEfmt ").unwrap();
        assert!(matches!(read_wav(&path), Err(DataError::CorruptFile(_))));
    }

    #[test]
    fn non_wav_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        std::fs::write(&path, b"hello world, definitely not audio").unwrap();
        assert!(matches!(read_wav(&path), Err(DataError::CorruptFile(_))));
    }
}
