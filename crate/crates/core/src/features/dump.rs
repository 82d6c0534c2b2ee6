//! Feature-dump container: header {frames: u32, bins: u32} followed by
//! row-major 32-bit floats, all little-endian.

use std::io::{Read, Write};

use super::{FeatureError, LogMelSpectrogram};

pub fn write_feature_dump<W: Write>(w: &mut W, lm: &LogMelSpectrogram) -> Result<(), FeatureError> {
    let io = |e: std::io::Error| FeatureError::Io(e.to_string());
    w.write_all(&(lm.frames as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(lm.bins as u32).to_le_bytes()).map_err(io)?;
    for &v in &lm.values {
        w.write_all(&(v as f32).to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn read_feature_dump<R: Read>(r: &mut R) -> Result<LogMelSpectrogram, FeatureError> {
    let io = |e: std::io::Error| FeatureError::Io(e.to_string());
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(io)?;
    let frames = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf).map_err(io)?;
    let bins = u32::from_le_bytes(u32buf) as usize;
    let count = frames
        .checked_mul(bins)
        .ok_or_else(|| FeatureError::Io("header overflow".into()))?;
    let mut values = Vec::with_capacity(count);
    let mut f32buf = [0u8; 4];
    for _ in 0..count {
        r.read_exact(&mut f32buf).map_err(io)?;
        values.push(f32::from_le_bytes(f32buf) as f64);
    }
    Ok(LogMelSpectrogram { values, frames, bins, normalized: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_f32() {
        let lm = LogMelSpectrogram {
            values: (0..90).map(|i| (i as f64) * 0.125 - 3.0).collect(),
            frames: 2,
            bins: 45,
            normalized: true,
        };
        let mut buf = Vec::new();
        write_feature_dump(&mut buf, &lm).unwrap();
        assert_eq!(buf.len(), 8 + 90 * 4);
        assert_eq!(&buf[0..4], &2u32.to_le_bytes());
        assert_eq!(&buf[4..8], &45u32.to_le_bytes());
        let back = read_feature_dump(&mut buf.as_slice()).unwrap();
        assert_eq!(back.frames, 2);
        assert_eq!(back.bins, 45);
        // values chosen exactly representable in f32
        assert_eq!(back.values, lm.values);
    }

    #[test]
    fn truncated_input_rejected() {
        let buf = vec![1, 0, 0, 0, 45, 0, 0, 0, 1, 2];
        assert!(matches!(
            read_feature_dump(&mut buf.as_slice()),
            Err(FeatureError::Io(_))
        ));
    }
}
