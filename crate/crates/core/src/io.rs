//! Sample and label file formats.
//!
//! Text files hold one value per line with an optional first line
//! `# bg-impulse v1`. Samples are decimal floats written in shortest
//! round-trip form; labels are `0` or `1`. Files ending in `.f64` hold
//! samples as raw little-endian IEEE-754 doubles with no header.

use std::fs;
use std::path::Path;

use crate::{Error, LabelSequence, ObservationSequence, Result};

pub const HEADER: &str = "# bg-impulse v1";

/// Whether `path` selects the binary sample format.
pub fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "f64")
}

pub fn format_samples(samples: &[f64]) -> String {
    let mut out = String::with_capacity(samples.len() * 20 + HEADER.len() + 1);
    out.push_str(HEADER);
    out.push('\n');
    for v in samples {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

pub fn format_labels(labels: &[bool]) -> String {
    let mut out = String::with_capacity(labels.len() * 2 + HEADER.len() + 1);
    out.push_str(HEADER);
    out.push('\n');
    for &b in labels {
        out.push(if b { '1' } else { '0' });
        out.push('\n');
    }
    out
}

pub fn encode_f64(samples: &[f64]) -> Vec<u8> {
    samples.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_f64(source_name: &str, bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::parse(
            source_name,
            0,
            0,
            format!("binary length {} is not a multiple of 8", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Yields `(line_number, trimmed_text)` for every data line, skipping the
/// optional header on line 1 and blank lines.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|&(no, l)| !(l.is_empty() || (no == 1 && l == HEADER)))
}

pub fn parse_samples(source_name: &str, text: &str) -> Result<Vec<f64>> {
    data_lines(text)
        .map(|(no, l)| {
            l.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(source_name, no, 1, format!("invalid sample `{l}`")))
        })
        .collect()
}

pub fn parse_labels(source_name: &str, text: &str) -> Result<Vec<bool>> {
    data_lines(text)
        .map(|(no, l)| match l {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(Error::parse(
                source_name,
                no,
                1,
                format!("invalid label `{l}`, expected 0 or 1"),
            )),
        })
        .collect()
}

/// Reads raw samples from a text or `.f64` file. May return an empty vector.
pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let name = path.display().to_string();
    if is_binary(path) {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let v = decode_f64(&name, &bytes)?;
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::parse(name, i + 1, 0, "non-finite sample"));
        }
        Ok(v)
    } else {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_samples(&name, &text)
    }
}

/// Reads samples and wraps them as an [`ObservationSequence`].
pub fn read_observations(path: &Path) -> Result<ObservationSequence> {
    ObservationSequence::new(read_samples(path)?)
}

pub fn read_labels(path: &Path) -> Result<LabelSequence> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(LabelSequence::new(parse_labels(
        &path.display().to_string(),
        &text,
    )?))
}

pub fn write_samples(path: &Path, samples: &[f64]) -> Result<()> {
    let bytes = if is_binary(path) {
        encode_f64(samples)
    } else {
        format_samples(samples).into_bytes()
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_labels(path: &Path, labels: &[bool]) -> Result<()> {
    fs::write(path, format_labels(labels)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_optional() {
        assert_eq!(parse_samples("t", "1.5\n-2\n").unwrap(), vec![1.5, -2.0]);
        assert_eq!(
            parse_samples("t", "# bg-impulse v1\n1e-3\n\n").unwrap(),
            vec![1e-3]
        );
        assert_eq!(
            parse_labels("t", "# bg-impulse v1\n0\n1\n").unwrap(),
            vec![false, true]
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_samples("x.txt", "1\n2\nabc\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        // A header anywhere but line 1 is data, and bad data.
        assert!(parse_samples("x.txt", "1\n# bg-impulse v1\n").is_err());
        assert!(parse_labels("l.txt", "0\n2\n").is_err());
        assert!(parse_samples("x.txt", "inf\n").is_err());
    }

    #[test]
    fn binary_rejects_ragged_length() {
        assert!(decode_f64("b.f64", &[0u8; 9]).is_err());
    }

    proptest! {
        #[test]
        fn text_and_binary_round_trip(v in prop::collection::vec(-1e300f64..1e300, 0..64)) {
            prop_assert_eq!(parse_samples("t", &format_samples(&v)).unwrap(), v.clone());
            prop_assert_eq!(decode_f64("b", &encode_f64(&v)).unwrap(), v);
        }
    }
}
