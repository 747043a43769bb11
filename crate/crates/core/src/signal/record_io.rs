//! Record file I/O.
//!
//! Version-1 record files come in two encodings sharing one logical
//! schema:
//!
//! * text (canonical for interchange): header lines `#version=1`,
//!   `#fs_hz=<real>`, `#subject=<string>`, `#source=<synthetic|imported>`,
//!   followed by CSV rows `t_s,value,label`;
//! * binary (for speed): magic `RSC1`, little-endian u32 sample count,
//!   f64 sampling rate, then count pairs of (f32 sample, u8 label).
//!
//! The binary layout carries no subject or source metadata; on load the
//! subject id defaults to the file stem and the source to `imported`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{LabelSeries, Record, SampleSeries, SignalError, SourceTag};

const BINARY_MAGIC: &[u8; 4] = b"RSC1";
const FORMAT_VERSION: u32 = 1;

/// Writes `bytes` to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), std::io::Error> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp_path = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp_path)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp_path, path)?;
    Ok(())
}

/// Loads a record from either encoding, detected by the leading magic.
pub fn load_record(path: &Path) -> Result<Record, SignalError> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        load_binary(path, &bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| SignalError::Format("record text is not valid UTF-8".into()))?;
        load_text(&text)
    }
}

/// Serialises a record in the text encoding and writes it atomically.
pub fn save_record_text(record: &Record, path: &Path) -> Result<(), SignalError> {
    let mut out = String::new();
    out.push_str(&format!("#version={FORMAT_VERSION}\n"));
    out.push_str(&format!("#fs_hz={}\n", record.samples.sample_rate_hz));
    out.push_str(&format!("#subject={}\n", record.subject_id));
    out.push_str(&format!("#source={}\n", record.source_tag.as_str()));
    for (i, (&v, &label)) in
        record.samples.values.iter().zip(record.truth.values.iter()).enumerate()
    {
        out.push_str(&format!("{},{},{}\n", record.samples.time_at(i), v, label as u8));
    }
    write_atomic(path, out.as_bytes())?;
    Ok(())
}

/// Serialises a record in the binary encoding and writes it atomically.
pub fn save_record_binary(record: &Record, path: &Path) -> Result<(), SignalError> {
    let n = record.samples.len();
    let mut out = Vec::with_capacity(4 + 4 + 8 + n * 5);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&record.samples.sample_rate_hz.to_le_bytes());
    for (&v, &label) in record.samples.values.iter().zip(record.truth.values.iter()) {
        out.extend_from_slice(&(v as f32).to_le_bytes());
        out.push(label as u8);
    }
    write_atomic(path, &out)?;
    Ok(())
}

fn load_text(text: &str) -> Result<Record, SignalError> {
    let mut version: Option<u32> = None;
    let mut fs_hz: Option<f64> = None;
    let mut subject: Option<String> = None;
    let mut source: Option<SourceTag> = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut first_t: Option<f64> = None;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let (key, value) = header.split_once('=').ok_or_else(|| {
                SignalError::Format(format!("line {}: malformed header `{line}`", lineno + 1))
            })?;
            match key {
                "version" => {
                    let v: u32 = value.parse().map_err(|_| {
                        SignalError::Format(format!("line {}: bad version `{value}`", lineno + 1))
                    })?;
                    if v != FORMAT_VERSION {
                        return Err(SignalError::Version(v));
                    }
                    version = Some(v);
                }
                "fs_hz" => {
                    let v: f64 = value.parse().map_err(|_| {
                        SignalError::Format(format!("line {}: bad fs_hz `{value}`", lineno + 1))
                    })?;
                    fs_hz = Some(v);
                }
                "subject" => subject = Some(value.to_string()),
                "source" => source = Some(SourceTag::parse(value)?),
                other => {
                    return Err(SignalError::Format(format!(
                        "line {}: unknown header key `{other}`",
                        lineno + 1
                    )));
                }
            }
            continue;
        }

        let mut fields = line.split(',');
        let (t, v, label) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(v), Some(label), None) => (t, v, label),
            _ => {
                return Err(SignalError::Integrity(format!(
                    "line {}: expected 3 columns `t_s,value,label`",
                    lineno + 1
                )));
            }
        };
        let t: f64 = t.parse().map_err(|_| {
            SignalError::Integrity(format!("line {}: bad time `{t}`", lineno + 1))
        })?;
        let v: f64 = v.parse().map_err(|_| {
            SignalError::Integrity(format!("line {}: bad sample `{v}`", lineno + 1))
        })?;
        if !v.is_finite() {
            return Err(SignalError::Integrity(format!(
                "line {}: non-finite sample",
                lineno + 1
            )));
        }
        let label: u8 = label.parse().map_err(|_| {
            SignalError::Integrity(format!("line {}: bad label `{label}`", lineno + 1))
        })?;
        if label > 1 {
            return Err(SignalError::Integrity(format!(
                "line {}: label must be 0 or 1",
                lineno + 1
            )));
        }
        if first_t.is_none() {
            first_t = Some(t);
        }
        values.push(v);
        labels.push(label);
    }

    if version.is_none() {
        return Err(SignalError::Format("missing #version header".into()));
    }
    let fs_hz = fs_hz.ok_or_else(|| SignalError::Format("missing #fs_hz header".into()))?;
    if !(fs_hz > 0.0) {
        return Err(SignalError::Format(format!("fs_hz must be positive, got {fs_hz}")));
    }
    if values.is_empty() {
        return Err(SignalError::Integrity("record contains no samples".into()));
    }
    let offset = first_t.unwrap_or(0.0).max(0.0);
    let samples = SampleSeries::with_offset(values, fs_hz, offset)?;
    let truth = LabelSeries::binary(labels, fs_hz)?;
    Record::new(
        subject.unwrap_or_default(),
        samples,
        truth,
        source.unwrap_or(SourceTag::Imported),
    )
}

fn load_binary(path: &Path, bytes: &[u8]) -> Result<Record, SignalError> {
    if bytes.len() < 16 {
        return Err(SignalError::Format("binary record truncated before header end".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let fs_hz = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if !(fs_hz > 0.0) {
        return Err(SignalError::Format(format!("fs_hz must be positive, got {fs_hz}")));
    }
    let expected = 16 + n * 5;
    if bytes.len() != expected {
        return Err(SignalError::Integrity(format!(
            "binary record length {} does not match declared sample count {n} (expected {expected} bytes)",
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let off = 16 + i * 5;
        let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if !v.is_finite() {
            return Err(SignalError::Integrity(format!("non-finite sample at index {i}")));
        }
        let label = bytes[off + 4];
        if label > 1 {
            return Err(SignalError::Integrity(format!("label must be 0 or 1 at index {i}")));
        }
        values.push(f64::from(v));
        labels.push(label);
    }
    if values.is_empty() {
        return Err(SignalError::Integrity("record contains no samples".into()));
    }
    let subject = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let samples = SampleSeries::new(values, fs_hz)?;
    let truth = LabelSeries::binary(labels, fs_hz)?;
    Record::new(subject, samples, truth, SourceTag::Imported)
}
