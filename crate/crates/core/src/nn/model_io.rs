//! Model file I/O, format version 1.
//!
//! Text encoding: a header echoing the architecture
//! (`version`, `input_channels`, `conv_blocks`, `lstm_hidden`), then
//! one section per tensor: a `tensor <name> <dims>` line followed by
//! the row-major values in decimal with 17 significant digits
//! (lossless for f64). Tensor names are `conv<i>.kernel`, `.bias`,
//! `.bn_gamma`, `.bn_beta`, `.bn_mean`, `.bn_var` per block, `lstm.w_g`
//! / `lstm.u_g` / `lstm.b_g` for gate `g` in i, f, g, o, and `dense.w`
//! / `dense.b`.
//!
//! Binary encoding: magic `RSM1`, the architecture as little-endian
//! u32 fields (input_channels, block count, then out/kernel/pool per
//! block, lstm_hidden), then every tensor's values in the same
//! canonical order as little-endian f64.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ConvBlockSpec, ModelSpec, NnError, WeightStore, GATE_NAMES};
use crate::signal::write_atomic;

const BINARY_MAGIC: &[u8; 4] = b"RSM1";
const FORMAT_VERSION: u32 = 1;

/// Canonical `(name, shape)` list for an architecture.
fn expected_entries(spec: &ModelSpec) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    for (i, b) in spec.conv_blocks.iter().enumerate() {
        let in_ch = spec.block_in_channels(i);
        let n = i + 1;
        out.push((format!("conv{n}.kernel"), vec![b.out_channels, in_ch, b.kernel_len]));
        for field in ["bias", "bn_gamma", "bn_beta", "bn_mean", "bn_var"] {
            out.push((format!("conv{n}.{field}"), vec![b.out_channels]));
        }
    }
    let (h, d) = (spec.lstm_hidden, spec.lstm_input());
    for (kind, shape) in [("w", vec![h, d]), ("u", vec![h, h]), ("b", vec![h])] {
        for g in GATE_NAMES {
            out.push((format!("lstm.{kind}_{g}"), shape.clone()));
        }
    }
    out.push(("dense.w".into(), vec![h]));
    out.push(("dense.b".into(), vec![1]));
    out
}

/// Mutable view of the named tensor's storage.
fn tensor_slot<'a>(store: &'a mut WeightStore<f64>, name: &str) -> Option<&'a mut [f64]> {
    if name == "dense.w" {
        return store.tensors.dense_w.as_slice_mut();
    }
    if name == "dense.b" {
        return Some(std::slice::from_mut(&mut store.tensors.dense_b));
    }
    if let Some(rest) = name.strip_prefix("conv") {
        let (idx, field) = rest.split_once('.')?;
        let i = idx.parse::<usize>().ok()?.checked_sub(1)?;
        if i >= store.tensors.conv.len() {
            return None;
        }
        return match field {
            "kernel" => store.tensors.conv[i].kernel.as_slice_mut(),
            "bias" => store.tensors.conv[i].bias.as_slice_mut(),
            "bn_gamma" => store.tensors.conv[i].bn_gamma.as_slice_mut(),
            "bn_beta" => store.tensors.conv[i].bn_beta.as_slice_mut(),
            "bn_mean" => store.bn_mean[i].as_slice_mut(),
            "bn_var" => store.bn_var[i].as_slice_mut(),
            _ => None,
        };
    }
    if let Some(rest) = name.strip_prefix("lstm.") {
        let (kind, gate) = rest.split_once('_')?;
        let g = GATE_NAMES.iter().position(|&n| n == gate)?;
        return match kind {
            "w" => store.tensors.lstm.w[g].as_slice_mut(),
            "u" => store.tensors.lstm.u[g].as_slice_mut(),
            "b" => store.tensors.lstm.b[g].as_slice_mut(),
            _ => None,
        };
    }
    None
}

/// Read-only view of the named tensor's storage, row-major.
fn tensor_ref<'a>(store: &'a WeightStore<f64>, name: &str) -> Option<&'a [f64]> {
    if name == "dense.w" {
        return store.tensors.dense_w.as_slice();
    }
    if name == "dense.b" {
        return Some(std::slice::from_ref(&store.tensors.dense_b));
    }
    if let Some(rest) = name.strip_prefix("conv") {
        let (idx, field) = rest.split_once('.')?;
        let i = idx.parse::<usize>().ok()?.checked_sub(1)?;
        if i >= store.tensors.conv.len() {
            return None;
        }
        return match field {
            "kernel" => store.tensors.conv[i].kernel.as_slice(),
            "bias" => store.tensors.conv[i].bias.as_slice(),
            "bn_gamma" => store.tensors.conv[i].bn_gamma.as_slice(),
            "bn_beta" => store.tensors.conv[i].bn_beta.as_slice(),
            "bn_mean" => store.bn_mean[i].as_slice(),
            "bn_var" => store.bn_var[i].as_slice(),
            _ => None,
        };
    }
    if let Some(rest) = name.strip_prefix("lstm.") {
        let (kind, gate) = rest.split_once('_')?;
        let g = GATE_NAMES.iter().position(|&n| n == gate)?;
        return match kind {
            "w" => store.tensors.lstm.w[g].as_slice(),
            "u" => store.tensors.lstm.u[g].as_slice(),
            "b" => store.tensors.lstm.b[g].as_slice(),
            _ => None,
        };
    }
    None
}

fn tensor_values(store: &WeightStore<f64>, name: &str) -> Vec<f64> {
    tensor_ref(store, name).expect("expected_entries names are valid").to_vec()
}

/// Serialises in the text encoding and writes atomically.
pub fn save_model_text(store: &WeightStore<f64>, path: &Path) -> Result<(), NnError> {
    store.validate()?;
    let mut out = String::new();
    writeln!(out, "version={FORMAT_VERSION}").unwrap();
    writeln!(out, "input_channels={}", store.spec.input_channels).unwrap();
    writeln!(out, "conv_blocks={}", store.spec.encode_blocks()).unwrap();
    writeln!(out, "lstm_hidden={}", store.spec.lstm_hidden).unwrap();
    for (name, shape) in expected_entries(&store.spec) {
        let dims = shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
        writeln!(out, "tensor {name} {dims}").unwrap();
        for line in tensor_values(store, &name).chunks(4) {
            let row = line.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(" ");
            writeln!(out, "{row}").unwrap();
        }
    }
    write_atomic(path, out.as_bytes())?;
    Ok(())
}

/// Serialises in the binary encoding and writes atomically.
pub fn save_model_binary(store: &WeightStore<f64>, path: &Path) -> Result<(), NnError> {
    store.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(store.spec.input_channels as u32).to_le_bytes());
    out.extend_from_slice(&(store.spec.conv_blocks.len() as u32).to_le_bytes());
    for b in &store.spec.conv_blocks {
        out.extend_from_slice(&(b.out_channels as u32).to_le_bytes());
        out.extend_from_slice(&(b.kernel_len as u32).to_le_bytes());
        out.extend_from_slice(&(b.pool_len as u32).to_le_bytes());
    }
    out.extend_from_slice(&(store.spec.lstm_hidden as u32).to_le_bytes());
    for (name, _) in expected_entries(&store.spec) {
        for v in tensor_values(store, &name) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_atomic(path, &out)?;
    Ok(())
}

/// Loads either encoding, detected by the leading magic.
pub fn load_model(path: &Path) -> Result<WeightStore<f64>, NnError> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        load_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| NnError::Format("model text is not valid UTF-8".into()))?;
        load_text(&text)
    }
}

fn load_text(text: &str) -> Result<WeightStore<f64>, NnError> {
    let mut header: BTreeMap<&str, &str> = BTreeMap::new();
    let mut tensors: BTreeMap<String, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
    let mut current: Option<(String, Vec<usize>, Vec<f64>)> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("tensor ") {
            if let Some((name, shape, values)) = current.take() {
                tensors.insert(name, (shape, values));
            }
            let (name, dims) = rest.split_once(' ').ok_or_else(|| {
                NnError::Format(format!("line {}: expected `tensor <name> <dims>`", lineno + 1))
            })?;
            let shape = dims
                .split(',')
                .map(|d| {
                    d.trim().parse::<usize>().map_err(|_| {
                        NnError::Format(format!("line {}: bad dimension `{d}`", lineno + 1))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if tensors.contains_key(name) {
                return Err(NnError::Format(format!("duplicate tensor `{name}`")));
            }
            current = Some((name.to_string(), shape, Vec::new()));
            continue;
        }
        match &mut current {
            Some((_, _, values)) => {
                for tok in line.split_whitespace() {
                    let v: f64 = tok.parse().map_err(|_| {
                        NnError::Format(format!("line {}: bad value `{tok}`", lineno + 1))
                    })?;
                    if !v.is_finite() {
                        return Err(NnError::Format(format!(
                            "line {}: non-finite value `{tok}`",
                            lineno + 1
                        )));
                    }
                    values.push(v);
                }
            }
            None => {
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    NnError::Format(format!("line {}: expected key=value", lineno + 1))
                })?;
                if header.insert(key, value).is_some() {
                    return Err(NnError::Format(format!("duplicate header key `{key}`")));
                }
            }
        }
    }
    if let Some((name, shape, values)) = current.take() {
        tensors.insert(name, (shape, values));
    }

    let version: u32 = header
        .get("version")
        .ok_or_else(|| NnError::Format("missing version header".into()))?
        .parse()
        .map_err(|_| NnError::Format("bad version value".into()))?;
    if version != FORMAT_VERSION {
        return Err(NnError::Version(version));
    }
    let get = |key: &str| {
        header
            .get(key)
            .ok_or_else(|| NnError::Format(format!("missing {key} header")))
    };
    let spec = ModelSpec {
        input_channels: get("input_channels")?
            .parse()
            .map_err(|_| NnError::Format("bad input_channels".into()))?,
        conv_blocks: ModelSpec::parse_blocks(get("conv_blocks")?)?,
        lstm_hidden: get("lstm_hidden")?
            .parse()
            .map_err(|_| NnError::Format("bad lstm_hidden".into()))?,
    };
    for key in header.keys() {
        if !["version", "input_channels", "conv_blocks", "lstm_hidden"].contains(key) {
            return Err(NnError::Format(format!("unknown header key `{key}`")));
        }
    }

    let mut store = WeightStore::zeros(&spec)?;
    for (name, shape) in expected_entries(&spec) {
        let (file_shape, values) = tensors
            .remove(&name)
            .ok_or_else(|| NnError::Format(format!("missing tensor `{name}`")))?;
        if file_shape != shape {
            return Err(NnError::Format(format!(
                "tensor `{name}`: shape {file_shape:?}, expected {shape:?}"
            )));
        }
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(NnError::Format(format!(
                "tensor `{name}`: {} values, shape needs {n}",
                values.len()
            )));
        }
        tensor_slot(&mut store, &name)
            .ok_or_else(|| NnError::Format(format!("unmappable tensor `{name}`")))?
            .copy_from_slice(&values);
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(NnError::Format(format!("unexpected tensor `{extra}`")));
    }
    store.validate()?;
    Ok(store)
}

fn load_binary(bytes: &[u8]) -> Result<WeightStore<f64>, NnError> {
    let mut pos = 4usize;
    let read_u32 = |pos: &mut usize| -> Result<u32, NnError> {
        let end = *pos + 4;
        if end > bytes.len() {
            return Err(NnError::Format("binary model truncated in header".into()));
        }
        let v = u32::from_le_bytes(bytes[*pos..end].try_into().unwrap());
        *pos = end;
        Ok(v)
    };
    let input_channels = read_u32(&mut pos)? as usize;
    let n_blocks = read_u32(&mut pos)? as usize;
    if n_blocks > 64 {
        return Err(NnError::Format(format!("implausible block count {n_blocks}")));
    }
    let mut conv_blocks = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        conv_blocks.push(ConvBlockSpec {
            out_channels: read_u32(&mut pos)? as usize,
            kernel_len: read_u32(&mut pos)? as usize,
            pool_len: read_u32(&mut pos)? as usize,
        });
    }
    let lstm_hidden = read_u32(&mut pos)? as usize;
    let spec = ModelSpec { input_channels, conv_blocks, lstm_hidden };

    let entries = expected_entries(&spec);
    let total: usize = entries.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    if bytes.len() != pos + 8 * total {
        return Err(NnError::Format(format!(
            "binary model length {} does not match header ({} expected)",
            bytes.len(),
            pos + 8 * total
        )));
    }
    let mut store = WeightStore::zeros(&spec)?;
    for (name, shape) in entries {
        let n: usize = shape.iter().product();
        let slot = tensor_slot(&mut store, &name)
            .ok_or_else(|| NnError::Format(format!("unmappable tensor `{name}`")))?;
        for v in slot.iter_mut().take(n) {
            *v = f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
            if !v.is_finite() {
                return Err(NnError::Format(format!("non-finite value in tensor `{name}`")));
            }
            pos += 8;
        }
    }
    store.validate()?;
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelSpec;

    fn store() -> WeightStore<f64> {
        WeightStore::init(&ModelSpec::default_arch(), 42).unwrap()
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let original = store();
        save_model_text(&original, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, original);
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let original = store();
        save_model_binary(&original, &path).unwrap();
        let first = fs::read(&path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, original);

        let path2 = dir.path().join("model2.bin");
        save_model_binary(&loaded, &path2).unwrap();
        assert_eq!(fs::read(&path2).unwrap(), first);
    }

    #[test]
    fn unsupported_version_is_version_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v9.txt");
        fs::write(&path, "version=9\ninput_channels=1\nconv_blocks=1,3,16\nlstm_hidden=2\n")
            .unwrap();
        assert!(matches!(load_model(&path), Err(NnError::Version(9))));
    }

    #[test]
    fn missing_tensor_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        save_model_text(&store(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let cut = text.find("tensor dense.b").unwrap();
        fs::write(&path, &text[..cut]).unwrap();
        assert!(matches!(load_model(&path), Err(NnError::Format(_))));
    }

    #[test]
    fn wrong_shape_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        save_model_text(&store(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap().replace(
            "tensor conv1.kernel 12,1,9",
            "tensor conv1.kernel 12,1,7",
        );
        fs::write(&path, text).unwrap();
        assert!(matches!(load_model(&path), Err(NnError::Format(_))));
    }

    #[test]
    fn truncated_binary_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model_binary(&store(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 9);
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_model(&path), Err(NnError::Format(_))));
    }
}
