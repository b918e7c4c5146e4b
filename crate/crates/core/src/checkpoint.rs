//! Saving and loading trained fields.
//!
//! A checkpoint is a directory with three files:
//! `params.bin` (little-endian `f64` values), `params.json` (length and block
//! layout) and `architecture.json` (the field description and its exponents).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::architectures::Field;
use crate::autodiff::{ParamBlock, ParamStore};
use crate::error::{Error, Result};

pub const PARAMS_BIN: &str = "params.bin";
pub const PARAMS_JSON: &str = "params.json";
pub const ARCHITECTURE_JSON: &str = "architecture.json";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    len: usize,
    dtype: String,
    endian: String,
    blocks: Vec<ParamBlock>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Architecture {
    field: Field,
    param_count: usize,
    lambdas: Vec<f64>,
}

pub fn save(field: &Field, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let store = field.params();
    let bytes: Vec<u8> = store.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(dir.join(PARAMS_BIN), bytes)?;
    let header = Header {
        len: store.len(),
        dtype: "f64".into(),
        endian: "little".into(),
        blocks: store.blocks().to_vec(),
    };
    fs::write(dir.join(PARAMS_JSON), serde_json::to_string_pretty(&header)?)?;
    let arch = Architecture {
        field: field.clone(),
        param_count: field.param_count(),
        lambdas: field.lambdas(),
    };
    fs::write(dir.join(ARCHITECTURE_JSON), serde_json::to_string_pretty(&arch)?)?;
    Ok(())
}

pub fn load(dir: &Path) -> Result<Field> {
    let header: Header = serde_json::from_slice(&fs::read(dir.join(PARAMS_JSON))?)?;
    if header.dtype != "f64" || header.endian != "little" {
        return Err(Error::Checkpoint(format!(
            "unsupported encoding {} {}",
            header.endian, header.dtype
        )));
    }
    let bytes = fs::read(dir.join(PARAMS_BIN))?;
    if bytes.len() != 8 * header.len {
        return Err(Error::Checkpoint(format!(
            "{PARAMS_BIN} has {} bytes, header declares {} values",
            bytes.len(),
            header.len
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let store = ParamStore::from_parts(values, header.blocks)?;
    let arch: Architecture = serde_json::from_slice(&fs::read(dir.join(ARCHITECTURE_JSON))?)?;
    if arch.param_count != header.len {
        return Err(Error::Checkpoint(format!(
            "architecture declares {} parameters, {PARAMS_BIN} holds {}",
            arch.param_count, header.len
        )));
    }
    let mut field = arch.field;
    field.set_params(store)?;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{JetOrder, Tape};
    use crate::geometry::Cutoff;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = Field::material_vertex(&[2, 5, 6], &[2, 4, 3], Cutoff::default(), 3).unwrap();
        save(&f, dir.path()).unwrap();
        let g = load(dir.path()).unwrap();
        assert_eq!(f.params().values(), g.params().values());
        assert_eq!(f.lambdas(), g.lambdas());
        let x = [[0.3, -0.2], [-0.7, 0.1]];
        let (mut t1, mut t2) = (Tape::new(), Tape::new());
        let a = f.eval(&mut t1, &x, JetOrder::Gradient).unwrap();
        let b = g.eval(&mut t2, &x, JetOrder::Gradient).unwrap();
        assert_eq!(t1.value(a.u), t2.value(b.u));
    }

    #[test]
    fn truncated_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let f = Field::classical(&[2, 3, 1], crate::network::Activation::Tanh, 1).unwrap();
        save(&f, dir.path()).unwrap();
        let bin = dir.path().join(PARAMS_BIN);
        let mut bytes = fs::read(&bin).unwrap();
        bytes.truncate(bytes.len() - 8);
        fs::write(&bin, bytes).unwrap();
        assert!(matches!(load(dir.path()), Err(Error::Checkpoint(_))));
    }
}
