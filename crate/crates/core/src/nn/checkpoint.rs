//! On-disk model format: one JSON header line, then every parameter as a
//! little-endian `f32`, tensors in storage order, rows first.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ModelParams, ModelSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub spec: ModelSpec,
    pub shapes: Vec<(usize, usize)>,
}

pub fn write_checkpoint(path: &Path, model: &ModelParams<f32>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = CheckpointHeader {
        spec: model.spec,
        shapes: model.params.0.iter().map(|t| t.dim()).collect(),
    };
    let mut line = serde_json::to_vec(&header)?;
    line.push(b'\n');
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(&line)?;
        for t in &model.params.0 {
            for v in t.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<ModelParams<f32>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut line = String::new();
    r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let header: CheckpointHeader = serde_json::from_str(line.trim_end())?;
    let mut tensors = Vec::with_capacity(header.shapes.len());
    let mut buf = [0u8; 4];
    for &(rows, cols) in &header.shapes {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
            data.push(f32::from_le_bytes(buf));
        }
        tensors.push(Array2::from_shape_vec((rows, cols), data).expect("length matches shape"));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
    if !rest.is_empty() {
        return Err(Error::Shape(format!(
            "{} trailing bytes after the last tensor",
            rest.len()
        )));
    }
    ModelParams::from_tensors(header.spec, tensors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::GnnKind;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = ModelParams::<f32>::init(ModelSpec::retexo_block(GnnKind::Gat, 7, 16, 7).with_heads(4), 3)
            .unwrap();
        write_checkpoint(&path, &m).unwrap();
        assert_eq!(read_checkpoint(&path).unwrap(), m);
        let size = std::fs::metadata(&path).unwrap().len();
        let header_len = std::fs::read(&path).unwrap().iter().position(|&b| b == b'\n').unwrap() + 1;
        assert_eq!(size as usize, header_len + m.num_floats() * 4);
    }

    #[test]
    fn truncated_file_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = ModelParams::<f32>::init(ModelSpec::mlp(3, 4, 2), 0).unwrap();
        write_checkpoint(&path, &m).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(read_checkpoint(&path).is_err());
    }
}
