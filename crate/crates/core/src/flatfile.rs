//! Header-plus-payload binary files: one line of JSON, a newline, then raw
//! little-endian data.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn write<H: Serialize>(path: &Path, header: &H, payload: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

pub fn read<H: DeserializeOwned>(path: &Path) -> Result<(H, Vec<u8>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header = serde_json::from_str(line.trim_end()).map_err(|e| Error::Parse {
        line: 1,
        msg: format!("bad header: {e}"),
    })?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    Ok((header, payload))
}

pub fn f64s_to_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn bytes_to_f64s(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Contract(format!(
            "payload of {} bytes is not a whole number of f64 values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
