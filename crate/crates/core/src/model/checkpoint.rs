use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Segment};
use crate::error::{Error, Result};
use crate::flatfile;

use super::transformer::ModelConfig;
use super::vocab::Vocab;

const FORMAT: &str = "fishdip-checkpoint";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    config: ModelConfig,
    segments: Vec<Segment>,
    vocab: Vec<String>,
}

/// Everything needed to rebuild a trained model.
#[derive(Debug)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub store: ParamStore,
}

/// Writes the JSON header line (config, segments, vocabulary) followed by
/// the parameters as little-endian `f64` in segment order.
pub fn write_checkpoint(path: &Path, config: &ModelConfig, vocab: &Vocab, store: &ParamStore) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        config: config.clone(),
        segments: store.segments().to_vec(),
        vocab: vocab.tokens().to_vec(),
    };
    flatfile::write(path, &header, &flatfile::f64s_to_bytes(store.data()))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let (header, payload): (Header, _) = flatfile::read(path)?;
    if header.format != FORMAT {
        return Err(Error::Contract(format!("{} is not a checkpoint", path.display())));
    }
    let data = flatfile::bytes_to_f64s(&payload)?;
    let store = ParamStore::from_segments(header.segments, data)?;
    Ok(Checkpoint {
        config: header.config,
        vocab: Vocab::from_tokens(header.vocab),
        store,
    })
}
