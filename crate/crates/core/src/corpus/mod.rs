//! Synthetic corpora, column-format ingestion, low-resource subsampling
//! and few-shot episodes.

mod column;
mod episode;
mod generate;
mod reference;
mod split;

pub use column::{bio_to_spans, load_column_format, spans_to_bio, write_column_format};
pub use episode::{sample_episode, Episode};
pub use generate::{generate, EntityTypeSpec, GenSpec, RelationTypeSpec, SlotSpec, Template, TemplateRelation, TemplateSpec};
pub use reference::{reference_ner_spec, reference_ner_split};
pub use split::{label_types, partition, partition_sizes, sample_size, subsample, FullSplit, Split};
