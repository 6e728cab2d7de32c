//! Ingestion and preprocessing of NSL-KDD-style data.

pub mod encoding;
pub mod io;
pub mod label;
pub mod nslkdd;
pub mod reference;
pub mod synthetic;
pub mod table;

pub use encoding::{apply_l2_norms, fit_l2_norms, Preprocessor};
pub use io::{read_dataset, write_dataset};
pub use label::{AttackMap, ClassLabel};
pub use nslkdd::{parse_records, write_records, RawRecord};
pub use synthetic::synthetic_records;
pub use table::{
    class_distribution, class_distribution_of, ClassDistribution, ColumnKind, ColumnMeta,
    FeatureTable, LabelEncoding,
};
