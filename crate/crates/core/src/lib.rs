//! Building blocks for a phrase-based statistical machine translation system.
//!
//! The crate covers the whole training and translation chain:
//!
//! * [`corpus`]: sentence-aligned corpus loading, cleaning and statistics
//! * [`artok`]: rule-based Arabic clitic segmentation (ATB and MyD3 schemes)
//! * [`lm`]: backoff n-gram language models with ARPA serialization
//! * [`align`]: IBM Model 1 word alignment and symmetrization
//! * [`phrase`]: phrase pair extraction, scoring and distortion
//! * [`decoder`]: stack-based beam search and n-best extraction
//! * [`mert`]: minimum error rate training on n-best pools
//! * [`bleu`]: corpus BLEU
//! * [`toy`]: a synthetic English/Arabic parallel corpus generator

pub mod align;
pub mod artok;
pub mod bleu;
pub mod corpus;
pub mod decoder;
pub mod error;
pub mod lm;
pub mod mert;
pub mod phrase;
pub mod toy;

pub use error::{Error, Result};
