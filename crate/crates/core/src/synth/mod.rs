//! Committed synthetic corpus: the toy support-domain knowledge graph and
//! generators for disambiguation and matching datasets whose channel
//! structure is known by construction.

mod disamb;
mod kg;
mod matching;

pub use disamb::{gen_disamb, DisambGenConfig};
pub use kg::toy_kg;
pub use matching::{gen_matching, gen_matching_family, MatchGenConfig};
