pub mod bundle;
pub mod cli;
pub mod conllu;
pub mod embeddings;
pub mod metrics;
pub mod model;
pub mod schema;
pub mod tensor;
pub mod training;
