pub mod error;
pub mod mesh;
pub mod fem;
pub mod spectrum;
pub mod oracle;
pub mod optimize;
pub mod experiments;
pub mod cli;
