pub mod change_of_vars;
pub mod definition;
pub mod error;
pub mod inversion;
pub mod kbm;
pub mod matrix;
pub mod monomial;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod system;
