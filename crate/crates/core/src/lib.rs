pub mod error;
pub mod exponent;
pub mod frame;
pub mod gaussian;
pub mod grid;
pub mod mass;
pub mod state;
pub mod transform;
pub mod density;
pub mod analytics;
pub mod uncertainty;
pub mod phase;
pub mod dynamics;
pub mod scenario;
pub mod io;
pub mod selftest;
pub mod cli;
