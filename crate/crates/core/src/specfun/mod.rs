//! Special-function kernels.

pub mod bromwich;
pub mod foxh;
pub mod gamma;
pub mod meijer;

pub use bromwich::{bromwich_inverse, BromwichValue};
pub use foxh::{fox_h, fox_h_scaled, ContourConfig, ContourValue, FoxHSpec};
pub use gamma::{gamma, ln_gamma, ln_gamma_c, ln_upper_incomplete_gamma, regularized_lower_gamma, rgamma, upper_incomplete_gamma};
pub use meijer::meijer_g_0m_mm;
