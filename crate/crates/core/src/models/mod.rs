//! Item parameters, parameter generation, simulation and EM estimation.

mod em;
mod generate;
mod params;
mod simulate;

pub use em::{fit_em_two_param, EmFit, EmOptions};
pub use generate::{all_effect_theta, default_params, dina_theta, generate_params, main_effect_theta, random_proportions};
pub use params::{validate_params, ItemParams, Proportions, Rule, Violation};
pub use simulate::{simulate, simulate_with, Dataset, CHUNK_ROWS};
