//! Fixtures shared by the criterion benches.

use arbor_admm::model::{generate_instance, GenerateParams};
use arbor_admm::Instance;

/// Seeded instance at edge probability 0.5.
pub fn fixture(n: usize, seed: u64) -> Instance {
    generate_instance(&GenerateParams::new(n, 0.5, seed)).expect("fixture instance")
}
