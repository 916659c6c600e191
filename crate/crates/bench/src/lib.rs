//! Fixed workloads shared by the criterion benchmarks in `benches/`.

use gradmatch::bench::{gen_offline_dataset, InputDistribution, Oracle};
use gradmatch::data::{sample_trajectories, Trajectory};
use gradmatch::surrogate::init_surrogate;
use gradmatch::{ArchitectureSpec, Dataset, SurrogateModel};

pub const DIM: usize = 4;

/// The default `4 → 512 → 128 → 32 → 1` surrogate at a fixed initialization.
pub fn default_model() -> SurrogateModel {
    init_surrogate(&ArchitectureSpec::new(DIM), 1).expect("default architecture is valid")
}

/// `n` Shekel points drawn from `N(0, I)`.
pub fn shekel_dataset(n: usize) -> Dataset {
    gen_offline_dataset(&Oracle::shekel(), n, InputDistribution::default(), 2).expect("n is at least 2")
}

/// `count` trajectories of length `traj_len` from `ds`.
pub fn trajectories(ds: &Dataset, traj_len: usize, count: usize) -> Vec<Trajectory> {
    sample_trajectories(ds, traj_len, count, 3)
        .expect("dataset is large enough to bin")
        .trajectories
}
