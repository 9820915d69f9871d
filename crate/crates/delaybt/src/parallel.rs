//! Rayon execution of independent Monte-Carlo paths. Every path draws its
//! noise from its own keyed stream and results are collected in path order,
//! so parallel runs are bit-identical to serial ones.

use delaybt_core::bench::PathRunner;
use delaybt_core::sim::{SddeSimulator, TrajectoryEnsemble};
use rayon::prelude::*;

pub struct RayonRunner;

impl PathRunner for RayonRunner {
    fn map_paths(&self, n: usize, f: &(dyn Fn(usize) -> [f64; 2] + Sync)) -> Vec<[f64; 2]> {
        (0..n).into_par_iter().map(f).collect()
    }
}

pub fn simulate_parallel(sim: &SddeSimulator<'_>) -> TrajectoryEnsemble {
    let paths = (0..sim.run().n_paths).into_par_iter().map(|p| sim.path(p)).collect();
    sim.assemble(paths)
}
