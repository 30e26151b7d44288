//! Timing of candidate selection against random hand positions.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrcad_core::geom::Aabb;
use vrcad_core::proposal::ProposalError;
use vrcad_core::{CandidateSet, DistanceScope, FaceTag, Model, SelectionState, Vec3};

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub k: usize,
    pub queries: usize,
    pub seed: u64,
    pub scope: DistanceScope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub candidates: usize,
    pub max_triangles: usize,
    pub queries: usize,
    pub p50_us: f64,
    pub p95_us: f64,
    pub mean_us: f64,
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "candidates {}, triangles per candidate <= {}, queries {}",
            self.candidates, self.max_triangles, self.queries
        )?;
        writeln!(f, "P50 {:.1} us", self.p50_us)?;
        writeln!(f, "P95 {:.1} us", self.p95_us)?;
        write!(f, "mean {:.1} us", self.mean_us)
    }
}

/// Builds the candidate set for `face` and times `select_nearest` for
/// hand points drawn uniformly from the base shape's bounds grown by half
/// their extent on every side.
pub fn run(model: &Model, face: &FaceTag, opts: &BenchOptions) -> Result<BenchReport, ProposalError> {
    let set = CandidateSet::build(model, face, opts.k, 1)?;
    let bounds = set.candidates.iter().fold(Aabb::EMPTY, |b, c| b.union(c.mesh.bounds()));
    let pad = bounds.extent() * 0.5;
    let (lo, hi) = (bounds.min - pad, bounds.max + pad);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let state = SelectionState::new(0.0, opts.scope);
    let mut micros = Vec::with_capacity(opts.queries);
    for _ in 0..opts.queries {
        let p = Vec3::new(
            rng.gen_range(lo.x..=hi.x),
            rng.gen_range(lo.y..=hi.y),
            rng.gen_range(lo.z..=hi.z),
        );
        let start = Instant::now();
        let id = set.select_nearest(p, &state)?;
        micros.push(start.elapsed().as_secs_f64() * 1e6);
        std::hint::black_box(id);
    }
    micros.sort_by(f64::total_cmp);
    let mean = micros.iter().sum::<f64>() / micros.len().max(1) as f64;
    Ok(BenchReport {
        candidates: set.len(),
        max_triangles: set
            .candidates
            .iter()
            .map(|c| c.mesh.triangle_count())
            .max()
            .unwrap_or(0),
        queries: opts.queries,
        p50_us: vrcad_server::vh::percentile(&micros, 0.5),
        p95_us: vrcad_server::vh::percentile(&micros, 0.95),
        mean_us: mean,
    })
}
