//! Stratified random validation points drawn from a class map.

use std::collections::HashSet;

use crate::classify::LabeledSample;
use crate::error::{Error, Result};
use crate::raster::{ClassLegend, ClassMap};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub n_per_class: usize,
    pub seed: u64,
    /// Classes to sample, in output order.
    pub legend: ClassLegend,
}

impl SamplePlan {
    pub fn new(n_per_class: usize, seed: u64, legend: ClassLegend) -> Result<Self> {
        if n_per_class == 0 {
            return Err(Error::Validation("n_per_class must be at least 1".into()));
        }
        Ok(SamplePlan {
            n_per_class,
            seed,
            legend,
        })
    }
}

/// Draws `plan.n_per_class` distinct pixels of every plan class, returned as
/// pixel-center points.
///
/// Candidates of each class are listed in row-major order and drawn by a
/// partial Fisher-Yates shuffle driven by one SplitMix64 stream seeded with
/// `plan.seed`, classes taken in plan legend order. Points within a class are
/// emitted in row-major order.
pub fn stratified_random_points(map: &ClassMap, plan: &SamplePlan) -> Result<Vec<LabeledSample>> {
    stratified_random_points_excluding(map, plan, &[])
}

/// As [`stratified_random_points`], never choosing a pixel that contains one of `exclude`.
pub fn stratified_random_points_excluding(
    map: &ClassMap,
    plan: &SamplePlan,
    exclude: &[LabeledSample],
) -> Result<Vec<LabeledSample>> {
    if plan.n_per_class == 0 {
        return Err(Error::Validation("n_per_class must be at least 1".into()));
    }
    let grid = map.grid();
    if map.histogram().iter().all(|&c| c == 0) {
        return Err(Error::Validation("class map has no classified pixels".into()));
    }
    let mut excluded = HashSet::new();
    for s in exclude {
        if let Some((col, row)) = grid.map_to_pixel(s.x, s.y)? {
            excluded.insert(row * grid.width() + col);
        }
    }

    let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); plan.legend.len()];
    let table = plan.legend.position_table();
    for (idx, v) in map.values().iter().enumerate() {
        if map.class_at(idx).is_none() || excluded.contains(&idx) {
            continue;
        }
        if let Some(p) = table[*v as usize] {
            candidates[p].push(idx);
        }
    }
    for (entry, c) in plan.legend.entries().iter().zip(&candidates) {
        if c.len() < plan.n_per_class {
            return Err(Error::Sampling(format!(
                "class {} ({}) has {} eligible pixel(s), {} requested",
                entry.id,
                entry.name,
                c.len(),
                plan.n_per_class
            )));
        }
    }

    let mut rng = SplitMix64::new(plan.seed);
    let mut out = Vec::with_capacity(plan.n_per_class * plan.legend.len());
    for (entry, mut pool) in plan.legend.entries().iter().zip(candidates) {
        let n = plan.n_per_class;
        for i in 0..n {
            let j = i + rng.below((pool.len() - i) as u64) as usize;
            pool.swap(i, j);
        }
        let mut chosen = pool[..n].to_vec();
        chosen.sort_unstable();
        for idx in chosen {
            let (x, y) = grid.pixel_to_map((idx % grid.width()) as i64, (idx / grid.width()) as i64)?;
            out.push(LabeledSample {
                x,
                y,
                class_id: entry.id,
            });
        }
    }
    Ok(out)
}
