//! Partitioning of measurement records into separation subintervals and
//! per-group means and variances of the mean.
//!
//! Two paths produce the same group structure: subinterval binning for data
//! whose separations differ between sets, and the pointwise path for sets
//! sharing one grid. Either way a group holds the values considered
//! equivalent at one separation.

use std::collections::BTreeMap;

use crate::data::MeasurementCollection;
use crate::error::{Error, Result};

/// One separation bin (or one grid point on the pointwise path).
#[derive(Debug, Clone)]
pub struct SubintervalGroup {
    /// Bin index within the partition, or point index on the aligned path.
    pub index: usize,
    /// Subinterval midpoint, or the grid abscissa itself, nm.
    pub center_nm: f64,
    pub members: Vec<f64>,
    pub mean: f64,
    /// Squared standard error of the mean.
    pub var_of_mean: f64,
}

impl SubintervalGroup {
    /// Member count m_k.
    pub fn m(&self) -> usize {
        self.members.len()
    }
}

/// Mean and variance of the mean of a group of equivalent measurements:
/// mean = Σx/m, var = Σ(x − mean)² / (m(m−1)).
///
/// Members are summed in sorted order, so the result does not depend on
/// record order.
pub fn bin_mean_and_variance(members: &[f64]) -> Result<(f64, f64)> {
    let m = members.len();
    if m < 2 {
        return Err(Error::UndefinedVariance { m });
    }
    let mut sorted = members.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / m as f64;
    let ss: f64 = sorted.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, ss / (m as f64 * (m - 1) as f64)))
}

/// Tiles `[z_a, z_b]` with subintervals of width 2 Δz anchored at `z_a` and
/// assigns each record to one of them by half-open membership `[left, right)`
/// (the last subinterval also takes its right edge). Empty bins are dropped;
/// single-member bins are merged into the nearest populated bin by center
/// distance, ties toward the lower index.
pub fn partition_into_subintervals(
    coll: &MeasurementCollection,
) -> Result<Vec<SubintervalGroup>> {
    let width = 2.0 * coll.delta_z_nm;
    let (z_a, z_b) = coll.z_range;
    let n_bins = (((z_b - z_a) / width).ceil() as usize).max(1);
    let center = |k: usize| z_a + (k as f64 + 0.5) * width;

    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for r in &coll.records {
        let k = (((r.z_nm - z_a) / width).floor() as isize).clamp(0, n_bins as isize - 1);
        buckets[k as usize].push(r.value);
    }
    let mut bins: Vec<(usize, Vec<f64>)> = buckets
        .into_iter()
        .enumerate()
        .filter(|(_, b)| !b.is_empty())
        .collect();

    // merge singletons so every remaining bin supports a variance estimate
    loop {
        let Some(pos) = bins.iter().position(|(_, b)| b.len() == 1) else {
            break;
        };
        if bins.len() == 1 {
            return Err(Error::InsufficientReplication);
        }
        let z_from = center(bins[pos].0);
        let mut target = usize::MAX;
        let mut best = f64::INFINITY;
        for (i, (k, _)) in bins.iter().enumerate() {
            if i == pos {
                continue;
            }
            let d = (center(*k) - z_from).abs();
            if d < best {
                best = d;
                target = i;
            }
        }
        let (_, single) = bins.remove(pos);
        let target = if target > pos { target - 1 } else { target };
        bins[target].1.extend(single);
    }
    if bins.is_empty() {
        return Err(Error::InsufficientReplication);
    }

    bins.into_iter()
        .map(|(k, members)| {
            let (mean, var_of_mean) = bin_mean_and_variance(&members)?;
            Ok(SubintervalGroup {
                index: k,
                center_nm: center(k),
                members,
                mean,
                var_of_mean,
            })
        })
        .collect()
}

/// The shared separation grid, if every set contains exactly the same
/// abscissas (bitwise after parsing). Returns `None` for fewer than two
/// sets or any mismatch.
pub fn aligned_grid(coll: &MeasurementCollection) -> Option<Vec<f64>> {
    if coll.n_sets < 2 {
        return None;
    }
    let mut by_set: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for r in &coll.records {
        by_set.entry(r.set).or_default().push(r.z_nm);
    }
    let mut iter = by_set.values();
    let mut first = iter.next()?.clone();
    first.sort_by(f64::total_cmp);
    for zs in iter {
        let mut zs = zs.clone();
        zs.sort_by(f64::total_cmp);
        if zs.len() != first.len() || zs.iter().zip(&first).any(|(a, b)| a != b) {
            return None;
        }
    }
    Some(first)
}

/// Pointwise means and variances for sets sharing one grid: at each grid
/// point the n per-set values form the group. Equivalent to
/// [`bin_mean_and_variance`] applied at every abscissa.
pub fn pointwise_mean_and_variance(
    coll: &MeasurementCollection,
) -> Result<Vec<SubintervalGroup>> {
    let grid = aligned_grid(coll).ok_or(Error::GridsNotAligned)?;
    let mut by_set: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &coll.records {
        by_set.entry(r.set).or_default().push((r.z_nm, r.value));
    }
    for points in by_set.values_mut() {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    grid.iter()
        .enumerate()
        .map(|(i, &z)| {
            let members: Vec<f64> = by_set.values().map(|points| points[i].1).collect();
            let (mean, var_of_mean) = bin_mean_and_variance(&members)?;
            Ok(SubintervalGroup {
                index: i,
                center_nm: z,
                members,
                mean,
                var_of_mean,
            })
        })
        .collect()
}
