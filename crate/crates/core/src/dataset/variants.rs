//! Size-class variants of base rods, rendered and voxelized.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bases::BaseRod;
use super::sizes::concrete_sizes;
use super::DatasetError;
use crate::geometry::{build_solid, voxelize_solid, VoxelGrid};
use crate::taxonomy::{render_text, validate_spec, FeatureSchema, LinkingRodSpec, SizeClass};

/// One corpus entry: a spec, its canonical text and its voxel grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    /// Code of the base rod this sample varies.
    pub base: String,
    pub spec: LinkingRodSpec,
    pub text: String,
    pub grid: VoxelGrid,
}

/// Valid size-class combinations of a base in lexicographic order: the
/// first varied attribute changes slowest, classes in small/medium/large
/// order. A combination is valid when the spec validates and the rod builds.
pub fn size_combinations(base: &BaseRod, schema: &FeatureSchema) -> Vec<LinkingRodSpec> {
    let k = base.varied.len();
    let total = 3usize.pow(k as u32);
    (0..total)
        .filter_map(|mut code| {
            let mut digits = vec![0usize; k];
            for d in digits.iter_mut().rev() {
                *d = code % 3;
                code /= 3;
            }
            let mut spec = base.spec.clone();
            for (r, &d) in base.varied.iter().zip(&digits) {
                spec = spec.with_size(&r.entity, &r.attribute, SizeClass::ALL[d]);
            }
            let ok = validate_spec(&spec, schema).is_ok() && build_solid(&spec, &concrete_sizes(&spec)).is_ok();
            ok.then_some(spec)
        })
        .collect()
}

/// Splits `total` samples over `bases` as evenly as possible; earlier bases
/// take the remainder.
pub fn counts_for_total(total: usize, bases: usize) -> Vec<usize> {
    if bases == 0 {
        return Vec::new();
    }
    (0..bases).map(|i| total / bases + usize::from(i < total % bases)).collect()
}

fn base_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Draws `counts[i]` distinct size-class variants of `bases[i]`.
///
/// Combinations are visited in a seeded shuffled order and a variant is
/// kept only if its grid differs from every grid already kept, for this or
/// an earlier base; repeated grids are used only once the distinct ones run
/// out.
/// Selected variants are numbered `001..` in enumeration order.
pub fn generate_variants(
    bases: &[BaseRod],
    counts: &[usize],
    seed: u64,
    resolution: usize,
) -> Result<Vec<Sample>, DatasetError> {
    if bases.len() != counts.len() {
        return Err(DatasetError::Config(format!(
            "{} bases but {} per-base counts",
            bases.len(),
            counts.len()
        )));
    }
    let schema = FeatureSchema::linking_rod();
    let mut seen = HashSet::new();
    let mut samples = Vec::with_capacity(counts.iter().sum());
    for (index, (base, &count)) in bases.iter().zip(counts).enumerate() {
        samples.extend(select_base(base, count, base_seed(seed, index), resolution, &schema, &mut seen)?);
    }
    Ok(samples)
}

fn select_base(
    base: &BaseRod,
    count: usize,
    seed: u64,
    resolution: usize,
    schema: &FeatureSchema,
    seen: &mut HashSet<Vec<u8>>,
) -> Result<Vec<Sample>, DatasetError> {
    let combos = size_combinations(base, schema);
    if count > combos.len() {
        return Err(DatasetError::TooManyVariants { base: base.code.clone(), requested: count, max: combos.len() });
    }
    let mut order: Vec<usize> = (0..combos.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen: Vec<(usize, VoxelGrid)> = Vec::with_capacity(count);
    let mut repeats: Vec<(usize, VoxelGrid)> = Vec::new();
    for &i in &order {
        if chosen.len() == count {
            break;
        }
        let grid = voxelize_solid(&build_solid(&combos[i], &concrete_sizes(&combos[i]))?, resolution)?;
        if seen.insert(grid.occupancy().to_vec()) {
            chosen.push((i, grid));
        } else {
            repeats.push((i, grid));
        }
    }
    let missing = count - chosen.len();
    chosen.extend(repeats.into_iter().take(missing));
    chosen.sort_unstable_by_key(|(i, _)| *i);
    chosen
        .into_iter()
        .enumerate()
        .map(|(n, (i, grid))| {
            let id = format!("{}{:03}", base.code, n + 1);
            let text = render_text(&combos[i], schema)?;
            Ok(Sample { grid: grid.with_source(id.clone()), id, base: base.code.clone(), spec: combos[i].clone(), text })
        })
        .collect()
}
