use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::EegDataset;
use crate::error::{Error, Result};

/// Per-class shuffled split into sorted `(train, validation)` index lists.
/// Every class keeps at least one trial on each side.
pub fn stratified_split_indices(labels: &[usize], classes: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::config(format!("val_fraction must be in (0, 1), got {val_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for class in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::validation(format!(
                "class {class} has {} trial(s); a stratified split needs at least 2",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_val = ((members.len() as f64 * val_fraction).round() as usize).clamp(1, members.len() - 1);
        val.extend_from_slice(&members[..n_val]);
        train.extend_from_slice(&members[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

pub fn stratified_split(ds: &EegDataset, val_fraction: f64, seed: u64) -> Result<(EegDataset, EegDataset)> {
    let (train, val) = stratified_split_indices(ds.labels(), ds.classes(), val_fraction, seed)?;
    Ok((ds.subset(&train)?, ds.subset(&val)?))
}
