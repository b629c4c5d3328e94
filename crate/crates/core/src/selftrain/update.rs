use rand::Rng;

use crate::error::{Error, Result};
use crate::trace::{LabelPartition, Presence};

/// Sampling rates of the label update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRates {
    pub alpha1: f64,
    pub alpha2: f64,
    /// Whether windows unlabeled in `prev` may be picked up at all.
    pub sample_unlabeled: bool,
}

/// Next labeled set from the previous one and this round's vote.
///
/// Per class, indices labeled that class in both keep it. Every index in
/// the symmetric difference of the two class sets is drawn independently
/// with that class's rate, class 1 first. An index drawn for both classes
/// takes its new label, one drawn for a single class takes that class, and
/// the rest become unlabeled.
pub fn update_labels<R: Rng + ?Sized>(
    prev: &LabelPartition,
    new: &LabelPartition,
    rates: UpdateRates,
    rng: &mut R,
) -> Result<LabelPartition> {
    if prev.n_total() != new.n_total() {
        return Err(Error::IndexMismatch(format!(
            "previous labeling covers {} windows, new labeling {}",
            prev.n_total(),
            new.n_total()
        )));
    }
    for a in [rates.alpha1, rates.alpha2] {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidConfig(format!("sampling rate {a} outside [0, 1]")));
        }
    }

    let slots = prev
        .slots()
        .iter()
        .zip(new.slots())
        .map(|(&old, &fresh)| {
            if old.is_some() && old == fresh {
                return old;
            }
            if old.is_none() && !rates.sample_unlabeled {
                return None;
            }
            let contested = |c: Presence| (old == Some(c)) != (fresh == Some(c));
            let pick1 = contested(Presence::Present) && rng.random_bool(rates.alpha1);
            let pick2 = contested(Presence::Absent) && rng.random_bool(rates.alpha2);
            match (pick1, pick2) {
                (true, true) => fresh,
                (true, false) => Some(Presence::Present),
                (false, true) => Some(Presence::Absent),
                (false, false) => None,
            }
        })
        .collect();
    Ok(LabelPartition::from_slots(slots))
}
