//! Labelled object categories for classification and category-difference
//! explanations.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::world::{SynthObject, World};
use crate::error::{Error, Result};

/// `n_categories` prototypes that pairwise differ in at least two slots; each
/// object copies its prototype and resamples every slot with probability
/// `variation`.
pub fn generate_categories(
    world: &World,
    n_categories: usize,
    per_category: usize,
    variation: f64,
    rng: &mut impl Rng,
) -> Result<Vec<(SynthObject, usize)>> {
    let mut prototypes: Vec<BTreeMap<String, String>> = Vec::new();
    let mut attempts = 0;
    while prototypes.len() < n_categories {
        let cand = world.random_assignment(rng);
        let ok = prototypes.iter().all(|p| {
            p.iter().filter(|(k, v)| cand.get(*k) != Some(*v)).count() >= 2
        });
        if ok {
            prototypes.push(cand);
        } else {
            attempts += 1;
            if attempts >= super::world::MAX_RESAMPLES {
                return Err(Error::InfeasibleWorld(super::world::MAX_RESAMPLES));
            }
        }
    }
    let mut out = Vec::with_capacity(n_categories * per_category);
    for (c, proto) in prototypes.iter().enumerate() {
        for i in 0..per_category {
            let mut a = proto.clone();
            for slot in &world.spec.slots {
                if variation > 0.0 && rng.random_bool(variation) {
                    a.insert(slot.name.clone(), slot.values.choose(rng).unwrap().clone());
                }
            }
            out.push((world.make_object(format!("cat{c:02}-{i:04}"), a, rng)?, c));
        }
    }
    Ok(out)
}

/// Two categories whose prototypes differ in exactly `m` slots.
#[derive(Clone, Debug)]
pub struct CategoryPair {
    pub a: Vec<SynthObject>,
    pub b: Vec<SynthObject>,
    /// The differing slots, in saliency order.
    pub differing: Vec<String>,
}

pub fn generate_category_pair(
    world: &World,
    m: usize,
    per_side: usize,
    tag: &str,
    rng: &mut impl Rng,
) -> Result<CategoryPair> {
    let n_slots = world.spec.slots.len();
    if m == 0 || m > n_slots {
        return Err(Error::ConfigError(format!("cannot differ in {m} of {n_slots} slots")));
    }
    let proto_a = world.random_assignment(rng);
    let mut proto_b = proto_a.clone();
    let mut slots: Vec<&super::world::SlotSpec> = world.spec.slots.iter().collect();
    slots.shuffle(rng);
    for slot in slots.iter().take(m) {
        let current = &proto_a[&slot.name];
        let others: Vec<&String> = slot.values.iter().filter(|v| *v != current).collect();
        proto_b.insert(slot.name.clone(), (*others.choose(rng).unwrap()).clone());
    }
    let differing = world
        .spec
        .saliency_order
        .iter()
        .filter(|s| proto_a[*s] != proto_b[*s])
        .cloned()
        .collect();
    let mut side = |proto: &BTreeMap<String, String>, label: &str| -> Result<Vec<SynthObject>> {
        (0..per_side)
            .map(|i| world.make_object(format!("{tag}-{label}-{i:02}"), proto.clone(), rng))
            .collect()
    };
    let a = side(&proto_a, "a")?;
    let b = side(&proto_b, "b")?;
    Ok(CategoryPair { a, b, differing })
}
