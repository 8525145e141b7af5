//! Synthetic attribute world: latent slot assignments, a phrase grammar that
//! doubles as a ground-truth listener, features and rendered images.

mod categories;
mod grammar;
mod io;
mod render;
mod world;

pub use categories::{generate_categories, generate_category_pair, CategoryPair};
pub use grammar::{Grammar, SlotValue};
pub use io::{DatasetDir, SynthManifest};
pub use render::{encode_png, render_image, MIN_SIZE_PX};
pub use world::{
    generate_dataset, oracle_ground, GenConfig, Grounding, SlotSpec, SplitSizes, SynthDataset,
    SynthObject, World, WorldSpec, MAX_RESAMPLES, PHRASES_PER_RECORD,
};
pub use world::rng_for;
