pub mod datagen;
pub mod episode;
pub mod policies;
pub mod raster;
pub mod reward;
pub mod store;
pub mod toolprog;
