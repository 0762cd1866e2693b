pub mod data;
pub mod eval;
pub mod nn;
pub mod physics;
pub mod scene;
pub mod tracker;
