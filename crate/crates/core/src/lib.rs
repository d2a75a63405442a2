//! Robot skill workbench over a simulated tabletop world.

pub mod diagnosis;
pub mod engine;
pub mod memory;
pub mod playing;
pub mod skill;
pub mod world;

pub use engine::{DoaProbe, DoaRecord, Engine, Execution};
