pub mod denoise;
pub mod evaluate;
pub mod synth;
pub mod sweep;
pub mod train;
pub mod verify;
