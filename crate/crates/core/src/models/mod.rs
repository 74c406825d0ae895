//! Concrete maximal monotone control systems.

pub mod fd2;
pub mod heat;
pub mod wave;
