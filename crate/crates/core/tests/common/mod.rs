#![allow(dead_code)]

pub mod fixtures;
pub mod oracle;
pub mod sweeps;
pub mod toy;
