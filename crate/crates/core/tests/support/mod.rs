//! Test-only oracles. Nothing here shares code with the checker.

#![allow(dead_code)]

pub mod enumerate;
pub mod protocol;
