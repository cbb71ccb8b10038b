//! Planning and quasi-static simulation of collaborative multi-robot pushing.

pub mod geometry;
pub mod contact;
pub mod lp;
pub mod sim;
pub mod error;
pub mod modes;
pub mod mapf;
pub mod decompose;
pub mod hybrid;
pub mod assign;
pub mod scenario;
pub mod episode;
pub mod trace;
pub mod plot;
pub mod pipeline;
