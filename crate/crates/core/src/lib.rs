#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Statistical postprocessing of ensemble forecasts of daily maximum wind
//! speed.

pub mod cli;
pub mod data;
pub mod dists;
pub mod estimation;
pub mod models;
pub mod quadrature;
pub mod scoring;
pub mod special;
