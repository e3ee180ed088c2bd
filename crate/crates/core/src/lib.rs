//! Software core of the Open Arms platform: a 7-DoF arm model with a
//! numerical IK solver and solve-rate benchmark, pixel-wise antipodal grasp
//! geometry with the rectangle metric, Cornell dataset tooling, and a
//! from-scratch forward pass of the GGR-CNN grasp network.

pub mod arm;
pub mod bench;
pub mod cornell;
pub mod detect;
pub mod eval;
pub mod grasp;
pub mod ik;
pub mod nn;
