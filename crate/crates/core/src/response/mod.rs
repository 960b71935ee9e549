pub mod chi0;
pub mod dielectric;
pub mod fibers;
pub mod perturbation;
pub mod screening;
