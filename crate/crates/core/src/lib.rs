pub mod config;
pub mod dynamics;
pub mod eoc;
pub mod forces;
pub mod geometry;
pub mod initial_data;
pub mod integrator;
pub mod output;
pub mod par;
pub mod redistribution;
pub mod reduced_ode;
pub mod scenario;
