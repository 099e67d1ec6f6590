pub mod counterexample;
pub mod params_check;
pub mod run;
pub mod velocity_bench;
pub mod verify_smoothing;
