pub mod check_field;
pub mod evolve;
pub mod gauge_fit;
pub mod sweep;
pub mod verify;
