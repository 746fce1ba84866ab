pub mod config;
pub mod record;
pub mod run;
pub mod svg;
pub mod verify;
