pub mod error;
pub mod quad;
pub mod special;
pub mod spectral;
pub mod qubit;
pub mod superop;
pub mod tcl;
pub mod qfi;
pub mod chainmap;
pub mod tebd;
