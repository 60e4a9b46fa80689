pub mod adjunct;
pub mod cast;
pub mod effects;
pub mod interp;
pub mod depend;
pub mod patterns;
pub mod scan;
