pub mod evaluate;
pub mod features;
pub mod fuse;
pub mod keywords;
pub mod lm;
pub mod predict;
pub mod rules;
pub mod train;
