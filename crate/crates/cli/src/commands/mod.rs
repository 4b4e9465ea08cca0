pub mod data;
pub mod evaluate;
pub mod generate;
pub mod train;
