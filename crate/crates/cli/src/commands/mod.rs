pub mod collect;
pub mod filter;
pub mod flops;
pub mod report;
pub mod search;
pub mod sweep;
pub mod train;
