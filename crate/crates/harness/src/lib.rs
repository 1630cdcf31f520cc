//! Experiment orchestration for trafficlab: training runs, baseline and
//! policy experiments over seeds, statistical comparison and charts.

pub mod charts;
pub mod compare;
pub mod experiment;
pub mod simenv;
pub mod stats;
pub mod train;
