//! Shared fixtures for the benchmarks in `benches/`.

use coexist_core::analytic::AnalyticParams;
use coexist_core::phy::Aggregation;
use coexist_core::scenario::generate_scenario;
use coexist_core::sim::SimConfig;
use coexist_core::Scenario;

/// Fixed realization with ten APs and `n_gnb` gNBs.
pub fn scenario(n_gnb: usize) -> Scenario {
    generate_scenario(0xbe9c, n_gnb).expect("valid gNB count")
}

/// Default engine settings with the given aggregation mode.
pub fn sim_config(aggregation: Aggregation) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.wifi.aggregation = aggregation;
    cfg
}

pub fn analytic_params(aggregation: Aggregation) -> AnalyticParams {
    AnalyticParams::from_sim(&sim_config(aggregation))
}
