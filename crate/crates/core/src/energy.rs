//! Energy metering.
//!
//! Energies are microwatt-hours throughout, durations milliseconds. The
//! [`ModeledMeter`] charges declared per-prediction costs and is exact, so
//! tests can assert energy totals with `==`. Physical meters (OS counters, a
//! wall-clock power proxy) implement the same trait in the std companion crate
//! and ignore invocation records.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Microjoules per microwatt-hour.
pub const UJ_PER_UWH: f64 = 3600.0;

/// Where an energy figure came from. Reports carry it so modeled and measured
/// numbers are never silently compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergySource {
    Modeled,
    WallclockProxy,
    OsCounter,
}

impl EnergySource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Modeled => "modeled",
            Self::WallclockProxy => "wallclock_proxy",
            Self::OsCounter => "os_counter",
        }
    }
}

impl core::fmt::Display for EnergySource {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub energy_uwh: f64,
    pub duration_ms: f64,
    pub source: EnergySource,
}

/// Brackets a measured section.
///
/// `begin` and `end` delimit one section. Invocation records only matter to
/// meters that account by declared cost; the defaults ignore them.
pub trait EnergyMeter {
    fn source(&self) -> EnergySource;

    fn begin(&mut self) -> Result<()>;

    fn record_model_invocation(&mut self, _model_index: usize, _count: u64) -> Result<()> {
        Ok(())
    }

    fn record_router_invocation(&mut self, _count: u64) -> Result<()> {
        Ok(())
    }

    fn end(&mut self) -> Result<EnergySample>;
}

impl<M: EnergyMeter + ?Sized> EnergyMeter for &mut M {
    fn source(&self) -> EnergySource {
        (**self).source()
    }
    fn begin(&mut self) -> Result<()> {
        (**self).begin()
    }
    fn record_model_invocation(&mut self, model_index: usize, count: u64) -> Result<()> {
        (**self).record_model_invocation(model_index, count)
    }
    fn record_router_invocation(&mut self, count: u64) -> Result<()> {
        (**self).record_router_invocation(count)
    }
    fn end(&mut self) -> Result<EnergySample> {
        (**self).end()
    }
}

/// Declared energy per single prediction, per chain position, plus the cost
/// of one router decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub per_model_cost: Vec<f64>,
    pub router_cost: f64,
}

impl CostModel {
    pub fn new(per_model_cost: Vec<f64>, router_cost: f64) -> Result<Self> {
        let model = Self { per_model_cost, router_cost };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |c: f64| !c.is_finite() || c < 0.0;
        if let Some(c) = self.per_model_cost.iter().copied().find(|&c| bad(c)) {
            return Err(Error::Meter(format!("model cost {c} must be finite and non-negative")));
        }
        if bad(self.router_cost) {
            return Err(Error::Meter(format!(
                "router cost {} must be finite and non-negative",
                self.router_cost
            )));
        }
        Ok(())
    }
}

/// Energy of a run from invocation counts: `sum_i counts[i] * cost[i]` plus
/// router decisions times the router cost.
pub fn modeled_measure(costs: &CostModel, counts: &[u64], router_count: u64) -> Result<EnergySample> {
    if counts.len() > costs.per_model_cost.len() {
        return Err(Error::ModelIndex {
            index: counts.len() - 1,
            len: costs.per_model_cost.len(),
        });
    }
    let models: f64 = counts
        .iter()
        .zip(&costs.per_model_cost)
        .map(|(&n, &c)| n as f64 * c)
        .sum();
    Ok(EnergySample {
        energy_uwh: models + router_count as f64 * costs.router_cost,
        duration_ms: 0.0,
        source: EnergySource::Modeled,
    })
}

/// Deterministic meter charging [`CostModel`] prices per recorded invocation.
///
/// Totals are computed from integer counts at `end`, so the order of
/// recording never changes the result. It does not observe time; samples
/// report a zero duration.
#[derive(Debug, Clone)]
pub struct ModeledMeter {
    costs: CostModel,
    counts: Vec<u64>,
    router_count: u64,
    active: bool,
}

impl ModeledMeter {
    pub fn new(costs: CostModel) -> Result<Self> {
        costs.validate()?;
        let k = costs.per_model_cost.len();
        Ok(Self { costs, counts: vec![0; k], router_count: 0, active: false })
    }

    pub fn costs(&self) -> &CostModel {
        &self.costs
    }

    /// Invocation counts of the current (or last finished) section.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn router_count(&self) -> u64 {
        self.router_count
    }

    fn ensure_active(&self) -> Result<()> {
        if self.active {
            Ok(())
        } else {
            Err(Error::Meter("no measurement in progress; call begin() first".into()))
        }
    }
}

impl EnergyMeter for ModeledMeter {
    fn source(&self) -> EnergySource {
        EnergySource::Modeled
    }

    fn begin(&mut self) -> Result<()> {
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.router_count = 0;
        self.active = true;
        Ok(())
    }

    fn record_model_invocation(&mut self, model_index: usize, count: u64) -> Result<()> {
        self.ensure_active()?;
        let len = self.counts.len();
        let slot = self
            .counts
            .get_mut(model_index)
            .ok_or(Error::ModelIndex { index: model_index, len })?;
        *slot += count;
        Ok(())
    }

    fn record_router_invocation(&mut self, count: u64) -> Result<()> {
        self.ensure_active()?;
        self.router_count += count;
        Ok(())
    }

    fn end(&mut self) -> Result<EnergySample> {
        self.ensure_active()?;
        self.active = false;
        modeled_measure(&self.costs, &self.counts, self.router_count)
    }
}

pub fn uj_to_uwh(uj: f64) -> f64 {
    uj / UJ_PER_UWH
}

pub fn uwh_to_uj(uwh: f64) -> f64 {
    uwh * UJ_PER_UWH
}

/// Difference between two readings of a cumulative counter that wraps to
/// zero after `max_range`.
pub fn counter_delta(before: u64, after: u64, max_range: u64) -> u64 {
    if after >= before {
        after - before
    } else {
        max_range.saturating_sub(before) + after
    }
}

/// Energy of a section of `duration_ms` drawn at a constant `watts`.
pub fn proxy_energy_uwh(duration_ms: f64, watts: f64) -> f64 {
    // ms * W = mJ; 1 uWh = 3.6 mJ
    duration_ms * watts / 3.6
}

/// Grams CO2e for a sample at `grams_per_kwh` grid intensity.
pub fn to_carbon(sample: &EnergySample, grams_per_kwh: f64) -> Result<f64> {
    if grams_per_kwh.is_nan() || grams_per_kwh < 0.0 {
        return Err(Error::CarbonIntensity(grams_per_kwh));
    }
    Ok(sample.energy_uwh * 1e-9 * grams_per_kwh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sample(energy_uwh: f64) -> EnergySample {
        EnergySample { energy_uwh, duration_ms: 0.0, source: EnergySource::Modeled }
    }

    #[test]
    fn modeled_dot_product() {
        let costs = CostModel::new(vec![1.0, 100.0], 0.0).unwrap();
        assert_eq!(modeled_measure(&costs, &[360, 126], 0).unwrap().energy_uwh, 12960.0);
        assert_eq!(modeled_measure(&costs, &[0, 0], 0).unwrap().energy_uwh, 0.0);
        assert!(matches!(
            modeled_measure(&costs, &[1, 2, 3], 0),
            Err(Error::ModelIndex { index: 2, len: 2 })
        ));
    }

    #[test]
    fn modeled_cascade_from_table_totals() {
        // 100 instances, 65 accepted by the tree: the tree runs on all 100,
        // the network on the 35 escalations.
        let g = 0.13 / 360.0;
        let a = 40.80 / 360.0;
        let costs = CostModel::new(vec![g, a], 0.0).unwrap();
        let e = modeled_measure(&costs, &[100, 35], 0).unwrap().energy_uwh;
        // 100 * 0.13/360 + 35 * 40.80/360 = (13 + 1428) / 360 = 1441 / 360
        assert_relative_eq!(e, 1441.0 / 360.0, max_relative = 1e-12);
        assert_relative_eq!(e, 4.002_777_777_777_778, max_relative = 1e-12);
    }

    #[test]
    fn meter_lifecycle() {
        let mut m = ModeledMeter::new(CostModel::new(vec![1.0, 100.0], 0.5).unwrap()).unwrap();
        assert!(m.end().is_err());
        assert!(m.record_model_invocation(0, 1).is_err());
        m.begin().unwrap();
        m.record_model_invocation(0, 3).unwrap();
        m.record_model_invocation(1, 1).unwrap();
        m.record_router_invocation(2).unwrap();
        assert!(m.record_model_invocation(2, 1).is_err());
        assert_eq!(m.end().unwrap().energy_uwh, 104.0);
        assert!(m.end().is_err());
        m.begin().unwrap();
        assert_eq!(m.end().unwrap().energy_uwh, 0.0);
    }

    #[test]
    fn rejects_bad_costs() {
        assert!(CostModel::new(vec![1.0, -1.0], 0.0).is_err());
        assert!(CostModel::new(vec![f64::NAN], 0.0).is_err());
        assert!(CostModel::new(vec![1.0], f64::INFINITY).is_err());
    }

    #[test]
    fn unit_conversions() {
        assert_eq!(uj_to_uwh(3_600_000.0), 1000.0);
        assert_eq!(counter_delta(u64::MAX - 100, 200, u64::MAX), 300);
        assert_eq!(counter_delta(10, 25, 1000), 15);
    }

    #[test]
    fn proxy_arithmetic() {
        // 0.03744 s * 10 W = 0.3744 J = 374400 uJ = 104 uWh
        assert_relative_eq!(proxy_energy_uwh(37.44, 10.0), 104.0, max_relative = 1e-12);
        assert_eq!(proxy_energy_uwh(0.0, 10.0), 0.0);
        assert_relative_eq!(
            proxy_energy_uwh(12.5, 10.0) + proxy_energy_uwh(7.5, 10.0),
            proxy_energy_uwh(20.0, 10.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn carbon_conversion() {
        // 40.80 uWh = 4.08e-8 kWh; * 400 g/kWh = 1.632e-5 g
        assert_relative_eq!(to_carbon(&sample(40.80), 400.0).unwrap(), 1.632e-5, max_relative = 1e-12);
        assert_eq!(to_carbon(&sample(40.80), 0.0).unwrap(), 0.0);
        assert_eq!(
            to_carbon(&sample(40.80), 800.0).unwrap(),
            2.0 * to_carbon(&sample(40.80), 400.0).unwrap()
        );
        assert_eq!(to_carbon(&sample(1.0), -1.0), Err(Error::CarbonIntensity(-1.0)));
    }

    proptest! {
        #[test]
        fn recording_order_is_irrelevant(
            calls in proptest::collection::vec((0usize..3, 0u64..50), 0..40),
            seed in any::<u64>(),
        ) {
            let costs = CostModel::new(vec![0.13 / 359.0, 1.7, 40.80 / 359.0], 0.01).unwrap();
            let mut forward = ModeledMeter::new(costs.clone()).unwrap();
            forward.begin().unwrap();
            for &(i, n) in &calls {
                forward.record_model_invocation(i, n).unwrap();
            }
            let mut shuffled = calls.clone();
            crate::rng::SplitMix64::new(seed).shuffle(&mut shuffled);
            let mut permuted = ModeledMeter::new(costs).unwrap();
            permuted.begin().unwrap();
            for &(i, n) in &shuffled {
                permuted.record_model_invocation(i, n).unwrap();
            }
            prop_assert_eq!(
                forward.end().unwrap().energy_uwh.to_bits(),
                permuted.end().unwrap().energy_uwh.to_bits()
            );
        }

        #[test]
        fn uj_uwh_round_trip(uj in 0u64..(1u64 << 50)) {
            let uj = uj as f64;
            let back = uwh_to_uj(uj_to_uwh(uj));
            let ulp = f64::from_bits(uj.to_bits() + 1) - uj;
            prop_assert!((back - uj).abs() <= ulp.max(f64::MIN_POSITIVE));
        }
    }
}
