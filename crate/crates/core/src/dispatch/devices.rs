//! Device models: capability boxes, update cadence, quantization, delay,
//! and settling.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use alloc::vec::Vec;
use nalgebra::DVector;

use super::DispatchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DeviceKind {
    /// Air handling unit: binary on/off at the unit rating.
    Ahu,
    /// Unidirectional charger (integer-kW setpoints).
    V1g,
    /// Bidirectional charger.
    V2g,
    /// Battery storage.
    Bess,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Quantization {
    Continuous,
    /// Absolute setpoints round to whole kilowatts.
    IntegerKw,
    /// The device is a bank of identical on/off units; achievable absolute
    /// power is `k · unit_kw` for `k = 0..=units`, chosen jointly for the
    /// class (nearest achievable aggregate).
    BinaryUnits { unit_kw: f64 },
}

/// One (possibly aggregated) controllable device.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviceSpec {
    pub kind: DeviceKind,
    /// Absolute power limits, kW.
    pub p_min: f64,
    pub p_max: f64,
    /// Power around which the box is centered, kW.
    pub baseline: f64,
    /// Seconds between setpoint refreshes (stale values are held).
    pub update_period: u32,
    /// Offset of this device's refresh instants (staggered groups).
    pub update_phase: u32,
    /// Pure transport delay, seconds.
    pub response_delay: u32,
    /// First-order settling time constant, seconds (0 = immediate).
    pub settle_tau: f64,
    pub quantization: Quantization,
    /// Weight of the quadratic deviation cost used by PD/DANA.
    pub cost_weight: f64,
}

impl DeviceSpec {
    pub fn validate(&self) -> Result<(), DispatchError> {
        if !(self.p_min < self.p_max) {
            return Err(DispatchError::BadDevice("p_min must be below p_max".into()));
        }
        if self.update_period == 0 {
            return Err(DispatchError::BadDevice("update_period must be >= 1 s".into()));
        }
        if !(self.cost_weight > 0.0) {
            return Err(DispatchError::BadDevice("cost_weight must be positive".into()));
        }
        Ok(())
    }

    /// Deviation box `[p_min − baseline, p_max − baseline]`.
    pub fn deviation_bounds(&self) -> (f64, f64) {
        (self.p_min - self.baseline, self.p_max - self.baseline)
    }

    pub fn capacity(&self) -> f64 {
        self.p_max - self.p_min
    }

    /// A 2 kW on/off air handler: baseline at half draw, 105 s delay.
    pub fn ahu() -> Self {
        Self {
            kind: DeviceKind::Ahu,
            p_min: 0.0,
            p_max: 2.0,
            baseline: 1.0,
            update_period: 60,
            update_phase: 0,
            response_delay: 105,
            settle_tau: 0.0,
            quantization: Quantization::BinaryUnits { unit_kw: 2.0 },
            cost_weight: 2.0,
        }
    }

    /// Aggregated unidirectional charging station bank (integer-kW
    /// setpoints, SAE floor scaled by the unit count).
    pub fn v1g_aggregate(units: u32, unit_max_kw: f64) -> Self {
        let n = units as f64;
        let floor = 1.6 * n;
        let max = unit_max_kw * n;
        Self {
            kind: DeviceKind::V1g,
            p_min: floor,
            p_max: max,
            baseline: 0.5 * (floor + max),
            update_period: 60,
            update_phase: 0,
            response_delay: 10,
            settle_tau: 0.0,
            quantization: Quantization::IntegerKw,
            cost_weight: 1.0,
        }
    }

    /// Single bidirectional charger, |p| ≤ rating/2 around zero.
    pub fn v2g(rating_kw: f64) -> Self {
        Self {
            kind: DeviceKind::V2g,
            p_min: -0.5 * rating_kw,
            p_max: 0.5 * rating_kw,
            baseline: 0.0,
            update_period: 1,
            update_phase: 0,
            response_delay: 3,
            settle_tau: 0.0,
            quantization: Quantization::Continuous,
            cost_weight: 0.3,
        }
    }

    pub fn bess(rating_kw: f64) -> Self {
        Self {
            kind: DeviceKind::Bess,
            p_min: -0.5 * rating_kw,
            p_max: 0.5 * rating_kw,
            baseline: 0.0,
            update_period: 20,
            update_phase: 0,
            response_delay: 0,
            settle_tau: 0.0,
            quantization: Quantization::Continuous,
            cost_weight: 0.3,
        }
    }
}

/// An ordered collection of devices.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviceFleet {
    pub devices: Vec<DeviceSpec>,
}

impl DeviceFleet {
    pub fn new(devices: Vec<DeviceSpec>) -> Result<Self, DispatchError> {
        if devices.is_empty() {
            return Err(DispatchError::EmptyFleet);
        }
        for d in &devices {
            d.validate()?;
        }
        Ok(Self { devices })
    }

    /// The reference mix used throughout the tracking studies:
    /// 34 AHUs, one 17-station charging bank, 6 bidirectional chargers,
    /// one battery.
    pub fn reference_mix() -> Self {
        let mut devices = Vec::new();
        for _ in 0..34 {
            devices.push(DeviceSpec::ahu());
        }
        devices.push(DeviceSpec::v1g_aggregate(17, 4.9));
        for _ in 0..6 {
            devices.push(DeviceSpec::v2g(5.0));
        }
        devices.push(DeviceSpec::bess(3.0));
        Self::new(devices).expect("reference mix is valid")
    }

    pub fn n(&self) -> usize {
        self.devices.len()
    }

    pub fn total_capacity(&self) -> f64 {
        self.devices.iter().map(|d| d.capacity()).sum()
    }

    pub fn deviation_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        self.devices.iter().map(|d| d.deviation_bounds()).unzip()
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.devices.iter().map(|d| d.capacity()).collect()
    }

    pub fn cost_weights(&self) -> Vec<f64> {
        self.devices.iter().map(|d| d.cost_weight).collect()
    }

    pub fn subset(&self, keep: impl Fn(&DeviceSpec) -> bool) -> Vec<usize> {
        (0..self.n()).filter(|&i| keep(&self.devices[i])).collect()
    }
}

/// Stateful causal simulator: commanded deviations go in, measured
/// deviations come out after quantization, transport delay, and settling.
/// Binary unit banks are rounded jointly to the nearest achievable
/// aggregate, with the highest-commanded units switched on.
pub struct FleetSimulator {
    specs: Vec<DeviceSpec>,
    /// Per-device history of quantized absolute commands.
    history: Vec<Vec<f64>>,
    /// Per-device settled absolute output.
    settled: Vec<f64>,
    binary_group: Vec<usize>,
}

impl FleetSimulator {
    pub fn new(fleet: &DeviceFleet) -> Self {
        let specs = fleet.devices.clone();
        let settled = specs.iter().map(|d| d.baseline).collect();
        let binary_group = (0..specs.len())
            .filter(|&i| matches!(specs[i].quantization, Quantization::BinaryUnits { .. }))
            .collect();
        Self { history: alloc::vec![Vec::new(); specs.len()], specs, settled, binary_group }
    }

    /// Advances one second. `commanded_dev` holds the deviation setpoints
    /// issued this tick; returns per-device measured deviations.
    pub fn step(&mut self, commanded_dev: &DVector<f64>) -> DVector<f64> {
        let n = self.specs.len();
        let mut quantized_abs: Vec<f64> = (0..n)
            .map(|i| {
                let spec = &self.specs[i];
                let abs = (commanded_dev[i] + spec.baseline).clamp(spec.p_min, spec.p_max);
                match spec.quantization {
                    Quantization::Continuous => abs,
                    Quantization::IntegerKw => abs.round().clamp(spec.p_min, spec.p_max),
                    Quantization::BinaryUnits { .. } => abs, // grouped below
                }
            })
            .collect();

        if !self.binary_group.is_empty() {
            // nearest achievable aggregate: k units on at the unit rating
            let unit = match self.specs[self.binary_group[0]].quantization {
                Quantization::BinaryUnits { unit_kw } => unit_kw,
                _ => unreachable!(),
            };
            let want: f64 = self.binary_group.iter().map(|&i| quantized_abs[i]).sum();
            let k = (want / unit).round().clamp(0.0, self.binary_group.len() as f64) as usize;
            let mut order = self.binary_group.clone();
            order.sort_by(|&a, &b| {
                quantized_abs[b].partial_cmp(&quantized_abs[a]).unwrap().then(a.cmp(&b))
            });
            for (rank, &i) in order.iter().enumerate() {
                quantized_abs[i] = if rank < k { unit } else { 0.0 };
            }
        }

        let mut measured = DVector::zeros(n);
        for i in 0..n {
            let spec = &self.specs[i];
            self.history[i].push(quantized_abs[i]);
            let t = self.history[i].len() - 1;
            let effective = if t >= spec.response_delay as usize {
                self.history[i][t - spec.response_delay as usize]
            } else {
                spec.baseline
            };
            self.settled[i] = if spec.settle_tau > 0.0 {
                let gain = 1.0 - (-1.0 / spec.settle_tau).exp();
                self.settled[i] + gain * (effective - self.settled[i])
            } else {
                effective
            };
            measured[i] = self.settled[i] - spec.baseline;
        }
        measured
    }
}
