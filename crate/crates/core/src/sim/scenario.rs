//! Scenario files: parsing, defaults, cross-field validation and the
//! bundled cases.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pedflow::{spec_errors, PedFlowSpec};
use crate::distancing::{CameraModel, DistanceMethod, DEFAULT_LOWER_UTILIZATION, DEFAULT_UPPER_UTILIZATION};
use crate::fleet::FleetConfig;
use crate::metrics::SignalTimeModel;
use crate::transfer::{hybrid_plan, HybridLevel, Strategy, TransferError, DEFAULT_TIMEOUT};
use crate::zone_grid::{GridError, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioName {
    Case2,
    Case3,
    Case4,
    Case5,
    Case6,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    /// dotted path of the offending field, e.g. `ped_flow.arrival_rate`
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ValidationError { path: path.into(), message: message.to_string() }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSection {
    pub drones: usize,
    #[serde(default)]
    pub config: FleetConfig,
    /// service bays at the depot
    #[serde(default = "default_bays")]
    pub depot_bays: usize,
}

fn default_bays() -> usize {
    6
}

/// One operating area of a hybrid plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaSpec {
    pub layer: usize,
    pub strategy: Strategy,
    pub drones: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plan {
    /// The whole fleet follows one strategy. Layered swaps operate on
    /// layer 1 with layer 0 as transfer layer, the rest on layer 0.
    Strategy(Strategy),
    Hybrid(Vec<AreaSpec>),
}

impl Plan {
    /// The areas this plan operates, with drone counts.
    pub fn areas(&self, drones: usize) -> Vec<AreaSpec> {
        match self {
            Plan::Strategy(s) => {
                let layer = usize::from(*s == Strategy::MultiLayer);
                vec![AreaSpec { layer, strategy: *s, drones }]
            }
            Plan::Hybrid(areas) => areas.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mission {
    /// Thermal monitoring.
    Scan,
    /// Sanitiser spraying.
    Spray,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpsSpec {
    pub mission: Mission,
    /// ticks spent on each zone by sweeping strategies
    pub dwell: u64,
    /// ticks between coverage swaps of zone-holding strategies
    pub swap_interval: u64,
    /// transfer request timeout, ticks
    pub timeout: u64,
}

impl Default for OpsSpec {
    fn default() -> Self {
        OpsSpec { mission: Mission::Scan, dwell: 10, swap_interval: 120, timeout: DEFAULT_TIMEOUT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub persons: usize,
    /// ticks between person moves to a neighbouring zone
    pub move_interval: u64,
    /// share of people running a rising temperature
    pub fever_fraction: f64,
    /// scan interval δ, ticks
    pub scan_interval: u64,
    pub doubling: bool,
    /// ticks between presence samples for the density map
    pub presence_interval: u64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            persons: 0,
            move_interval: 60,
            fever_fraction: 0.05,
            scan_interval: 300,
            doubling: false,
            presence_interval: 60,
        }
    }
}

/// Ground-to-drone link. Every `burst` ticks each airborne drone sends a
/// burst of `packet_rate · burst` packets; the transmission also waits one
/// signal time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSpec {
    /// packets per second
    pub packet_rate: f64,
    /// ticks
    pub burst: u64,
    /// bit error ratio is uniform on `[0, ber_max]`
    pub ber_max: f64,
    pub signal: SignalTimeModel,
}

impl Default for LinkSpec {
    fn default() -> Self {
        LinkSpec { packet_rate: 35_000.0, burst: 10, ber_max: 0.02, signal: SignalTimeModel::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistancingSpec {
    pub method: DistanceMethod,
    /// metres
    pub threshold: f64,
    pub camera: CameraModel,
}

impl Default for DistancingSpec {
    fn default() -> Self {
        DistancingSpec {
            method: DistanceMethod::GroundSampleDistance,
            threshold: crate::distancing::DEFAULT_VIOLATION_THRESHOLD,
            camera: CameraModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSpec {
    pub lower: f64,
    pub upper: f64,
    /// trailing utilisation window, ticks
    pub window: u64,
    /// ticks between control room evaluations
    pub interval: u64,
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec { lower: DEFAULT_LOWER_UTILIZATION, upper: DEFAULT_UPPER_UTILIZATION, window: 3600, interval: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: ScenarioName,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    /// ticks of one second
    pub duration: u64,
    pub grid: GridSpec,
    pub fleet: FleetSection,
    pub plan: Plan,
    #[serde(default)]
    pub ops: OpsSpec,
    #[serde(default)]
    pub population: PopulationSpec,
    #[serde(default)]
    pub link: LinkSpec,
    #[serde(default)]
    pub ped_flow: Option<PedFlowSpec>,
    #[serde(default)]
    pub distancing: DistancingSpec,
    #[serde(default)]
    pub control: ControlSpec,
}

fn grid_field(e: &GridError) -> &'static str {
    match e {
        GridError::EmptyGrid => "grid.n",
        GridError::BadTau(_) => "grid.tau",
        GridError::NoLayers => "grid.layers",
        GridError::BadBand(_) => "grid.band_fraction",
        _ => "grid",
    }
}

impl Scenario {
    /// Parses and validates scenario text. Parse errors carry the path of
    /// the field that failed to deserialize.
    pub fn from_json(text: &str) -> Result<Scenario, Vec<ValidationError>> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." || path == "?" { "(root)".to_string() } else { path };
            vec![ValidationError::new(path, e.inner())]
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Every inconsistency found, never panicking.
    pub fn validate(&self) -> Result<(), Vec<ValidationError>> {
        let mut errs = Vec::new();
        let mut need = |ok: bool, path: &str, msg: &str| {
            if !ok {
                errs.push(ValidationError::new(path, msg));
            }
        };
        need(self.duration > 0, "duration", "must be positive");
        need(
            self.ops.dwell > 0 && self.ops.swap_interval > 0 && self.ops.timeout > 0,
            "ops",
            "dwell, swap_interval and timeout must be positive",
        );
        let p = &self.population;
        need((0.0..=1.0).contains(&p.fever_fraction), "population.fever_fraction", "must lie in [0, 1]");
        need(
            p.move_interval > 0 && p.scan_interval > 0 && p.presence_interval > 0,
            "population",
            "intervals must be positive",
        );
        let l = &self.link;
        need(l.packet_rate.is_finite() && l.packet_rate > 0.0, "link.packet_rate", "must be positive");
        need(l.burst > 0, "link.burst", "must be positive");
        need((0.0..=1.0).contains(&l.ber_max), "link.ber_max", "must lie in [0, 1]");
        need(l.signal.validate().is_ok(), "link.signal", "needs min <= mode <= max");
        need(
            self.distancing.threshold.is_finite() && self.distancing.threshold > 0.0,
            "distancing.threshold",
            "must be positive",
        );
        need(self.distancing.camera.validate().is_ok(), "distancing.camera", "all parameters must be positive");
        let c = &self.control;
        need(
            0.0 <= c.lower && c.lower < c.upper && c.upper <= 1.0,
            "control",
            "thresholds must satisfy 0 <= lower < upper <= 1",
        );
        need(c.window > 0 && c.interval > 0, "control", "window and interval must be positive");
        if let Some(pf) = &self.ped_flow {
            for (field, msg) in spec_errors(pf) {
                errs.push(ValidationError::new(format!("ped_flow.{field}"), msg));
            }
        }
        if let Err(e) = self.fleet.config.validate() {
            errs.push(ValidationError::new("fleet.config", e));
        }
        if self.fleet.drones > 0 && self.fleet.depot_bays == 0 {
            errs.push(ValidationError::new("fleet.depot_bays", "needs at least one bay"));
        }
        match self.grid.validate() {
            Err(e) => errs.push(ValidationError::new(grid_field(&e), e)),
            Ok(()) => self.validate_plan(&mut errs),
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    fn validate_plan(&self, errs: &mut Vec<ValidationError>) {
        let g = &self.grid;
        let areas = self.plan.areas(self.fleet.drones);
        let levels: Vec<HybridLevel> =
            areas.iter().enumerate().map(|(i, a)| HybridLevel { area: i + 1, layer: a.layer, strategy: a.strategy }).collect();
        let at = |i: usize| match self.plan {
            Plan::Strategy(_) => "plan.strategy".to_string(),
            Plan::Hybrid(_) => format!("plan.hybrid[{i}]"),
        };
        if let Err(e) = hybrid_plan(&levels, g) {
            let path = match e {
                TransferError::LayerOverlap(_) => "plan".to_string(),
                _ => levels
                    .iter()
                    .position(|l| hybrid_plan(std::slice::from_ref(l), g).is_err())
                    .map_or("plan".to_string(), at),
            };
            errs.push(ValidationError::new(path, e));
            return;
        }
        if let Plan::Hybrid(areas) = &self.plan {
            let total: usize = areas.iter().map(|a| a.drones).sum();
            if total != self.fleet.drones {
                errs.push(ValidationError::new(
                    "plan.hybrid",
                    format!("areas hold {total} drones but the fleet has {}", self.fleet.drones),
                ));
            }
        }
        for (i, a) in areas.iter().enumerate() {
            let holds_zones = matches!(a.strategy, Strategy::FixedArea | Strategy::MultiLayer | Strategy::Zigzag);
            if holds_zones && a.drones > g.zones_per_layer() {
                errs.push(ValidationError::new(
                    format!("{}.drones", at(i)),
                    format!("{} drones do not fit one per zone on {} zones", a.drones, g.zones_per_layer()),
                ));
            }
        }
    }

    /// Hex SHA-256 of the scenario text as given.
    pub fn content_hash(text: &str) -> String {
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

const BUNDLED: [(&str, &str); 6] = [
    ("case2", include_str!("../../scenarios/case2.json")),
    ("case3", include_str!("../../scenarios/case3.json")),
    ("case4", include_str!("../../scenarios/case4.json")),
    ("case5", include_str!("../../scenarios/case5.json")),
    ("case6", include_str!("../../scenarios/case6.json")),
    ("case6_parallel", include_str!("../../scenarios/case6_parallel.json")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// Text of a bundled scenario.
pub fn bundled_text(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn bundled(name: &str) -> Option<Scenario> {
    bundled_text(name).map(|t| Scenario::from_json(t).expect("bundled scenarios are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paths(text: &str) -> Vec<String> {
        Scenario::from_json(text).unwrap_err().into_iter().map(|e| e.path).collect()
    }

    #[test]
    fn bundled_scenarios_validate() {
        for name in bundled_names() {
            let s = bundled(name).unwrap();
            assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s, "{name}");
        }
    }

    #[test]
    fn layered_plan_without_transfer_layer() {
        let mut s = bundled("case3").unwrap();
        s.grid.layers = 1;
        let errs = s.validate().unwrap_err();
        assert_eq!(errs[0].path, "plan.strategy");
        assert!(errs[0].message.contains("transfer layer"), "{}", errs[0].message);
    }

    #[test]
    fn negative_arrival_rate_is_reported_by_path() {
        let mut s = bundled("case4").unwrap();
        s.ped_flow.as_mut().unwrap().arrival_rate = -2.0;
        let errs = s.validate().unwrap_err();
        assert_eq!(errs.iter().map(|e| e.path.as_str()).collect::<Vec<_>>(), vec!["ped_flow.arrival_rate"]);
    }

    #[test]
    fn parse_errors_carry_paths() {
        assert_eq!(paths("{"), vec!["(root)"]);
        let mut v: serde_json::Value = serde_json::from_str(bundled_text("case2").unwrap()).unwrap();
        v["grid"]["n"] = serde_json::json!("eight");
        assert_eq!(paths(&v.to_string()), vec!["grid.n"]);
        v["grid"]["n"] = serde_json::json!(0);
        assert_eq!(paths(&v.to_string()), vec!["grid.n"]);
        let mut v: serde_json::Value = serde_json::from_str(bundled_text("case2").unwrap()).unwrap();
        v["ops"]["dwel"] = serde_json::json!(3);
        assert_eq!(paths(&v.to_string()), vec!["ops.dwel"]);
    }

    #[test]
    fn fleet_must_fit_and_match_areas() {
        let mut s = bundled("case2").unwrap();
        s.fleet.drones = s.grid.zones_per_layer() + 1;
        assert_eq!(s.validate().unwrap_err()[0].path, "plan.strategy.drones");
        let mut s = bundled("case2").unwrap();
        s.plan = Plan::Hybrid(vec![AreaSpec { layer: 0, strategy: Strategy::FixedArea, drones: 1 }]);
        assert_eq!(s.validate().unwrap_err()[0].path, "plan.hybrid");
        s.plan = Plan::Strategy(Strategy::Hybrid);
        assert_eq!(s.validate().unwrap_err()[0].path, "plan.strategy");
    }

    #[test]
    fn hash_is_of_the_text() {
        let h = Scenario::content_hash("abc");
        assert_eq!(h, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
