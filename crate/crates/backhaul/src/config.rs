//! Scenario configuration, read from JSON.
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use backhaul_core::cost::{CostConfig, TowerPricing};
use backhaul_core::demand::{Connectivity, SettlementThresholds};
use backhaul_core::link_budget::Confidence;
use backhaul_core::network::{Strategy, StrategyConfig};
use backhaul_core::terrain::{LookupConfig, DEFAULT_TILE_KM};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

fn default_strategies() -> Vec<String> {
    vec!["clos".into(), "hybrid".into()]
}
fn default_confidence() -> String {
    "p90".into()
}
fn default_true() -> bool {
    true
}
fn one() -> usize {
    1
}
fn default_tile_km() -> f64 {
    DEFAULT_TILE_KM
}
fn default_min_segment_km() -> f64 {
    1.0
}
fn default_tower_m() -> f64 {
    30.0
}
fn default_pricing() -> String {
    "sections".into()
}
fn default_sample_km() -> f64 {
    2.5
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettlementConfig {
    pub density_min: f64,
    pub pop_min: f64,
    pub major_min: f64,
    /// 4 or 8.
    pub connectivity: u8,
}

impl Default for SettlementConfig {
    fn default() -> Self {
        let d = SettlementThresholds::default();
        Self {
            density_min: d.density_min,
            pop_min: d.pop_min,
            major_min: d.major_min,
            connectivity: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub elevation: PathBuf,
    pub population: PathBuf,
    pub vegetation: PathBuf,
    pub canopy: PathBuf,
    pub admin: PathBuf,
    pub rain: PathBuf,
    /// Precomputed lookup table; built from the DEM when absent.
    #[serde(default)]
    pub lookup: Option<PathBuf>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_confidence")]
    pub confidence: String,
    #[serde(default = "default_true")]
    pub curvature: bool,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_tile_km")]
    pub tile_km: f64,
    #[serde(default = "default_min_segment_km")]
    pub min_segment_km: f64,
    #[serde(default = "default_tower_m")]
    pub tower_m: f64,
    #[serde(default = "default_pricing")]
    pub tower_pricing: String,
    #[serde(default = "default_sample_km")]
    pub sample_cell_km: f64,
    #[serde(default = "one")]
    pub tiles_per_decile: usize,
    #[serde(default)]
    pub settlements: SettlementConfig,
}

const STAGE: &str = "config";

impl ScenarioConfig {
    /// A config with defaults for everything but the input paths.
    pub fn with_inputs(dir: &Path) -> Self {
        Self {
            elevation: dir.join("elevation.asc"),
            population: dir.join("population.asc"),
            vegetation: dir.join("vegetation.asc"),
            canopy: dir.join("canopy.asc"),
            admin: dir.join("admin.asc"),
            rain: dir.join("rain.csv"),
            lookup: None,
            strategies: default_strategies(),
            seed: 0,
            confidence: default_confidence(),
            curvature: true,
            repetitions: 1,
            output_dir: dir.join("out"),
            tile_km: default_tile_km(),
            min_segment_km: default_min_segment_km(),
            tower_m: default_tower_m(),
            tower_pricing: default_pricing(),
            sample_cell_km: default_sample_km(),
            tiles_per_decile: 1,
            settlements: SettlementConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::config(STAGE, format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| AppError::config(STAGE, format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.elevation,
            &mut self.population,
            &mut self.vegetation,
            &mut self.canopy,
            &mut self.admin,
            &mut self.rain,
            &mut self.output_dir,
        ] {
            fix(p);
        }
        if let Some(p) = self.lookup.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy_list()?;
        self.confidence()?;
        self.pricing()?;
        self.connectivity()?;
        let positive = [
            ("tile_km", self.tile_km),
            ("min_segment_km", self.min_segment_km),
            ("tower_m", self.tower_m),
            ("sample_cell_km", self.sample_cell_km),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(AppError::config(STAGE, format!("{name} must be positive, got {v}")));
            }
        }
        if self.repetitions == 0 || self.tiles_per_decile == 0 {
            return Err(AppError::config(STAGE, "repetitions and tiles_per_decile must be at least 1"));
        }
        Ok(())
    }

    pub fn strategy_list(&self) -> Result<Vec<Strategy>> {
        let mut out = Vec::new();
        for s in &self.strategies {
            let st = Strategy::parse(s).ok_or_else(|| AppError::config(STAGE, format!("unknown strategy {s:?}")))?;
            if !out.contains(&st) {
                out.push(st);
            }
        }
        if out.is_empty() {
            return Err(AppError::config(STAGE, "no strategy selected"));
        }
        out.sort();
        Ok(out)
    }

    pub fn confidence(&self) -> Result<Confidence> {
        Confidence::parse(&self.confidence)
            .ok_or_else(|| AppError::config(STAGE, format!("unknown confidence {:?}", self.confidence)))
    }

    pub fn pricing(&self) -> Result<TowerPricing> {
        match self.tower_pricing.as_str() {
            "sections" => Ok(TowerPricing::Sections),
            "pro_rata" => Ok(TowerPricing::ProRata),
            other => Err(AppError::config(STAGE, format!("unknown tower_pricing {other:?}"))),
        }
    }

    fn connectivity(&self) -> Result<Connectivity> {
        match self.settlements.connectivity {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            n => Err(AppError::config(STAGE, format!("connectivity must be 4 or 8, got {n}"))),
        }
    }

    pub fn thresholds(&self) -> SettlementThresholds {
        SettlementThresholds {
            density_min: self.settlements.density_min,
            pop_min: self.settlements.pop_min,
            major_min: self.settlements.major_min,
            connectivity: self.connectivity().unwrap_or(Connectivity::Four),
        }
    }

    pub fn lookup_config(&self) -> LookupConfig {
        LookupConfig {
            seed: self.seed,
            tower_m: self.tower_m,
            sample_cell_km: self.sample_cell_km,
            tiles_per_decile: self.tiles_per_decile,
            curvature: self.curvature,
            ..LookupConfig::default()
        }
    }

    pub fn strategy_config(&self, strategy: Strategy) -> StrategyConfig {
        StrategyConfig {
            min_segment_km: self.min_segment_km,
            confidence: self.confidence().unwrap_or(Confidence::P90),
            curvature: self.curvature,
            repetitions: self.repetitions,
            tower_m: self.tower_m,
            ..StrategyConfig::new(strategy, self.seed)
        }
    }

    pub fn cost_config(&self) -> CostConfig {
        CostConfig {
            confidence: self.confidence().unwrap_or(Confidence::P90),
            pricing: self.pricing().unwrap_or_default(),
            ..CostConfig::default()
        }
    }
}
