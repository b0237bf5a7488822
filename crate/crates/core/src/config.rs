//! Engine configuration, loaded from TOML.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collab::CollabConfig;
use crate::domain::{Action, ListingType, Span};
use crate::features::BinConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config TOML: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot encode config: {0}")]
    Encode(#[from] toml::ser::Error),
    #[error("invalid config value: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Cadences {
    pub content_short: Span,
    pub content_long: Span,
    pub collab: Span,
    pub cohorts: Span,
}

impl Default for Cadences {
    fn default() -> Self {
        Cadences {
            content_short: Span::minutes(10),
            content_long: Span::hours(2),
            collab: Span::hours(24),
            cohorts: Span::hours(24),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Users whose first event is newer than this are cold.
    pub cold_start_window: Span,
    /// Minimum active span for the long-term category.
    pub long_term_activity_gate: Span,
    /// Active span range `[start, end)` routed to the hybrid model.
    pub hybrid_window_start: Span,
    pub hybrid_window_end: Span,
    pub min_properties_long_term: usize,
    /// A gap longer than this resets the user to cold start.
    pub inactivity_reset: Span,
    pub short_term_window: Span,
    /// Training window for long-term content, collaborative and cohort
    /// artifacts. Purchase journeys run longer than rentals.
    pub training_window_buy: Span,
    pub training_window_rent: Span,
    pub cadences: Cadences,
    pub latency_budget_ms: f64,
    pub default_k: usize,
    pub rng_seed: u64,
    pub snapshot_retention: usize,
    pub bins: BinConfig,
    pub collab: CollabConfig,
    /// Maps raw client action names onto canonical actions.
    pub action_aliases: BTreeMap<String, Action>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let mut action_aliases = BTreeMap::new();
        action_aliases.insert("recommendation_widget_click".to_string(), Action::DetailPageEngagement);
        EngineConfig {
            cold_start_window: Span::minutes(10),
            long_term_activity_gate: Span::hours(2),
            hybrid_window_start: Span::hours(2),
            hybrid_window_end: Span::hours(4),
            min_properties_long_term: 5,
            inactivity_reset: Span::days(28),
            short_term_window: Span::minutes(10),
            training_window_buy: Span::days(190),
            training_window_rent: Span::days(95),
            cadences: Cadences::default(),
            latency_budget_ms: 40.0,
            default_k: 6,
            rng_seed: 7,
            snapshot_retention: 3,
            bins: BinConfig::default(),
            collab: CollabConfig::default(),
            action_aliases,
        }
    }
}

impl EngineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: EngineConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = self.to_toml()?;
        std::fs::write(path, text).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let spans = [
            ("cold_start_window", self.cold_start_window),
            ("long_term_activity_gate", self.long_term_activity_gate),
            ("hybrid_window_end", self.hybrid_window_end),
            ("inactivity_reset", self.inactivity_reset),
            ("short_term_window", self.short_term_window),
            ("training_window_buy", self.training_window_buy),
            ("training_window_rent", self.training_window_rent),
            ("cadences.content_short", self.cadences.content_short),
            ("cadences.content_long", self.cadences.content_long),
            ("cadences.collab", self.cadences.collab),
            ("cadences.cohorts", self.cadences.cohorts),
        ];
        for (name, span) in spans {
            if !span.is_positive() {
                return Err(ConfigError::Invalid(format!("{name} must be positive")));
            }
        }
        if self.hybrid_window_start >= self.hybrid_window_end {
            return Err(ConfigError::Invalid("hybrid window start must precede its end".into()));
        }
        if self.default_k == 0 {
            return Err(ConfigError::Invalid("default_k must be at least 1".into()));
        }
        if self.snapshot_retention == 0 {
            return Err(ConfigError::Invalid("snapshot_retention must be at least 1".into()));
        }
        if !(self.latency_budget_ms > 0.0) {
            return Err(ConfigError::Invalid("latency_budget_ms must be positive".into()));
        }
        self.bins.validate().map_err(ConfigError::Invalid)?;
        self.collab.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    pub fn training_window(&self, listing_type: ListingType) -> Span {
        match listing_type {
            ListingType::Buy => self.training_window_buy,
            ListingType::Rent => self.training_window_rent,
        }
    }

    /// Resolves a raw action name through the alias table, then the canonical names.
    pub fn resolve_action(&self, raw: &str) -> Option<Action> {
        self.action_aliases.get(raw).copied().or_else(|| Action::from_canonical(raw))
    }
}
