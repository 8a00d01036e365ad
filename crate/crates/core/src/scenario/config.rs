//! Scenario configuration: defaults, the `key = value` document format and
//! per-module overrides layered over the presets.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::mac::{mac_preset, MacParams, DEFAULT_QUEUE_CAPACITY};
use crate::mobility::{Heading, HighwayConfig};
use crate::net::DEFAULT_DATA_TTL;
use crate::phy::{phy_preset, NakagamiParams, PhyParams};
use crate::routing::{preset_params, PresetName, ProtocolParams};
use crate::Standard;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}` has the wrong type, expected {expected}")]
    WrongType { key: String, expected: &'static str },
    #[error("`{key}` out of range: {reason}")]
    OutOfRange { key: String, reason: String },
}

fn out_of_range(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::OutOfRange {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OverrideValue {
    Num(f64),
    Bool(bool),
}

impl OverrideValue {
    fn num(self) -> f64 {
        match self {
            OverrideValue::Num(v) => v,
            OverrideValue::Bool(b) => f64::from(u8::from(b)),
        }
    }
}

/// Module parameters that may be overridden on top of the presets.
/// The flag marks boolean keys.
const OVERRIDE_KEYS: &[(&str, bool)] = &[
    ("phy.carrier_freq", false),
    ("phy.tx_power", false),
    ("phy.data_rate", false),
    ("phy.rx_threshold", false),
    ("phy.cs_threshold", false),
    ("phy.noise_floor", false),
    ("channel.fading", true),
    ("channel.m_near", false),
    ("channel.m_far", false),
    ("channel.m_breakpoint", false),
    ("channel.gamma_near", false),
    ("channel.gamma_far", false),
    ("channel.gamma_breakpoint", false),
    ("channel.ref_distance", false),
    ("mac.slot_time", false),
    ("mac.sifs", false),
    ("mac.difs", false),
    ("mac.cw_min", false),
    ("mac.cw_max", false),
    ("mac.preamble_plus_header_time", false),
    ("mac.ack_timeout", false),
    ("mac.retry_limit", false),
    ("routing.dsdv.periodic_update_interval", false),
    ("routing.dsdv.min_trigger_interval", false),
    ("routing.dsdv.settling_weight", false),
    ("routing.dsdv.full_dump_interval", false),
    ("routing.olsr.hello_interval", false),
    ("routing.olsr.tc_interval", false),
    ("routing.olsr.neighbor_hold_time", false),
    ("routing.olsr.topology_hold_time", false),
    ("routing.dymo.route_timeout", false),
    ("routing.dymo.rreq_wait_time", false),
    ("routing.dymo.rreq_tries", false),
    ("routing.dymo.rreq_rate_limit", false),
    ("routing.dymo.buffer_size", false),
    ("routing.dymo.hop_limit", false),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_nodes: usize,
    pub speed_mps: f64,
    pub mac_variant: Standard,
    pub protocol: PresetName,
    pub sim_time: f64,
    pub packet_bytes: usize,
    pub packet_interval: f64,
    pub n_flows: usize,
    pub seed: u64,
    pub queue_capacity: usize,
    pub data_ttl: u8,
    pub highway: HighwayConfig,
    /// Flow start times are drawn uniformly from this range, in seconds.
    pub traffic_start_min: f64,
    pub traffic_start_max: f64,
    pub overrides: BTreeMap<String, OverrideValue>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_nodes: 25,
            speed_mps: 15.0,
            mac_variant: Standard::Dot11,
            protocol: PresetName::Dsdv,
            sim_time: 900.0,
            packet_bytes: 512,
            packet_interval: 0.03,
            n_flows: 10,
            seed: 1,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            data_ttl: DEFAULT_DATA_TTL,
            highway: HighwayConfig::default(),
            traffic_start_min: 1.0,
            traffic_start_max: 10.0,
            overrides: BTreeMap::new(),
        }
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64, ConfigError> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(ConfigError::WrongType {
            key: key.into(),
            expected: "number",
        }),
    }
}

fn as_uint(key: &str, v: &toml::Value) -> Result<u64, ConfigError> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        toml::Value::Integer(_) => Err(out_of_range(key, "must not be negative")),
        _ => Err(ConfigError::WrongType {
            key: key.into(),
            expected: "non-negative integer",
        }),
    }
}

fn as_bool(key: &str, v: &toml::Value) -> Result<bool, ConfigError> {
    v.as_bool().ok_or_else(|| ConfigError::WrongType {
        key: key.into(),
        expected: "boolean",
    })
}

fn as_str<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str, ConfigError> {
    v.as_str().ok_or_else(|| ConfigError::WrongType {
        key: key.into(),
        expected: "string",
    })
}

/// Parses a configuration document. Missing keys keep their defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let mut pairs = Vec::new();
    flatten("", &table, &mut pairs);
    // Explicit lane directions must win over the lane-count default.
    pairs.sort_by_key(|(k, _)| k == "highway.directions");
    let mut cfg = ScenarioConfig::default();
    for (key, value) in &pairs {
        cfg.set(key, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    /// Sets one dotted key from a document value.
    pub fn set(&mut self, key: &str, v: &toml::Value) -> Result<(), ConfigError> {
        let to_usize = |v| as_uint(key, v).map(|u| u as usize);
        match key {
            "n_nodes" => self.n_nodes = to_usize(v)?,
            "speed_mps" => self.speed_mps = as_f64(key, v)?,
            "mac_variant" => {
                self.mac_variant = as_str(key, v)?
                    .parse()
                    .map_err(|e: String| out_of_range(key, e))?
            }
            "protocol" => {
                self.protocol = as_str(key, v)?
                    .parse()
                    .map_err(|e| out_of_range(key, format!("{e}")))?
            }
            "sim_time" => self.sim_time = as_f64(key, v)?,
            "packet_bytes" => self.packet_bytes = to_usize(v)?,
            "packet_interval" => self.packet_interval = as_f64(key, v)?,
            "n_flows" => self.n_flows = to_usize(v)?,
            "seed" => self.seed = as_uint(key, v)?,
            "queue_capacity" => self.queue_capacity = to_usize(v)?,
            "data_ttl" => {
                self.data_ttl = u8::try_from(as_uint(key, v)?)
                    .map_err(|_| out_of_range(key, "must be at most 255"))?
            }
            "highway.length" => self.highway.length = as_f64(key, v)?,
            "highway.lanes" => {
                let lanes = to_usize(v)?;
                self.highway.lanes = lanes;
                if self.highway.directions.len() != lanes {
                    self.highway.directions = HighwayConfig::with_lanes(1.0, lanes, 1.0).directions;
                }
            }
            "highway.lane_width" => self.highway.lane_width = as_f64(key, v)?,
            "highway.wraparound" => self.highway.wraparound = as_bool(key, v)?,
            "highway.directions" => {
                let arr = v.as_array().ok_or_else(|| ConfigError::WrongType {
                    key: key.into(),
                    expected: "array of \"east\"/\"west\"",
                })?;
                self.highway.directions = arr
                    .iter()
                    .map(|d| match as_str(key, d)?.to_ascii_lowercase().as_str() {
                        "east" | "+x" => Ok(Heading::East),
                        "west" | "-x" => Ok(Heading::West),
                        other => Err(out_of_range(key, format!("unknown heading {other:?}"))),
                    })
                    .collect::<Result<_, _>>()?;
            }
            "traffic.start_min" => self.traffic_start_min = as_f64(key, v)?,
            "traffic.start_max" => self.traffic_start_max = as_f64(key, v)?,
            _ => {
                let Some(&(_, boolean)) = OVERRIDE_KEYS.iter().find(|(k, _)| *k == key) else {
                    return Err(ConfigError::UnknownKey(key.to_string()));
                };
                let value = if boolean {
                    OverrideValue::Bool(as_bool(key, v)?)
                } else {
                    OverrideValue::Num(as_f64(key, v)?)
                };
                self.overrides.insert(key.to_string(), value);
            }
        }
        Ok(())
    }

    /// Sets a key from `key=value` text, as given on a command line.
    pub fn set_str(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let text = match assignment.split_once('=') {
            Some((k, v)) => {
                let v = v.trim();
                let needs_quotes = v.parse::<f64>().is_err()
                    && !matches!(v, "true" | "false")
                    && !v.starts_with(['"', '[']);
                if needs_quotes {
                    format!("{} = \"{}\"", k.trim(), v)
                } else {
                    format!("{} = {}", k.trim(), v)
                }
            }
            None => assignment.to_string(),
        };
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
            line: 1,
            column: e.span().map_or(0, |s| s.start + 1),
            message: e.message().to_string(),
        })?;
        let mut pairs = Vec::new();
        flatten("", &table, &mut pairs);
        for (key, value) in &pairs {
            self.set(key, value)?;
        }
        Ok(())
    }

    fn override_num(&self, key: &str) -> Option<f64> {
        self.overrides.get(key).map(|v| v.num())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_nodes < 2 {
            return Err(out_of_range("n_nodes", "need at least 2 nodes"));
        }
        if !(self.speed_mps >= 0.0 && self.speed_mps.is_finite()) {
            return Err(out_of_range("speed_mps", format!("{} is negative", self.speed_mps)));
        }
        if !(self.sim_time > 0.0 && self.sim_time.is_finite()) {
            return Err(out_of_range("sim_time", "must be positive"));
        }
        if self.packet_bytes == 0 {
            return Err(out_of_range("packet_bytes", "must be positive"));
        }
        if !(self.packet_interval > 0.0 && self.packet_interval.is_finite()) {
            return Err(out_of_range("packet_interval", "must be positive"));
        }
        if self.n_flows > self.n_nodes * (self.n_nodes - 1) {
            return Err(out_of_range("n_flows", "more flows than ordered node pairs"));
        }
        if self.queue_capacity == 0 {
            return Err(out_of_range("queue_capacity", "must be positive"));
        }
        if self.data_ttl == 0 {
            return Err(out_of_range("data_ttl", "must be positive"));
        }
        if !(self.traffic_start_min >= 0.0 && self.traffic_start_min <= self.traffic_start_max) {
            return Err(out_of_range(
                "traffic.start_min",
                "need 0 <= start_min <= start_max",
            ));
        }
        self.highway
            .validate()
            .map_err(|e| out_of_range("highway", e.to_string()))?;
        self.phy_params()
            .validate()
            .map_err(|e| out_of_range("phy", e.to_string()))?;
        self.nakagami()
            .validate()
            .map_err(|e| out_of_range("channel", e.to_string()))?;
        self.mac_params().validate().map_err(|e| out_of_range("mac", e))?;
        self.routing_params()
            .validate()
            .map_err(|e| out_of_range("routing", e.to_string()))?;
        Ok(())
    }

    pub fn phy_params(&self) -> PhyParams {
        let mut p = phy_preset(self.mac_variant);
        let fields: [(&str, &mut f64); 6] = [
            ("phy.carrier_freq", &mut p.carrier_freq),
            ("phy.tx_power", &mut p.tx_power),
            ("phy.data_rate", &mut p.data_rate),
            ("phy.rx_threshold", &mut p.rx_threshold),
            ("phy.cs_threshold", &mut p.cs_threshold),
            ("phy.noise_floor", &mut p.noise_floor),
        ];
        for (key, slot) in fields {
            if let Some(v) = self.override_num(key) {
                *slot = v;
            }
        }
        p
    }

    pub fn nakagami(&self) -> NakagamiParams {
        let mut n = NakagamiParams::for_carrier(self.phy_params().carrier_freq);
        let get = |k: &str, default: f64| self.override_num(k).unwrap_or(default);
        let (m_break, m_near) = n.m_by_distance[0];
        let m_far = n.m_by_distance[1].1;
        let (g_break, g_near) = n.gamma_by_distance[0];
        let g_far = n.gamma_by_distance[1].1;
        n.m_by_distance = vec![
            (get("channel.m_breakpoint", m_break), get("channel.m_near", m_near)),
            (f64::INFINITY, get("channel.m_far", m_far)),
        ];
        n.gamma_by_distance = vec![
            (get("channel.gamma_breakpoint", g_break), get("channel.gamma_near", g_near)),
            (f64::INFINITY, get("channel.gamma_far", g_far)),
        ];
        if let Some(r0) = self.override_num("channel.ref_distance") {
            n.ref_distance = r0;
            n.ref_loss = crate::phy::free_space_loss_db(self.phy_params().carrier_freq, r0);
        }
        n
    }

    pub fn fading(&self) -> bool {
        match self.overrides.get("channel.fading") {
            Some(OverrideValue::Bool(b)) => *b,
            _ => true,
        }
    }

    pub fn mac_params(&self) -> MacParams {
        let mut m = mac_preset(self.mac_variant);
        let floats: [(&str, &mut f64); 5] = [
            ("mac.slot_time", &mut m.slot_time),
            ("mac.sifs", &mut m.sifs),
            ("mac.difs", &mut m.difs),
            ("mac.preamble_plus_header_time", &mut m.preamble_plus_header_time),
            ("mac.ack_timeout", &mut m.ack_timeout),
        ];
        for (key, slot) in floats {
            if let Some(v) = self.override_num(key) {
                *slot = v;
            }
        }
        for (key, slot) in [
            ("mac.cw_min", &mut m.cw_min),
            ("mac.cw_max", &mut m.cw_max),
            ("mac.retry_limit", &mut m.retry_limit),
        ] {
            if let Some(v) = self.override_num(key) {
                *slot = v.max(0.0) as u32;
            }
        }
        m
    }

    /// Preset for the configured protocol with its family's overrides.
    pub fn routing_params(&self) -> ProtocolParams {
        let mut params = preset_params(self.protocol);
        let get = |k: &str| self.override_num(k);
        match &mut params {
            ProtocolParams::Dsdv(p) => {
                for (key, slot) in [
                    ("routing.dsdv.periodic_update_interval", &mut p.periodic_update_interval),
                    ("routing.dsdv.min_trigger_interval", &mut p.min_trigger_interval),
                    ("routing.dsdv.settling_weight", &mut p.settling_weight),
                    ("routing.dsdv.full_dump_interval", &mut p.full_dump_interval),
                ] {
                    if let Some(v) = get(key) {
                        *slot = v;
                    }
                }
            }
            ProtocolParams::Olsr(p) => {
                if let Some(v) = get("routing.olsr.hello_interval") {
                    p.hello_interval = v;
                    p.neighbor_hold_time = 3.0 * v;
                }
                if let Some(v) = get("routing.olsr.tc_interval") {
                    p.tc_interval = v;
                    p.topology_hold_time = 3.0 * v;
                }
                if let Some(v) = get("routing.olsr.neighbor_hold_time") {
                    p.neighbor_hold_time = v;
                }
                if let Some(v) = get("routing.olsr.topology_hold_time") {
                    p.topology_hold_time = v;
                }
            }
            ProtocolParams::Dymo(p) => {
                for (key, slot) in [
                    ("routing.dymo.route_timeout", &mut p.route_timeout),
                    ("routing.dymo.rreq_wait_time", &mut p.rreq_wait_time),
                    ("routing.dymo.rreq_rate_limit", &mut p.rreq_rate_limit),
                ] {
                    if let Some(v) = get(key) {
                        *slot = v;
                    }
                }
                if let Some(v) = get("routing.dymo.rreq_tries") {
                    p.rreq_tries = v.max(0.0) as u32;
                }
                if let Some(v) = get("routing.dymo.buffer_size") {
                    p.buffer_size = v.max(0.0) as usize;
                }
                if let Some(v) = get("routing.dymo.hop_limit") {
                    p.hop_limit = v.clamp(0.0, 255.0) as u8;
                }
            }
        }
        params
    }

    /// The configuration as a document that parses back to `self`. Module
    /// presets appear as comments so switching MAC or protocol keeps working.
    pub fn to_document(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_nodes = {}", self.n_nodes);
        let _ = writeln!(s, "speed_mps = {}", fmt_f64(self.speed_mps));
        let _ = writeln!(s, "mac_variant = \"{}\"", self.mac_variant);
        let _ = writeln!(s, "protocol = \"{}\"", self.protocol);
        let _ = writeln!(s, "sim_time = {}", fmt_f64(self.sim_time));
        let _ = writeln!(s, "packet_bytes = {}", self.packet_bytes);
        let _ = writeln!(s, "packet_interval = {}", fmt_f64(self.packet_interval));
        let _ = writeln!(s, "n_flows = {}", self.n_flows);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "queue_capacity = {}", self.queue_capacity);
        let _ = writeln!(s, "data_ttl = {}", self.data_ttl);

        let h = &self.highway;
        let dirs: Vec<&str> = h
            .directions
            .iter()
            .map(|d| match d {
                Heading::East => "\"east\"",
                Heading::West => "\"west\"",
            })
            .collect();
        let _ = writeln!(s, "\n[highway]");
        let _ = writeln!(s, "length = {}", fmt_f64(h.length));
        let _ = writeln!(s, "lanes = {}", h.lanes);
        let _ = writeln!(s, "lane_width = {}", fmt_f64(h.lane_width));
        let _ = writeln!(s, "directions = [{}]", dirs.join(", "));
        let _ = writeln!(s, "wraparound = {}", h.wraparound);

        let _ = writeln!(s, "\n[traffic]");
        let _ = writeln!(s, "start_min = {}", fmt_f64(self.traffic_start_min));
        let _ = writeln!(s, "start_max = {}", fmt_f64(self.traffic_start_max));

        let resolved = self.resolved_module_values();
        let mut section = "";
        for (key, is_bool) in OVERRIDE_KEYS {
            let (sec, field) = key.rsplit_once('.').expect("dotted key");
            if sec != section {
                let _ = writeln!(s, "\n[{sec}]");
                section = sec;
            }
            match self.overrides.get(*key) {
                Some(OverrideValue::Num(v)) => {
                    let _ = writeln!(s, "{field} = {}", fmt_f64(*v));
                }
                Some(OverrideValue::Bool(b)) => {
                    let _ = writeln!(s, "{field} = {b}");
                }
                None => {
                    let v = resolved.get(*key).copied().unwrap_or(f64::NAN);
                    if *is_bool {
                        let _ = writeln!(s, "# {field} = {}", v != 0.0);
                    } else {
                        let _ = writeln!(s, "# {field} = {}", fmt_f64(v));
                    }
                }
            }
        }
        s
    }

    /// Effective value of every override key, preset families included.
    fn resolved_module_values(&self) -> BTreeMap<&'static str, f64> {
        let mut m = BTreeMap::new();
        let phy = self.phy_params();
        let n = self.nakagami();
        let mac = self.mac_params();
        for (k, v) in [
            ("phy.carrier_freq", phy.carrier_freq),
            ("phy.tx_power", phy.tx_power),
            ("phy.data_rate", phy.data_rate),
            ("phy.rx_threshold", phy.rx_threshold),
            ("phy.cs_threshold", phy.cs_threshold),
            ("phy.noise_floor", phy.noise_floor),
            ("channel.fading", f64::from(u8::from(self.fading()))),
            ("channel.m_near", n.m_by_distance[0].1),
            ("channel.m_far", n.m_by_distance[1].1),
            ("channel.m_breakpoint", n.m_by_distance[0].0),
            ("channel.gamma_near", n.gamma_by_distance[0].1),
            ("channel.gamma_far", n.gamma_by_distance[1].1),
            ("channel.gamma_breakpoint", n.gamma_by_distance[0].0),
            ("channel.ref_distance", n.ref_distance),
            ("mac.slot_time", mac.slot_time),
            ("mac.sifs", mac.sifs),
            ("mac.difs", mac.difs),
            ("mac.cw_min", f64::from(mac.cw_min)),
            ("mac.cw_max", f64::from(mac.cw_max)),
            ("mac.preamble_plus_header_time", mac.preamble_plus_header_time),
            ("mac.ack_timeout", mac.ack_timeout),
            ("mac.retry_limit", f64::from(mac.retry_limit)),
        ] {
            m.insert(k, v);
        }
        let base = |name| {
            let mut c = self.clone();
            c.protocol = name;
            c.routing_params()
        };
        if let ProtocolParams::Dsdv(p) = base(PresetName::Dsdv) {
            m.insert("routing.dsdv.periodic_update_interval", p.periodic_update_interval);
            m.insert("routing.dsdv.min_trigger_interval", p.min_trigger_interval);
            m.insert("routing.dsdv.settling_weight", p.settling_weight);
            m.insert("routing.dsdv.full_dump_interval", p.full_dump_interval);
        }
        if let ProtocolParams::Olsr(p) = base(PresetName::Olsr) {
            m.insert("routing.olsr.hello_interval", p.hello_interval);
            m.insert("routing.olsr.tc_interval", p.tc_interval);
            m.insert("routing.olsr.neighbor_hold_time", p.neighbor_hold_time);
            m.insert("routing.olsr.topology_hold_time", p.topology_hold_time);
        }
        if let ProtocolParams::Dymo(p) = base(PresetName::Dymo) {
            m.insert("routing.dymo.route_timeout", p.route_timeout);
            m.insert("routing.dymo.rreq_wait_time", p.rreq_wait_time);
            m.insert("routing.dymo.rreq_tries", f64::from(p.rreq_tries));
            m.insert("routing.dymo.rreq_rate_limit", p.rreq_rate_limit);
            m.insert("routing.dymo.buffer_size", p.buffer_size as f64);
            m.insert("routing.dymo.hop_limit", f64::from(p.hop_limit));
        }
        m
    }
}

/// Shortest decimal that reads back to the same value.
fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v}");
    if s.contains(['.', 'e', 'E']) || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.sim_time, 900.0);
        assert_eq!(cfg.packet_bytes, 512);
        assert_eq!(cfg.packet_interval, 0.03);
        assert_eq!(cfg.mac_variant, Standard::Dot11);
        assert!(cfg.fading());
    }

    #[test]
    fn negative_speed_rejected() {
        let err = parse_config("speed_mps = -3").unwrap_err();
        assert!(matches!(err, ConfigError::OutOfRange { ref key, .. } if key == "speed_mps"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        assert_eq!(
            parse_config("[routing.olsr]\nhelo_interval = 1").unwrap_err(),
            ConfigError::UnknownKey("routing.olsr.helo_interval".into())
        );
        assert!(matches!(parse_config("bogus = 1"), Err(ConfigError::UnknownKey(_))));
    }

    #[test]
    fn parse_error_has_line() {
        let err = parse_config("n_nodes = 25\nspeed_mps = = 3\n").unwrap_err();
        let ConfigError::Parse { line, .. } = err else { panic!("{err:?}") };
        assert_eq!(line, 2);
    }

    #[test]
    fn olsr_override_applies_over_preset() {
        let cfg = parse_config("protocol = \"MOD_OLSR\"\n[routing.olsr]\nhello_interval = 0.5\n").unwrap();
        let ProtocolParams::Olsr(p) = cfg.routing_params() else { panic!() };
        assert_eq!(p.hello_interval, 0.5);
        assert_eq!(p.neighbor_hold_time, 1.5);
        assert_eq!(p.tc_interval, 2.5);
    }

    #[test]
    fn document_round_trips() {
        let cfg = ScenarioConfig::default();
        let doc = cfg.to_document();
        assert_eq!(parse_config(&doc).unwrap(), cfg);
        assert!(doc.contains("sim_time = 900.0"));
        assert!(doc.contains("packet_bytes = 512"));
        assert!(doc.contains("packet_interval = 0.03"));

        let mut c2 = cfg.clone();
        c2.set_str("phy.data_rate=1e6").unwrap();
        c2.set_str("channel.fading = false").unwrap();
        c2.set_str("protocol=MOD_DYMO").unwrap();
        let back = parse_config(&c2.to_document()).unwrap();
        assert_eq!(back, c2);
        assert_eq!(back.phy_params().data_rate, 1e6);
        assert!(!back.fading());
    }

    #[test]
    fn lane_directions_survive_key_order() {
        let cfg = parse_config("[highway]\nlanes = 2\ndirections = [\"west\", \"west\"]\n").unwrap();
        assert_eq!(cfg.highway.directions, vec![Heading::West, Heading::West]);
        let cfg = parse_config("[highway]\nlanes = 6\n").unwrap();
        assert_eq!(cfg.highway.directions.len(), 6);
        assert!(parse_config("[highway]\ndirections = [\"east\"]\n").is_err());
    }

    #[test]
    fn mac_switch_reselects_presets() {
        let mut cfg = ScenarioConfig::default();
        cfg.mac_variant = Standard::Dot11p;
        assert_eq!(cfg.phy_params().carrier_freq, 5.9e9);
        assert_eq!(cfg.mac_params().slot_time, 13e-6);
    }
}
