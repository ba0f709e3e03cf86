//! Hardware descriptions and the roofline bound.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheLevel {
    pub name: String,
    /// Capacity in bytes.
    pub capacity: u64,
    /// Line size in bytes.
    pub line_size: u64,
    pub associativity: u32,
}

/// Processor description; all quantities strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineSpec {
    pub name: String,
    /// Base frequency in Hz; converts cycle counts to seconds.
    pub base_frequency: f64,
    /// Single-core frequency when turbo is active; absent when disabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turbo_frequency: Option<f64>,
    /// Double-precision flops per cycle and core.
    pub flops_per_cycle: f64,
    pub cores: u32,
    /// Peak main-memory bandwidth in bytes per second.
    pub peak_bandwidth: f64,
    /// Cache levels ordered from the core outwards.
    pub caches: Vec<CacheLevel>,
}

const BUILTIN: [(&str, &str); 5] = [
    (
        "harpertown-e5450",
        include_str!("../../machines/harpertown-e5450.json"),
    ),
    (
        "sandybridge-e5-2670",
        include_str!("../../machines/sandybridge-e5-2670.json"),
    ),
    (
        "ivybridge-e5-2680v2",
        include_str!("../../machines/ivybridge-e5-2680v2.json"),
    ),
    (
        "haswell-e5-2680v3",
        include_str!("../../machines/haswell-e5-2680v3.json"),
    ),
    (
        "broadwell-i7-5557u",
        include_str!("../../machines/broadwell-i7-5557u.json"),
    ),
];

impl MachineSpec {
    /// Names of the shipped machine descriptions.
    pub fn builtin_names() -> Vec<&'static str> {
        BUILTIN.iter().map(|(n, _)| *n).collect()
    }

    pub fn builtin(name: &str) -> Result<MachineSpec> {
        let text = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| Error::Config(format!("unknown machine `{name}`")))?;
        Self::from_json(text)
    }

    pub fn from_json(text: &str) -> Result<MachineSpec> {
        let m: MachineSpec = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    /// Loads a builtin by name or a JSON file by path.
    pub fn load(name_or_path: &str) -> Result<MachineSpec> {
        if BUILTIN.iter().any(|(n, _)| *n == name_or_path) {
            return Self::builtin(name_or_path);
        }
        let text = std::fs::read_to_string(Path::new(name_or_path))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.base_frequency > 0.0
            && self.turbo_frequency.is_none_or(|f| f > 0.0)
            && self.flops_per_cycle > 0.0
            && self.cores > 0
            && self.peak_bandwidth > 0.0;
        if !positive {
            return Err(Error::Config(format!(
                "machine `{}` has non-positive fields",
                self.name
            )));
        }
        for c in &self.caches {
            if c.capacity == 0
                || c.line_size == 0
                || c.associativity == 0
                || c.capacity % c.line_size != 0
            {
                return Err(Error::Config(format!(
                    "machine `{}`: invalid cache level {}",
                    self.name, c.name
                )));
            }
        }
        Ok(())
    }

    /// Peak flops/s with `threads` cores; one thread may use the turbo frequency.
    pub fn peak_flops(&self, threads: u32) -> f64 {
        let threads = threads.clamp(1, self.cores);
        let freq = match (threads, self.turbo_frequency) {
            (1, Some(t)) => t,
            _ => self.base_frequency,
        };
        self.flops_per_cycle * freq * threads as f64
    }

    pub fn last_level_cache(&self) -> Option<&CacheLevel> {
        self.caches.iter().max_by_key(|c| c.capacity)
    }

    /// Roofline bound at the given intensity using the peak bandwidth.
    pub fn roofline(&self, threads: u32, intensity: f64) -> f64 {
        roofline_limit(self.peak_flops(threads), self.peak_bandwidth, intensity)
    }

    /// Cache line size in bytes (64 if no cache level is described).
    pub fn line_size(&self) -> u64 {
        self.caches.first().map_or(64, |c| c.line_size)
    }
}

/// Attainable flops/s at the given arithmetic intensity (flops per byte).
pub fn roofline_limit(peak_flops: f64, bandwidth: f64, intensity: f64) -> f64 {
    (bandwidth * intensity).min(peak_flops)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_peaks_match_tables() {
        let expect = [
            ("harpertown-e5450", 12e9, 48e9),
            ("sandybridge-e5-2670", 20.8e9, 166.4e9),
            ("ivybridge-e5-2680v2", 28.8e9, 224e9),
            ("haswell-e5-2680v3", 52.8e9, 480e9),
            ("broadwell-i7-5557u", 54.4e9, 99.2e9),
        ];
        for (name, single, all) in expect {
            let m = MachineSpec::builtin(name).unwrap();
            assert!((m.peak_flops(1) - single).abs() < 1e3, "{name}");
            assert!((m.peak_flops(m.cores) - all).abs() < 1e3, "{name}");
        }
    }

    #[test]
    fn roofline_examples() {
        let peak = 20.8e9;
        let bw = 16.25e9;
        assert_eq!(roofline_limit(peak, bw, 0.0), 0.0);
        assert_eq!(roofline_limit(peak, bw, 62.5), peak);
        let cross = peak / bw;
        assert!((cross - 1.28).abs() < 0.005);
        assert!((bw * cross - peak).abs() < 1.0);
    }
}
