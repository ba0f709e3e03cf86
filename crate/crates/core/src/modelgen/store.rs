//! Model files and model collections.

use super::{adaptive_refine, Case, Domain, ModelConfig, PiecewiseModel, Sampler};
use crate::error::{Error, Result};
use crate::kernels::{Call, Kernel};
use crate::sampler::SummaryStats;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

/// All modeled cases of one kernel on one setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub format_version: u32,
    pub machine: String,
    pub backend: String,
    pub threads: u32,
    pub kernel: Kernel,
    pub cases: Vec<PiecewiseModel>,
    pub config: ModelConfig,
    pub seed: u64,
}

impl KernelModel {
    /// Refines every requested case of `kernel`.
    pub fn generate(
        sampler: &mut Sampler<'_>,
        machine: &str,
        threads: u32,
        kernel: Kernel,
        cases: &[(Case, Domain)],
        config: &ModelConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut models = Vec::new();
        for (case, domain) in cases {
            models.push(adaptive_refine(sampler, config, kernel, case, domain)?);
        }
        Ok(KernelModel {
            format_version: FORMAT_VERSION,
            machine: machine.to_string(),
            backend: sampler.backend_id(),
            threads,
            kernel,
            cases: models,
            config: config.clone(),
            seed,
        })
    }

    pub fn case(&self, case: &Case) -> Option<&PiecewiseModel> {
        self.cases.iter().find(|m| &m.case == case)
    }

    /// Estimated statistics of a call; empty calls cost nothing.
    pub fn evaluate(&self, call: &Call) -> Result<SummaryStats> {
        if call.kernel != self.kernel {
            return Err(Error::Unmodeled(call.kernel.name().into()));
        }
        let sizes = call.sizes();
        if call.is_empty() || sizes.contains(&0) {
            return Ok(SummaryStats::constant(0.0));
        }
        let case = Case::of_call(call);
        let model = self.case(&case).ok_or_else(|| {
            Error::Unmodeled(format!("{} case {}", self.kernel, case.label()))
        })?;
        model.eval(self.kernel, &sizes)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: KernelModel = serde_json::from_str(text)?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::ModelFile(format!(
                "unsupported format version {}",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Models of several kernels for one setup, stored as `{kernel}.json`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelSet {
    pub models: BTreeMap<Kernel, KernelModel>,
}

impl ModelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: KernelModel) {
        self.models.insert(model.kernel, model);
    }

    pub fn get(&self, kernel: Kernel) -> Option<&KernelModel> {
        self.models.get(&kernel)
    }

    pub fn evaluate(&self, call: &Call) -> Result<SummaryStats> {
        if call.is_empty() || call.sizes().contains(&0) {
            return Ok(SummaryStats::constant(0.0));
        }
        self.get(call.kernel)
            .ok_or_else(|| Error::Unmodeled(call.kernel.name().into()))?
            .evaluate(call)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (k, m) in &self.models {
            m.save(&dir.join(format!("{}.json", k.name())))?;
        }
        Ok(())
    }

    /// Loads every `{kernel}.json` in a directory.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut set = ModelSet::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        entries.sort();
        for p in entries {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            if Kernel::from_name(stem).is_err() {
                continue;
            }
            set.insert(KernelModel::load(&p)?);
        }
        Ok(set)
    }
}

/// Bounding domain of every (kernel, case) among non-empty calls, widened to
/// multiples of 8 with a minimum of 8.
pub fn required_cases(calls: &[Call]) -> BTreeMap<(Kernel, Case), Domain> {
    let mut out: BTreeMap<(Kernel, Case), Vec<(usize, usize)>> = BTreeMap::new();
    for call in calls {
        let sizes = call.sizes();
        if call.is_empty() || sizes.contains(&0) {
            continue;
        }
        let e = out
            .entry((call.kernel, Case::of_call(call)))
            .or_insert_with(|| sizes.iter().map(|&s| (s, s)).collect());
        for (b, &s) in e.iter_mut().zip(&sizes) {
            b.0 = b.0.min(s);
            b.1 = b.1.max(s);
        }
    }
    out.into_iter()
        .map(|(k, b)| {
            let bounds = b
                .into_iter()
                .map(|(l, u)| {
                    let lo = (8 * (l / 8)).max(8);
                    (lo, (8 * u.div_ceil(8)).max(lo))
                })
                .collect();
            (k, Domain { bounds })
        })
        .collect()
}
