//! Re-executes a finished run and compares output hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::Scenario;
use crate::output::{sha256_file, sha256_hex, Manifest, SCENARIO};
use crate::{LabError, LabResult};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReplayOutcome {
    /// Every recorded file was reproduced bit for bit and none was altered.
    Identical,
    /// Files whose bytes differ, either on disk or in the re-run.
    Mismatch { files: Vec<String> },
    /// `scenario.cfg` no longer matches the manifest; a fresh run was made
    /// from the edited file instead of a comparison.
    DifferentScenario { fresh_run: PathBuf },
}

#[derive(Clone, Debug)]
pub struct ReplayReport {
    pub dir: PathBuf,
    pub outcome: ReplayOutcome,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.outcome == ReplayOutcome::Identical
    }
}

/// `true` iff re-running `dir` reproduces every recorded file exactly.
pub fn replay_check(dir: &Path) -> LabResult<bool> {
    Ok(replay(dir)?.identical())
}

/// Full replay with the list of differing files.
pub fn replay(dir: &Path) -> LabResult<ReplayReport> {
    let manifest = Manifest::read(dir)?;
    let cfg_path = dir.join(SCENARIO);
    let cfg = std::fs::read_to_string(&cfg_path)
        .map_err(|e| LabError::Incomplete(format!("{}: {e}", cfg_path.display())))?;

    if sha256_hex(cfg.as_bytes()) != manifest.scenario_sha256 {
        let edited = Scenario::parse(&cfg, Some(dir))?;
        let parent = dir.parent().unwrap_or(Path::new("."));
        let fresh = crate::run(&edited, parent)?;
        return Ok(ReplayReport {
            dir: dir.to_path_buf(),
            outcome: ReplayOutcome::DifferentScenario { fresh_run: fresh.dir },
        });
    }

    let mut differ = Vec::new();
    for f in &manifest.files {
        match sha256_file(&dir.join(&f.path)) {
            Ok(h) if h == f.sha256 => {}
            _ => differ.push(f.path.clone()),
        }
    }
    for f in &manifest.inputs {
        match sha256_file(Path::new(&f.path)) {
            Ok(h) if h == f.sha256 => {}
            _ => differ.push(format!("input:{}", f.path)),
        }
    }

    let scenario = Scenario::parse(&manifest.scenario, Some(dir))?;
    let scratch = tempfile::tempdir()?;
    let again = crate::run_into(&scenario, &scratch.path().join("replay"))?;
    let recorded: BTreeMap<&str, &str> = manifest.files.iter().map(|f| (f.path.as_str(), f.sha256.as_str())).collect();
    let rerun: BTreeMap<&str, &str> = again.files.iter().map(|f| (f.path.as_str(), f.sha256.as_str())).collect();
    for (path, h) in &recorded {
        if rerun.get(path) != Some(h) {
            differ.push(path.to_string());
        }
    }
    differ.extend(rerun.keys().filter(|p| !recorded.contains_key(*p)).map(|p| p.to_string()));
    differ.sort();
    differ.dedup();

    let outcome = if differ.is_empty() {
        ReplayOutcome::Identical
    } else {
        ReplayOutcome::Mismatch { files: differ }
    };
    Ok(ReplayReport {
        dir: dir.to_path_buf(),
        outcome,
    })
}
