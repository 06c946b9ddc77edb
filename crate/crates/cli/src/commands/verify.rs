use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;

use super::probe::ProbeFile;
use super::sweep::SweepReport;
use crate::output::{
    sha256_hex, Manifest, Report, MANIFEST_FILE, REPORT_FILE, SYNTH_MANIFEST_FILE,
};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Output directory of any subcommand. Subdirectories with their own
    /// manifest are checked too.
    pub dir: PathBuf,
}

fn parse_strict<T: DeserializeOwned>(bytes: &[u8]) -> std::result::Result<T, String> {
    serde_json::from_slice(bytes).map_err(|e| e.to_string())
}

/// Schema and hash checks for the JSON documents with a known layout.
fn check_document(name: &str, bytes: &[u8], hash: &str) -> std::result::Result<(), String> {
    let file_name = Path::new(name)
        .file_name()
        .and_then(|f| f.to_str())
        .unwrap_or(name);
    let embedded = match file_name {
        REPORT_FILE => {
            let r: Report = parse_strict(bytes)?;
            r.validate().map_err(|e| e.to_string())?;
            r.config_hash
        }
        "probe_report.json" => parse_strict::<ProbeFile>(bytes)?.config_hash,
        "sweep.json" => parse_strict::<SweepReport>(bytes)?.config_hash,
        _ => return Ok(()),
    };
    if embedded != hash {
        return Err(format!(
            "embedded config hash {embedded} differs from the manifest"
        ));
    }
    Ok(())
}

/// Problems found in the manifest at `path`, prefixed by file name.
fn check_manifest(path: &Path) -> Result<Vec<String>> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: Manifest = match serde_json::from_slice(&bytes) {
        Ok(m) => m,
        Err(e) => return Ok(vec![format!("{}: malformed manifest: {e}", path.display())]),
    };
    let mut problems = Vec::new();
    let recomputed = manifest.config.hash()?;
    if recomputed != manifest.config_hash {
        problems.push(format!(
            "{}: config hash {} does not match its config ({recomputed})",
            path.display(),
            manifest.config_hash
        ));
    }
    for (name, sha) in &manifest.files {
        let file = dir.join(name);
        let Ok(bytes) = std::fs::read(&file) else {
            problems.push(format!("{}: missing", file.display()));
            continue;
        };
        if &sha256_hex(&bytes) != sha {
            problems.push(format!("{}: content hash changed", file.display()));
        }
        if !String::from_utf8_lossy(&bytes).contains(&manifest.config_hash) {
            problems.push(format!(
                "{}: does not carry the config hash",
                file.display()
            ));
        }
        if let Err(e) = check_document(name, &bytes, &manifest.config_hash) {
            problems.push(format!("{}: {e}", file.display()));
        }
    }
    Ok(problems)
}

fn manifests_under(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for name in [MANIFEST_FILE, SYNTH_MANIFEST_FILE] {
        let p = dir.join(name);
        if p.is_file() {
            out.push(p);
        }
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for d in subdirs {
        manifests_under(&d, out)?;
    }
    Ok(())
}

pub fn run(args: &Args) -> Result<()> {
    let mut manifests = Vec::new();
    manifests_under(&args.dir, &mut manifests)?;
    if manifests.is_empty() {
        bail!("no manifest found under {}", args.dir.display());
    }
    let mut problems = Vec::new();
    for m in &manifests {
        let found = check_manifest(m)?;
        if found.is_empty() {
            println!("ok  {}", m.display());
        }
        problems.extend(found);
    }
    if !problems.is_empty() {
        for p in &problems {
            println!("FAIL {p}");
        }
        bail!("{} problem(s) in {}", problems.len(), args.dir.display());
    }
    Ok(())
}
