//! JSON documents and scene directories.

use std::fs;
use std::path::{Path, PathBuf};

use mfsr_core::degrade::{ImagingModel, SceneStack};
use mfsr_core::Shift;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{read_image, write_image};

pub const SCENE_FILE: &str = "scene.json";
pub const SCENE_FORMAT: &str = "mfsr-scene/1";

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_pretty(value)).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

/// Hash of the compact JSON encoding.
pub fn json_hash<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("serializable"))
}

/// `scene.json`: frame files, optional ground truth and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub format: String,
    pub frames: Vec<String>,
    /// Alignment shifts in low-resolution pixels, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_shifts: Option<Vec<Shift>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ImagingModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_hash: Option<String>,
}

/// Provenance stored alongside a synthesized scene.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub model: Option<ImagingModel>,
    pub source: Option<String>,
    pub source_hash: Option<String>,
}

pub fn frame_name(i: usize) -> String {
    format!("frame_{i:03}.png")
}

pub fn save_scene(dir: &Path, stack: &SceneStack, prov: &Provenance) -> Result<SceneManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames = Vec::with_capacity(stack.len());
    for (i, f) in stack.frames.iter().enumerate() {
        let name = frame_name(i);
        write_image(&dir.join(&name), f)?;
        frames.push(name);
    }
    let reference = match &stack.reference_hr {
        Some(r) => {
            write_image(&dir.join("reference.png"), r)?;
            Some("reference.png".to_string())
        }
        None => None,
    };
    let manifest = SceneManifest {
        format: SCENE_FORMAT.into(),
        frames,
        true_shifts: stack.true_shifts.clone(),
        reference,
        seed: prov.seed,
        model_hash: prov.model.as_ref().map(json_hash),
        model: prov.model.clone(),
        source: prov.source.clone(),
        source_hash: prov.source_hash.clone(),
    };
    write_json(&dir.join(SCENE_FILE), &manifest)?;
    Ok(manifest)
}

pub fn load_scene(dir: &Path) -> Result<(SceneStack, SceneManifest)> {
    let manifest: SceneManifest = read_json(&dir.join(SCENE_FILE))?;
    if manifest.format != SCENE_FORMAT {
        return Err(Error::Usage(format!("{}: unsupported scene format {:?}", dir.display(), manifest.format)));
    }
    let frames = manifest.frames.iter().map(|f| read_image(&dir.join(f))).collect::<Result<Vec<_>>>()?;
    let reference = manifest.reference.as_ref().map(|r| read_image(&dir.join(r))).transpose()?;
    let stack = SceneStack::new(frames, manifest.true_shifts.clone(), reference)?;
    Ok((stack, manifest))
}

/// Paths of the scene files a run depends on.
pub fn scene_inputs(dir: &Path, manifest: &SceneManifest) -> Vec<PathBuf> {
    let mut v = vec![dir.join(SCENE_FILE)];
    v.extend(manifest.frames.iter().map(|f| dir.join(f)));
    v
}

/// Either a bare `[[dx, dy], ...]` list or `{"shifts": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShiftsFile {
    Bare(Vec<Shift>),
    Wrapped { shifts: Vec<Shift> },
}

impl ShiftsFile {
    pub fn into_shifts(self) -> Vec<Shift> {
        match self {
            ShiftsFile::Bare(s) | ShiftsFile::Wrapped { shifts: s } => s,
        }
    }
}

pub fn read_shifts(path: &Path) -> Result<Vec<Shift>> {
    Ok(read_json::<ShiftsFile>(path)?.into_shifts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mfsr_core::degrade::degrade_scene;
    use mfsr_core::synth;

    #[test]
    fn scene_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let hr = synth::scene(32, 32, 1);
        let model = ImagingModel::ad_default(3, 1);
        let stack = degrade_scene(&hr, &model, 1).unwrap();
        let prov = Provenance { seed: Some(1), model: Some(model.clone()), ..Default::default() };
        let m = save_scene(dir.path(), &stack, &prov).unwrap();
        assert_eq!(m.frames, ["frame_000.png", "frame_001.png", "frame_002.png"]);
        assert_eq!(m.model_hash.as_deref(), Some(json_hash(&model).as_str()));
        let (back, m2) = load_scene(dir.path()).unwrap();
        assert_eq!(m, m2);
        assert_eq!(back.len(), 3);
        assert_eq!(back.true_shifts, stack.true_shifts);
        for (a, b) in back.frames.iter().zip(&stack.frames) {
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| (x - y).abs() <= 0.5 / 255.0 + 1e-12));
        }
    }

    #[test]
    fn shifts_file_forms() {
        let bare: ShiftsFile = serde_json::from_str("[[0, 0], [0.5, -0.25]]").unwrap();
        let wrapped: ShiftsFile = serde_json::from_str(r#"{"shifts": [[0, 0], [0.5, -0.25]]}"#).unwrap();
        assert_eq!(bare.into_shifts(), wrapped.into_shifts());
    }

    #[test]
    fn malformed_json_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.json");
        fs::write(&p, "{\n  \"r\": 2,\n  oops\n}").unwrap();
        let err = read_json::<ImagingModel>(&p).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn hashes_are_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
