use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::format::{load_feature_map, load_mask};
use super::MaskMap;
use crate::error::{Error, Result};
use crate::prototype::FeatureMap;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Which class pool an item (or an episode) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Seen,
    Unseen,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seen" => Ok(Split::Seen),
            "unseen" => Ok(Split::Unseen),
            other => Err(Error::Config(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: u16,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemEntry {
    /// Raster path relative to the dataset root (`PSEG` feature file, H×W×3).
    pub image: String,
    /// Mask path relative to the dataset root.
    pub mask: String,
    pub classes_present: Vec<u16>,
    pub split: Split,
}

type LoadedItem = Arc<(FeatureMap, MaskMap)>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub classes: Vec<ClassEntry>,
    pub seen: Vec<u16>,
    pub unseen: Vec<u16>,
    pub items: Vec<ItemEntry>,
    #[serde(skip)]
    root: PathBuf,
    #[serde(skip)]
    cache: Vec<OnceLock<LoadedItem>>,
}

impl PartialEq for DatasetManifest {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes
            && self.seen == other.seen
            && self.unseen == other.unseen
            && self.items == other.items
    }
}

impl DatasetManifest {
    pub fn new(
        root: impl Into<PathBuf>,
        classes: Vec<ClassEntry>,
        seen: Vec<u16>,
        unseen: Vec<u16>,
        items: Vec<ItemEntry>,
    ) -> Result<Self> {
        let cache = items.iter().map(|_| OnceLock::new()).collect();
        let m = Self {
            classes,
            seen,
            unseen,
            items,
            root: root.into(),
            cache,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if let Some(c) = self.seen.iter().find(|c| self.unseen.contains(c)) {
            return Err(Error::Config(format!(
                "class {c} is both seen and unseen"
            )));
        }
        let known = |c: &u16| self.classes.iter().any(|e| e.id == *c);
        for c in self.seen.iter().chain(&self.unseen) {
            if !known(c) {
                return Err(Error::Config(format!("split lists unknown class {c}")));
            }
        }
        for (i, item) in self.items.iter().enumerate() {
            if let Some(c) = item.classes_present.iter().find(|c| !known(c)) {
                return Err(Error::Config(format!("item {i} lists unknown class {c}")));
            }
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn split_classes(&self, split: Split) -> &[u16] {
        match split {
            Split::Seen => &self.seen,
            Split::Unseen => &self.unseen,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: self.manifest_path(),
            source: e,
        })
    }

    pub fn save(&self) -> Result<()> {
        let path = self.manifest_path();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Reads `<dir>/manifest.json` and checks that every indexed file exists.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let root = dir.as_ref().to_path_buf();
        let path = root.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let parsed: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::Json { path, source: e })?;
        let m = Self::new(root, parsed.classes, parsed.seen, parsed.unseen, parsed.items)?;
        for item in &m.items {
            for rel in [&item.image, &item.mask] {
                let p = m.root.join(rel);
                if !p.is_file() {
                    return Err(Error::io(
                        p,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "indexed file missing"),
                    ));
                }
            }
        }
        Ok(m)
    }

    /// Parses every indexed file and checks image/mask agreement.
    pub fn verify(&self) -> Result<()> {
        for i in 0..self.items.len() {
            let loaded = self.item(i)?;
            let (image, mask) = (&loaded.0, &loaded.1);
            if (image.height(), image.width()) != (mask.height, mask.width) {
                return Err(Error::ShapeMismatch(format!(
                    "item {i}: image and mask sizes differ"
                )));
            }
            if mask.classes_present() != self.items[i].classes_present {
                return Err(Error::Config(format!(
                    "item {i}: classes_present does not match mask"
                )));
            }
        }
        Ok(())
    }

    /// Raster and mask of item `i`, read from disk once and cached.
    pub fn item(&self, i: usize) -> Result<LoadedItem> {
        let slot = self
            .cache
            .get(i)
            .ok_or_else(|| Error::Config(format!("item {i} out of range")))?;
        if let Some(v) = slot.get() {
            return Ok(v.clone());
        }
        let entry = &self.items[i];
        let image = load_feature_map(self.root.join(&entry.image))?;
        let mask = load_mask(self.root.join(&entry.mask))?;
        Ok(slot.get_or_init(|| Arc::new((image, mask))).clone())
    }

    /// SHA-256 over the manifest text followed by every indexed file, in
    /// item order.
    pub fn content_hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        let manifest = self.manifest_path();
        h.update(std::fs::read(&manifest).map_err(|e| Error::io(&manifest, e))?);
        for item in &self.items {
            for rel in [&item.image, &item.mask] {
                let p = self.root.join(rel);
                h.update(std::fs::read(&p).map_err(|e| Error::io(&p, e))?);
            }
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }
}
