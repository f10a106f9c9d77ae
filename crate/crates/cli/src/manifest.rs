//! The corpus manifest: a CSV listing per song id, audio path, annotation
//! path and cross-validation fold. Paths are resolved relative to the
//! manifest file.

use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub id: String,
    pub audio: PathBuf,
    pub annotation: PathBuf,
    pub fold: u32,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read manifest {}: {e}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("id,")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(format!("{}:{}: expected id,audio,annotation,fold", path.display(), lineno + 1));
        }
        let fold: u32 = fields[3]
            .parse()
            .map_err(|_| format!("{}:{}: bad fold {:?}", path.display(), lineno + 1, fields[3]))?;
        entries.push(ManifestEntry {
            id: fields[0].to_string(),
            audio: base.join(fields[1]),
            annotation: base.join(fields[2]),
            fold,
        });
    }
    if entries.is_empty() {
        return Err(format!("manifest {} lists no songs", path.display()));
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, rows: &[(String, String, String, u32)]) -> Result<(), String> {
    let mut text = String::from("id,audio,annotation,fold\n");
    for (id, audio, annotation, fold) in rows {
        text.push_str(&format!("{id},{audio},{annotation},{fold}\n"));
    }
    std::fs::write(path, text).map_err(|e| format!("cannot write manifest {}: {e}", path.display()))
}
