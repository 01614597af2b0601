//! Model checkpoints: a single text document carrying the model kind,
//! the config hash and echo, the parameter slice table, and the raw
//! values at 17 significant digits (exact f64 round trip).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::ad::{ParamStore, SliceInfo};
use crate::pig::ModelError;

const MAGIC: &str = "gaitvib-checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model_kind: String,
    pub config_hash: String,
    /// Verbatim config echo (the CLI embeds its TOML here).
    pub config_echo: String,
    pub store: ParamStore,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), ModelError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "model = {}", ckpt.model_kind)?;
    writeln!(w, "config_hash = {}", ckpt.config_hash)?;
    writeln!(w, "rng_seed = {}", ckpt.store.rng_seed())?;
    writeln!(w, "[config]")?;
    for line in ckpt.config_echo.lines() {
        writeln!(w, "  {line}")?;
    }
    writeln!(w, "[slices]")?;
    for (name, info) in ckpt.store.names() {
        writeln!(w, "{name} {} {} {}", info.offset, info.rows, info.cols)?;
    }
    writeln!(w, "[values]")?;
    for v in ckpt.store.values() {
        writeln!(w, "{v:.16e}")?;
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let magic = lines.next().unwrap_or_default();
    if magic != MAGIC {
        return Err(ModelError::Checkpoint(format!(
            "unsupported checkpoint version: {magic:?}, expected {MAGIC:?}"
        )));
    }
    let mut model_kind = String::new();
    let mut config_hash = String::new();
    let mut rng_seed = 0u64;
    let mut config_echo = Vec::new();
    let mut slices: Vec<(String, SliceInfo)> = Vec::new();
    let mut values = Vec::new();
    let mut section = "";
    for line in lines {
        match line {
            "[config]" => {
                section = "config";
                continue;
            }
            "[slices]" => {
                section = "slices";
                continue;
            }
            "[values]" => {
                section = "values";
                continue;
            }
            _ => {}
        }
        match section {
            "" => {
                if let Some((k, v)) = line.split_once('=') {
                    match k.trim() {
                        "model" => model_kind = v.trim().to_string(),
                        "config_hash" => config_hash = v.trim().to_string(),
                        "rng_seed" => {
                            rng_seed = v
                                .trim()
                                .parse()
                                .map_err(|_| ModelError::Checkpoint("bad rng_seed".into()))?
                        }
                        _ => {}
                    }
                }
            }
            "config" => config_echo.push(line.strip_prefix("  ").unwrap_or(line).to_string()),
            "slices" => {
                if line.is_empty() {
                    continue;
                }
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 {
                    return Err(ModelError::Checkpoint(format!("bad slice row {line:?}")));
                }
                let parse =
                    |s: &str| s.parse::<usize>().map_err(|_| {
                        ModelError::Checkpoint(format!("bad slice number in {line:?}"))
                    });
                slices.push((
                    parts[0].to_string(),
                    SliceInfo { offset: parse(parts[1])?, rows: parse(parts[2])?, cols: parse(parts[3])? },
                ));
            }
            "values" => {
                if line.is_empty() {
                    continue;
                }
                values.push(
                    line.trim()
                        .parse::<f64>()
                        .map_err(|_| ModelError::Checkpoint(format!("bad value {line:?}")))?,
                );
            }
            _ => unreachable!(),
        }
    }
    if model_kind.is_empty() {
        return Err(ModelError::Checkpoint("missing model kind".into()));
    }
    let store = ParamStore::from_parts(rng_seed, slices, values)
        .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    Ok(Checkpoint {
        model_kind,
        config_hash,
        config_echo: config_echo.join("\n"),
        store,
    })
}
