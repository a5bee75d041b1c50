//! Output directory layout of a finished run.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{json, Map, Value};

use mvtex_core::config::RunConfig;
use mvtex_core::diffusion::Scene;
use mvtex_core::experiment::{variance_map, RunOutcome};
use mvtex_core::export::{snapshot_grid, write_png, write_raw_file, BitDepth};
use mvtex_core::grid::LatentGrid;

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Records written paths relative to the output directory.
struct Writer<'a> {
    root: &'a Path,
    written: Vec<String>,
}

impl Writer<'_> {
    fn path(&mut self, rel: &str) -> anyhow::Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        self.written.push(rel.to_string());
        Ok(p)
    }

    fn png(&mut self, rel: &str, g: &LatentGrid, depth: BitDepth) -> anyhow::Result<()> {
        let p = self.path(rel)?;
        write_png(g, &p, depth).with_context(|| format!("writing {}", p.display()))
    }

    fn raw(&mut self, rel: &str, g: &LatentGrid) -> anyhow::Result<()> {
        let p = self.path(rel)?;
        write_raw_file(g, &p).with_context(|| format!("writing {}", p.display()))
    }

    fn text(&mut self, rel: &str, text: &str) -> anyhow::Result<()> {
        let p = self.path(rel)?;
        write_text(&p, text)
    }
}

/// Stretches a non-negative single-channel map onto [-1, 1] for display.
fn stretch(map: &LatentGrid) -> LatentGrid {
    let top = map.data.iter().cloned().fold(0.0f32, f32::max);
    let mut out = map.clone();
    if top > 0.0 {
        out.data.iter_mut().for_each(|v| *v = 2.0 * *v / top - 1.0);
    } else {
        out.data.fill(-1.0);
    }
    out
}

fn config_json(cfg: &RunConfig) -> Value {
    let fields: Map<String, Value> = cfg
        .to_kv()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), Value::String(v.to_string())))
        .collect();
    Value::Object(fields)
}

pub fn write_run(dir: &Path, cfg: &RunConfig, scene: &Scene, out: &RunOutcome, runtime_secs: f64) -> anyhow::Result<()> {
    let mut w = Writer { root: dir, written: Vec::new() };
    let result = &out.result;

    w.png("texture.png", &result.texture, BitDepth::Eight)?;
    w.png("texture-16bit.png", &result.texture, BitDepth::Sixteen)?;
    w.raw("texture.raw", &result.texture)?;
    w.raw("latent_texture.raw", &result.latent_texture)?;
    let variance = variance_map(result, scene, cfg.final_alpha);
    w.raw("variance.raw", &variance)?;
    w.png("variance.png", &stretch(&variance), BitDepth::Eight)?;
    for (i, v) in result.final_views.iter().enumerate() {
        w.png(&format!("views/view-{i:02}.png"), v, BitDepth::Eight)?;
    }
    if let Some(target) = &out.target {
        w.png("target.png", target, BitDepth::Eight)?;
    }
    let snaps: Vec<(usize, &LatentGrid)> = result
        .records
        .iter()
        .filter_map(|r| r.clean_texture.as_ref().map(|g| (r.t, g)))
        .collect();
    for (t, g) in &snaps {
        w.raw(&format!("snapshots/clean-t{t:03}.raw"), g)?;
    }
    if !snaps.is_empty() {
        let tiles: Vec<LatentGrid> = snaps.iter().map(|(_, g)| (*g).clone()).collect();
        let sheet = snapshot_grid(&tiles, 10)?;
        w.png("snapshots/clean-textures.png", &sheet, BitDepth::Eight)?;
    }
    w.text("report.json", &out.report.to_text())?;

    let manifest = json!({
        "config": config_json(cfg),
        "seed": cfg.seed,
        "views": scene.cameras.len(),
        "triangles": scene.mesh.triangle_count(),
        "runtime_seconds": runtime_secs,
        "final_disagreement": out.report.final_disagreement,
        "disagreement": out.report.curve,
        "report_finite": out.report.all_finite(),
        "outputs": w.written,
    });
    w.text("manifest.json", &serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
