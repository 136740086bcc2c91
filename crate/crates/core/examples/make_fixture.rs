//! Regenerates the bundled synthetic fixture:
//!
//! ```text
//! cargo run --example make_fixture -- crates/core/tests/fixtures/iris3x4
//! ```
//!
//! Three classes of four eyes each, every row in the test split. The
//! shuffled manifest relabels image `i` of class `c` as `(c + i) % 3`.

use std::path::PathBuf;

use anyhow::Context;
use irisbench::cli::{ExperimentConfig, Manifest, ManifestRow, Split};
use irisbench::preprocess::{Normalization, PreprocessConfig};
use irisbench::raster::save_image;
use irisbench::synth::EyeSpec;

const CLASSES: usize = 3;
const PER_CLASS: usize = 4;

fn main() -> anyhow::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .context("usage: make_fixture <out_dir>")?
        .into();
    std::fs::create_dir_all(out.join("images"))?;

    let mut rows = Vec::new();
    let mut shuffled = Vec::new();
    for c in 0..CLASSES {
        for i in 0..PER_CLASS {
            let id = format!("c{c}_{i}");
            let (image, mask) = EyeSpec::sample(c, (100 * c + i) as u64, 160, 120).render();
            let image_path = format!("images/{id}.png");
            let mask_path = format!("images/{id}_mask.png");
            save_image(&image, out.join(&image_path))?;
            save_image(&mask.to_raster(), out.join(&mask_path))?;
            let row = ManifestRow {
                id,
                image_path,
                mask_path,
                class_label: format!("class{c}"),
                split: Split::Test,
                angle_deg: 0.0,
            };
            shuffled.push(ManifestRow {
                class_label: format!("class{}", (c + i) % CLASSES),
                ..row.clone()
            });
            rows.push(row);
        }
    }
    Manifest::new(&out, rows)?.save(out.join("manifest.csv"))?;
    Manifest::new(&out, shuffled)?.save(out.join("manifest_shuffled.csv"))?;

    let mut config = ExperimentConfig::new(PreprocessConfig::new(Normalization::NonNormalized, true));
    config.seed = 7;
    std::fs::write(
        out.join("config.json"),
        serde_json::to_string_pretty(&config)? + "\n",
    )?;
    println!("wrote fixture to {}", out.display());
    Ok(())
}
