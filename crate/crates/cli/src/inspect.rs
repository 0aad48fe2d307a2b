//! Human-readable descriptions of binary containers.

use std::fmt::Write as _;
use std::path::Path;

use lrt_core::classifier::ModelMode;
use lrt_core::container::{decode_dataset, decode_model, decode_transform, DATASET_MAGIC, MODEL_MAGIC, TRANSFORM_MAGIC};
use lrt_core::linalg::{nuclear_norm, numerical_rank_with, spectral_norm};
use lrt_core::lrt::{Transform, TransformKind};
use lrt_core::Threshold;

use crate::error::{RunError, Stage, StageExt};

fn describe_transform(s: &mut String, t: &Transform) -> Result<(), RunError> {
    let kind = match t.kind {
        TransformKind::Global => "global".to_string(),
        TransformKind::PerClass(c) => format!("class {c}"),
    };
    let _ = writeln!(s, "transform  {kind}, {0}x{0}", t.dim());
    let _ = writeln!(s, "  spectral norm  {:.6}", spectral_norm(&t.matrix).stage(Stage::Inspect)?);
    let _ = writeln!(s, "  nuclear norm   {:.6}", nuclear_norm(&t.matrix).stage(Stage::Inspect)?);
    let rank = numerical_rank_with(&t.matrix, Threshold::default()).stage(Stage::Inspect)?;
    let _ = writeln!(s, "  rank (1e-4 rel) {rank}");
    Ok(())
}

/// Describes a `.lrt`, `.lrm` or `.lrd` file, dispatching on its magic.
pub fn inspect_file(path: &Path) -> Result<String, RunError> {
    let bytes = std::fs::read(path).map_err(|e| RunError::new(Stage::Inspect, format!("{}: {e}", path.display())))?;
    let magic = bytes.get(..4).unwrap_or_default();
    let mut s = String::new();
    if magic == TRANSFORM_MAGIC {
        describe_transform(&mut s, &decode_transform(&bytes).stage(Stage::Inspect)?)?;
    } else if magic == MODEL_MAGIC {
        let m = decode_model(&bytes).stage(Stage::Inspect)?;
        let mode = match m.mode() {
            ModelMode::Global => "global",
            ModelMode::PerClass => "per-class",
        };
        let _ = writeln!(s, "model      {mode}, d={}, {} classes", m.dim(), m.num_classes());
        let _ = writeln!(s, "  rpca tol {:e}, max_iter {}", m.rpca.tol, m.rpca.max_iter);
        for (c, l) in m.dictionaries.iter().enumerate() {
            let rank = numerical_rank_with(l, Threshold::default()).unwrap_or(0);
            let flag = if m.unconverged.contains(&c) { "  (unconverged)" } else { "" };
            let _ = writeln!(s, "  {:<12} {} columns, rank {rank}{flag}", m.class_names[c], l.ncols());
        }
        for t in m.transforms.transforms() {
            describe_transform(&mut s, t)?;
        }
    } else if magic == DATASET_MAGIC {
        let d = decode_dataset(&bytes).stage(Stage::Inspect)?;
        let conditions: std::collections::BTreeSet<_> = d.conditions().iter().collect();
        let _ = writeln!(s, "dataset    d={}, {} samples, {} classes", d.dim(), d.len(), d.num_classes());
        let _ = writeln!(s, "  conditions  {}", conditions.len());
        let _ = writeln!(s, "  fingerprint {}", d.fingerprint());
        for (name, n) in d.class_names().iter().zip(d.class_counts()) {
            let _ = writeln!(s, "  {name:<12} {n}");
        }
    } else {
        return Err(RunError::new(
            Stage::Inspect,
            format!("{}: not a transform, model or dataset container", path.display()),
        ));
    }
    Ok(s)
}
