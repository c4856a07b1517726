use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

/// Outcome of one trained stage on the evaluation set.
#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub stage: String,
    pub epoch_losses: Vec<f64>,
    /// IoU of class `k` at index `k`, background first.
    pub per_class_iou: Vec<f64>,
    pub miou: f64,
    /// Wall-clock training plus evaluation time.
    pub seconds: f64,
}

/// Reports of a run in stage order.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub num_classes: u8,
    pub stages: Vec<StageReport>,
}

impl RunReport {
    /// JSON document. Wall-clock seconds are written only when
    /// `include_timing` is set; otherwise the field is `null` so that
    /// identical runs produce identical bytes.
    pub fn to_json(&self, include_timing: bool) -> Value {
        let stages: Vec<Value> = self
            .stages
            .iter()
            .map(|s| {
                let ious: Map<String, Value> = s
                    .per_class_iou
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| (k.to_string(), json!(v)))
                    .collect();
                json!({
                    "stage": s.stage,
                    "epoch_losses": s.epoch_losses,
                    "per_class_iou": ious,
                    "miou": s.miou,
                    "seconds": if include_timing { json!(s.seconds) } else { Value::Null },
                })
            })
            .collect();
        json!({
            "seed": self.seed,
            "num_classes": self.num_classes,
            "absent_class_iou": 1.0,
            "stages": stages,
        })
    }

    /// Flat CSV with columns `stage,class,iou,miou,seconds`.
    pub fn to_csv(&self, include_timing: bool) -> String {
        let mut out = String::from("stage,class,iou,miou,seconds\n");
        for s in &self.stages {
            let seconds = if include_timing {
                s.seconds.to_string()
            } else {
                String::new()
            };
            for (k, iou) in s.per_class_iou.iter().enumerate() {
                writeln!(out, "{},{k},{iou},{},{seconds}", s.stage, s.miou).expect("string write");
            }
        }
        out
    }

    pub fn write(&self, dir: &Path, include_timing: bool) -> Result<()> {
        let json_path = dir.join("report.json");
        let mut text = serde_json::to_string_pretty(&self.to_json(include_timing))?;
        text.push('\n');
        std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
        let csv_path = dir.join("report.csv");
        std::fs::write(&csv_path, self.to_csv(include_timing)).map_err(|e| Error::io(&csv_path, e))
    }
}
