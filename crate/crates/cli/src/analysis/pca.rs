use morphkit::longitudinal::{Side, Timepoint};
use morphkit::pca::{pca, PcaMode};
use morphkit::MorphTable;
use serde_json::{json, Value};

use super::{cell_label, cells, degenerate};
use crate::error::Result;

const VARIABLES: [&str; 4] = ["d", "hv", "bv", "icv"];

fn rows(table: &MorphTable, side: Side, time: Timepoint) -> Vec<Vec<f64>> {
    let pick = |pair: (f64, f64)| if time == Timepoint::B { pair.0 } else { pair.1 };
    table
        .records
        .iter()
        .map(|r| vec![r.metric_distance.get(side, time), r.hippo_volume.get(side, time), pick(r.brain_volume), pick(r.icv)])
        .collect()
}

pub(super) fn run(table: &MorphTable) -> Result<Value> {
    let mut out = serde_json::Map::new();
    for (side, time) in cells() {
        let data = rows(table, side, time);
        let mut block = serde_json::Map::new();
        for (mode, key) in [(PcaMode::Covariance, "covariance"), (PcaMode::Correlation, "correlation")] {
            let v = match pca(&data, mode) {
                Ok(r) => serde_json::to_value(r)?,
                Err(e) if degenerate(&e) => json!({"note": e.to_string()}),
                Err(e) => return Err(e.into()),
            };
            block.insert(key.to_string(), v);
        }
        block.insert("variables".into(), json!(VARIABLES));
        out.insert(cell_label(side, time), Value::Object(block));
    }
    Ok(Value::Object(out))
}
