//! Plain-text schedule tables.

use std::fmt::Write;

use crate::schedule::{LayerSet, ScheduleConfig};

/// Compact rendering of a layer set: consecutive runs collapse to `a-b`,
/// singletons stay bare, the empty set renders as `-`.
pub fn format_layer_ranges(set: &LayerSet) -> String {
    if set.is_empty() {
        return "-".into();
    }
    let mut parts: Vec<String> = Vec::new();
    let indices = set.as_slice();
    let mut run_start = indices[0];
    let mut run_end = indices[0];
    for &layer in &indices[1..] {
        if layer == run_end + 1 {
            run_end = layer;
        } else {
            parts.push(if run_start == run_end {
                run_start.to_string()
            } else {
                format!("{run_start}-{run_end}")
            });
            run_start = layer;
            run_end = layer;
        }
    }
    parts.push(if run_start == run_end {
        run_start.to_string()
    } else {
        format!("{run_start}-{run_end}")
    });
    parts.join(",")
}

/// One row per position `t` in `0..=t_max`: the budget, the executed-set
/// cardinality and the executed set itself. The format is stable and
/// golden-file friendly.
pub fn schedule_table(config: &ScheduleConfig) -> Result<String, crate::schedule::ScheduleError> {
    config.validate()?;
    let mut out = String::from("t budget count layers\n");
    for t in 0..=config.t_max {
        let set = config.executed_set(t)?;
        writeln!(
            out,
            "{t} {} {} {}",
            config.budget(t)?,
            set.len(),
            format_layer_ranges(&set)
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}
