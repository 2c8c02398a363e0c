//! Named policy specifications and the benchmark preset grid.

use crate::confidence::ConfidencePolicy;
use crate::decoding::DepthPolicy;
use crate::harness::HarnessError;
use crate::schedule::ScheduleConfig;

/// Initial exit threshold used by the calm presets.
pub const DEFAULT_LAMBDA0: f64 = 0.9;

/// A depth policy described by hyperparameters only; model depth and the
/// schedule horizon are bound per experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Full,
    Hierarchical {
        stride: usize,
    },
    SkipDecode {
        e_min: usize,
        e_max: usize,
    },
    Hsd {
        stride: usize,
        e_min: usize,
        e_max: usize,
    },
    Calm {
        decay: f64,
        lambda0: f64,
    },
}

impl PolicySpec {
    /// Stable identity used in report rows.
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Full => "full".into(),
            PolicySpec::Hierarchical { stride } => format!("hier_s{stride}"),
            PolicySpec::SkipDecode { e_min, e_max } => {
                format!("skipdecode_min{e_min}_max{e_max}")
            }
            PolicySpec::Hsd {
                stride,
                e_min,
                e_max,
            } => format!("hsd_s{stride}_min{e_min}_max{e_max}"),
            PolicySpec::Calm { decay, .. } => format!("calm_d{decay}"),
        }
    }

    /// Binds the spec to a model depth and schedule horizon.
    pub fn to_depth_policy(
        &self,
        num_layers: usize,
        t_max: usize,
    ) -> Result<DepthPolicy<f32>, HarnessError> {
        let schedule = match *self {
            PolicySpec::Full => ScheduleConfig::full(num_layers),
            PolicySpec::Hierarchical { stride } => ScheduleConfig::hierarchical(num_layers, stride),
            PolicySpec::SkipDecode { e_min, e_max } => {
                ScheduleConfig::skip_decode(num_layers, e_min, e_max, t_max)
            }
            PolicySpec::Hsd {
                stride,
                e_min,
                e_max,
            } => ScheduleConfig::hsd(num_layers, stride, e_min, e_max, t_max),
            PolicySpec::Calm { decay, lambda0 } => {
                let policy =
                    ConfidencePolicy::every_layer(lambda0 as f32, decay as f32, num_layers)?;
                return Ok(DepthPolicy::Confidence(policy));
            }
        };
        schedule.validate()?;
        Ok(DepthPolicy::Scheduled(schedule))
    }
}

/// The benchmark preset grid: the full-depth baseline, calm at
/// d in {0.02, 0.005}, skip-decode at (10,20) and (10,24), and the
/// stride/top-band family over s in {1,2} x max in {8,12,18} with min 0.
pub fn preset_grid() -> Vec<(&'static str, PolicySpec)> {
    let mut grid = vec![
        ("full", PolicySpec::Full),
        (
            "calm_d0.02",
            PolicySpec::Calm {
                decay: 0.02,
                lambda0: DEFAULT_LAMBDA0,
            },
        ),
        (
            "calm_d0.005",
            PolicySpec::Calm {
                decay: 0.005,
                lambda0: DEFAULT_LAMBDA0,
            },
        ),
        (
            "skipdecode_min10_max20",
            PolicySpec::SkipDecode {
                e_min: 10,
                e_max: 20,
            },
        ),
        (
            "skipdecode_min10_max24",
            PolicySpec::SkipDecode {
                e_min: 10,
                e_max: 24,
            },
        ),
    ];
    for (name, stride, e_max) in [
        ("hsd_s1_min0_max8", 1, 8),
        ("hsd_s1_min0_max12", 1, 12),
        ("hsd_s1_min0_max18", 1, 18),
        ("hsd_s2_min0_max8", 2, 8),
        ("hsd_s2_min0_max12", 2, 12),
        ("hsd_s2_min0_max18", 2, 18),
    ] {
        grid.push((
            name,
            PolicySpec::Hsd {
                stride,
                e_min: 0,
                e_max,
            },
        ));
    }
    grid
}

pub fn preset(name: &str) -> Option<PolicySpec> {
    preset_grid()
        .into_iter()
        .find(|(preset_name, _)| *preset_name == name)
        .map(|(_, spec)| spec)
}
