//! Built-in experiments, stored as ordinary config files.

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub toml: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "beta-ablation",
        description: "JAGUAR SignSGD on a noisy quadratic over momentum values",
        toml: r#"seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19]
output = "out/beta-ablation"

[problem]
kind = "quadratic"
d = 10
condition_number = 10.0
sigma = 3.0
samples = 16

[optimizer]
kind = "jaguar-signsgd"
gamma = 3e-4
tau = 1e-2
iterations = 20000

[sweep]
"optimizer.beta" = [0.0, 1e-3, 1e-2, 1e-1, 0.8, 0.9]
"#,
    },
    Preset {
        name: "tau-optimum",
        description: "final error over a log grid of smoothing radii with oracle noise 1e-6",
        toml: r#"seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19]
output = "out/tau-optimum"

[problem]
kind = "quadratic"
d = 10
condition_number = 10.0
samples = 1

[optimizer]
kind = "jaguar-signsgd"
gamma = 1e-4
beta = 0.9
iterations = 50000
delta = 1e-6
noise = "uniform-bounded"

[sweep]
"optimizer.tau" = [1e-5, 3.1622776601683795e-5, 1e-4, 3.1622776601683795e-4, 1e-3, 3.1622776601683795e-3, 1e-2, 3.1622776601683795e-2, 1e-1]
"#,
    },
    Preset {
        name: "slope-T",
        description: "noiseless quadratic with optimal tuning over the iteration budget",
        toml: r#"seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
output = "out/slope-T"
checks = ["slope-T"]

[problem]
kind = "quadratic"
d = 10
condition_number = 10.0
samples = 1

[optimizer]
kind = "jaguar-signsgd"
preset = "optimal"
iterations = 1000

[sweep]
"optimizer.iterations" = [1000, 4000, 16000, 64000]
"#,
    },
    Preset {
        name: "slope-d",
        description: "noiseless quadratic with optimal tuning over the dimension",
        toml: r#"seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
output = "out/slope-d"
checks = ["slope-d"]

[problem]
kind = "quadratic"
d = 4
condition_number = 10.0
samples = 1

[optimizer]
kind = "jaguar-signsgd"
preset = "optimal"
iterations = 20000

[sweep]
"problem.d" = [4, 8, 16, 32]
"#,
    },
];

pub fn find(name: &str) -> Result<&'static Preset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| HarnessError::Unknown {
            what: "preset",
            name: name.to_string(),
            known: PRESETS.iter().map(|p| p.name.to_string()).collect(),
        })
}

pub fn load(name: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml_str(find(name)?.toml)
}
