use anyhow::{anyhow, Result};
use swarmorg::config::SimConfig;

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub json: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "paper-1d",
        summary: "1D run at full scale: N = 10000, table step 0.001",
        json: include_str!("../presets/paper-1d.json"),
    },
    Preset {
        name: "paper-1d-desk",
        summary: "1D run at N = 1000 with dt = 1e-4, checks e(K) < 0.05 e(0)",
        json: include_str!("../presets/paper-1d-desk.json"),
    },
    Preset {
        name: "paper-2d-desk",
        summary: "2D pipeline at N = 2000 from an ellipse, boundary and density snapshots",
        json: include_str!("../presets/paper-2d-desk.json"),
    },
    Preset {
        name: "oracle-all",
        summary: "all four oracle checks",
        json: include_str!("../presets/oracle-all.json"),
    },
];

pub fn find(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        anyhow!("unknown preset {name:?}; available: {}", names.join(", "))
    })
}

pub fn load(name: &str) -> Result<SimConfig> {
    let p = find(name)?;
    SimConfig::from_json(p.json).map_err(|e| anyhow!("preset {name}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use swarmorg::config::ExperimentKind;

    #[test]
    fn every_preset_parses() {
        for p in PRESETS {
            load(p.name).unwrap();
        }
    }

    #[test]
    fn paper_1d_scale() {
        let cfg = load("paper-1d").unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::SelfOrg1d);
        assert_eq!(cfg.agents, 10_000);
        assert_eq!(cfg.one_d.table_step, 0.001);
    }

    #[test]
    fn unknown_preset_lists_names() {
        let err = find("paper-3d").err().unwrap().to_string();
        assert!(err.contains("paper-1d-desk"));
    }
}
