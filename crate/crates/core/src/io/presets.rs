//! Scenario files for the three reference configurations, embedded so the
//! binary reproduces them byte for byte.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::file::{parse_scenario, LoadedScenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Two identical reservoirs; the equalization-time curve against ω/2T.
    Fig1,
    /// Three reservoirs whose temperature ranking changes.
    Fig2,
    /// Five reservoirs with a non-monotonic temperature history.
    Fig3,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig1, Preset::Fig2, Preset::Fig3];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
        }
    }

    /// The preset file exactly as shipped.
    pub fn source(self) -> &'static str {
        match self {
            Preset::Fig1 => include_str!("../../presets/fig1.toml"),
            Preset::Fig2 => include_str!("../../presets/fig2.toml"),
            Preset::Fig3 => include_str!("../../presets/fig3.toml"),
        }
    }

    pub fn load(self) -> LoadedScenario {
        let origin = format!("<preset {}>", self.name());
        parse_scenario(self.source(), Path::new(&origin)).expect("shipped presets are valid")
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected fig1, fig2 or fig3)"))
    }
}
