//! Variable taxonomy and the channel ordering of model inputs and outputs.

use crate::error::{Error, Result};
use crate::losses::LossKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Prognostic,
    Diagnostic,
    Forcing,
    Static,
}

impl Role {
    pub fn tag(self) -> u8 {
        match self {
            Role::Prognostic => 0,
            Role::Diagnostic => 1,
            Role::Forcing => 2,
            Role::Static => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => Role::Prognostic,
            1 => Role::Diagnostic,
            2 => Role::Forcing,
            3 => Role::Static,
            other => return Err(Error::Format(format!("unknown role tag {other}"))),
        })
    }
}

pub const TEMPERATURE: &str = "T";
pub const HUMIDITY: &str = "SH";
pub const ZONAL_WIND: &str = "U";
pub const MERIDIONAL_WIND: &str = "V";
pub const LOG_SURFACE_PRESSURE: &str = "logP";
pub const PRECIPITATION: &str = "TP";
pub const OROGRAPHY: &str = "orography";
pub const INSOLATION: &str = "TISR";
pub const LAND_SEA_MASK: &str = "lsm";
pub const CO2: &str = "CO2";
pub const SST: &str = "SST";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarSpec {
    pub name: String,
    pub levels: usize,
    pub role: Role,
}

impl VarSpec {
    pub fn new(name: &str, levels: usize, role: Role) -> Self {
        Self {
            name: name.to_string(),
            levels,
            role,
        }
    }
}

/// A single 2-D channel: a variable at one level (or a single-level variable).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Channel {
    pub var: String,
    pub level: Option<usize>,
}

impl Channel {
    pub fn name(&self) -> String {
        match self.level {
            Some(k) => format!("{}@{k}", self.var),
            None => self.var.clone(),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.split_once('@') {
            Some((var, lev)) => {
                let level = lev
                    .parse()
                    .map_err(|_| Error::Invalid(format!("bad channel name {name:?}")))?;
                Ok(Self {
                    var: var.to_string(),
                    level: Some(level),
                })
            }
            None => Ok(Self {
                var: name.to_string(),
                level: None,
            }),
        }
    }
}

fn expand(vars: &[VarSpec]) -> Vec<Channel> {
    let mut out = Vec::new();
    for v in vars {
        if v.levels == 1 {
            out.push(Channel {
                var: v.name.clone(),
                level: None,
            });
        } else {
            out.extend((0..v.levels).map(|k| Channel {
                var: v.name.clone(),
                level: Some(k),
            }));
        }
    }
    out
}

/// Ordered channel stacks. Inputs: prognostics, then orography, TISR,
/// land-sea mask, CO2 and optionally SST. Outputs: one tendency per
/// prognostic channel, then TP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelLayout {
    pub prognostic: Vec<VarSpec>,
    pub diagnostic: Vec<VarSpec>,
    pub forcing: Vec<VarSpec>,
    pub inputs: Vec<Channel>,
    pub outputs: Vec<Channel>,
}

impl ChannelLayout {
    pub fn new(prognostic: Vec<VarSpec>, diagnostic: Vec<VarSpec>, forcing: Vec<VarSpec>) -> Result<Self> {
        let mut names: Vec<&str> = prognostic
            .iter()
            .chain(&diagnostic)
            .chain(&forcing)
            .map(|v| v.name.as_str())
            .collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("duplicate variable name in layout".into()));
        }
        if names.iter().any(|n| n.contains('@') || n.is_empty()) {
            return Err(Error::Invalid("variable names must be non-empty and free of '@'".into()));
        }
        if prognostic.iter().chain(&diagnostic).chain(&forcing).any(|v| v.levels == 0) {
            return Err(Error::Invalid("variables need at least one level".into()));
        }
        let mut inputs = expand(&prognostic);
        inputs.extend(expand(&forcing));
        let mut outputs = expand(&prognostic);
        outputs.extend(expand(&diagnostic));
        Ok(Self {
            prognostic,
            diagnostic,
            forcing,
            inputs,
            outputs,
        })
    }

    /// The standard taxonomy on `nlevels` sigma levels.
    pub fn standard(nlevels: usize, with_sst: bool) -> Self {
        let prognostic = vec![
            VarSpec::new(TEMPERATURE, nlevels, Role::Prognostic),
            VarSpec::new(HUMIDITY, nlevels, Role::Prognostic),
            VarSpec::new(ZONAL_WIND, nlevels, Role::Prognostic),
            VarSpec::new(MERIDIONAL_WIND, nlevels, Role::Prognostic),
            VarSpec::new(LOG_SURFACE_PRESSURE, 1, Role::Prognostic),
        ];
        let diagnostic = vec![VarSpec::new(PRECIPITATION, 1, Role::Diagnostic)];
        let mut forcing = vec![
            VarSpec::new(OROGRAPHY, 1, Role::Static),
            VarSpec::new(INSOLATION, 1, Role::Forcing),
            VarSpec::new(LAND_SEA_MASK, 1, Role::Static),
            VarSpec::new(CO2, 1, Role::Forcing),
        ];
        if with_sst {
            forcing.push(VarSpec::new(SST, 1, Role::Forcing));
        }
        Self::new(prognostic, diagnostic, forcing).expect("standard layout is valid")
    }

    pub fn n_in(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_out(&self) -> usize {
        self.outputs.len()
    }

    pub fn n_prognostic(&self) -> usize {
        self.prognostic.iter().map(|v| v.levels).sum()
    }

    pub fn n_diagnostic(&self) -> usize {
        self.diagnostic.iter().map(|v| v.levels).sum()
    }

    pub fn n_forcing(&self) -> usize {
        self.forcing.iter().map(|v| v.levels).sum()
    }

    pub fn has_var(&self, name: &str) -> bool {
        self.all_vars().any(|v| v.name == name)
    }

    pub fn all_vars(&self) -> impl Iterator<Item = &VarSpec> {
        self.prognostic.iter().chain(&self.diagnostic).chain(&self.forcing)
    }

    pub fn input_names(&self) -> Vec<String> {
        self.inputs.iter().map(Channel::name).collect()
    }

    pub fn output_names(&self) -> Vec<String> {
        self.outputs.iter().map(Channel::name).collect()
    }

    pub fn input_index(&self, name: &str) -> Result<usize> {
        self.inputs
            .iter()
            .position(|c| c.name() == name)
            .ok_or_else(|| Error::Missing(format!("input channel {name}")))
    }

    pub fn output_index(&self, name: &str) -> Result<usize> {
        self.outputs
            .iter()
            .position(|c| c.name() == name)
            .ok_or_else(|| Error::Missing(format!("output channel {name}")))
    }

    /// First channel index of a prognostic variable within the prognostic block.
    pub fn prognostic_offset(&self, var: &str) -> Result<usize> {
        let mut off = 0;
        for v in &self.prognostic {
            if v.name == var {
                return Ok(off);
            }
            off += v.levels;
        }
        Err(Error::Missing(format!("prognostic variable {var}")))
    }

    pub fn loss_kinds(&self) -> Vec<LossKind> {
        let mut kinds = vec![LossKind::Weighted; self.n_prognostic()];
        kinds.extend(std::iter::repeat(LossKind::Plain).take(self.n_diagnostic()));
        kinds
    }
}
