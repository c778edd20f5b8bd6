use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Whether a factor of `Σ_k = λ_k D_k A_k D_kᵀ` is shared, free per component,
/// or fixed to the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Identity,
    Equal,
    Variable,
}

/// The 14 Gaussian parsimonious clustering models. The three letters give
/// volume, shape and orientation: `E`qual, `V`ariable or `I`dentity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GpcmModelId {
    Eii,
    Vii,
    Eei,
    Vei,
    Evi,
    Vvi,
    Eee,
    Vee,
    Eve,
    Vve,
    Eev,
    Vev,
    Evv,
    Vvv,
}

pub const ALL_MODELS: [GpcmModelId; 14] = [
    GpcmModelId::Eii,
    GpcmModelId::Vii,
    GpcmModelId::Eei,
    GpcmModelId::Vei,
    GpcmModelId::Evi,
    GpcmModelId::Vvi,
    GpcmModelId::Eee,
    GpcmModelId::Vee,
    GpcmModelId::Eve,
    GpcmModelId::Vve,
    GpcmModelId::Eev,
    GpcmModelId::Vev,
    GpcmModelId::Evv,
    GpcmModelId::Vvv,
];

impl GpcmModelId {
    pub fn name(self) -> &'static str {
        use GpcmModelId::*;
        match self {
            Eii => "EII",
            Vii => "VII",
            Eei => "EEI",
            Vei => "VEI",
            Evi => "EVI",
            Vvi => "VVI",
            Eee => "EEE",
            Vee => "VEE",
            Eve => "EVE",
            Vve => "VVE",
            Eev => "EEV",
            Vev => "VEV",
            Evv => "EVV",
            Vvv => "VVV",
        }
    }

    fn letter(self, pos: usize) -> Constraint {
        match self.name().as_bytes()[pos] {
            b'E' => Constraint::Equal,
            b'V' => Constraint::Variable,
            _ => Constraint::Identity,
        }
    }

    pub fn volume(self) -> Constraint {
        self.letter(0)
    }

    pub fn shape(self) -> Constraint {
        self.letter(1)
    }

    pub fn orientation(self) -> Constraint {
        self.letter(2)
    }

    pub fn position(self) -> usize {
        ALL_MODELS.iter().position(|&m| m == self).expect("closed set")
    }
}

impl fmt::Display for GpcmModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GpcmModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let upper = s.trim().to_ascii_uppercase();
        ALL_MODELS
            .iter()
            .copied()
            .find(|m| m.name() == upper)
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

impl Serialize for GpcmModelId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for GpcmModelId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses `all` or a comma-separated list of model names.
pub fn parse_model_list(spec: &str) -> Result<Vec<GpcmModelId>, Error> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(ALL_MODELS.to_vec());
    }
    spec.split(',').map(str::parse).collect()
}

/// Free parameters of a `k`-component model in `d` dimensions: mixing weights,
/// means, then volume, shape and orientation of the covariances.
pub fn n_params(model: GpcmModelId, k: usize, d: usize) -> usize {
    let per = |c: Constraint, count: usize| match c {
        Constraint::Identity => 0,
        Constraint::Equal => count,
        Constraint::Variable => k * count,
    };
    let volume = per(model.volume(), 1);
    let shape = per(model.shape(), d - 1);
    let orientation = per(model.orientation(), d * (d - 1) / 2);
    (k - 1) + k * d + volume + shape + orientation
}

/// `n_params` with a checked model name.
pub fn n_params_by_name(model: &str, k: usize, d: usize) -> Result<usize, Error> {
    Ok(n_params(model.parse()?, k, d))
}
