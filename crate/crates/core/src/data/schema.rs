use std::fmt;
use std::str::FromStr;

use super::DataError;

macro_rules! categorical {
    ($(#[$meta:meta])* $name:ident, $kind:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];
            pub const LEVELS: &'static [&'static str] = &[$($text),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = DataError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(DataError::Unknown { kind: $kind, name: s.to_string() }),
                }
            }
        }

        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

categorical!(AgeBracket, "age bracket" {
    Age18To24 => "18-24",
    Age25To34 => "25-34",
    Age35To44 => "35-44",
    Age45To54 => "45-54",
    Age55To64 => "55-64",
    Age65Plus => "65+",
});

categorical!(Gender, "gender" {
    Male => "male",
    Female => "female",
    Other => "other",
});

categorical!(Ethnicity, "ethnicity" {
    NonHispanic => "non-hispanic",
    Hispanic => "hispanic",
});

categorical!(ShelterStatus, "shelter status" {
    Unsheltered => "unsheltered",
    Sheltered => "sheltered",
    Housed => "housed",
});

categorical!(
    /// Categorical respondent attributes usable for subgroups, mixing and labels.
    Attribute, "attribute" {
    Hub => "hub_id",
    AgeBracket => "age_bracket",
    Gender => "gender",
    Race => "race",
    Ethnicity => "ethnicity",
    ShelterStatus => "shelter_status",
    Veteran => "veteran",
    Chronic => "chronic",
    MentalHealth => "mental_health",
    SubstanceUse => "substance_use",
    Disability => "disability",
});

impl Attribute {
    pub fn name(self) -> &'static str {
        self.as_str()
    }

    /// Level lists that do not change between survey years.
    pub fn fixed_levels(self) -> Option<&'static [&'static str]> {
        match self {
            Attribute::AgeBracket => Some(AgeBracket::LEVELS),
            Attribute::Gender => Some(Gender::LEVELS),
            Attribute::Ethnicity => Some(Ethnicity::LEVELS),
            Attribute::ShelterStatus => Some(ShelterStatus::LEVELS),
            Attribute::Veteran
            | Attribute::Chronic
            | Attribute::MentalHealth
            | Attribute::SubstanceUse
            | Attribute::Disability => Some(&["0", "1"]),
            Attribute::Hub | Attribute::Race => None,
        }
    }
}

categorical!(
    /// Numeric respondent variables. Flags read as 0/1.
    Variable, "variable" {
    Acquaintance => "acq_degree",
    CloseFriend => "friend_degree",
    Kinship => "kin_degree",
    Referral => "referral_degree",
    Veteran => "veteran",
    Chronic => "chronic",
    MentalHealth => "mental_health",
    SubstanceUse => "substance_use",
    Disability => "disability",
});

impl Variable {
    /// Whether the variable is a network degree (nonnegative count).
    pub fn is_degree(self) -> bool {
        matches!(
            self,
            Variable::Acquaintance | Variable::CloseFriend | Variable::Kinship | Variable::Referral
        )
    }
}
