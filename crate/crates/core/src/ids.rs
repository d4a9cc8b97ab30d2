//! Identifier newtypes and ledger parties.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

string_id!(
    /// A licensed mobile network operator.
    OperatorId
);
string_id!(CountryId);
string_id!(ZoneId);
string_id!(
    /// A pan-European operator group or a roaming broker.
    AggregatorId
);

/// Identifiers must be plain tokens so CSV exports and party names stay unambiguous.
pub fn is_valid_id(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// A party to a ledger entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    /// A mobile network operator.
    Operator(OperatorId),
    /// The roaming subscribers of a home operator.
    Subscriber(OperatorId),
    /// A fixed network operator in a country.
    Fixed(CountryId),
    /// A fixed-line caller in a country (originates mobile-terminated calls).
    Caller(CountryId),
}

impl Party {
    pub fn is_end_customer(&self) -> bool {
        matches!(self, Party::Subscriber(_) | Party::Caller(_))
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Operator(op) => write!(f, "{op}"),
            Party::Subscriber(op) => write!(f, "sub:{op}"),
            Party::Fixed(c) => write!(f, "fixed:{c}"),
            Party::Caller(c) => write!(f, "caller:{c}"),
        }
    }
}

impl FromStr for Party {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let party = match s.split_once(':') {
            Some(("sub", op)) => Party::Subscriber(OperatorId::new(op)),
            Some(("fixed", c)) => Party::Fixed(CountryId::new(c)),
            Some(("caller", c)) => Party::Caller(CountryId::new(c)),
            Some(_) => return Err(format!("unknown party kind in {s:?}")),
            None => Party::Operator(OperatorId::new(s)),
        };
        Ok(party)
    }
}
