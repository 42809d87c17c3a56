//! Cheap-to-clone identifiers for cells and UEs.

use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(Arc<str>);

        impl $name {
            pub fn new(s: impl AsRef<str>) -> Self {
                $name(Arc::from(s.as_ref()))
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

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:?}", &*self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name::new(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.0)
            }
        }
    };
}

string_id!(
    /// Identifier of a cell (DU / RU).
    CellId
);
string_id!(
    /// Identifier of a UE.
    UeId
);

/// Unordered pair of distinct cells. Stored with `a < b`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CellPair {
    pub a: CellId,
    pub b: CellId,
}

impl CellPair {
    /// Returns `None` when both cells are the same.
    pub fn new(x: CellId, y: CellId) -> Option<Self> {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Some(CellPair { a: x, b: y }),
            std::cmp::Ordering::Greater => Some(CellPair { a: y, b: x }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn contains(&self, cell: &CellId) -> bool {
        &self.a == cell || &self.b == cell
    }
}

impl fmt::Display for CellPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{}}}", self.a, self.b)
    }
}
