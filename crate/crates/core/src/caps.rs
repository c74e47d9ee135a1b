//! Resource caps for exhaustive computations.
//!
//! Defaults can be overridden through environment variables (caps only, never
//! seeds): `GRASSPCP_ENUM_CAP`, `GRASSPCP_TABLE_BITS`, `GRASSPCP_CSP_CAP`,
//! `GRASSPCP_MATCHING_EDGES`.

use std::sync::OnceLock;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    /// Maximum number of subspaces (or zooms, tuples, ...) an enumeration may visit.
    pub enumeration: u64,
    /// Maximum number of matrix bits `n*m` for dense bilinear tables.
    pub table_bits: u32,
    /// Maximum product of alphabet sizes for the exact CSP solver.
    pub csp_assignments: u128,
    /// Maximum number of hyperedges for the exact matching solver.
    pub matching_edges: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            enumeration: 10_000_000,
            table_bits: 26,
            csp_assignments: 100_000_000,
            matching_edges: 24,
        }
    }
}

fn env_or<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(default)
}

impl Caps {
    pub fn from_env() -> Self {
        let d = Caps::default();
        Caps {
            enumeration: env_or("GRASSPCP_ENUM_CAP", d.enumeration),
            table_bits: env_or("GRASSPCP_TABLE_BITS", d.table_bits),
            csp_assignments: env_or("GRASSPCP_CSP_CAP", d.csp_assignments),
            matching_edges: env_or("GRASSPCP_MATCHING_EDGES", d.matching_edges),
        }
    }

    /// Process-wide caps, read from the environment once.
    pub fn get() -> Caps {
        static CAPS: OnceLock<Caps> = OnceLock::new();
        *CAPS.get_or_init(Caps::from_env)
    }
}
