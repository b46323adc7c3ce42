//! Fixtures shared by the solver benchmarks.

use ps_whittle::{ServerParams, SystemConfig};

/// Three servers, buffer 100: the main comparison setting.
pub fn three_servers() -> SystemConfig {
    SystemConfig::new(
        0.4,
        vec![
            ServerParams { q: 0.55, cost_c: 30.0 },
            ServerParams { q: 0.50, cost_c: 29.0 },
            ServerParams { q: 0.45, cost_c: 28.0 },
        ],
        100,
    )
}

/// Two servers with a buffer small enough for the joint dynamic program.
pub fn two_servers(buffer: usize) -> SystemConfig {
    SystemConfig::new(
        0.4,
        vec![ServerParams { q: 0.55, cost_c: 100.0 }, ServerParams { q: 0.50, cost_c: 90.0 }],
        buffer,
    )
}
