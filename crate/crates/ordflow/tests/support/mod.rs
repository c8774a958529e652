//! Shared fixtures for the integration suites: the published appendix
//! stationary-distribution rows and the published per-category
//! Jensen-Shannon distance tables they imply.
#![allow(dead_code)]

/// Zone labels in session order.
pub const ZONES: [&str; 6] = ["T1", "T2", "T3", "T4", "T5", "T6"];

/// Capitalization categories in table order.
pub const CATEGORIES: [&str; 3] = ["HMC", "MMC", "LMC"];

/// Published stationary distributions, one row per (category, zone), states
/// in canonical order (AB, AA, DB, DA, FB, FA, EB, EA, CB, CA). The rows
/// are rounded to four decimals, so they sum only approximately to one.
pub const STATIONARY: [(&str, &str, [f64; 10]); 18] = [
    ("HMC", "T1", [0.2611, 0.2486, 0.2335, 0.2227, 0.0120, 0.0104, 0.0049, 0.0045, 0.0012, 0.0010]),
    ("HMC", "T2", [0.2517, 0.2454, 0.2386, 0.2348, 0.0108, 0.0087, 0.0043, 0.0037, 0.0012, 0.0009]),
    ("HMC", "T3", [0.2526, 0.2450, 0.2403, 0.2341, 0.0100, 0.0088, 0.0038, 0.0036, 0.0010, 0.0008]),
    ("HMC", "T4", [0.2507, 0.2463, 0.2390, 0.2365, 0.0098, 0.0085, 0.0039, 0.0035, 0.0009, 0.0008]),
    ("HMC", "T5", [0.2509, 0.2458, 0.2387, 0.2353, 0.0104, 0.0091, 0.0041, 0.0039, 0.0009, 0.0008]),
    ("HMC", "T6", [0.2504, 0.2463, 0.2334, 0.2316, 0.0132, 0.0121, 0.0054, 0.0051, 0.0013, 0.0012]),
    ("MMC", "T1", [0.2494, 0.2485, 0.2313, 0.2263, 0.0092, 0.0095, 0.0039, 0.0040, 0.0084, 0.0095]),
    ("MMC", "T2", [0.2411, 0.2489, 0.2302, 0.2378, 0.0092, 0.0091, 0.0041, 0.0036, 0.0071, 0.0089]),
    ("MMC", "T3", [0.2513, 0.2453, 0.2408, 0.2345, 0.0091, 0.0092, 0.0039, 0.0038, 0.0011, 0.0010]),
    ("MMC", "T4", [0.2505, 0.2463, 0.2397, 0.2363, 0.0089, 0.0090, 0.0038, 0.0037, 0.0010, 0.0009]),
    ("MMC", "T5", [0.2506, 0.2460, 0.2403, 0.2350, 0.0089, 0.0090, 0.0041, 0.0041, 0.0011, 0.0010]),
    ("MMC", "T6", [0.2454, 0.2497, 0.2324, 0.2355, 0.0114, 0.0124, 0.0052, 0.0054, 0.0013, 0.0012]),
    ("LMC", "T1", [0.2553, 0.2537, 0.2342, 0.2251, 0.0114, 0.0104, 0.0046, 0.0041, 0.0006, 0.0007]),
    ("LMC", "T2", [0.2479, 0.2482, 0.2351, 0.2368, 0.0119, 0.0104, 0.0049, 0.0040, 0.0004, 0.0005]),
    ("LMC", "T3", [0.2523, 0.2442, 0.2403, 0.2319, 0.0112, 0.0108, 0.0045, 0.0040, 0.0004, 0.0004]),
    ("LMC", "T4", [0.2489, 0.2475, 0.2369, 0.2348, 0.0121, 0.0108, 0.0044, 0.0039, 0.0003, 0.0003]),
    ("LMC", "T5", [0.2473, 0.2489, 0.2356, 0.2356, 0.0117, 0.0109, 0.0048, 0.0046, 0.0003, 0.0003]),
    ("LMC", "T6", [0.2444, 0.2501, 0.2270, 0.2323, 0.0154, 0.0150, 0.0073, 0.0068, 0.0009, 0.0009]),
];

/// Published Jensen-Shannon distance cells: (category, zone a, zone b,
/// distance), lower triangle only, 15 cells per category.
pub const JS_DISTANCES: [(&str, &str, &str, f64); 45] = [
    ("HMC", "T2", "T1", 0.0182),
    ("HMC", "T3", "T1", 0.0203),
    ("HMC", "T3", "T2", 0.0056),
    ("HMC", "T4", "T1", 0.0225),
    ("HMC", "T4", "T2", 0.0069),
    ("HMC", "T4", "T3", 0.0045),
    ("HMC", "T5", "T1", 0.0190),
    ("HMC", "T5", "T2", 0.0050),
    ("HMC", "T5", "T3", 0.0048),
    ("HMC", "T5", "T4", 0.0050),
    ("HMC", "T6", "T1", 0.0157),
    ("HMC", "T6", "T2", 0.0218),
    ("HMC", "T6", "T3", 0.0252),
    ("HMC", "T6", "T4", 0.0265),
    ("HMC", "T6", "T5", 0.0220),
    ("MMC", "T2", "T1", 0.0145),
    ("MMC", "T3", "T1", 0.0729),
    ("MMC", "T3", "T2", 0.0677),
    ("MMC", "T4", "T1", 0.0744),
    ("MMC", "T4", "T2", 0.0689),
    ("MMC", "T4", "T3", 0.0033),
    ("MMC", "T5", "T1", 0.0728),
    ("MMC", "T5", "T2", 0.0675),
    ("MMC", "T5", "T3", 0.0024),
    ("MMC", "T5", "T4", 0.0041),
    ("MMC", "T6", "T1", 0.0715),
    ("MMC", "T6", "T2", 0.0663),
    ("MMC", "T6", "T3", 0.0234),
    ("MMC", "T6", "T4", 0.0247),
    ("MMC", "T6", "T5", 0.0226),
    ("LMC", "T2", "T1", 0.0142),
    ("LMC", "T3", "T1", 0.0136),
    ("LMC", "T3", "T2", 0.0093),
    ("LMC", "T4", "T1", 0.0154),
    ("LMC", "T4", "T2", 0.0068),
    ("LMC", "T4", "T3", 0.0072),
    ("LMC", "T5", "T1", 0.0159),
    ("LMC", "T5", "T2", 0.0068),
    ("LMC", "T5", "T3", 0.0096),
    ("LMC", "T5", "T4", 0.0057),
    ("LMC", "T6", "T1", 0.0344),
    ("LMC", "T6", "T2", 0.0326),
    ("LMC", "T6", "T3", 0.0362),
    ("LMC", "T6", "T4", 0.0347),
    ("LMC", "T6", "T5", 0.0318),
];

/// Rescales a rounded published row into an exact probability vector.
pub fn normalized(row: &[f64]) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    row.iter().map(|v| v / total).collect()
}

/// The published stationary row for (category, zone), normalized.
pub fn stationary_row(category: &str, zone: &str) -> Vec<f64> {
    STATIONARY
        .iter()
        .find(|(c, z, _)| *c == category && *z == zone)
        .map(|(_, _, row)| normalized(row))
        .unwrap_or_else(|| panic!("no published row for {category} {zone}"))
}

/// Zone index within the session ordering.
pub fn zone_index(zone: &str) -> usize {
    ZONES.iter().position(|z| *z == zone).expect("known zone")
}
