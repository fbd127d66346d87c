//! Published estimates for the full 1,215-community sample.
//!
//! Keys are `(section, weights, model, variable, quantity)`. Cells whose printed
//! sign contradicts the rest of the row are left out rather than corrected.

pub struct Value {
    pub section: &'static str,
    pub weights: &'static str,
    pub model: &'static str,
    pub variable: &'static str,
    pub quantity: &'static str,
    pub value: f64,
}

const fn v(section: &'static str, weights: &'static str, model: &'static str, variable: &'static str, quantity: &'static str, value: f64) -> Value {
    Value { section, weights, model, variable, quantity, value }
}

pub const REGRESSORS: [&str; 9] = [
    "hh_income_log",
    "unemp_rate",
    "commute_min",
    "pop_density_log",
    "prop_religious",
    "permanent_5y",
    "prop_degree",
    "prop_foreign",
    "ls_sd",
];

pub const DURBIN: [&str; 3] = ["hh_income_log", "unemp_rate", "ls_sd"];

pub const OLS: &[(&str, f64, f64)] = &[
    ("hh_income_log", 0.091, 4.06),
    ("unemp_rate", 0.002, 1.25),
    ("commute_min", -0.004, -4.58),
    ("pop_density_log", -0.017, -6.89),
    ("prop_religious", 0.236, 5.82),
    ("permanent_5y", 0.320, 4.82),
    ("prop_degree", 0.199, 3.22),
    ("prop_foreign", -0.340, -8.82),
    ("ls_sd", -0.556, -21.50),
    ("const", 7.642, 30.65),
];

pub const OLS_FIT: &[(&str, f64)] = &[("n", 1215.0), ("adj_r2", 0.611), ("f", 196.48)];

/// Weights labels in battery order.
pub const LM_WEIGHTS: [&str; 4] = ["queen1", "queen2", "rook1", "invdist"];

/// `(test, [(statistic, p); queen1, queen2, rook1, invdist])`. The Moran row is
/// the standardized statistic.
pub const LM: &[(&str, [(f64, f64); 4])] = &[
    ("moran_z", [(5.771, 0.000), (5.957, 0.000), (5.970, 0.000), (4.011, 0.000)]),
    ("lm_error", [(29.215, 0.000), (29.219, 0.000), (29.675, 0.000), (2.704, 0.100)]),
    ("robust_lm_error", [(28.998, 0.000), (29.151, 0.000), (30.967, 0.000), (2.844, 0.092)]),
    ("lm_lag", [(0.225, 0.635), (0.075, 0.784), (2.649, 0.104), (12.836, 0.000)]),
    ("robust_lm_lag", [(0.008, 0.929), (0.006, 0.936), (3.941, 0.047), (12.977, 0.000)]),
];

pub const EFFECT_MODELS: [&str; 4] = ["slx", "sdem", "sdm", "gns"];

type Cell = Option<(Option<f64>, Option<f64>)>;

const fn c(est: f64, t: f64) -> Cell {
    Some((Some(est), Some(t)))
}

/// `(panel, variable, [slx, sdem, sdm, gns])` as (estimate, t).
pub type EffectRows = &'static [(&'static str, &'static str, [Cell; 4])];

pub const EFFECTS_ROOK: EffectRows = &[
    ("direct", "hh_income_log", [c(0.087, 4.33), c(0.093, 4.17), c(0.151, 6.53), c(0.121, 4.50)]),
    ("direct", "unemp_rate", [c(-0.003, -1.79), c(-0.003, -1.95), c(-0.002, -1.08), c(-0.002, -1.53)]),
    ("direct", "commute_min", [c(-0.003, -3.97), c(-0.003, -3.79), c(-0.003, -3.09), c(-0.003, -3.30)]),
    ("direct", "pop_density_log", [c(-0.017, -7.78), c(-0.017, -7.33), c(-0.014, -6.38), c(-0.016, -6.43)]),
    ("direct", "prop_religious", [c(0.216, 5.75), c(0.235, 5.40), c(0.167, 4.35), c(0.198, 4.53)]),
    ("direct", "permanent_5y", [c(0.305, 5.49), c(0.267, 4.57), c(0.268, 4.86), c(0.267, 4.66)]),
    ("direct", "prop_degree", [c(0.175, 2.89), c(0.170, 2.59), c(0.119, 1.96), c(0.143, 2.19)]),
    ("direct", "prop_foreign", [c(-0.342, -8.97), c(-0.333, -7.69), c(-0.270, -6.77), c(-0.297, -6.46)]),
    (
        "direct",
        "ls_sd",
        [Some((None, Some(-23.3))), c(-0.559, -23.5), Some((Some(-0.552), None)), c(-0.557, -23.4)],
    ),
    ("indirect", "hh_income_log", [c(-0.011, -1.77), c(-0.011, -1.72), c(-0.124, -5.28), c(-0.070, -2.05)]),
    ("indirect", "unemp_rate", [c(0.007, 3.99), c(0.007, 3.98), c(0.005, 2.63), c(0.006, 3.13)]),
    ("indirect", "ls_sd", [c(0.007, 0.18), c(0.010, 0.25), c(-0.020, -0.47), c(-0.006, -0.13)]),
    ("spatial", "rho", [None, None, c(0.162, 5.37), c(0.087, 1.82)]),
    ("spatial", "lambda", [None, c(0.212, 5.50), None, c(0.126, 2.04)]),
];

pub const EFFECTS_INVDIST: EffectRows = &[
    ("direct", "hh_income_log", [c(0.084, 4.08), c(0.083, 3.78), c(0.089, 4.05), c(0.082, 3.54)]),
    ("direct", "unemp_rate", [c(0.001, 0.56), c(0.001, 0.47), c(0.001, 0.63), c(0.001, 0.45)]),
    ("direct", "commute_min", [c(-0.002, -2.97), c(-0.002, -2.51), c(-0.003, -2.98), c(-0.002, -2.50)]),
    ("direct", "pop_density_log", [c(-0.012, -4.93), c(-0.011, -4.39), c(-0.012, -4.94), c(-0.011, -4.25)]),
    ("direct", "prop_religious", [c(0.246, 6.29), c(0.252, 6.03), c(0.241, 6.02), c(0.254, 5.86)]),
    ("direct", "permanent_5y", [c(0.312, 5.58), c(0.310, 5.43), c(0.313, 5.59), c(0.310, 5.42)]),
    ("direct", "prop_degree", [c(0.212, 3.46), c(0.220, 3.47), c(0.207, 3.35), c(0.222, 3.44)]),
    ("direct", "prop_foreign", [c(-0.253, -5.80), c(-0.237, -4.93), c(-0.240, -5.07), c(-0.239, -4.57)]),
    (
        "direct",
        "ls_sd",
        [Some((None, Some(-22.9))), c(-0.557, -23.0), Some((Some(-0.557), None)), c(-0.557, -23.0)],
    ),
    ("indirect", "hh_income_log", [c(-0.009, -0.63), c(-0.014, -0.76), c(-0.031, -0.82), c(-0.008, -0.16)]),
    ("indirect", "unemp_rate", [c(0.018, 3.00), c(0.019, 2.62), c(0.018, 2.93), c(0.019, 2.62)]),
    ("indirect", "ls_sd", [c(-0.056, -0.55), c(-0.041, -0.32), c(-0.039, -0.35), c(-0.043, -0.33)]),
    ("spatial", "rho", [None, None, c(0.051, 0.65), c(-0.016, -0.13)]),
    ("spatial", "lambda", [None, c(0.513, 2.82), None, c(0.525, 2.67)]),
];

/// R-squared reported for [slx, sdem, sdm, gns].
pub const R2_ROOK: [f64; 4] = [0.617, 0.617, 0.617, 0.618];
pub const R2_INVDIST: [f64; 4] = [0.618, 0.617, 0.617, 0.617];

/// Flattened list of every published value.
pub fn all() -> Vec<Value> {
    let mut out = Vec::new();
    for &(var, est, t) in OLS {
        out.push(v("ols", "none", "ols", var, "estimate", est));
        out.push(v("ols", "none", "ols", var, "t", t));
    }
    for &(q, val) in OLS_FIT {
        out.push(v("ols", "none", "ols", "", q, val));
    }
    for (test, cells) in LM {
        for (wl, &(s, p)) in LM_WEIGHTS.iter().zip(cells) {
            out.push(v("lm", wl, "ols", test, "statistic", s));
            out.push(v("lm", wl, "ols", test, "p_value", p));
        }
    }
    for (wl, rows, r2) in [("rook1", EFFECTS_ROOK, R2_ROOK), ("invdist", EFFECTS_INVDIST, R2_INVDIST)] {
        for (panel, var, cells) in rows {
            for (model, cell) in EFFECT_MODELS.iter().zip(cells) {
                let Some((est, t)) = cell else { continue };
                if let Some(e) = est {
                    out.push(v(panel, wl, model, var, "estimate", *e));
                }
                if let Some(t) = t {
                    out.push(v(panel, wl, model, var, "t", *t));
                }
            }
        }
        for (model, &r) in EFFECT_MODELS.iter().zip(&r2) {
            out.push(v("fit", wl, model, "", "r2", r));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_unique() {
        let all = all();
        let mut keys: Vec<_> = all.iter().map(|p| (p.section, p.weights, p.model, p.variable, p.quantity)).collect();
        keys.sort();
        let n = keys.len();
        keys.dedup();
        assert_eq!(keys.len(), n);
        // 10 OLS rows x 2 + 3 fit stats + 5 tests x 4 matrices x 2
        assert_eq!(all.iter().filter(|p| p.section == "ols" || p.section == "lm").count(), 20 + 3 + 40);
    }

    #[test]
    fn published_anchor_values() {
        let find = |s: &str, w: &str, m: &str, var: &str, q: &str| {
            all().into_iter().find(|p| p.section == s && p.weights == w && p.model == m && p.variable == var && p.quantity == q).map(|p| p.value)
        };
        assert_eq!(find("ols", "none", "ols", "", "adj_r2"), Some(0.611));
        assert_eq!(find("spatial", "rook1", "sdm", "rho", "estimate"), Some(0.162));
        assert_eq!(find("lm", "rook1", "ols", "lm_error", "statistic"), Some(29.675));
        assert_eq!(find("direct", "rook1", "slx", "ls_sd", "estimate"), None);
    }
}
