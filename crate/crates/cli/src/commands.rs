use anyhow::{Context, Result};
use serde_json::{json, Value};
use spatialspill::dgp::{make_lattice, simulate_dgp, standard_normal_design, DgpParams};
use spatialspill::effects::EffectEstimate;
use spatialspill::esda::{self, DiagnosticsReport};
use spatialspill::ingest::{self, GeometrySet};
use spatialspill::weights::{self, connectivity_summary, ContiguityOptions, ContiguityRule, Provenance};
use spatialspill::{decompose_effects, stats, FitResult, ModelKind, ModelSpec, SeMode, WeightsMatrix};

use crate::inputs::{self, columns};
use crate::output::{manifest_for, num, opt, Outputs, Table};
use crate::{Cli, CliError, Command, Norm, Rule, Se, WeightsCommand};

pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed;
    let name = cli.command.name();
    let options = &cli.command;
    match &cli.command {
        Command::Weights(WeightsCommand::Build(a)) => {
            let out = weights_build(a)?;
            out.commit(&manifest_for(&a.out), name, seed, options)
        }
        Command::Weights(WeightsCommand::Summary(a)) => {
            let mut out = Outputs::new();
            let w = inputs::weights_file(&a.weights.weights, a.weights.normalize, &mut out)?;
            let s = connectivity_summary(&w);
            let (lo, hi) = w.spectral_bounds();
            let report = json!({
                "summary": s,
                "normalization": w.normalization().to_string(),
                "provenance": w.provenance().to_string(),
                "fingerprint": w.fingerprint(),
                "eigenvalue_min": lo,
                "eigenvalue_max": hi,
            });
            if !cli.quiet {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
            out.add_json(&a.out, &report)?;
            out.commit(&manifest_for(&a.out), name, seed, options)
        }
        Command::Describe(a) => {
            let out = describe(a)?;
            out.commit(&a.out.join("manifest.json"), name, seed, options)
        }
        Command::Moran(a) => moran(a, seed)?.commit(&manifest_for(&a.out), name, seed, options),
        Command::Diagnose(a) => diagnose(a, cli.quiet)?.commit(&manifest_for(&a.out), name, seed, options),
        Command::Fit(a) => fit(a, cli.quiet)?.commit(&manifest_for(&a.out), name, seed, options),
        Command::Effects(a) => effects(a, seed, cli.quiet)?.commit(&manifest_for(&a.out), name, seed, options),
        Command::Lisa(a) => lisa(a, seed)?.commit(&manifest_for(&a.out), name, seed, options),
        Command::Simulate(a) => simulate(a, seed)?.commit(&manifest_for(&a.out[0]), name, seed, options),
        Command::Reproduce(a) => {
            let out = crate::reproduce::run(a, seed, cli.quiet)?;
            out.commit(&a.out.join("manifest.json"), name, seed, options)
        }
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    CliError::Usage(msg.into()).into()
}

fn weights_build(a: &crate::WeightsBuildArgs) -> Result<Outputs> {
    let mut out = Outputs::new();
    let ext = inputs::extension(&a.out);
    if !matches!(ext.as_deref(), Some("gal" | "wm")) {
        return Err(usage(format!("output `{}` must end in .gal or .wm", a.out.display())));
    }
    if ext.as_deref() == Some("gal") && a.rule == Rule::Invdist {
        return Err(usage("inverse-distance weights need a .wm output; .gal stores neighbour lists only"));
    }
    let geo = inputs::geometry(&a.geometry, &a.id_property, &mut out)?;
    for w in geo.warnings() {
        log::warn!("{w}");
    }
    let bytes = match a.rule {
        Rule::Queen | Rule::Rook => {
            let rule = if a.rule == Rule::Queen { ContiguityRule::Queen } else { ContiguityRule::Rook };
            let opts = ContiguityOptions { snap_tolerance: a.snap_tolerance, exact_order: a.exact_order };
            let g = weights::build_contiguity(&geo, rule, a.order, opts).context("building contiguity")?;
            if ext.as_deref() == Some("gal") {
                if a.normalize.is_some_and(|n| n != Norm::None) {
                    log::warn!(".gal files store neighbour lists; normalization is applied when the file is read");
                }
                ingest::format_gal(&g)?.into_bytes()
            } else {
                let prov = Provenance::Contiguity { rule, order: a.order, exact: a.exact_order };
                let w = WeightsMatrix::binary(&g, prov).normalize(a.normalize.unwrap_or(Norm::Row).into())?;
                weights::format_wm(&w).into_bytes()
            }
        }
        Rule::Invdist => {
            let w = weights::build_inverse_distance(&geo).context("building inverse-distance weights")?;
            let w = w.normalize(a.normalize.unwrap_or(Norm::Spectral).into())?;
            weights::format_wm(&w).into_bytes()
        }
    };
    out.add(&a.out, bytes);
    Ok(out)
}

fn describe(a: &crate::DescribeArgs) -> Result<Outputs> {
    let mut out = Outputs::new();
    let t = inputs::table(&a.data.data, &a.data.id_column, &mut out)?;
    let vars: Vec<String> = if a.vars.is_empty() {
        t.column_names().iter().filter(|c| Some(c.as_str()) != a.group_by.as_deref()).cloned().collect()
    } else {
        a.vars.clone()
    };
    let r = esda::describe(&t, &vars, a.group_by.as_deref())?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let mut v = Table::new(&["variable", "n", "mean", "sd", "skewness", "min", "max"]);
    for s in &r.variables {
        v.push(vec![s.name.clone(), s.n.to_string(), num(s.mean), num(s.sd), num(s.skewness), num(s.min), num(s.max)]);
    }
    out.add(&a.out.join("variables.csv"), v.to_bytes()?);

    let mut c = Table::new(&["row", "column", "r", "p_value", "stars"]);
    let cm = &r.correlations;
    for (i, ri) in cm.names.iter().enumerate() {
        for (j, cj) in cm.names.iter().enumerate() {
            c.push(vec![ri.clone(), cj.clone(), num(cm.r[i][j]), num(cm.p_values[i][j]), cm.stars[i][j].clone()]);
        }
    }
    out.add(&a.out.join("correlations.csv"), c.to_bytes()?);

    if a.group_by.is_some() {
        let mut g = Table::new(&["variable", "group_column", "mean_group1", "mean_group0", "n_group1", "n_group0", "welch_t", "df", "p_value"]);
        for s in &r.contrasts {
            g.push(vec![
                s.variable.clone(),
                s.group_column.clone(),
                num(s.mean_group1),
                num(s.mean_group0),
                s.n_group1.to_string(),
                s.n_group0.to_string(),
                num(s.welch_t),
                num(s.df),
                num(s.p_value),
            ]);
        }
        out.add(&a.out.join("contrasts.csv"), g.to_bytes()?);
    }
    Ok(out)
}

fn moran(a: &crate::MoranArgs, seed: u64) -> Result<Outputs> {
    let mut out = Outputs::new();
    let t = inputs::table(&a.data.data, &a.data.id_column, &mut out)?;
    let w = inputs::weights_for(&a.weights.weights, a.weights.normalize, t.region_ids(), &mut out)?;
    let cols = columns(&t, &a.vars)?;
    let mut m = Table::new(&[
        "variable",
        "i",
        "expectation",
        "variance",
        "z_score",
        "p_value",
        "permutations",
        "pseudo_p",
        "permuted_mean",
        "permuted_sd",
        "n",
    ]);
    let mut scatter = Table::new(&["variable", "region_id", "z", "lag_z"]);
    for (name, x) in a.vars.iter().zip(&cols) {
        let r = esda::global_moran(x, &w, a.permutations, seed).with_context(|| format!("Moran's I of `{name}`"))?;
        m.push(vec![
            name.clone(),
            num(r.i),
            num(r.expectation),
            num(r.variance),
            num(r.z_score),
            num(r.p_value),
            r.permutations.to_string(),
            opt(r.pseudo_p),
            opt(r.permuted_mean),
            opt(r.permuted_sd),
            r.n_used.to_string(),
        ]);
        if a.scatter.is_some() {
            for (id, (z, l)) in t.region_ids().iter().zip(esda::moran_scatter(x, &w)?) {
                scatter.push(vec![name.clone(), id.clone(), num(z), num(l)]);
            }
        }
    }
    out.add(&a.out, m.to_bytes()?);
    if let Some(p) = &a.scatter {
        out.add(p, scatter.to_bytes()?);
    }
    Ok(out)
}

pub fn diagnostics_rows(label: &str, d: &DiagnosticsReport) -> Vec<(String, &'static str, f64, f64)> {
    vec![
        (label.to_string(), "moran_i", d.moran_i, d.moran_residual.p_value),
        (label.to_string(), "moran_z", d.moran_residual.statistic, d.moran_residual.p_value),
        (label.to_string(), "lm_error", d.lm_error.statistic, d.lm_error.p_value),
        (label.to_string(), "robust_lm_error", d.robust_lm_error.statistic, d.robust_lm_error.p_value),
        (label.to_string(), "lm_lag", d.lm_lag.statistic, d.lm_lag.p_value),
        (label.to_string(), "robust_lm_lag", d.robust_lm_lag.statistic, d.robust_lm_lag.p_value),
    ]
}

fn diagnose(a: &crate::DiagnoseArgs, quiet: bool) -> Result<Outputs> {
    let mut out = Outputs::new();
    let t = inputs::table(&a.data.data, &a.data.id_column, &mut out)?;
    let xs: Vec<&str> = a.x.iter().map(String::as_str).collect();
    let spec = ModelSpec::new(ModelKind::Ols, &a.y, &xs).with_se(SeMode::Classical);
    let ols = spatialspill::fit_ols(&spec, &t, None)?;
    let mut table = Table::new(&["weights", "test", "statistic", "p_value"]);
    for path in &a.weights {
        let w = inputs::weights_for(path, a.normalize, t.region_ids(), &mut out)?;
        let d = esda::lm_diagnostics(&ols, &w).with_context(|| format!("diagnostics with `{}`", path.display()))?;
        let label = path.display().to_string();
        for (wl, test, s, p) in diagnostics_rows(&label, &d) {
            if !quiet {
                println!("{wl:<30} {test:<16} {s:>12.4} {p:>8.4}");
            }
            table.push(vec![wl, test.to_string(), num(s), num(p)]);
        }
    }
    out.add(&a.out, table.to_bytes()?);
    Ok(out)
}

/// `fit.json`: every fit field plus a coefficient table and the weights
/// provenance.
pub fn fit_json(fit: &FitResult, w: Option<&WeightsMatrix>) -> Result<Value> {
    let mut v = serde_json::to_value(fit)?;
    let obj = v.as_object_mut().expect("fit serializes to an object");
    obj.insert("coefficients".into(), serde_json::to_value(fit.coefficients())?);
    obj.insert(
        "weights".into(),
        match w {
            Some(w) => json!({
                "fingerprint": w.fingerprint(),
                "normalization": w.normalization().to_string(),
                "provenance": w.provenance().to_string(),
                "n": w.n(),
            }),
            None => Value::Null,
        },
    );
    Ok(v)
}

fn print_fit(fit: &FitResult) {
    println!("{} fit, n = {}, k = {}, log-likelihood = {:.4}", fit.spec.kind, fit.n, fit.k, fit.loglik);
    for c in fit.coefficients() {
        println!(
            "  {:<24} {:>12.6} {:>10.6} {:>8.3} {:>8.4} {}",
            c.name,
            c.estimate,
            c.std_error,
            c.statistic,
            c.p_value,
            stats::stars(c.p_value)
        );
    }
    match fit.adj_r2 {
        Some(a) => println!("  R2 = {:.4}, adjusted = {a:.4}", fit.r2),
        None => println!("  {} R2 = {:.4}", fit.r2_kind, fit.r2),
    }
    for w in &fit.warnings {
        println!("  warning: {w}");
    }
}

fn fit(a: &crate::FitArgs, quiet: bool) -> Result<Outputs> {
    let mut out = Outputs::new();
    let t = inputs::table(&a.data.data, &a.data.id_column, &mut out)?;
    let kind: ModelKind = a.model.into();
    let xs: Vec<&str> = a.x.iter().map(String::as_str).collect();
    let ds: Vec<&str> = a.durbin.iter().map(String::as_str).collect();
    let se = match a.se {
        Se::Robust => SeMode::Robust,
        Se::Classical => SeMode::Classical,
    };
    let spec = ModelSpec::new(kind, &a.y, &xs).with_durbin(&ds).with_se(se);
    let w = match (&a.weights, kind.needs_weights()) {
        (Some(p), true) => Some(inputs::weights_for(p, a.normalize, t.region_ids(), &mut out)?),
        (None, true) => return Err(usage(format!("--model {kind} needs --weights"))),
        (Some(_), false) => {
            log::warn!("--weights is ignored for ols");
            None
        }
        (None, false) => None,
    };
    let fit = spatialspill::fit(&spec, &t, w.as_ref()).with_context(|| format!("fitting {kind}"))?;
    if !quiet {
        print_fit(&fit);
    }
    out.add_json(&a.out, &fit_json(&fit, w.as_ref())?)?;
    Ok(out)
}

fn effect_cells(e: &EffectEstimate) -> Vec<String> {
    vec![num(e.point), opt(e.mean), opt(e.std_error), opt(e.t_stat), opt(e.p_value), e.p_value.map(stats::stars).unwrap_or("").to_string()]
}

/// Direct, indirect and total panels followed by the spatial coefficients.
pub fn effects_table(fit: &FitResult, eff: &spatialspill::EffectsTable) -> Table {
    let mut t = Table::new(&["panel", "variable", "estimate", "mean", "std_error", "t_stat", "p_value", "stars"]);
    for (panel, pick) in [
        ("direct", (|r: &spatialspill::effects::EffectRow| r.direct) as fn(&_) -> _),
        ("indirect", |r| r.indirect),
        ("total", |r| r.total),
    ] {
        for r in &eff.rows {
            let mut row = vec![panel.to_string(), r.variable.clone()];
            row.extend(effect_cells(&pick(r)));
            t.push(row);
        }
    }
    for name in ["rho", "lambda"] {
        if let Some(c) = fit.coefficient(name) {
            t.push(vec![
                "spatial".into(),
                name.into(),
                num(c.estimate),
                String::new(),
                num(c.std_error),
                num(c.statistic),
                num(c.p_value),
                stats::stars(c.p_value).into(),
            ]);
        }
    }
    t
}

fn effects(a: &crate::EffectsArgs, seed: u64, quiet: bool) -> Result<Outputs> {
    let mut out = Outputs::new();
    out.input(&a.fit);
    let text = std::fs::read_to_string(&a.fit).with_context(|| format!("reading {}", a.fit.display()))?;
    let fit: FitResult = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.fit.display()))?;
    let w = inputs::weights_for(&a.weights.weights, a.weights.normalize, &fit.region_ids, &mut out)?;
    let eff = decompose_effects(&fit, &w, a.draws, seed).context("decomposing effects")?;
    if eff.rejected_draws > 0 {
        log::warn!("{} draws of rho fell outside the stationary interval and were redrawn", eff.rejected_draws);
    }
    if !quiet {
        println!("{:<24} {:>12} {:>12} {:>12}", "variable", "direct", "indirect", "total");
        for r in &eff.rows {
            println!("{:<24} {:>12.6} {:>12.6} {:>12.6}", r.variable, r.direct.point, r.indirect.point, r.total.point);
        }
    }
    out.add(&a.out, effects_table(&fit, &eff).to_bytes()?);
    Ok(out)
}

fn lisa(a: &crate::LisaArgs, seed: u64) -> Result<Outputs> {
    let mut out = Outputs::new();
    let t = inputs::table(&a.data.data, &a.data.id_column, &mut out)?;
    let w = inputs::weights_for(&a.weights.weights, a.weights.normalize, t.region_ids(), &mut out)?;
    let x = t.column(&a.var)?;
    let r = esda::local_moran(x, &w, a.permutations, a.alpha, seed).with_context(|| format!("local Moran of `{}`", a.var))?;
    let mut csv = Table::new(&["region_id", "local_i", "z", "lag", "pseudo_p", "quadrant", "significant"]);
    for g in &r.regions {
        csv.push(vec![
            g.region_id.clone(),
            num(g.local_i),
            num(g.z),
            num(g.lag),
            num(g.pseudo_p),
            g.quadrant.map(|q| q.to_string()).unwrap_or_default(),
            g.significant.to_string(),
        ]);
    }
    out.add(&a.out, csv.to_bytes()?);
    if let (Some(gp), Some(jp)) = (&a.geometry, &a.geojson) {
        let geo = inputs::geometry(gp, &a.id_property, &mut out)?;
        let layer = esda::lisa_feature_collection(&r, &geo, &a.id_property)?;
        out.add_json(jp, &layer)?;
    }
    Ok(out)
}

fn geojson(geo: &GeometrySet) -> Value {
    let features: Vec<Value> = geo
        .region_ids()
        .iter()
        .zip(geo.regions())
        .map(|(id, r)| {
            let coords: Vec<Value> = r.polygons.iter().map(|p| Value::Array(p.rings().map(|ring| json!(ring)).collect())).collect();
            json!({
                "type": "Feature",
                "geometry": { "type": "MultiPolygon", "coordinates": coords },
                "properties": { "region_id": id },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

fn simulate(a: &crate::SimulateArgs, seed: u64) -> Result<Outputs> {
    let kind: ModelKind = a.model.into();
    let (rows, cols) = a.lattice;
    let rule = match a.rule {
        Rule::Rook => ContiguityRule::Rook,
        Rule::Queen => ContiguityRule::Queen,
        Rule::Invdist => return Err(usage("simulate supports --rule rook or queen")),
    };
    if a.rho != 0.0 && !kind.has_rho() {
        return Err(usage(format!("--rho is not a parameter of {kind}")));
    }
    if a.lambda != 0.0 && !kind.has_lambda() {
        return Err(usage(format!("--lambda is not a parameter of {kind}")));
    }
    if !a.theta.is_empty() && !kind.has_durbin() {
        return Err(usage(format!("--theta is not a parameter of {kind}")));
    }
    if kind.has_durbin() && a.theta.is_empty() {
        return Err(usage(format!("{kind} needs --theta")));
    }
    let k = a.beta.len();
    let names: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
    let durbin: Vec<usize> = if a.durbin.is_empty() {
        (0..a.theta.len()).collect()
    } else {
        a.durbin
            .iter()
            .map(|d| names.iter().position(|n| n == d).ok_or_else(|| usage(format!("--durbin `{d}` is not one of x1..x{k}"))))
            .collect::<Result<_>>()?
    };
    if durbin.len() != a.theta.len() || durbin.iter().any(|&c| c >= k) {
        return Err(usage(format!("{} theta values for {} lagged regressors out of {k}", a.theta.len(), durbin.len())));
    }
    if !(2..=3).contains(&a.out.len()) {
        return Err(usage("--out takes DATA.csv,W.gal[,LATTICE.geojson]"));
    }
    let ext = inputs::extension(&a.out[1]);
    if ext.as_deref() != Some("gal") {
        return Err(usage("the second --out path must be a .gal file"));
    }

    let (geo, graph) = make_lattice(rows, cols, rule)?;
    let w = WeightsMatrix::binary(&graph, Provenance::Contiguity { rule, order: 1, exact: false }).normalize(spatialspill::Normalization::Row)?;
    let n = rows * cols;
    let x = standard_normal_design(n, k, seed);
    let params = DgpParams {
        rho: a.rho,
        lambda: a.lambda,
        beta: a.beta.clone(),
        theta: a.theta.clone(),
        alpha: a.alpha,
        sigma: a.sigma,
        seed,
    };
    let sim = simulate_dgp(&params, &x, &durbin, &w)?;

    let mut header = vec!["region_id", "y"];
    header.extend(names.iter().map(String::as_str));
    let mut t = Table::new(&header);
    for (i, id) in graph.region_ids().iter().enumerate() {
        let mut row = vec![id.clone(), num(sim.y[i])];
        row.extend((0..k).map(|j| num(x[(i, j)])));
        t.push(row);
    }
    let mut out = Outputs::new();
    out.add(&a.out[0], t.to_bytes()?);
    out.add(&a.out[1], ingest::format_gal(&graph)?.into_bytes());
    if let Some(p) = a.out.get(2) {
        out.add_json(p, &geojson(&geo))?;
    }
    Ok(out)
}
