//! Subcommand implementations. Each returns the files it wrote.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use partgeom::calculus::{solve_spline_with, HodgeOperators, Penalty, SplineProblem};
use partgeom::curvature::{curvature_report, partition_penalty, vertex_function, CurvatureConfig, CurvatureReport, PartitionPenaltyConfig};
use partgeom::data::Dataset;
use partgeom::density::{density_weighted_graph, estimate_density, interpolate_edge_density, DensityField, DensityScheme, WeightedGraph};
use partgeom::ensemble::{cooccurrence_table, default_lambdas, ensemble_metric, refine_ensemble, BoostingConfig, BoostingState};
use partgeom::nn::{backward_sequence, enriched_complex, LayerSequence, Network, Pattern};
use partgeom::{build_nerve, Domain, Error, Nerve, NerveOptions, Partition, Result, RiemannianStructure, Simplex};

use crate::output::{envelope, num, opt, simplex_label, to_value, write_csv, write_json};
use crate::{Cli, Command, DensityArgs};

/// Runs the selected subcommand.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    if !(cli.tol > 0.0) {
        return Err(Error::Input("tolerance must be positive".into()));
    }
    let mut opts = NerveOptions {
        max_dim: cli.max_dim,
        ..NerveOptions::default()
    };
    opts.geometry.tol = cli.tol;
    opts.geometry.seed = cli.seed.unwrap_or(0);
    let config = to_value(cli)?;
    let ctx = Ctx { cli, opts, config };
    match &cli.command {
        Command::Nerve { partition, mc_samples } => ctx.nerve(partition, *mc_samples),
        Command::Metric { partition } => ctx.metric(partition),
        Command::Spline {
            partition,
            values,
            penalties,
        } => ctx.spline(partition, values.as_deref(), penalties),
        Command::Density { partition, data, density } => ctx.density(partition, data, density),
        Command::Curvature {
            partition,
            data,
            values,
            radii,
            vertex_measure,
            weights,
            tau,
            lambda,
            density,
        } => {
            let mut cfg = CurvatureConfig {
                radii: radii.clone(),
                vertex_measure: vertex_measure.parse()?,
                tau: *tau,
                lambda: *lambda,
                ..CurvatureConfig::default()
            };
            if let Some(w) = weights {
                cfg.alphas = [w[0], w[1], w[2], w[3]];
            }
            ctx.curvature(partition, data, values.as_deref(), &cfg, density)
        }
        Command::Ensemble { trees, eta, mc_samples } => ctx.ensemble(trees, *eta, *mc_samples),
        Command::BoostMonitor { trees, eta, lambdas } => ctx.boost_monitor(trees, *eta, lambdas.clone()),
        Command::NnAnalyze { weights, data, domain } => ctx.nn_analyze(weights, data, domain),
        Command::Report { partition, data, density } => ctx.report(partition, data.as_deref(), density),
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    opts: NerveOptions,
    config: Value,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Parses and validates a partition file.
pub fn load_partition(path: &Path) -> Result<Partition> {
    let p: Partition = load_json(path)?;
    Partition::new(p.domain, p.cells)
}

fn load_data(path: &Path) -> Result<Dataset> {
    let text = read(path)?;
    Dataset::from_csv(text.as_bytes())
}

fn load_values(path: &Path, count: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = load_json(path)?;
    if v.len() != count {
        return Err(Error::Input(format!("{} values for {count} cells", v.len())));
    }
    Ok(v)
}

fn nerve_value(nerve: &Nerve) -> Result<Value> {
    let cells = (0..nerve.partition.len())
        .map(|v| {
            Ok(json!({
                "vertex": v,
                "id": nerve.partition.cells[v].id,
                "volume": nerve.cell_volume(v)?,
                "diameter": nerve.cell_diameter(v),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let dim = nerve.complex.dim().unwrap_or(0);
    let simplices: Vec<Vec<&Simplex>> = (0..=dim).map(|p| nerve.complex.simplices(p).collect()).collect();
    let faces: Vec<Value> = nerve
        .faces
        .iter()
        .map(|(s, f)| json!({"simplex": s, "dim": f.dim, "measure": f.measure}))
        .collect();
    Ok(json!({
        "cells": cells,
        "f_vector": nerve.complex.f_vector(),
        "simplices": simplices,
        "faces": faces,
    }))
}

fn metric_value(m: &RiemannianStructure) -> Result<Value> {
    let nerve = m.nerve();
    let mut vertices = Vec::new();
    for v in 0..nerve.partition.len() {
        let g = m.star_gram(&Simplex::vertex(v), 1)?;
        let rows: Vec<Vec<f64>> = (0..g.matrix.nrows())
            .map(|i| (0..g.matrix.ncols()).map(|j| g.matrix[(i, j)]).collect())
            .collect();
        let condition = if rows.is_empty() { None } else { Some(m.gram_condition(v)?) };
        vertices.push(json!({
            "vertex": v,
            "id": nerve.partition.cells[v].id,
            "inner": m.vertex_inner(v)?,
            "edges": g.simplices,
            "gram": rows,
            "condition": condition,
        }));
    }
    let edges = nerve
        .complex
        .simplices(1)
        .map(|e| Ok(json!({"edge": e, "length": m.edge_length(e)?})))
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "vertices": vertices,
        "edge_lengths": edges,
        "consistency": to_value(&m.consistency_report()?)?,
        "degenerate_faces": m.degenerate_faces(),
    }))
}

fn metric_rows(m: &RiemannianStructure) -> Result<Vec<Vec<String>>> {
    let nerve = m.nerve();
    (0..nerve.partition.len())
        .map(|v| {
            let degree = nerve.complex.neighbors(v).len();
            let c = if degree == 0 { None } else { Some(m.gram_condition(v)?) };
            Ok(vec![
                v.to_string(),
                nerve.partition.cells[v].id.to_string(),
                degree.to_string(),
                opt(c.map(|c| c.value)),
                opt(c.map(|c| c.min_eigenvalue)),
                opt(c.map(|c| c.max_eigenvalue)),
            ])
        })
        .collect()
}

const METRIC_HEADER: [&str; 6] = ["vertex", "cell_id", "degree", "condition", "min_eigenvalue", "max_eigenvalue"];

struct DensityRun {
    counts: Vec<usize>,
    field: DensityField,
    graph: WeightedGraph,
    data: Dataset,
}

impl Ctx<'_> {
    fn out(&self) -> &Path {
        &self.cli.out
    }

    fn seed(&self, what: &str) -> Result<u64> {
        self.cli
            .seed
            .ok_or_else(|| Error::Input(format!("{what} uses Monte Carlo sampling and needs --seed")))
    }

    fn emit(&self, name: &str, result: Value, warnings: Vec<String>) -> Result<PathBuf> {
        let doc = envelope(self.cli.command.name(), self.cli.seed, self.config.clone(), result, warnings);
        write_json(self.out(), &format!("{name}.json"), &doc)
    }

    fn structure(&self, partition: &Partition) -> Result<RiemannianStructure> {
        Ok(RiemannianStructure::new(Arc::new(build_nerve(partition, &self.opts)?)))
    }

    fn nerve(&self, path: &Path, mc_samples: Option<usize>) -> Result<Vec<PathBuf>> {
        let partition = load_partition(path)?;
        let nerve = build_nerve(&partition, &self.opts)?;
        let mut result = nerve_value(&nerve)?;
        let volume_sum: f64 = (0..partition.len()).map(|v| nerve.cell_volume(v)).sum::<Result<f64>>()?;
        result["volume_sum"] = json!(volume_sum);
        result["domain_volume"] = json!(partition.domain.volume());
        if let Some(samples) = mc_samples {
            let check = partition.monte_carlo_check(samples, self.seed("the coverage check")?, self.cli.tol);
            result["coverage_check"] = json!({"passed": check.passed(), "check": to_value(&check)?});
        }
        let rows: Vec<Vec<String>> = nerve
            .faces
            .iter()
            .map(|(s, f)| vec![simplex_label(s), s.dim().to_string(), f.dim.to_string(), num(f.measure)])
            .collect();
        Ok(vec![
            self.emit("nerve", result, Vec::new())?,
            write_csv(self.out(), "nerve_faces.csv", &["simplex", "dim", "face_dim", "measure"], &rows)?,
        ])
    }

    fn metric(&self, path: &Path) -> Result<Vec<PathBuf>> {
        let m = self.structure(&load_partition(path)?)?;
        let result = metric_value(&m)?;
        Ok(vec![
            self.emit("metric", result, Vec::new())?,
            write_csv(self.out(), "metric_vertices.csv", &METRIC_HEADER, &metric_rows(&m)?)?,
        ])
    }

    fn spline(&self, path: &Path, values: Option<&Path>, penalties: &[[f64; 3]]) -> Result<Vec<PathBuf>> {
        let partition = load_partition(path)?;
        let m = self.structure(&partition)?;
        let y = match values {
            Some(v) => load_values(v, partition.len())?,
            None => vertex_function(m.nerve())
                .ok_or_else(|| Error::Input("cells carry no predictors; pass --values".into()))?,
        };
        let penalties: Vec<Penalty> = if penalties.is_empty() {
            vec![Penalty { p: 0, k: 1, lambda: 1.0 }]
        } else {
            penalties
                .iter()
                .map(|&[p, k, lambda]| Penalty { p: p as usize, k: k as usize, lambda })
                .collect()
        };
        let ops = HodgeOperators::build(&m, None)?;
        let problem = SplineProblem { y: y.clone(), penalties };
        let sol = solve_spline_with(&problem, &ops)?;
        let rows: Vec<Vec<String>> = (0..y.len())
            .map(|v| vec![v.to_string(), partition.cells[v].id.to_string(), num(y[v]), num(sol.u[v])])
            .collect();
        let result = json!({"problem": to_value(&problem)?, "solution": to_value(&sol)?});
        Ok(vec![
            self.emit("spline", result, Vec::new())?,
            write_csv(self.out(), "spline.csv", &["vertex", "cell_id", "y", "u"], &rows)?,
        ])
    }

    fn run_density(&self, partition: &mut Partition, m: &RiemannianStructure, data: &Path, args: &DensityArgs) -> Result<DensityRun> {
        let data = load_data(data)?;
        partition.assign_data(&data.x, self.cli.tol)?;
        let counts = partition.counts();
        let scheme: DensityScheme = args.density_scheme.parse()?;
        let ops = HodgeOperators::build(m, None)?;
        let pen = [Penalty { p: 0, k: 1, lambda: 1.0 }];
        let field = estimate_density(m, &ops, &counts, args.lambda_density, &pen)?;
        let mut field = interpolate_edge_density(&field, m, scheme)?;
        field.alpha = args.alpha;
        let graph = density_weighted_graph(&field, m, args.alpha)?;
        Ok(DensityRun { counts, field, graph, data })
    }

    fn density_outputs(&self, m: &RiemannianStructure, run: &DensityRun) -> Result<(Value, [PathBuf; 2])> {
        let nerve = m.nerve();
        let vrows: Vec<Vec<String>> = (0..run.counts.len())
            .map(|v| {
                Ok(vec![
                    v.to_string(),
                    nerve.partition.cells[v].id.to_string(),
                    run.counts[v].to_string(),
                    num(nerve.cell_volume(v)?),
                    num(run.field.rho_vertex[v]),
                ])
            })
            .collect::<Result<_>>()?;
        let erows: Vec<Vec<String>> = run
            .graph
            .edges
            .iter()
            .map(|&(a, b, d)| {
                let e = Simplex::new([a, b])?;
                Ok(vec![a.to_string(), b.to_string(), opt(run.field.rho_edge.get(&e).copied()), num(d)])
            })
            .collect::<Result<_>>()?;
        let edges: Vec<Value> = run.graph.edges.iter().map(|&(a, b, d)| json!([a, b, d])).collect();
        let value = json!({
            "counts": run.counts,
            "field": to_value(&run.field)?,
            "graph_edges": edges,
            "mean_edge_length": run.graph.mean_edge_length(),
        });
        Ok((
            value,
            [
                write_csv(self.out(), "density_vertices.csv", &["vertex", "cell_id", "count", "volume", "rho"], &vrows)?,
                write_csv(self.out(), "density_edges.csv", &["a", "b", "rho_edge", "length"], &erows)?,
            ],
        ))
    }

    fn density(&self, path: &Path, data: &Path, args: &DensityArgs) -> Result<Vec<PathBuf>> {
        let mut partition = load_partition(path)?;
        let m = self.structure(&partition)?;
        let run = self.run_density(&mut partition, &m, data, args)?;
        let (value, csvs) = self.density_outputs(&m, &run)?;
        let mut files = vec![self.emit("density", value, Vec::new())?];
        files.extend(csvs);
        Ok(files)
    }

    fn curvature_for(
        &self,
        m: &RiemannianStructure,
        run: &DensityRun,
        values: Option<&Path>,
        cfg: &CurvatureConfig,
    ) -> Result<(CurvatureReport, Vec<Vec<String>>)> {
        let count = m.nerve().partition.len();
        let f = match values {
            Some(v) => load_values(v, count)?,
            None => vertex_function(m.nerve()).unwrap_or_else(|| run.field.rho_vertex.clone()),
        };
        let report = curvature_report(m, &run.field, &run.graph, &f, Some(&run.data), cfg)?;
        let mut rows = Vec::new();
        let mut push = |kind: &str, id: String, measure: String, value: Option<f64>| {
            if let Some(x) = value {
                rows.push(vec![kind.to_string(), id, measure, num(x)]);
            }
        };
        for v in &report.vertices {
            for (r, b) in report.radii.iter().zip(&v.ball) {
                push("vertex", v.vertex.to_string(), format!("ball@{r}"), *b);
            }
            for (r, p) in report.radii.iter().zip(&v.path) {
                push("vertex", v.vertex.to_string(), format!("path@{r}"), *p);
            }
            for (r, s) in report.radii.iter().zip(&v.spray) {
                push("vertex", v.vertex.to_string(), format!("spray@{r}"), s.as_ref().map(|s| s.kappa));
            }
            push("vertex", v.vertex.to_string(), "dist".into(), v.dist);
            push("vertex", v.vertex.to_string(), "tri".into(), v.tri);
            push("vertex", v.vertex.to_string(), "functional_mean".into(), v.f_mean);
            push("vertex", v.vertex.to_string(), "functional_angle".into(), v.f_angle);
            push("vertex", v.vertex.to_string(), "functional_level".into(), v.f_level);
            push("vertex", v.vertex.to_string(), "stat".into(), Some(v.stat));
        }
        for e in &report.edges {
            let id = format!("{} {}", e.edge[0], e.edge[1]);
            push("edge", id.clone(), "ricci_geometric".into(), Some(e.geom));
            push("edge", id.clone(), "ricci_density".into(), Some(e.dens));
            push("edge", id.clone(), "ricci_functional".into(), Some(e.func.total));
            push("edge", id, "stat".into(), Some(e.stat));
        }
        Ok((report, rows))
    }

    fn curvature(
        &self,
        path: &Path,
        data: &Path,
        values: Option<&Path>,
        cfg: &CurvatureConfig,
        args: &DensityArgs,
    ) -> Result<Vec<PathBuf>> {
        let mut partition = load_partition(path)?;
        let m = self.structure(&partition)?;
        let run = self.run_density(&mut partition, &m, data, args)?;
        let (report, rows) = self.curvature_for(&m, &run, values, cfg)?;
        let warnings = report.warnings.clone();
        let result = json!({"config": to_value(cfg)?, "report": to_value(&report)?});
        Ok(vec![
            self.emit("curvature", result, warnings)?,
            write_csv(self.out(), "curvature.csv", &["kind", "id", "measure", "value"], &rows)?,
        ])
    }

    fn load_trees(&self, path: &Path) -> Result<Vec<Partition>> {
        let raw: Vec<Partition> = load_json(path)?;
        if raw.is_empty() {
            return Err(Error::Input("the ensemble has no members".into()));
        }
        raw.into_iter().map(|p| Partition::new(p.domain, p.cells)).collect()
    }

    fn ensemble(&self, path: &Path, eta: Option<f64>, samples: usize) -> Result<Vec<PathBuf>> {
        let trees = self.load_trees(path)?;
        let seed = self.seed("the overlay volume check")?;
        let ens = refine_ensemble(&trees, &self.opts)?;
        let nerve = Arc::new(build_nerve(&ens.refined, &self.opts)?);
        let table = cooccurrence_table(&ens, &nerve, eta)?;
        let lambdas = default_lambdas(&nerve)?;
        let m = ensemble_metric(&ens, Arc::clone(&nerve), &table, Some(&lambdas))?;
        let check = ens.volume_check(samples, seed, &self.opts)?;
        let freq: Vec<f64> = (0..ens.refined.len())
            .map(|i| ens.frequency(i, &self.opts))
            .collect::<Result<_>>()?;
        let values: Vec<(Simplex, f64)> = table.values().into_iter().collect();
        let rows: Vec<Vec<String>> = values
            .iter()
            .map(|(s, k)| vec![simplex_label(s), s.dim().to_string(), num(*k)])
            .collect();
        let result = json!({
            "members": ens.member_count(),
            "refined": to_value(&ens.refined)?,
            "provenance": ens.provenance,
            "nerve": nerve_value(&nerve)?,
            "cooccurrence": values,
            "mean_pairwise_cooccurrence": table.mean_pairwise(),
            "weights": table.weights,
            "lambdas": lambdas,
            "frequency": freq,
            "metric": metric_value(&m)?,
            "volume_check": {"passed": check.passed(), "check": to_value(&check)?},
        });
        Ok(vec![
            self.emit("ensemble", result, Vec::new())?,
            write_csv(self.out(), "ensemble_cooccurrence.csv", &["simplex", "dim", "k"], &rows)?,
            write_csv(self.out(), "ensemble_vertices.csv", &METRIC_HEADER, &metric_rows(&m)?)?,
        ])
    }

    fn boost_monitor(&self, path: &Path, eta: Option<f64>, lambdas: Option<Vec<f64>>) -> Result<Vec<PathBuf>> {
        let trees = self.load_trees(path)?;
        let cfg = BoostingConfig {
            nerve: self.opts.clone(),
            eta,
            lambdas,
            ..BoostingConfig::default()
        };
        let (state, deltas) = BoostingState::run(&trees, cfg)?;
        let signature = state.signature()?;
        let dims = state.trace.iter().map(|r| r.mu_ratios.len()).max().unwrap_or(0);
        let mut header: Vec<String> = ["m", "E", "lambda2_ratio"].map(String::from).to_vec();
        header.extend((1..=dims).map(|p| format!("mu_{p}_ratio")));
        header.extend(["health", "cells", "mean_k"].map(String::from));
        let rows: Vec<Vec<String>> = state
            .trace
            .iter()
            .map(|r| {
                let mut row = vec![r.m.to_string(), num(r.energy), opt(r.lambda2_ratio)];
                row.extend((0..dims).map(|p| opt(r.mu_ratios.get(p).copied().flatten())));
                row.extend([opt(r.health), r.cells.to_string(), num(r.mean_k)]);
                row
            })
            .collect();
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let result = json!({
            "trace": to_value(&state.trace)?,
            "deltas": to_value(&deltas)?,
            "signature": to_value(&signature)?,
            "lambdas": state.lambdas,
            "energies": state.energies,
            "final_cells": state.ensemble.refined.len(),
        });
        let mut warnings = state.warnings.clone();
        warnings.extend(signature.warnings.iter().cloned());
        Ok(vec![
            self.emit("boost-monitor", result, warnings)?,
            write_csv(self.out(), "boost_trace.csv", &header_refs, &rows)?,
        ])
    }

    fn nn_analyze(&self, weights: &Path, data: &Path, domain: &str) -> Result<Vec<PathBuf>> {
        let net: Network = load_json(weights)?;
        net.validate()?;
        let data = load_data(data)?;
        let domain = match domain {
            "auto" => Domain::bounding(&data.x)?,
            file => {
                let d: Domain = load_json(Path::new(file))?;
                Domain::new(d.bounds)?
            }
        };
        let seq = backward_sequence(&net, &domain, &data.x, &self.opts)?;
        let enriched = enriched_complex(&seq);
        let result = nn_value(&seq, &enriched.structure, &enriched.maps)?;
        let mut rows = Vec::new();
        for (l, pulls) in seq.pullbacks.iter().enumerate() {
            for (i, p) in pulls.iter().enumerate() {
                rows.push(vec![
                    l.to_string(),
                    i.to_string(),
                    signature_label(&seq.levels[l].signatures[i]),
                    seq.maps[l][i].to_string(),
                    num(p.volume),
                    num(p.direct),
                    serde_json::to_value(p.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    opt(p.determinant),
                    opt(p.image_volume),
                    opt(p.pullback_integral),
                ])
            }
        }
        let header = [
            "level",
            "cell",
            "signature",
            "image_cell",
            "volume",
            "direct",
            "method",
            "determinant",
            "image_volume",
            "pullback_integral",
        ];
        Ok(vec![
            self.emit("nn-analyze", result, seq.warnings.clone())?,
            write_csv(self.out(), "nn_volumes.csv", &header, &rows)?,
        ])
    }

    fn report(&self, path: &Path, data: Option<&Path>, args: &DensityArgs) -> Result<Vec<PathBuf>> {
        let mut partition = load_partition(path)?;
        let m = self.structure(&partition)?;
        let ops = HodgeOperators::build(&m, None)?;
        let mut result = json!({
            "nerve": nerve_value(m.nerve())?,
            "metric": metric_value(&m)?,
            "spectrum": to_value(&ops.spectral_snapshot())?,
            "partition_penalty": to_value(&partition_penalty(&m, &PartitionPenaltyConfig::default())?)?,
        });
        let mut warnings = Vec::new();
        let mut files = Vec::new();
        if let Some(d) = data {
            let run = self.run_density(&mut partition, &m, d, args)?;
            let (density, csvs) = self.density_outputs(&m, &run)?;
            files.extend(csvs);
            let (curv, rows) = self.curvature_for(&m, &run, None, &CurvatureConfig::default())?;
            warnings.extend(curv.warnings.iter().cloned());
            result["density"] = density;
            result["curvature"] = to_value(&curv)?;
            files.push(write_csv(self.out(), "curvature.csv", &["kind", "id", "measure", "value"], &rows)?);
        }
        files.push(write_csv(self.out(), "metric_vertices.csv", &METRIC_HEADER, &metric_rows(&m)?)?);
        files.insert(0, self.emit("report", result, warnings)?);
        Ok(files)
    }
}

fn pattern_label(p: &Pattern) -> String {
    p.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn signature_label(sig: &[Pattern]) -> String {
    sig.iter().map(pattern_label).collect::<Vec<_>>().join("|")
}

fn nn_value(seq: &LayerSequence, structure: &RiemannianStructure, maps: &[partgeom::nn::AffineMap]) -> Result<Value> {
    let levels = seq
        .levels
        .iter()
        .map(|l| {
            Ok(json!({
                "level": l.index,
                "domain": to_value(&l.partition.domain)?,
                "signatures": l.signatures.iter().map(|s| signature_label(s)).collect::<Vec<_>>(),
                "nerve": nerve_value(&l.nerve)?,
                "data_counts": l.partition.counts(),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "convention": "intermediate nerves use data-witnessed cells with exact halfspace intersection tests",
        "levels": levels,
        "vertex_maps": seq.maps,
        "pullbacks": to_value(&seq.pullbacks)?,
        "composed_maps": to_value(&maps)?,
        "composed_volumes": to_value(&seq.composed_volumes)?,
        "distortion": to_value(&seq.distortion()?)?,
        "enriched_metric": metric_value(structure)?,
    }))
}
