//! Subcommand implementations.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rodfind_core::dataset::{
    build_vocabulary, generate_corpus, read_manifest, read_nrrd, write_nrrd, DatasetManifest, ManifestRow, Split,
};
use rodfind_core::doe::{
    analyse_runs, combination_label, config_for_run, factor_letter, report_to_csv, run_tuning, DesignFile, DesignMatrix, RunRecord,
    TuningReport,
};
use rodfind_core::encoders::{Checkpoint, ShapeArch};
use rodfind_core::geometry::{parse_stl, voxelize_mesh, FillMode};
use rodfind_core::retrieval::{build_index, export_preview, GalleryItem, PreviewFormat, Retriever, ShapeIndex};
use rodfind_core::training::{evaluate_recalls, examples_from_manifest, fit, log_to_csv, Example, OptimizerKind, TrainerConfig};
use serde::Serialize;
use serde_json::json;

use crate::config::CliConfig;
use crate::{
    usage, Cli, Command, EvalArgs, Fill, GenDatasetArgs, IndexArgs, OptimizerArg, PreviewArg, QueryArgs, SplitArg, TrainArgs,
    TrainOptions, TuneArgs, VoxelizeArgs,
};

struct Ctx<'a> {
    config: CliConfig,
    json: bool,
    out: &'a mut (dyn Write + Send),
    err: &'a mut (dyn Write + Send),
}

impl Ctx<'_> {
    /// Writes `value` as JSON or `table` as tab-separated text.
    fn emit<T: Serialize>(&mut self, value: &T, table: &[Vec<String>]) -> Result<()> {
        if self.json {
            serde_json::to_writer_pretty(&mut *self.out, value)?;
            writeln!(self.out)?;
        } else {
            for row in table {
                writeln!(self.out, "{}", row.join("\t"))?;
            }
        }
        Ok(())
    }

    fn warn(&mut self, message: &str) {
        let _ = writeln!(self.err, "warning: {message}");
    }
}

fn cells<I: IntoIterator<Item = S>, S: ToString>(items: I) -> Vec<String> {
    items.into_iter().map(|s| s.to_string()).collect()
}

pub(crate) fn run(cli: Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => CliConfig::load(path).map_err(|e| usage(format!("--config: {e:#}")))?,
        None => CliConfig::default(),
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if cli.threads.is_some() {
        config.threads = cli.threads;
    }
    if cli.data_dir.is_some() {
        config.data_dir = cli.data_dir.clone();
    }
    config.apply_seed();
    let threads = config.threads;
    let mut ctx = Ctx { config, json: cli.json, out, err };
    match threads {
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().context("starting the worker pool")?;
            pool.install(|| execute(cli.command, &mut ctx))
        }
        None => execute(cli.command, &mut ctx),
    }
}

fn execute(command: Command, ctx: &mut Ctx<'_>) -> Result<()> {
    match command {
        Command::GenDataset(a) => gen_dataset(a, ctx),
        Command::Voxelize(a) => voxelize(a, ctx),
        Command::Train(a) => train(a, ctx),
        Command::Tune(a) => tune(a, ctx),
        Command::Index(a) => index(a, ctx),
        Command::Query(a) => query(a, ctx),
        Command::Eval(a) => eval(a, ctx),
    }
}

fn gen_dataset(args: GenDatasetArgs, ctx: &mut Ctx<'_>) -> Result<()> {
    let mut corpus = ctx.config.corpus.clone();
    if let Some(v) = args.bases {
        corpus.bases = v;
    }
    if let Some(v) = args.total {
        corpus.total = v;
    }
    if let Some(v) = args.resolution {
        corpus.resolution = v;
    }
    if let Some(v) = args.val_fraction {
        corpus.val_fraction = v;
    }
    let shipped = rodfind_core::dataset::default_bases().len();
    if corpus.bases == 0 || corpus.bases > shipped {
        return Err(usage(format!("--bases must be in 1..={shipped}, got {}", corpus.bases)));
    }
    if corpus.total < corpus.bases {
        return Err(usage(format!("--total {} is smaller than --bases {}", corpus.total, corpus.bases)));
    }
    if !(0.0..1.0).contains(&corpus.val_fraction) {
        return Err(usage(format!("--val-fraction must be in [0, 1), got {}", corpus.val_fraction)));
    }
    if corpus.resolution < 2 {
        return Err(usage(format!("--resolution must be at least 2, got {}", corpus.resolution)));
    }
    let dir = args.out.unwrap_or_else(|| ctx.config.default_dataset_dir());
    let generated = generate_corpus(&corpus).context("generating the corpus")?;
    let manifest = generated.write(&dir).with_context(|| format!("writing the corpus to {}", dir.display()))?;

    let mut per_base: BTreeMap<&str, [usize; 2]> = BTreeMap::new();
    for (sample, split) in generated.samples.iter().zip(generated.split.tags(generated.samples.len())) {
        per_base.entry(sample.base.as_str()).or_default()[usize::from(split == Split::Val)] += 1;
    }
    let mut table = vec![cells(["base", "samples", "train", "val"])];
    for (base, [train, val]) in &per_base {
        table.push(cells([base.to_string(), (train + val).to_string(), train.to_string(), val.to_string()]));
    }
    let n_train = manifest.rows_in(Split::Train).count();
    table.push(cells(["total".to_string(), manifest.rows.len().to_string(), n_train.to_string(), (manifest.rows.len() - n_train).to_string()]));
    let path = dir.join(rodfind_core::dataset::MANIFEST_FILE);
    let value = json!({ "manifest": path, "samples": manifest.rows.len(), "train": n_train, "per_base": per_base });
    ctx.emit(&value, &table)
}

fn voxelize(args: VoxelizeArgs, ctx: &mut Ctx<'_>) -> Result<()> {
    if args.resolution < 2 {
        return Err(usage(format!("--resolution must be at least 2, got {}", args.resolution)));
    }
    let bytes = std::fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let mesh = parse_stl(&bytes).with_context(|| format!("parsing {}", args.input.display()))?;
    let mode = match args.fill {
        Fill::Solid => FillMode::Solid,
        Fill::Surface => FillMode::SurfaceOnly,
    };
    let grid = voxelize_mesh(&mesh, args.resolution, mode).with_context(|| format!("voxelizing {}", args.input.display()))?;
    std::fs::write(&args.output, write_nrrd(&grid)).with_context(|| format!("writing {}", args.output.display()))?;
    let value = json!({ "output": args.output, "triangles": mesh.len(), "resolution": args.resolution, "occupied": grid.count() });
    let table = vec![
        cells(["triangles".to_string(), mesh.len().to_string()]),
        cells(["occupied".to_string(), grid.count().to_string()]),
        cells(["output".to_string(), args.output.display().to_string()]),
    ];
    ctx.emit(&value, &table)
}

/// Trainer settings after applying flags, validated.
fn trainer_config(base: &TrainerConfig, o: &TrainOptions) -> Result<TrainerConfig> {
    let mut c = base.clone();
    if let Some(v) = o.epochs {
        c.epochs = v;
    }
    if let Some(v) = o.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = o.learning_rate {
        c.learning_rate = v;
    }
    if let Some(v) = o.margin {
        c.margin = v;
    }
    if let Some(v) = o.mu {
        c.mu = v;
    }
    if let Some(v) = o.conv_layers {
        c.conv_layers = v;
    }
    match o.optimizer {
        Some(OptimizerArg::Adam) if !matches!(c.optimizer, OptimizerKind::Adam { .. }) => c.optimizer = OptimizerKind::default(),
        Some(OptimizerArg::Sgd) => c.optimizer = OptimizerKind::Sgd,
        _ => {}
    }
    c.validate().map_err(|e| usage(format!("training settings: {e}")))?;
    Ok(c)
}

fn min_count(config: &CliConfig, o: &TrainOptions) -> Result<usize> {
    let m = o.min_count.unwrap_or(config.min_count);
    if m == 0 {
        return Err(usage("--min-count must be at least 1"));
    }
    Ok(m)
}

fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    read_manifest(path).with_context(|| format!("reading manifest {}", path.display()))
}

fn check_resolution(manifest: &DatasetManifest, path: &Path, conv_layers: usize) -> Result<()> {
    let expected = ShapeArch::with_layers(conv_layers).resolution;
    match &manifest.meta {
        Some(meta) if meta.resolution != expected => {
            bail!("manifest {} holds {}³ grids but the shape encoder expects {expected}³", path.display(), meta.resolution)
        }
        _ => Ok(()),
    }
}

/// Train/val examples tokenized with a vocabulary built from the train split.
struct Prepared {
    train: Vec<Example>,
    val: Vec<Example>,
    vocabulary: rodfind_core::dataset::Vocabulary,
}

fn prepare(manifest: &DatasetManifest, path: &Path, min_count: usize) -> Result<Prepared> {
    let train_rows: Vec<&ManifestRow> = manifest.rows_in(Split::Train).collect();
    if train_rows.len() < 2 {
        bail!("manifest {} has {} train rows; training needs at least 2", path.display(), train_rows.len());
    }
    let texts: Vec<&str> = train_rows.iter().map(|r| r.text.as_str()).collect();
    let vocabulary = build_vocabulary(&texts, min_count);
    let train = examples_from_manifest(manifest, train_rows, &vocabulary).with_context(|| format!("loading grids of {}", path.display()))?;
    let val =
        examples_from_manifest(manifest, manifest.rows_in(Split::Val), &vocabulary).with_context(|| format!("loading grids of {}", path.display()))?;
    Ok(Prepared { train, val, vocabulary })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|r| format!("{r:.4}")).unwrap_or_else(|| "-".into())
}

fn train(args: TrainArgs, ctx: &mut Ctx<'_>) -> Result<()> {
    let config = trainer_config(&ctx.config.train, &args.options)?;
    let min_count = min_count(&ctx.config, &args.options)?;
    let manifest_path = args.manifest.unwrap_or_else(|| ctx.config.default_manifest());
    let out = args.out.unwrap_or_else(|| ctx.config.default_checkpoint());
    let log_path = args.log.unwrap_or_else(|| out.with_extension("log.csv"));
    let manifest = load_manifest(&manifest_path)?;
    check_resolution(&manifest, &manifest_path, config.conv_layers)?;
    let data = prepare(&manifest, &manifest_path, min_count)?;

    let err = &mut *ctx.err;
    let _ = writeln!(err, "training on {} samples ({} held out), vocabulary {}", data.train.len(), data.val.len(), data.vocabulary.len());
    let outcome = fit(&data.train, &data.val, data.vocabulary.len(), &config, |row| {
        let _ = writeln!(err, "epoch {}\tloss {:.6}\tval_recall@1 {}\t{:.1}s", row.epoch, row.train_loss, fmt_opt(row.val_recall1), row.wall_seconds);
        ControlFlow::Continue(())
    })
    .context("training")?;

    let checkpoint = Checkpoint { text: outcome.text, shape: outcome.shape, vocabulary: data.vocabulary, seed: config.seed };
    let fingerprint = checkpoint.save(&out).with_context(|| format!("writing checkpoint {}", out.display()))?;
    std::fs::write(&log_path, log_to_csv(&outcome.log)).with_context(|| format!("writing log {}", log_path.display()))?;

    let first = outcome.log.first().map(|r| r.train_loss).unwrap_or(f64::NAN);
    let last = outcome.log.last().expect("epoch 0 is always logged");
    let value = json!({
        "checkpoint": out,
        "fingerprint": fingerprint,
        "log": log_path,
        "epochs": last.epoch,
        "initial_loss": first,
        "final_loss": last.train_loss,
        "val_recall1": last.val_recall1,
    });
    let table = vec![
        cells(["checkpoint".to_string(), out.display().to_string()]),
        cells(["fingerprint".to_string(), fingerprint]),
        cells(["epochs".to_string(), last.epoch.to_string()]),
        cells(["initial_loss".to_string(), format!("{first:.6}")]),
        cells(["final_loss".to_string(), format!("{:.6}", last.train_loss)]),
        cells(["val_recall@1".to_string(), fmt_opt(last.val_recall1)]),
    ];
    ctx.emit(&value, &table)
}

fn load_design(spec: &str) -> Result<DesignMatrix> {
    let file = match spec {
        "screening" => DesignFile::screening(),
        "widening" => DesignFile::widening(),
        "refinement" => DesignFile::refinement(),
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading --design {path}"))?;
            DesignFile::from_json(&text).map_err(|e| usage(format!("--design {path}: {e}")))?
        }
    };
    file.build().map_err(|e| usage(format!("--design {spec}: {e}")))
}

fn read_responses(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading --responses {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.trim().parse::<f64>().with_context(|| format!("{} line {}: `{}` is not a number", path.display(), i + 1, l.trim())))
        .collect()
}

fn tuning_tables(report: &TuningReport) -> Vec<Vec<String>> {
    let ra = &report.range;
    let levels = ra.factors.iter().map(|f| f.sums.len()).max().unwrap_or(0);
    let mut header = cells(["factor", "name"]);
    header.extend((1..=levels).map(|l| format!("T{l}")));
    header.extend((1..=levels).map(|l| format!("mean{l}")));
    header.extend(cells(["R", "delta", "best"]));
    let mut table = vec![header];
    for (j, f) in ra.factors.iter().enumerate() {
        let pad = |v: &[f64]| (0..levels).map(|l| v.get(l).map(|x| format!("{x:.2}")).unwrap_or_default()).collect::<Vec<_>>();
        let mut row = cells([factor_letter(j).to_string(), f.name.clone()]);
        row.extend(pad(&f.sums));
        row.extend(pad(&f.means));
        row.extend([format!("{:.2}", f.range), format!("{:.2}", f.delta), format!("{}{}", factor_letter(j), f.best_level + 1)]);
        table.push(row);
    }
    table.push(cells(["order".to_string(), ra.order_label()]));
    table.push(cells(["best".to_string(), combination_label(&report.recommended), format!("executed={}", report.recommended_executed)]));
    table.push(Vec::new());
    table.push(cells(["source", "df", "adj_ss", "adj_ms", "f", "p"]));
    let t = &report.anova;
    for r in &t.factors {
        let f = r.test.f().map(|f| format!("{f:.2}")).unwrap_or_else(|| "-".into());
        let p = r.test.p().map(|p| format!("{p:.3}")).unwrap_or_else(|| "-".into());
        table.push(cells([r.name.clone(), r.df.to_string(), format!("{:.2}", r.ss), format!("{:.2}", r.ms), f, p]));
    }
    table.push(cells(["error".to_string(), t.error_df.to_string(), format!("{:.2}", t.error_ss), t.error_ms.map(|m| format!("{m:.2}")).unwrap_or("-".into())]));
    table.push(cells(["total".to_string(), t.total_df.to_string(), format!("{:.2}", t.total_ss)]));
    table
}

fn tune(args: TuneArgs, ctx: &mut Ctx<'_>) -> Result<()> {
    let design = load_design(&args.design)?;
    let base = trainer_config(&ctx.config.train, &args.options)?;
    for r in 0..design.run_count() {
        config_for_run(&base, &design, &design.values(r)).map_err(|e| usage(format!("--design {} run {}: {e}", args.design, r + 1)))?;
    }
    let budget = args.budget.unwrap_or(design.run_count());
    if budget < design.run_count() {
        return Err(usage(format!("--budget {budget} is below the {} runs of the design", design.run_count())));
    }
    let out = args.out.unwrap_or_else(|| ctx.config.data_root().join("tune_report.csv"));

    let report = if let Some(path) = &args.responses {
        let responses = read_responses(path)?;
        if responses.len() != design.run_count() {
            bail!("{} holds {} responses but the design has {} runs", path.display(), responses.len(), design.run_count());
        }
        let runs = responses
            .iter()
            .enumerate()
            .map(|(r, &y)| RunRecord { run_id: r + 1, levels: design.rows[r].clone(), values: design.values(r), response: Some(y), error: None })
            .collect();
        analyse_runs(&design, runs)?
    } else {
        let min_count = min_count(&ctx.config, &args.options)?;
        let manifest_path = args.manifest.unwrap_or_else(|| ctx.config.default_manifest());
        let manifest = load_manifest(&manifest_path)?;
        let data = prepare(&manifest, &manifest_path, min_count)?;
        if data.val.is_empty() {
            bail!("manifest {} has no val rows to score runs on", manifest_path.display());
        }
        let _ = writeln!(ctx.err, "running {} training runs", design.run_count());
        run_tuning(&design, budget, |run: &RunRecord| -> Result<f64> {
            let config = config_for_run(&base, &design, &run.values)?;
            let outcome = fit(&data.train, &data.val, data.vocabulary.len(), &config, |_| ControlFlow::Continue(()))?;
            let recall = outcome.log.last().and_then(|r| r.val_recall1).context("no validation recall logged")?;
            Ok(100.0 * recall)
        })?
    };
    std::fs::write(&out, report_to_csv(&report)?).with_context(|| format!("writing report {}", out.display()))?;
    let table = tuning_tables(&report);
    ctx.emit(&report, &table)
}

fn select_rows(manifest: &DatasetManifest, split: SplitArg) -> Vec<&ManifestRow> {
    manifest
        .rows
        .iter()
        .filter(|r| match split {
            SplitArg::All => true,
            SplitArg::Train => r.split == Split::Train,
            SplitArg::Val => r.split == Split::Val,
        })
        .collect()
}

fn load_checkpoint(path: &Path) -> Result<(Checkpoint, String)> {
    Checkpoint::load(path).with_context(|| format!("reading checkpoint {}", path.display()))
}

fn index(args: IndexArgs, ctx: &mut Ctx<'_>) -> Result<()> {
    let ck_path = args.checkpoint.unwrap_or_else(|| ctx.config.default_checkpoint());
    let manifest_path = args.manifest.unwrap_or_else(|| ctx.config.default_manifest());
    let out = args.out.unwrap_or_else(|| ctx.config.default_index());
    let (checkpoint, fingerprint) = load_checkpoint(&ck_path)?;
    let manifest = load_manifest(&manifest_path)?;
    let rows = select_rows(&manifest, args.split);
    let grids = rows
        .iter()
        .map(|r| manifest.load_grid(r).with_context(|| format!("loading grid of {}", r.id)))
        .collect::<Result<Vec<_>>>()?;
    let items: Vec<GalleryItem<'_>> = rows
        .iter()
        .zip(&grids)
        .map(|(r, g)| GalleryItem { id: r.id.clone(), grid: g, nrrd_path: manifest.grid_path(r).display().to_string(), text: r.text.clone() })
        .collect();
    let index = build_index(&items, &checkpoint.shape, &fingerprint).with_context(|| format!("indexing {}", manifest_path.display()))?;
    index.save(&out).with_context(|| format!("writing index {}", out.display()))?;
    let value = json!({ "index": out, "entries": index.len(), "fingerprint": fingerprint });
    let table = vec![
        cells(["index".to_string(), out.display().to_string()]),
        cells(["entries".to_string(), index.len().to_string()]),
        cells(["fingerprint".to_string(), fingerprint]),
    ];
    ctx.emit(&value, &table)
}

fn query(args: QueryArgs, ctx: &mut Ctx<'_>) -> Result<()> {
    let k = args.k.unwrap_or(ctx.config.k);
    if k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let text = match (&args.text, &args.text_file) {
        (Some(t), _) => t.clone(),
        (None, Some(path)) => std::fs::read_to_string(path).with_context(|| format!("reading --text-file {}", path.display()))?,
        (None, None) => return Err(usage("one of --text or --text-file is required")),
    };
    let ck_path = args.checkpoint.unwrap_or_else(|| ctx.config.default_checkpoint());
    let index_path = args.index.unwrap_or_else(|| ctx.config.default_index());
    let (checkpoint, fingerprint) = load_checkpoint(&ck_path)?;
    let index = ShapeIndex::load(&index_path).with_context(|| format!("reading index {}", index_path.display()))?;
    let retriever = Retriever::new(&index, &checkpoint, &fingerprint)
        .with_context(|| format!("pairing index {} with checkpoint {}", index_path.display(), ck_path.display()))?;
    let result = retriever.query(&text, k)?;
    for w in &result.warnings {
        ctx.warn(w);
    }
    let mut previews = Vec::new();
    if let Some(dir) = &args.preview_dir {
        let format = match args.preview_format {
            PreviewArg::Obj => PreviewFormat::Obj,
            PreviewArg::Pgm => PreviewFormat::PgmSlices,
        };
        std::fs::create_dir_all(dir).with_context(|| format!("creating --preview-dir {}", dir.display()))?;
        for (rank, hit) in result.hits.iter().enumerate() {
            let bytes = std::fs::read(&hit.nrrd_path).with_context(|| format!("reading grid {}", hit.nrrd_path))?;
            let grid = read_nrrd(&bytes).with_context(|| format!("decoding grid {}", hit.nrrd_path))?;
            let path: PathBuf = dir.join(format!("{:02}_{}.{}", rank + 1, hit.id, format.extension()));
            std::fs::write(&path, export_preview(&grid, format)).with_context(|| format!("writing preview {}", path.display()))?;
            previews.push(path);
        }
    }
    let mut table = vec![cells(["rank", "id", "distance", "nrrd_path"])];
    for (rank, hit) in result.hits.iter().enumerate() {
        table.push(cells([(rank + 1).to_string(), hit.id.clone(), format!("{:.6}", hit.distance), hit.nrrd_path.clone()]));
    }
    let value = json!({ "query": result.query, "k": result.k, "hits": result.hits, "warnings": result.warnings, "previews": previews });
    ctx.emit(&value, &table)
}

fn eval(args: EvalArgs, ctx: &mut Ctx<'_>) -> Result<()> {
    if args.k.contains(&0) {
        return Err(usage("--k values must be at least 1"));
    }
    let ck_path = args.checkpoint.unwrap_or_else(|| ctx.config.default_checkpoint());
    let manifest_path = args.manifest.unwrap_or_else(|| ctx.config.default_manifest());
    let (checkpoint, _) = load_checkpoint(&ck_path)?;
    let manifest = load_manifest(&manifest_path)?;
    let rows = select_rows(&manifest, args.split);
    if rows.is_empty() {
        bail!("manifest {} has no rows in the {:?} split", manifest_path.display(), args.split);
    }
    let examples = examples_from_manifest(&manifest, rows, &checkpoint.vocabulary).with_context(|| format!("loading grids of {}", manifest_path.display()))?;
    let recalls = evaluate_recalls(&checkpoint.text, &checkpoint.shape, &examples, &args.k).context("evaluating")?;
    let mut table = vec![cells(["k", "recall"])];
    let mut value = serde_json::Map::new();
    for (k, r) in args.k.iter().zip(&recalls) {
        table.push(cells([k.to_string(), format!("{r:.4}")]));
        value.insert(format!("recall@{k}"), json!(r));
    }
    value.insert("samples".into(), json!(examples.len()));
    ctx.emit(&value, &table)
}
