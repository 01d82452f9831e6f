use std::fs;
use std::path::{Path, PathBuf};

use snn_delay::config::DelayMode;
use snn_delay::data::{synth_coincidence, Dataset, DenseSample};
use snn_delay::footprint::{footprint, Quantization};
use snn_delay::gradcheck::{self, GradCheckSpec};
use snn_delay::learn::{group_values, is_live, Group, Learnable};
use snn_delay::train::ablation::{run_ablation, Protocol};
use snn_delay::train::settings::Settings;
use snn_delay::train::{evaluate, presets, Checkpoint, DelayHistogram, RunConfig, Trainer};

use crate::error::CliError;
use crate::ConfigArgs;

const SNAPSHOT: &str = "config.resolved";

fn load_settings(args: &ConfigArgs, mut settings: Settings) -> Result<Settings, CliError> {
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        settings.apply_str(&text)?;
    }
    settings.apply_overrides(&args.overrides)?;
    Ok(settings)
}

fn create_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn absolute(path: &Path) -> Result<PathBuf, CliError> {
    fs::canonicalize(path).map_err(|e| CliError::io(path, e))
}

struct Splits {
    train: Vec<DenseSample>,
    test: Vec<DenseSample>,
}

/// Load the manifests named in `s` and fill in the input width, class
/// count and source channel count that were not set explicitly.
fn load_data(s: &mut Settings, need_train: bool) -> Result<Splits, CliError> {
    let train_path = s.data.train_manifest.clone();
    let test_path = s.data.test_manifest.clone();
    if need_train && train_path.is_none() {
        return Err(CliError::Usage("train_manifest is not set".into()));
    }
    if !need_train && test_path.is_none() {
        return Err(CliError::Usage("test_manifest is not set".into()));
    }
    let train_ds = train_path.as_deref().filter(|_| need_train).map(Dataset::load).transpose()?;
    let test_ds = test_path.as_deref().map(Dataset::load).transpose()?;
    let reference = train_ds.as_ref().or(test_ds.as_ref()).expect("one split is loaded");
    if let (Some(a), Some(b)) = (&train_ds, &test_ds) {
        if (a.n_channels, a.n_classes) != (b.n_channels, b.n_classes) {
            return Err(CliError::Data("train and test manifests disagree on channels or classes".into()));
        }
    }
    if !s.is_explicit("source_channels") {
        s.data.preprocess.source_channels = reference.n_channels;
    }
    let n_in = s.data.preprocess.n_inputs();
    if s.is_explicit("n_in") && s.run.net.n_in != n_in {
        return Err(CliError::Usage(format!("n_in={} but preprocessing yields {n_in} inputs", s.run.net.n_in)));
    }
    s.run.net.n_in = n_in;
    if !s.is_explicit("n_out") {
        s.run.net.n_out = reference.n_classes;
    }
    if need_train {
        s.data.train_manifest = train_path.as_deref().map(absolute).transpose()?;
    }
    s.data.test_manifest = test_path.as_deref().map(absolute).transpose()?;
    let pre = s.data.preprocess;
    let dense = |d: Option<Dataset>| d.map_or(Ok(Vec::new()), |d| d.to_dense(&pre));
    Ok(Splits { train: dense(train_ds)?, test: dense(test_ds)? })
}

pub fn train(args: &ConfigArgs, out: &Path, resume: Option<&Path>) -> Result<(), CliError> {
    let mut s = load_settings(args, Settings::default())?;
    let data = load_data(&mut s, true)?;
    s.run.validate()?;
    let ckpt = resume.map(Checkpoint::load).transpose()?;
    create_out(out)?;
    write(&out.join(SNAPSHOT), &s.render())?;

    let mut trainer = match ckpt {
        Some(c) => Trainer::resume(s.run.clone(), c, &data.train, &data.test)?,
        None => Trainer::new(s.run.clone(), &data.train, &data.test)?,
    };
    let ckpt_path = out.join("checkpoint.bin");
    let metrics_path = out.join("metrics.csv");
    trainer.checkpoint().save(&ckpt_path)?;
    write(&metrics_path, &trainer.metrics.to_csv())?;
    while trainer.epochs_done() < s.run.epochs {
        let m = trainer.step_epoch()?;
        let test = m.test_accuracy.map_or(String::new(), |a| format!("  test_acc {a:.4}"));
        println!(
            "epoch {:>3}  loss {:.4}  train_acc {:.4}{test}  {:.1}s",
            m.epoch, m.train_loss, m.train_accuracy, m.seconds
        );
        trainer.checkpoint().save(&ckpt_path)?;
        write(&metrics_path, &trainer.metrics.to_csv())?;
    }
    let hist: String = trainer
        .metrics
        .delay_histograms
        .iter()
        .flat_map(|h| h.counts.iter().enumerate().map(move |(d, c)| format!("{},{d},{c}\n", h.group.name())))
        .collect();
    write(&out.join("delays.csv"), &format!("group,delay,count\n{hist}"))?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn eval(args: &ConfigArgs, checkpoint: &Path, out: &Path) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let mut s = load_settings(args, Settings::from_run(RunConfig { net: ckpt.net.clone(), ..Default::default() }))?;
    let data = load_data(&mut s, false)?;
    ckpt.check_compatible(&s.run.net)?;
    create_out(out)?;
    write(&out.join(SNAPSHOT), &s.render())?;
    let ev =
        evaluate(&ckpt.params, &ckpt.net, &data.test, s.run.prediction).map_err(|e| CliError::Data(e.to_string()))?;
    write(
        &out.join("eval.csv"),
        &format!("split,loss,accuracy,correct,total\ntest,{},{},{},{}\n", ev.loss, ev.accuracy(), ev.correct, ev.total),
    )?;
    println!("test accuracy {:.4} ({}/{})  loss {:.4}", ev.accuracy(), ev.correct, ev.total, ev.loss);
    Ok(())
}

pub fn gradcheck(
    args: &ConfigArgs,
    out: &Path,
    steps: usize,
    seeds: u64,
    h: f64,
    corrupt_eligibility: bool,
) -> Result<(), CliError> {
    let defaults = GradCheckSpec::default();
    let s = load_settings(args, Settings::from_run(RunConfig { net: defaults.net.clone(), ..Default::default() }))?;
    let spec = GradCheckSpec {
        net: s.run.net.clone(),
        t_len: steps,
        h,
        seeds: (0..seeds).collect(),
        trace_decay_override: corrupt_eligibility.then_some(0.0),
        ..defaults
    };
    spec.validate()?;
    create_out(out)?;
    write(&out.join(SNAPSHOT), &s.render())?;
    let outcome = gradcheck::run(&spec)?;
    write(&out.join("gradcheck.csv"), &outcome.report.to_csv())?;
    for g in &outcome.report.groups {
        println!(
            "{:<6} n={:<4} cosine {:.6}  max_rel {:.3e}  non-smooth {}",
            g.group.name(),
            g.count,
            g.cosine,
            g.max_rel_err,
            g.non_smooth
        );
    }
    let weight_rule = if spec.net.recurrent {
        format!("pooled cosine {:.6} >= {}", outcome.weight_min_pooled_cosine, spec.recurrent_min_cosine)
    } else {
        format!(
            "max_rel {:.3e} <= {:e}, cosine {:.6} >= {}",
            outcome.weight_max_rel, spec.weight_max_rel, outcome.weight_min_cosine, spec.weight_min_cosine
        )
    };
    println!("weights vs reverse mode: {weight_rule}: {}", verdict(outcome.weight_pass));
    if !outcome.delay_cosines.is_empty() {
        let min = outcome.delay_cosines.iter().cloned().fold(f64::INFINITY, f64::min);
        println!(
            "delays vs finite differences: min cosine {min:.6} (median {:.6}) >= {}: {}",
            outcome.delay_cosine_median,
            spec.delay_min_cosine,
            verdict(outcome.delay_pass)
        );
    }
    if outcome.pass() {
        println!("gradcheck PASS");
        Ok(())
    } else {
        Err(CliError::Numeric("gradcheck FAIL".into()))
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn ablate(
    args: &ConfigArgs,
    out: &Path,
    protocol: &str,
    densities: Option<Vec<f64>>,
    modes: Option<Vec<String>>,
    widths: Option<Vec<usize>>,
) -> Result<(), CliError> {
    let mut proto = Protocol::parse(protocol).ok_or_else(|| {
        CliError::Usage(format!("unknown protocol `{protocol}`; expected one of {}", Protocol::NAMES.join(", ")))
    })?;
    match &mut proto {
        Protocol::SparsitySweep { densities: d, modes: m } => {
            if let Some(v) = densities {
                *d = v;
            }
            if let Some(v) = modes {
                *m = v
                    .iter()
                    .map(|s| DelayMode::parse(s).ok_or_else(|| CliError::Usage(format!("unknown delay mode `{s}`"))))
                    .collect::<Result<_, _>>()?;
            }
        }
        Protocol::WeightsOnlyWidth { widths: w } => {
            if let Some(v) = widths {
                *w = v;
            }
        }
        _ => {}
    }
    let mut s = load_settings(args, Settings::default())?;
    let data = load_data(&mut s, true)?;
    proto.conditions(&s.run)?;
    create_out(out)?;
    write(&out.join(SNAPSHOT), &s.render())?;
    let report = run_ablation(&proto, &s.run, &data.train, &data.test, |r| {
        println!("{}  seed {}  accuracy {:.4}", r.condition, r.seed, r.accuracy);
    })?;
    write(&out.join("ablation_runs.csv"), &report.runs_csv())?;
    write(&out.join("ablation_summary.csv"), &report.summary_csv())?;
    for c in report.summary() {
        let ci = c.ci.map_or("n/a".to_string(), |h| format!("{h:.4}"));
        println!("{:<32} mean {:.4} ± {ci} (n={})", c.condition, c.mean, c.n);
    }
    Ok(())
}

pub fn synth(out: &Path, pairs: usize, gap: usize, frames: usize, seed: u64) -> Result<(), CliError> {
    if frames <= 2 * gap + 2 {
        return Err(CliError::Usage(format!("frames must exceed 2*gap+2 = {}", 2 * gap + 2)));
    }
    let pre = presets::coincidence_preprocess();
    create_out(out)?;
    let mut paths = Vec::new();
    for (split, split_seed) in [("train", seed), ("test", seed.wrapping_add(1))] {
        let mut ds = synth_coincidence(pairs, gap, frames, pre.frame_ms, split_seed);
        ds.split = split.into();
        paths.push(absolute(&ds.save(out, split)?)?);
    }
    let mut s = Settings::from_run(presets::coincidence());
    s.data.preprocess = pre;
    s.data.train_manifest = Some(paths[0].clone());
    s.data.test_manifest = Some(paths[1].clone());
    let cfg = out.join("coincidence.cfg");
    write(&cfg, &s.render())?;
    println!("wrote {} samples per split and {}", 2 * pairs, cfg.display());
    Ok(())
}

fn describe(values: &[f64]) -> (f64, f64, f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (mean, std, min, max)
}

pub fn inspect(checkpoint: &Path, weight_bits: u32, delay_bits: u32, state_bits: u32) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let (net, p) = (&ckpt.net, &ckpt.params);
    println!(
        "network {}-{}-{}  recurrent {}  delays in/rec {}/{}  d_max {}  epochs trained {}",
        net.n_in,
        net.n_hidden,
        net.n_out,
        net.recurrent,
        net.delay_in.name(),
        net.delay_rec.name(),
        net.d_max,
        ckpt.epochs.len()
    );
    if let Some(acc) = ckpt.epochs.last().and_then(|e| e.test_accuracy) {
        println!("last test accuracy {acc:.4}");
    }
    println!("\n{:<6} {:>8} {:>8} {:>10} {:>10} {:>10} {:>10}", "group", "total", "live", "mean", "std", "min", "max");
    for g in Group::ALL {
        let all = group_values(p, g);
        if all.is_empty() {
            continue;
        }
        let live: Vec<f64> = all.iter().enumerate().filter(|(i, _)| is_live(p, g, *i)).map(|(_, v)| *v).collect();
        let (mean, std, min, max) = describe(&live);
        println!(
            "{:<6} {:>8} {:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            g.name(),
            all.len(),
            live.len(),
            mean,
            std,
            min,
            max
        );
    }
    for h in DelayHistogram::of(p, net) {
        println!("\n{} effective delay histogram (steps: count)", h.group.name());
        let cells: Vec<String> =
            h.counts.iter().enumerate().filter(|(_, c)| **c > 0).map(|(d, c)| format!("{d}:{c}")).collect();
        println!("  {}", cells.join("  "));
    }
    let q = Quantization { weight_bits, delay_bits, state_bits };
    println!(
        "\nmemory at {weight_bits}-bit weights, {delay_bits}-bit delays, {state_bits}-bit state (all groups learnable)"
    );
    println!("{}", footprint(p, net, &Learnable::ALL, q));
    Ok(())
}
