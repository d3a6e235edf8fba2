use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use demonsonar_core::demon::{demon_gram, demon_spectrum, render_demon_gram, write_spectrum_csv};
use demonsonar_core::eval::harness::select_rows;
use demonsonar_core::eval::manifest::{is_feature_csv, read_feature_csv, write_feature_csv, FeatureRow};
use demonsonar_core::eval::{evaluate, read_manifest, sweep_hidden_widths, write_report, write_sweep_report, Metrics};
use demonsonar_core::features::{extract_salient_features, FEATURE_NAMES};
use demonsonar_core::nn::cascade::cascade_split;
use demonsonar_core::nn::{cascade_predict, load_model, save_model, train_cascade, Prediction, TrainHistory};
use demonsonar_core::pipeline::{analyze_file, extract_manifest_features, AnalysisConfig};
use demonsonar_core::synth::{generate_dataset, SynthSpec, MANIFEST_FILE};
use demonsonar_core::{read_wav, Error, Result};

use crate::{AnalyzeArgs, Cli, Command, EvaluateArgs, PredictArgs, SweepArgs, SynthArgs, TrainArgs};

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Synth(a) => synth(a, seed),
        Command::Analyze(a) => analyze(a),
        Command::Train(a) => train(a, seed),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate_cmd(a, seed),
        Command::Sweep(a) => sweep(a, seed),
    }
}

/// `prefix` with `suffix` appended to its final component.
fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Feature rows from either a feature table or an audio manifest.
fn load_rows(path: &Path, analysis: &AnalysisConfig) -> Result<Vec<FeatureRow>> {
    if is_feature_csv(path)? {
        read_feature_csv(path)
    } else {
        extract_manifest_features(&read_manifest(path)?, path, analysis)
    }
}

fn format_prediction(p: &Prediction) -> String {
    match p.fine_class {
        Some(k) => format!("coarse={} fine={k}", p.coarse_class),
        None => format!("coarse={} fine=-", p.coarse_class),
    }
}

fn synth(a: SynthArgs, seed: u64) -> Result<()> {
    let spec = SynthSpec {
        samples_per_class: a.per_class,
        duration_s: a.duration,
        sample_rate_hz: a.sample_rate,
        seed,
        ..SynthSpec::default()
    }
    .with_classes(a.classes)?
    .with_snr_db(a.snr);
    let manifest = generate_dataset(&spec, &a.out)?;
    println!("{}", a.out.join(MANIFEST_FILE).display());
    eprintln!("wrote {} recordings", manifest.len());
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let cfg = a.demon.analysis();
    let audio = read_wav(&a.wav)?;
    let spectrum = demon_spectrum(&audio, &cfg.demon)?;
    let features = extract_salient_features(&spectrum, &cfg.features)?;
    let slice = a.slice.min(audio.duration_s());
    let gram = demon_gram(&audio, &cfg.demon, slice)?;

    write_spectrum_csv(&spectrum, with_suffix(&a.out, "_spectrum.csv"))?;
    render_demon_gram(&gram, with_suffix(&a.out, "_gram.pgm"))?;
    let row = FeatureRow {
        path: a.wav.display().to_string(),
        coarse: None,
        fine: None,
        features,
    };
    write_feature_csv(&[row], &with_suffix(&a.out, "_features.csv"))?;
    let pairs: Vec<String> = FEATURE_NAMES
        .iter()
        .zip(features.to_array())
        .map(|(n, v)| format!("{n}={v}"))
        .collect();
    println!("{}", pairs.join(" "));
    Ok(())
}

fn history_csv(coarse: &TrainHistory, fine: Option<&TrainHistory>) -> String {
    let mut out = String::from("epoch,coarse_train_loss,coarse_val_accuracy");
    if fine.is_some() {
        out.push_str(",fine_train_loss,fine_val_accuracy");
    }
    out.push('\n');
    for e in 0..coarse.train_loss.len() {
        write!(out, "{e},{},{}", coarse.train_loss[e], coarse.val_accuracy[e]).unwrap();
        if let Some(f) = fine {
            write!(out, ",{},{}", f.train_loss[e], f.val_accuracy[e]).unwrap();
        }
        out.push('\n');
    }
    out
}

fn train(a: TrainArgs, seed: u64) -> Result<()> {
    let cfg = a.learn.cascade(seed).map_err(Error::Contract)?;
    let rows = load_rows(&a.manifest, &a.demon.analysis())?;
    let trained = train_cascade(&rows, &cfg)?;
    save_model(&trained.model, &a.model)?;
    if let Some(path) = &a.history {
        write_text(path, &history_csv(&trained.coarse_history, trained.fine_history.as_ref()))?;
    }
    println!(
        "coarse best_epoch={} val_accuracy={}",
        trained.coarse_history.best_epoch, trained.coarse_history.best_val_accuracy
    );
    if let Some(h) = &trained.fine_history {
        println!("fine best_epoch={} val_accuracy={}", h.best_epoch, h.best_val_accuracy);
    }
    println!("train_rows={} val_rows={}", trained.train_rows.len(), trained.val_rows.len());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let is_csv = a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        for row in read_feature_csv(&a.input)? {
            let p = cascade_predict(&model, &row.features)?;
            println!("{} {}", row.path, format_prediction(&p));
        }
    } else {
        let (_, features) = analyze_file(&a.input, &a.demon.analysis())?;
        println!("{}", format_prediction(&cascade_predict(&model, &features)?));
    }
    Ok(())
}

fn print_overall(stage: &str, m: &Metrics) {
    println!("{stage} overall_accuracy={} rows={}", m.overall_accuracy, m.confusion.total());
}

fn evaluate_cmd(a: EvaluateArgs, seed: u64) -> Result<()> {
    let model = load_model(&a.model)?;
    let mut rows = load_rows(&a.manifest, &a.demon.analysis())?;
    if a.heldout {
        let cfg = a.learn.cascade(seed).map_err(Error::Contract)?;
        let (_, val) = cascade_split(&rows, &cfg)?;
        rows = select_rows(&rows, &val);
    }
    let (coarse, fine) = evaluate(&model, &rows)?;
    write_report(&coarse, &with_suffix(&a.out, "_coarse"))?;
    print_overall("coarse", &coarse);
    if let Some(f) = &fine {
        write_report(f, &with_suffix(&a.out, "_fine"))?;
        print_overall("fine", f);
    }
    Ok(())
}

fn sweep(a: SweepArgs, seed: u64) -> Result<()> {
    let cfg = a.learn.cascade(seed).map_err(Error::Contract)?;
    let rows = load_rows(&a.manifest, &a.demon.analysis())?;
    let entries = sweep_hidden_widths(&rows, &a.widths, &cfg)?;
    write_sweep_report(&entries, &a.out)?;
    for e in &entries {
        match &e.fine {
            Some(f) => println!(
                "hidden={} coarse={} fine={}",
                e.hidden_width, e.coarse.overall_accuracy, f.overall_accuracy
            ),
            None => println!("hidden={} coarse={}", e.hidden_width, e.coarse.overall_accuracy),
        }
    }
    Ok(())
}
