use std::collections::VecDeque;
use std::io::{BufReader, Write};
use std::path::Path;
use std::time::Instant;

use heartstate::io::{
    read_fvid, read_signal_csv, read_weights, write_fvid, write_signal_csv, write_weights,
    FvidStreamReader, WeightStore,
};
use heartstate::model::{self, Model, ModelConfig, ModelError};
use heartstate::signal::{
    error_metrics, estimate_hr, pearson, windowed_hr, BvpSignal, SignalError, MIN_PSD_LEN,
};
use heartstate::synth::{generate, SynthConfig};

use crate::config::Settings;
use crate::{CliError, ConfigArgs, EvalKind, EvalMode};

/// Published per-frame CPU latency the bench output is compared against.
const REFERENCE_LATENCY_MS: f64 = 9.46;
/// Length of the rolling window used for streamed heart-rate reports.
const STREAM_HR_WINDOW_S: f64 = 10.0;

fn settings(args: &ConfigArgs) -> Result<Settings, CliError> {
    Settings::load(args.config.as_deref(), &args.set)
}

/// Shape from the weight file, then config overrides, then the stream's frame rate.
fn load_model(store: &WeightStore, args: &ConfigArgs, fps: f64) -> Result<Model, CliError> {
    let mut cfg = ModelConfig::from_store(store)?;
    settings(args)?.apply_model(&mut cfg)?;
    cfg.fps = fps;
    Ok(Model::new(cfg, store)?)
}

fn check_frame_shape(cfg: &ModelConfig, h: usize, w: usize, c: usize) -> Result<(), CliError> {
    if (h, w, c) != (cfg.input_h, cfg.input_w, cfg.in_channels) {
        return Err(CliError::Usage(format!(
            "video frames are {h}×{w}×{c}, weights expect {}×{}×{}",
            cfg.input_h, cfg.input_w, cfg.in_channels
        )));
    }
    Ok(())
}

fn times(bvp: &BvpSignal) -> Vec<f64> {
    (0..bvp.len()).map(|i| bvp.time(i)).collect()
}

pub fn infer(
    weights: &Path,
    video: &Path,
    out: &Path,
    band: (f64, f64),
    args: &ConfigArgs,
) -> Result<(), CliError> {
    let store = read_weights(weights)?;
    let video = read_fvid(video)?;
    let model = load_model(&store, args, video.fps() as f64)?;
    check_frame_shape(model.config(), video.height(), video.width(), video.channels())?;
    let bvp = model.forward_batch(&video)?;
    write_signal_csv(out, &times(&bvp), bvp.samples())?;
    let est = estimate_hr(&bvp, band)?;
    println!("hr_bpm={:.2} confidence={:.3}", est.bpm, est.peak_power_fraction);
    Ok(())
}

pub fn stream(
    weights: &Path,
    stats_every: u64,
    band: (f64, f64),
    args: &ConfigArgs,
) -> Result<(), CliError> {
    let store = read_weights(weights)?;
    let mut reader = FvidStreamReader::new(BufReader::new(std::io::stdin().lock()))?;
    let header = *reader.header();
    let fps = header.fps as f64;
    let model = load_model(&store, args, fps)?;
    check_frame_shape(
        model.config(),
        header.h as usize,
        header.w as usize,
        header.c as usize,
    )?;
    let mut session = model.stream_open();
    let mut frame = vec![0.0f32; reader.frame_len()];
    let mut out = std::io::stdout().lock();
    let window = ((STREAM_HR_WINDOW_S * fps).round() as usize).max(MIN_PSD_LEN);
    let mut recent = VecDeque::with_capacity(window);
    let mut t: u64 = 0;
    while reader.next_frame(&mut frame)? {
        let time = t as f64 / fps;
        let (value, confident) = match session.step(&frame) {
            Ok(o) => (o.bvp, o.confident),
            Err(ModelError::NonFiniteInput { index }) => {
                log::warn!("frame {t}: non-finite value at element {index}; frame skipped");
                (f64::NAN, false)
            }
            Err(e) => return Err(e.into()),
        };
        writeln!(out, "{time:.9e},{value:.9e},{}", u8::from(confident))?;
        out.flush()?;

        if value.is_finite() {
            if recent.len() == window {
                recent.pop_front();
            }
            recent.push_back(value);
        }
        t += 1;
        if stats_every > 0 && t % stats_every == 0 && recent.len() >= MIN_PSD_LEN {
            let buf: Vec<f64> = recent.iter().copied().collect();
            match BvpSignal::new(buf, fps, 0.0).and_then(|b| estimate_hr(&b, band)) {
                Ok(est) => eprintln!(
                    "frame={t} hr_bpm={:.2} confidence={:.3} warm={}",
                    est.bpm,
                    est.peak_power_fraction,
                    u8::from(confident)
                ),
                Err(e) => log::warn!("frame {t}: rolling heart rate unavailable: {e}"),
            }
        }
    }
    eprintln!("frames={t} state_bytes={}", session.to_bytes().len());
    Ok(())
}

pub struct SynthFlags {
    pub hr: Option<f64>,
    pub duration: Option<f64>,
    pub fps: Option<f64>,
    pub seed: Option<u64>,
    pub noise_sigma: Option<f64>,
}

pub fn synth(flags: SynthFlags, out: &Path, gt_out: &Path, args: &ConfigArgs) -> Result<(), CliError> {
    let mut cfg = SynthConfig::default();
    settings(args)?.apply_synth(&mut cfg)?;
    if let Some(v) = flags.hr {
        cfg.hr_bpm = v;
    }
    if let Some(v) = flags.duration {
        cfg.duration_s = v;
    }
    if let Some(v) = flags.fps {
        cfg.fps = v;
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.noise_sigma {
        cfg.noise_sigma = v;
    }
    let res = generate(&cfg)?;
    write_fvid(&res.video, out)?;
    write_signal_csv(gt_out, &times(&res.gt_bvp), res.gt_bvp.samples())?;
    println!(
        "frames={} hr_bpm={:.2} fps={}",
        res.video.frames(),
        res.gt_hr,
        cfg.fps
    );
    Ok(())
}

fn read_bvp(path: &Path) -> Result<BvpSignal, CliError> {
    let (t, v) = read_signal_csv(path)?;
    if t.len() < 2 {
        return Err(CliError::Numeric(format!(
            "{}: need at least 2 samples",
            path.display()
        )));
    }
    let span = t[t.len() - 1] - t[0];
    if !(span > 0.0) {
        return Err(CliError::Numeric(format!(
            "{}: timestamps must increase",
            path.display()
        )));
    }
    let fps = (t.len() - 1) as f64 / span;
    Ok(BvpSignal::new(v, fps, t[0])?)
}

fn hr_series(
    bvp: &BvpSignal,
    mode: EvalMode,
    window: f64,
    hop: f64,
    band: (f64, f64),
) -> Result<Vec<f64>, SignalError> {
    Ok(match mode {
        EvalMode::Video => vec![estimate_hr(bvp, band)?.bpm],
        EvalMode::Window => windowed_hr(bvp, window, hop, band)?
            .into_iter()
            .map(|(_, e)| e.bpm)
            .collect(),
    })
}

pub fn eval(
    pred: &Path,
    gt: &Path,
    kind: EvalKind,
    mode: EvalMode,
    window: f64,
    hop: f64,
    band: (f64, f64),
) -> Result<(), CliError> {
    let (p, g) = match kind {
        EvalKind::Hr => (read_signal_csv(pred)?.1, read_signal_csv(gt)?.1),
        EvalKind::Bvp => {
            let (pb, gb) = (read_bvp(pred)?, read_bvp(gt)?);
            if pb.len() != gb.len() {
                return Err(SignalError::LengthMismatch {
                    pred: pb.len(),
                    gt: gb.len(),
                }
                .into());
            }
            (
                hr_series(&pb, mode, window, hop, band)?,
                hr_series(&gb, mode, window, hop, band)?,
            )
        }
    };
    let (mae, rmse) = error_metrics(&p, &g)?;
    let r = match pearson(&p, &g) {
        Ok(r) => r,
        Err(SignalError::ZeroVariance) => {
            eprintln!("note: pearson r undefined (a heart-rate series is constant)");
            f64::NAN
        }
        Err(e) => return Err(e.into()),
    };
    println!("mae={mae:.2} rmse={rmse:.2} r={r:.3}");
    Ok(())
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn bench(weights: &Path, frames: usize, warmup: usize, args: &ConfigArgs) -> Result<(), CliError> {
    if frames == 0 {
        return Err(CliError::Usage("--frames must be at least 1".into()));
    }
    let store = read_weights(weights)?;
    let mut cfg = ModelConfig::from_store(&store)?;
    settings(args)?.apply_model(&mut cfg)?;
    let model = Model::new(cfg.clone(), &store)?;
    let clip = generate(&SynthConfig {
        h: cfg.input_h,
        w: cfg.input_w,
        channels: cfg.in_channels,
        fps: cfg.fps,
        duration_s: 10.0,
        ..SynthConfig::default()
    })?
    .video;
    let mut session = model.stream_open();
    let mut lat = Vec::with_capacity(frames);
    for i in 0..warmup + frames {
        let frame = clip.frame(i % clip.frames());
        let start = Instant::now();
        let out = session.step(frame)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(out);
        if i >= warmup {
            lat.push(ms);
        }
    }
    lat.sort_by(f64::total_cmp);
    println!(
        "frames={frames} p50_ms={:.3} p95_ms={:.3} p99_ms={:.3} state_bytes={} params={} params_closed_form={} macs_per_frame={} reference_latency_ms={REFERENCE_LATENCY_MS}",
        percentile(&lat, 0.50),
        percentile(&lat, 0.95),
        percentile(&lat, 0.99),
        session.to_bytes().len(),
        model::store_param_count(&store),
        model::param_count(&cfg),
        cfg.macs_per_frame(),
    );
    Ok(())
}

pub fn init_weights(
    seed: Option<u64>,
    out: &Path,
    oracle: bool,
    args: &ConfigArgs,
) -> Result<(), CliError> {
    let mut cfg = ModelConfig::default();
    settings(args)?.apply_model(&mut cfg)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let store = if oracle {
        model::oracle_filterbank(&cfg)?
    } else {
        model::init_weights(&cfg, cfg.seed)?
    };
    write_weights(&store, out)?;
    println!(
        "params={} tensors={}",
        model::store_param_count(&store),
        store.len()
    );
    Ok(())
}
