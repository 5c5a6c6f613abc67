use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::rapl::{discover_domains, rapl_delta, read_rapl_counter};
use super::{integrate_energy, BackendKind, EnergyReport, Phase, PowerSample, TrackerConfig};
use crate::error::{Error, Result};

static ACTIVE: AtomicBool = AtomicBool::new(false);

/// Serialises tests that track energy; the tracker itself refuses overlap.
#[cfg(test)]
pub(crate) static TEST_LOCK: std::sync::Mutex<()> = std::sync::Mutex::new(());

struct ActiveGuard;

impl ActiveGuard {
    fn acquire() -> Result<Self> {
        ACTIVE
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map(|_| ActiveGuard)
            .map_err(|_| Error::TrackerBusy)
    }
}

impl Drop for ActiveGuard {
    fn drop(&mut self) {
        ACTIVE.store(false, Ordering::Release);
    }
}

/// Runs `workload` under energy tracking and passes its return value back
/// with the phase report.
///
/// Only one tracker may be active per process: hardware counters are
/// machine-global, so overlapping measurements would double count.
pub fn track<T>(
    workload: impl FnOnce() -> T,
    cfg: &TrackerConfig,
    label: &str,
    phase: Phase,
) -> Result<(T, EnergyReport)> {
    cfg.validate()?;
    let _guard = ActiveGuard::acquire()?;
    let interval = Duration::from_millis(cfg.sampling_interval_ms);
    let (out, duration_s, energy_kwh, sample_count) = match cfg.backend {
        BackendKind::ConstantPower => {
            let (out, samples) = sample_constant(workload, cfg.constant_watts, interval);
            let duration = samples.last().map_or(0.0, |s| s.t);
            (out, duration, integrate_energy(&samples)?, samples.len())
        }
        BackendKind::TraceReplay => {
            let path = cfg.trace_path.as_deref().expect("validated");
            let trace = read_trace(path)?;
            let energy = integrate_energy(&trace)?;
            let start = Instant::now();
            let out = workload();
            (out, start.elapsed().as_secs_f64(), energy, trace.len())
        }
        BackendKind::Rapl => measure_rapl(workload, &cfg.rapl_root, interval)?,
    };
    let report = EnergyReport::new(
        label,
        phase,
        duration_s,
        energy_kwh,
        cfg.backend,
        cfg.carbon_intensity_g_per_kwh,
        sample_count,
    );
    Ok((out, report))
}

fn sample_constant<T>(workload: impl FnOnce() -> T, watts: f64, interval: Duration) -> (T, Vec<PowerSample>) {
    let start = Instant::now();
    let (stop_tx, stop_rx) = mpsc::channel::<()>();
    let sampler = thread::spawn(move || {
        let mut ticks = Vec::new();
        while let Err(RecvTimeoutError::Timeout) = stop_rx.recv_timeout(interval) {
            ticks.push(start.elapsed().as_secs_f64());
        }
        ticks
    });
    let out = workload();
    let end = start.elapsed().as_secs_f64();
    let _ = stop_tx.send(());
    let ticks = sampler.join().unwrap_or_default();

    let mut samples = vec![PowerSample { t: 0.0, watts }];
    for t in ticks.into_iter().filter(|&t| t > 0.0 && t < end) {
        if t > samples[samples.len() - 1].t {
            samples.push(PowerSample { t, watts });
        }
    }
    if end > samples[samples.len() - 1].t {
        samples.push(PowerSample { t: end, watts });
    }
    (out, samples)
}

fn measure_rapl<T>(workload: impl FnOnce() -> T, root: &Path, interval: Duration) -> Result<(T, f64, f64, usize)> {
    let domains = discover_domains(root)?;
    let first: Vec<u64> = domains.iter().map(read_rapl_counter).collect::<Result<_>>()?;

    let start = Instant::now();
    let (stop_tx, stop_rx) = mpsc::channel::<()>();
    let sampler_domains = domains.clone();
    // reading at every tick keeps at most one wrap between consecutive reads
    let sampler = thread::spawn(move || -> Result<(u128, usize)> {
        let mut last = first;
        let mut total: u128 = 0;
        let mut reads = 1;
        loop {
            let stop = !matches!(stop_rx.recv_timeout(interval), Err(RecvTimeoutError::Timeout));
            for (d, prev) in sampler_domains.iter().zip(last.iter_mut()) {
                let cur = read_rapl_counter(d)?;
                total += u128::from(rapl_delta(*prev, cur, d.max_range_uj));
                *prev = cur;
            }
            reads += 1;
            if stop {
                return Ok((total, reads));
            }
        }
    });
    let out = workload();
    let duration = start.elapsed().as_secs_f64();
    let _ = stop_tx.send(());
    let (micro_joules, reads) = sampler.join().map_err(|_| Error::Backend {
        message: "RAPL sampler thread panicked".into(),
        path: root.to_path_buf(),
    })??;
    Ok((out, duration, micro_joules as f64 / 1e6 / super::JOULES_PER_KWH, reads))
}

/// Reads a `t_s,watts` power trace.
pub fn read_trace(path: &Path) -> Result<Vec<PowerSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Trace(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Trace(format!("row {i} of {} is not a (t_s, watts) pair", path.display())))
        };
        let watts = field(1)?;
        if watts < 0.0 {
            return Err(Error::Trace(format!("negative power on row {i} of {}", path.display())));
        }
        out.push(PowerSample { t: field(0)?, watts });
    }
    Ok(out)
}
