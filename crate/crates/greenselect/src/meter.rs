//! Wall-clock and OS-counter energy meters, plus meter selection.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use greenselect_core::energy::{counter_delta, proxy_energy_uwh, uj_to_uwh};
use greenselect_core::{Clock, CostModel, EnergyMeter, EnergySample, EnergySource, Error, ModeledMeter, Result};

/// Colon-separated list of cumulative `energy_uj` counter files to read.
pub const COUNTER_ENV: &str = "GREENSELECT_ENERGY_COUNTERS";
const POWERCAP_ROOT: &str = "/sys/class/powercap";
pub const DEFAULT_PROXY_WATTS: f64 = 10.0;

/// Monotonic clock backed by [`Instant`].
#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    origin: Instant,
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for MonotonicClock {
    fn now_ns(&self) -> u64 {
        self.origin.elapsed().as_nanos() as u64
    }
}

/// Charges a constant power draw for the wall-clock length of a section.
#[derive(Debug)]
pub struct ProxyMeter {
    watts: f64,
    started: Option<Instant>,
}

impl ProxyMeter {
    pub fn new(watts: f64) -> Result<Self> {
        if !(watts.is_finite() && watts >= 0.0) {
            return Err(Error::Meter(format!("proxy power {watts} W must be finite and non-negative")));
        }
        Ok(Self { watts, started: None })
    }

    pub fn watts(&self) -> f64 {
        self.watts
    }
}

impl EnergyMeter for ProxyMeter {
    fn source(&self) -> EnergySource {
        EnergySource::WallclockProxy
    }

    fn begin(&mut self) -> Result<()> {
        self.started = Some(Instant::now());
        Ok(())
    }

    fn end(&mut self) -> Result<EnergySample> {
        let started = self
            .started
            .take()
            .ok_or_else(|| Error::Meter("proxy meter: end() without begin()".into()))?;
        let duration_ms = started.elapsed().as_secs_f64() * 1e3;
        Ok(EnergySample {
            energy_uwh: proxy_energy_uwh(duration_ms, self.watts),
            duration_ms,
            source: EnergySource::WallclockProxy,
        })
    }
}

/// One cumulative microjoule counter and the value at which it wraps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnergyCounter {
    pub path: PathBuf,
    pub max_range_uj: u64,
}

impl EnergyCounter {
    /// Reads `max_energy_range_uj` next to `path` when present.
    pub fn at(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let range_file = path.with_file_name("max_energy_range_uj");
        let max_range_uj = if range_file.exists() { read_uj(&range_file)? } else { u64::MAX };
        Ok(Self { path, max_range_uj })
    }

    pub fn read(&self) -> Result<u64> {
        read_uj(&self.path)
    }
}

fn read_uj(path: &Path) -> Result<u64> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::PermissionDenied => {
            Error::Meter(format!("permission denied reading {}", path.display()))
        }
        _ => Error::Meter(format!("cannot read {}: {e}", path.display())),
    })?;
    text.trim()
        .parse()
        .map_err(|_| Error::Meter(format!("{} does not hold an integer: {:?}", path.display(), text.trim())))
}

/// Counter files from `GREENSELECT_ENERGY_COUNTERS`, or else every top-level
/// powercap package zone (`intel-rapl:N`, not its subzones).
pub fn discover_counters() -> Vec<PathBuf> {
    if let Ok(list) = std::env::var(COUNTER_ENV) {
        return std::env::split_paths(&list).filter(|p| !p.as_os_str().is_empty()).collect();
    }
    let Ok(entries) = fs::read_dir(POWERCAP_ROOT) else {
        return Vec::new();
    };
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .filter(|e| {
            let name = e.file_name();
            let name = name.to_string_lossy();
            name.matches(':').count() == 1
        })
        .map(|e| e.path().join("energy_uj"))
        .filter(|p| p.exists())
        .collect();
    found.sort();
    found
}

/// Sums the deltas of one or more cumulative package-energy counters.
#[derive(Debug)]
pub struct OsCounterMeter {
    counters: Vec<EnergyCounter>,
    before: Option<(Instant, Vec<u64>)>,
}

impl OsCounterMeter {
    pub fn new(counters: Vec<EnergyCounter>) -> Result<Self> {
        if counters.is_empty() {
            return Err(Error::Meter("no energy counters available".into()));
        }
        // Fail now rather than mid-run if a counter is unreadable.
        for c in &counters {
            c.read()?;
        }
        Ok(Self { counters, before: None })
    }

    pub fn discover() -> Result<Self> {
        let counters = discover_counters()
            .into_iter()
            .map(EnergyCounter::at)
            .collect::<Result<Vec<_>>>()?;
        Self::new(counters)
    }

    pub fn counters(&self) -> &[EnergyCounter] {
        &self.counters
    }
}

impl EnergyMeter for OsCounterMeter {
    fn source(&self) -> EnergySource {
        EnergySource::OsCounter
    }

    fn begin(&mut self) -> Result<()> {
        let readings = self.counters.iter().map(EnergyCounter::read).collect::<Result<Vec<_>>>()?;
        self.before = Some((Instant::now(), readings));
        Ok(())
    }

    fn end(&mut self) -> Result<EnergySample> {
        let after = self.counters.iter().map(EnergyCounter::read).collect::<Result<Vec<_>>>()?;
        let (started, before) = self
            .before
            .take()
            .ok_or_else(|| Error::Meter("os counter meter: end() without begin()".into()))?;
        let uj: u64 = self
            .counters
            .iter()
            .zip(before.iter().zip(&after))
            .map(|(c, (&b, &a))| counter_delta(b, a, c.max_range_uj))
            .sum();
        Ok(EnergySample {
            energy_uwh: uj_to_uwh(uj as f64),
            duration_ms: started.elapsed().as_secs_f64() * 1e3,
            source: EnergySource::OsCounter,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeterChoice {
    Modeled,
    Proxy,
    OsCounter,
}

impl FromStr for MeterChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "modeled" => Ok(Self::Modeled),
            "proxy" => Ok(Self::Proxy),
            "oscounter" => Ok(Self::OsCounter),
            other => Err(format!("unknown meter {other:?}; expected modeled, proxy or oscounter")),
        }
    }
}

impl fmt::Display for MeterChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Modeled => "modeled",
            Self::Proxy => "proxy",
            Self::OsCounter => "oscounter",
        })
    }
}

/// Builds the requested meter. An unavailable OS counter falls back to the
/// proxy meter with a warning.
pub fn build_meter(choice: MeterChoice, costs: &CostModel, proxy_watts: f64) -> Result<Box<dyn EnergyMeter>> {
    match choice {
        MeterChoice::Modeled => Ok(Box::new(ModeledMeter::new(costs.clone())?)),
        MeterChoice::Proxy => Ok(Box::new(ProxyMeter::new(proxy_watts)?)),
        MeterChoice::OsCounter => match OsCounterMeter::discover() {
            Ok(m) => {
                log::info!("energy: reading {} OS counter(s)", m.counters().len());
                Ok(Box::new(m))
            }
            Err(e) => {
                log::warn!("energy: OS counter unavailable ({e}); falling back to {proxy_watts} W wall-clock proxy");
                Ok(Box::new(ProxyMeter::new(proxy_watts)?))
            }
        },
    }
}
