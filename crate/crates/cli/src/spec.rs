//! Run configuration: defaults, a flat `key = value` file, then flags.
//!
//! File keys are dotted (`world.clusters`, `laser.divergence`, `run.trials`).
//! Blank lines and lines starting with `#` are ignored. [`RunSpec::render`]
//! writes every key, and its output loads back to the same spec.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;
use uavsim_core::{ConfigError, PolicyKind, Position, Settings, Sweep};

use crate::CliError;

#[derive(Debug, Clone, Parser)]
#[command(
    name = "uavsim",
    version,
    about = "Drone data-collection simulator with charging strategies"
)]
pub struct Args {
    /// noncharged, charged, tethered, laser, all, or a comma list
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Trial i flies seed + i
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "area-km2")]
    pub area_km2: Option<f64>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub stations: Option<usize>,
    /// Mission window, seconds
    #[arg(long)]
    pub window: Option<f64>,
    /// Step length, seconds
    #[arg(long)]
    pub dt: Option<f64>,
    /// Uplink coverage radius, meters
    #[arg(long)]
    pub rcov: Option<f64>,
    /// `stations=1..12`, `window=4000,6000,9000` or `name=a..b:step`
    #[arg(long)]
    pub sweep: Option<String>,
    /// Fly single episodes and write their traces
    #[arg(long)]
    pub trace: bool,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the effective configuration and exit
    #[arg(long = "print-config")]
    pub print_config: bool,
    /// Run the propulsion and laser calibration checks
    #[arg(long)]
    pub calibrate: bool,
    /// episode, montecarlo, sweep-stations, sweep-window or calibrate
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Episode,
    MonteCarlo,
    SweepStations,
    SweepWindow,
    Calibrate,
}

impl Mode {
    const ALL: [Mode; 5] = [
        Mode::Episode,
        Mode::MonteCarlo,
        Mode::SweepStations,
        Mode::SweepWindow,
        Mode::Calibrate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Episode => "episode",
            Mode::MonteCarlo => "montecarlo",
            Mode::SweepStations => "sweep-stations",
            Mode::SweepWindow => "sweep-window",
            Mode::Calibrate => "calibrate",
        }
    }

    fn for_sweep(sweep: &Sweep) -> Mode {
        match sweep {
            Sweep::Stations(_) => Mode::SweepStations,
            Sweep::Window(_) => Mode::SweepWindow,
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub mode: Mode,
    pub policies: Vec<PolicyKind>,
    pub seed: u64,
    pub trials: usize,
    pub out: PathBuf,
    pub sweep: Option<Sweep>,
    pub settings: Settings,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            mode: Mode::MonteCarlo,
            policies: PolicyKind::ALL.to_vec(),
            seed: 1,
            trials: 10_000,
            out: PathBuf::from("."),
            sweep: None,
            settings: Settings::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str, what: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::invalid(key, format!("expected {what}, got `{value}`")))
}

fn real(key: &str, value: &str) -> Result<f64, ConfigError> {
    parse(key, value, "a number")
}

fn count(key: &str, value: &str) -> Result<usize, ConfigError> {
    parse(key, value, "a non-negative integer")
}

pub fn parse_policies(value: &str) -> Result<Vec<PolicyKind>, ConfigError> {
    let bad = |reason: String| ConfigError::invalid("run.policy", reason);
    if value.trim() == "all" {
        return Ok(PolicyKind::ALL.to_vec());
    }
    let mut picked = Vec::new();
    for name in value.split(',').map(str::trim) {
        picked.push(name.parse::<PolicyKind>().map_err(bad)?);
    }
    if picked.is_empty() {
        return Err(bad("no policy given".into()));
    }
    Ok(PolicyKind::ALL
        .into_iter()
        .filter(|k| picked.contains(k))
        .collect())
}

fn render_policies(p: &[PolicyKind]) -> String {
    if p == PolicyKind::ALL {
        "all".into()
    } else {
        p.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(",")
    }
}

/// Parses `name=a..b[:step]` or `name=a,b,c` for `name` in {stations, window}.
pub fn parse_sweep(value: &str) -> Result<Option<Sweep>, ConfigError> {
    const KEY: &str = "run.sweep";
    let value = value.trim();
    if value == "none" {
        return Ok(None);
    }
    let (name, body) = value
        .split_once('=')
        .ok_or_else(|| ConfigError::invalid(KEY, format!("expected name=values, got `{value}`")))?;
    let points: Vec<f64> = if let Some((range, step)) = body.split_once("..").map(|(a, rest)| {
        let (b, step) = rest.split_once(':').unwrap_or((rest, "1"));
        ((a, b), step)
    }) {
        let (a, b) = (real(KEY, range.0)?, real(KEY, range.1)?);
        let step = real(KEY, step)?;
        if !(step > 0.0) || a > b {
            return Err(ConfigError::invalid(KEY, format!("empty range `{body}`")));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| a + i as f64 * step).collect()
    } else {
        body.split(',')
            .map(|v| real(KEY, v.trim()))
            .collect::<Result<_, _>>()?
    };
    if points.is_empty() {
        return Err(ConfigError::invalid(KEY, "no sweep points"));
    }
    match name.trim() {
        "stations" => {
            let ks = points
                .iter()
                .map(|&v| {
                    if v >= 0.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(ConfigError::invalid(
                            KEY,
                            format!("station count {v} is not a whole number"),
                        ))
                    }
                })
                .collect::<Result<_, _>>()?;
            Ok(Some(Sweep::Stations(ks)))
        }
        "window" => {
            if points.iter().any(|&w| !(w > 0.0)) {
                return Err(ConfigError::invalid(KEY, "windows must be positive"));
            }
            Ok(Some(Sweep::Window(points)))
        }
        other => Err(ConfigError::invalid(
            KEY,
            format!("unknown sweep `{other}`, expected stations or window"),
        )),
    }
}

fn render_sweep(s: &Option<Sweep>) -> String {
    match s {
        None => "none".into(),
        Some(Sweep::Stations(ks)) => {
            format!(
                "stations={}",
                ks.iter()
                    .map(|k| k.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            )
        }
        Some(Sweep::Window(ws)) => {
            format!(
                "window={}",
                ws.iter()
                    .map(|w| w.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            )
        }
    }
}

fn parse_start(value: &str) -> Result<Option<Position>, ConfigError> {
    const KEY: &str = "drone.start";
    if value.trim() == "center" {
        return Ok(None);
    }
    let (x, y) = value.split_once(',').ok_or_else(|| {
        ConfigError::invalid(KEY, format!("expected `center` or `x,y`, got `{value}`"))
    })?;
    Ok(Some(Position::new(
        real(KEY, x.trim())?,
        real(KEY, y.trim())?,
    )))
}

impl RunSpec {
    /// Sets one dotted key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let s = &mut self.settings;
        match key {
            "run.mode" => {
                self.mode = v
                    .parse()
                    .map_err(|e: String| ConfigError::invalid(key, e))?
            }
            "run.policy" => self.policies = parse_policies(v)?,
            "run.seed" => self.seed = parse(key, v, "an unsigned integer")?,
            "run.trials" => self.trials = count(key, v)?,
            "run.out" => self.out = PathBuf::from(v),
            "run.sweep" => self.sweep = parse_sweep(v)?,

            "world.area_km2" => s.world.area_km2 = real(key, v)?,
            "world.clusters" => s.world.clusters = count(key, v)?,
            "world.stations" => s.world.stations = count(key, v)?,
            "world.data_min" => s.world.data_min = real(key, v)?,
            "world.data_max" => s.world.data_max = real(key, v)?,

            "drone.altitude_op" => s.drone.altitude_op = real(key, v)?,
            "drone.v_cruise" => s.drone.v_cruise = real(key, v)?,
            "drone.v_climb" => s.drone.v_climb = real(key, v)?,
            "drone.r_cov" => s.drone.r_cov = real(key, v)?,
            "drone.uplink_rate" => s.drone.uplink_rate = real(key, v)?,
            "drone.dock_time" => s.drone.dock_time = real(key, v)?,
            "drone.tether_length" => s.drone.tether_length = real(key, v)?,
            "drone.reserve_frac" => s.drone.reserve_frac = real(key, v)?,
            "drone.charge_resume_frac" => s.drone.charge_resume_frac = real(key, v)?,
            "drone.battery_voltage" => s.drone.battery_voltage = real(key, v)?,
            "drone.battery_mah" => s.drone.battery_mah = real(key, v)?,
            "drone.tethered_serve_untethered" => {
                s.drone.tethered_serve_untethered = parse(key, v, "true or false")?
            }
            "drone.laser_hover_frac" => s.drone.laser_hover_frac = real(key, v)?,
            "drone.start" => s.drone.start = parse_start(v)?,

            "power.p_blade" => s.power.p_blade = real(key, v)?,
            "power.p_induced" => s.power.p_induced = real(key, v)?,
            "power.tip_speed" => s.power.tip_speed = real(key, v)?,
            "power.v_induced_hover" => s.power.v_induced_hover = real(key, v)?,
            "power.drag_coeff" => s.power.drag_coeff = real(key, v)?,
            "power.mass_total" => s.power.mass_total = real(key, v)?,
            "power.gravity" => s.power.gravity = real(key, v)?,

            "laser.source_power" => s.laser.source_power = real(key, v)?,
            "laser.conversion_eff" => s.laser.conversion_eff = real(key, v)?,
            "laser.beam_radius_0" => s.laser.beam_radius_0 = real(key, v)?,
            "laser.divergence" => s.laser.divergence = real(key, v)?,
            "laser.receiver_radius" => s.laser.receiver_radius = real(key, v)?,
            "laser.extinction" => s.laser.extinction = real(key, v)?,

            "charger.power" => s.charger.power = real(key, v)?,

            "sim.dt" => s.sim.dt = real(key, v)?,
            "sim.window" => s.sim.time_window = real(key, v)?,
            "sim.trace_stride" => s.sim.trace_stride = count(key, v)?,

            _ => return Err(ConfigError::invalid(key, "unknown key")),
        }
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.settings;
        let (w, d, p, l) = (&s.world, &s.drone, &s.power, &s.laser);
        vec![
            ("run.mode", self.mode.as_str().to_string()),
            ("run.policy", render_policies(&self.policies)),
            ("run.seed", self.seed.to_string()),
            ("run.trials", self.trials.to_string()),
            ("run.out", self.out.display().to_string()),
            ("run.sweep", render_sweep(&self.sweep)),
            ("world.area_km2", w.area_km2.to_string()),
            ("world.clusters", w.clusters.to_string()),
            ("world.stations", w.stations.to_string()),
            ("world.data_min", w.data_min.to_string()),
            ("world.data_max", w.data_max.to_string()),
            ("drone.altitude_op", d.altitude_op.to_string()),
            ("drone.v_cruise", d.v_cruise.to_string()),
            ("drone.v_climb", d.v_climb.to_string()),
            ("drone.r_cov", d.r_cov.to_string()),
            ("drone.uplink_rate", d.uplink_rate.to_string()),
            ("drone.dock_time", d.dock_time.to_string()),
            ("drone.tether_length", d.tether_length.to_string()),
            ("drone.reserve_frac", d.reserve_frac.to_string()),
            ("drone.charge_resume_frac", d.charge_resume_frac.to_string()),
            ("drone.battery_voltage", d.battery_voltage.to_string()),
            ("drone.battery_mah", d.battery_mah.to_string()),
            (
                "drone.tethered_serve_untethered",
                d.tethered_serve_untethered.to_string(),
            ),
            ("drone.laser_hover_frac", d.laser_hover_frac.to_string()),
            (
                "drone.start",
                d.start
                    .map_or_else(|| "center".to_string(), |q| format!("{},{}", q.x, q.y)),
            ),
            ("power.p_blade", p.p_blade.to_string()),
            ("power.p_induced", p.p_induced.to_string()),
            ("power.tip_speed", p.tip_speed.to_string()),
            ("power.v_induced_hover", p.v_induced_hover.to_string()),
            ("power.drag_coeff", p.drag_coeff.to_string()),
            ("power.mass_total", p.mass_total.to_string()),
            ("power.gravity", p.gravity.to_string()),
            ("laser.source_power", l.source_power.to_string()),
            ("laser.conversion_eff", l.conversion_eff.to_string()),
            ("laser.beam_radius_0", l.beam_radius_0.to_string()),
            ("laser.divergence", l.divergence.to_string()),
            ("laser.receiver_radius", l.receiver_radius.to_string()),
            ("laser.extinction", l.extinction.to_string()),
            ("charger.power", s.charger.power.to_string()),
            ("sim.dt", s.sim.dt.to_string()),
            ("sim.window", s.sim.time_window.to_string()),
            ("sim.trace_stride", s.sim.trace_stride.to_string()),
        ]
    }

    /// The configuration as a loadable file.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (key, value) in self.entries() {
            let head = key.split('.').next().unwrap_or("");
            if head != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = head;
            }
            writeln!(out, "{key} = {value}").expect("write to string");
        }
        out
    }

    /// Applies a config file's text. Returns whether `run.mode` was set.
    pub fn apply_text(&mut self, text: &str) -> Result<bool, ConfigError> {
        let mut mode_set = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::invalid(
                    format!("line {}", i + 1),
                    format!("expected key = value, got `{line}`"),
                )
            })?;
            let key = key.trim();
            self.set(key, value)?;
            mode_set |= key == "run.mode";
        }
        Ok(mode_set)
    }

    pub fn from_file(path: &Path) -> Result<(Self, bool), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut spec = RunSpec::default();
        let mode_set = spec.apply_text(&text)?;
        Ok((spec, mode_set))
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(args: &Args) -> Result<Self, CliError> {
        let (mut spec, mode_set) = match &args.config {
            Some(path) => RunSpec::from_file(path)?,
            None => (RunSpec::default(), false),
        };
        if !mode_set {
            if let Some(sw) = &spec.sweep {
                spec.mode = Mode::for_sweep(sw);
            }
        }
        let s = &mut spec.settings;
        if let Some(v) = args.area_km2 {
            s.world.area_km2 = v;
        }
        if let Some(v) = args.clusters {
            s.world.clusters = v;
        }
        if let Some(v) = args.stations {
            s.world.stations = v;
        }
        if let Some(v) = args.window {
            s.sim.time_window = v;
        }
        if let Some(v) = args.dt {
            s.sim.dt = v;
        }
        if let Some(v) = args.rcov {
            s.drone.r_cov = v;
        }
        if let Some(v) = &args.policy {
            spec.set("run.policy", v)?;
        }
        if let Some(v) = args.trials {
            spec.trials = v;
        }
        if let Some(v) = args.seed {
            spec.seed = v;
        }
        if let Some(v) = &args.out {
            spec.out = v.clone();
        }
        if let Some(v) = &args.sweep {
            spec.set("run.sweep", v)?;
            if let Some(sw) = &spec.sweep {
                spec.mode = Mode::for_sweep(sw);
            }
        }
        if args.trace {
            spec.mode = Mode::Episode;
        }
        if args.calibrate {
            spec.mode = Mode::Calibrate;
        }
        if let Some(v) = &args.mode {
            spec.set("run.mode", v)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.settings.validate()?;
        if self.trials == 0 {
            return Err(ConfigError::invalid("run.trials", "must be at least 1"));
        }
        match (self.mode, &self.sweep) {
            (Mode::SweepStations, Some(Sweep::Stations(_)))
            | (Mode::SweepWindow, Some(Sweep::Window(_))) => Ok(()),
            (Mode::SweepStations, _) => Err(ConfigError::invalid(
                "run.sweep",
                "sweep-stations needs stations=...",
            )),
            (Mode::SweepWindow, _) => Err(ConfigError::invalid(
                "run.sweep",
                "sweep-window needs window=...",
            )),
            (Mode::MonteCarlo, Some(_)) => Err(ConfigError::invalid(
                "run.sweep",
                "a sweep needs mode sweep-stations or sweep-window",
            )),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(argv: &[&str]) -> Args {
        Args::try_parse_from(std::iter::once("uavsim").chain(argv.iter().copied())).unwrap()
    }

    fn resolve(argv: &[&str]) -> Result<RunSpec, CliError> {
        RunSpec::resolve(&args(argv))
    }

    #[test]
    fn no_flags_gives_defaults() {
        let spec = resolve(&[]).unwrap();
        assert_eq!(spec, RunSpec::default());
        let s = &spec.settings;
        assert_eq!(s.world.area_km2, 25.0);
        assert_eq!(s.world.clusters, 18);
        assert_eq!(s.world.stations, 6);
        assert_eq!(s.drone.v_cruise, 6.2);
        assert_eq!(s.drone.uplink_rate, 2e7);
        assert!((s.drone.battery_capacity() - 356_976.0).abs() < 1e-6);
        assert_eq!(s.sim.dt, 1.0);
        assert_eq!(s.sim.time_window, 9000.0);
        assert_eq!(spec.trials, 10_000);
    }

    #[test]
    fn stations_sweep_flags() {
        let spec = resolve(&[
            "--trials",
            "200",
            "--policy",
            "all",
            "--sweep",
            "stations=1..12",
        ])
        .unwrap();
        assert_eq!(spec.mode, Mode::SweepStations);
        assert_eq!(spec.trials, 200);
        assert_eq!(spec.policies, PolicyKind::ALL.to_vec());
        assert_eq!(spec.sweep, Some(Sweep::Stations((1..=12).collect())));
    }

    #[test]
    fn zero_dt_rejected() {
        let err = resolve(&["--dt", "0"]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("dt must be positive"), "{msg}");
        assert!(msg.contains("sim.dt"), "{msg}");
    }

    #[test]
    fn sweep_grammar() {
        assert_eq!(
            parse_sweep("window=4000,6000,9000").unwrap(),
            Some(Sweep::Window(vec![4000.0, 6000.0, 9000.0]))
        );
        assert_eq!(
            parse_sweep("window=3000..9000:3000").unwrap(),
            Some(Sweep::Window(vec![3000.0, 6000.0, 9000.0]))
        );
        assert_eq!(
            parse_sweep("stations=0..6:2").unwrap(),
            Some(Sweep::Stations(vec![0, 2, 4, 6]))
        );
        assert_eq!(parse_sweep("none").unwrap(), None);
        for bad in [
            "stations",
            "speed=1..3",
            "stations=1.5,2",
            "stations=5..1",
            "window=0,10",
            "stations=1..4:0",
        ] {
            assert_eq!(parse_sweep(bad).unwrap_err().key(), "run.sweep", "{bad}");
        }
    }

    #[test]
    fn policy_selector() {
        assert_eq!(
            parse_policies("laser,charged").unwrap(),
            vec![PolicyKind::Charged, PolicyKind::Laser]
        );
        assert_eq!(parse_policies("all").unwrap().len(), 4);
        assert_eq!(parse_policies("solar").unwrap_err().key(), "run.policy");
    }

    #[test]
    fn file_errors_name_the_key() {
        let mut spec = RunSpec::default();
        assert_eq!(
            spec.apply_text("world.colour = red").unwrap_err().key(),
            "world.colour"
        );
        assert_eq!(
            spec.apply_text("world.clusters = many").unwrap_err().key(),
            "world.clusters"
        );
        assert_eq!(
            spec.apply_text("drone.tethered_serve_untethered = 2")
                .unwrap_err()
                .key(),
            "drone.tethered_serve_untethered"
        );
        assert_eq!(
            spec.apply_text("\n# fine\nbroken line").unwrap_err().key(),
            "line 3"
        );
    }

    #[test]
    fn constraint_violation_names_key() {
        let mut spec = RunSpec::default();
        spec.apply_text("drone.reserve_frac = 0.99").unwrap();
        assert_eq!(spec.validate().unwrap_err().key(), "drone.reserve_frac");
    }

    #[test]
    fn printed_config_round_trips() {
        let spec = resolve(&[
            "--policy",
            "laser,tethered",
            "--seed",
            "77",
            "--sweep",
            "window=1000.5,2000",
            "--rcov",
            "123.456",
        ])
        .unwrap();
        let mut back = RunSpec::default();
        back.apply_text(&spec.render()).unwrap();
        assert_eq!(back, spec);

        let mut odd = RunSpec::default();
        odd.settings.drone.start = Some(Position::new(0.1, 1e-7));
        odd.settings.laser.divergence = 4.9e-5;
        odd.settings.world.data_min = 1.0 / 3.0;
        let mut back = RunSpec::default();
        back.apply_text(&odd.render()).unwrap();
        assert_eq!(back, odd);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(
            &path,
            "world.clusters = 5\nrun.sweep = window=100,200\nsim.dt = 2\n",
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let spec = resolve(&["--config", p, "--clusters", "9"]).unwrap();
        assert_eq!(spec.settings.world.clusters, 9);
        assert_eq!(spec.settings.sim.dt, 2.0);
        assert_eq!(spec.mode, Mode::SweepWindow);
        let spec = resolve(&["--config", p, "--trace"]).unwrap();
        assert_eq!(spec.mode, Mode::Episode);
    }
}
