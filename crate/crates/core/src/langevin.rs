//! Stratonovich Langevin simulation of escape events.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::fw::{DriftModel, Vec2};
use crate::models::{Macrospin, MaierStein, Vec3};

/// `dx = F(x) dt + sqrt(eps) B(x) o dW` with states stored in three components.
pub trait StochasticModel: Sync {
    fn drift_at(&self, s: &Vec3) -> Vec3;
    /// `B(s) w` without the `sqrt(eps)` factor.
    fn noise(&self, s: &Vec3, w: &Vec3) -> Vec3;
    /// Positive inside the basin of the initial state, non-positive once escaped.
    fn basin_margin_at(&self, s: &Vec3) -> f64;
    fn check_state(&self, s: &Vec3) -> Result<()>;
    fn project(&self, _s: &mut Vec3) {}
}

impl StochasticModel for MaierStein {
    fn drift_at(&self, s: &Vec3) -> Vec3 {
        let f = self.drift(&Vec2::new(s[0], s[1]));
        Vec3::new(f[0], f[1], 0.0)
    }

    fn noise(&self, _s: &Vec3, w: &Vec3) -> Vec3 {
        Vec3::new(w[0], w[1], 0.0)
    }

    /// Basin of `(1, 0)`: `x > 0`.
    fn basin_margin_at(&self, s: &Vec3) -> f64 {
        s[0]
    }

    fn check_state(&self, s: &Vec3) -> Result<()> {
        ensure_finite(s.as_slice(), "state")?;
        if s[2] != 0.0 {
            return Err(Error::Domain("planar state must have a zero third component".into()));
        }
        Ok(())
    }
}

impl StochasticModel for Macrospin {
    fn drift_at(&self, s: &Vec3) -> Vec3 {
        self.drift(s)
    }

    /// `B w = -m x w + alpha (w - (m . w) m)`.
    fn noise(&self, s: &Vec3, w: &Vec3) -> Vec3 {
        -s.cross(w) + self.alpha * (w - s.dot(w) * s)
    }

    fn basin_margin_at(&self, s: &Vec3) -> f64 {
        self.basin_margin(s)
    }

    fn check_state(&self, s: &Vec3) -> Result<()> {
        ensure_finite(s.as_slice(), "state")?;
        if (s.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("magnetisation must be a unit vector".into()));
        }
        Ok(())
    }

    fn project(&self, s: &mut Vec3) {
        s.normalize_mut();
    }
}

/// One Heun predictor-corrector step; `dw` holds the Wiener increments over `h`.
pub fn heun_step<M: StochasticModel + ?Sized>(model: &M, s: &Vec3, h: f64, noise: f64, dw: &Vec3) -> Vec3 {
    let scale = noise.sqrt();
    let f0 = model.drift_at(s);
    let b0 = model.noise(s, dw);
    let mut pred = s + f0 * h + b0 * scale;
    model.project(&mut pred);
    let f1 = model.drift_at(&pred);
    let b1 = model.noise(&pred, dw);
    let mut next = s + 0.5 * (f0 + f1) * h + 0.5 * (b0 + b1) * scale;
    model.project(&mut next);
    next
}

/// Records the state at the last downward crossing of `coordinate[axis] = level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub axis: usize,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub noise: f64,
    pub step: f64,
    pub max_time: f64,
    pub realizations: usize,
    pub initial: [f64; 3],
    /// Escape is declared once the basin margin drops to `-stop_tol` or below.
    #[serde(default)]
    pub stop_tol: f64,
    pub seed: u64,
    #[serde(default)]
    pub probe: Option<Probe>,
    /// Keep every `path_stride`-th state of escaping paths.
    #[serde(default)]
    pub path_stride: Option<usize>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_finite(&[self.noise, self.step, self.max_time, self.stop_tol], "simulation parameter")?;
        ensure_finite(&self.initial, "initial state")?;
        if !(self.noise > 0.0) {
            return Err(Error::Config(format!("noise strength must be positive, got {}", self.noise)));
        }
        if !(self.step > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {}", self.step)));
        }
        if !(self.max_time > 0.0) {
            return Err(Error::Config(format!("max time must be positive, got {}", self.max_time)));
        }
        if self.realizations == 0 {
            return Err(Error::Config("realization count must be at least 1".into()));
        }
        if self.stop_tol < 0.0 {
            return Err(Error::Config("stop tolerance must be non-negative".into()));
        }
        if let Some(p) = self.probe {
            if p.axis > 2 || !p.level.is_finite() {
                return Err(Error::Config("probe axis must be 0, 1 or 2 with a finite level".into()));
            }
        }
        if self.path_stride == Some(0) {
            return Err(Error::Config("path stride must be at least 1".into()));
        }
        Ok(())
    }

    fn steps(&self) -> u64 {
        (self.max_time / self.step).ceil() as u64
    }
}

/// Per-realization generator: the master seed picks the key, the index the stream.
pub fn realization_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn draw(rng: &mut ChaCha8Rng, sqrt_h: f64) -> Vec3 {
    Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)) * sqrt_h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeEvent {
    pub realization: usize,
    pub seed: u64,
    pub exit_time: f64,
    pub exit_point: [f64; 3],
    pub probe_point: Option<[f64; 3]>,
    /// `(t, state)` every `path_stride` steps, ending at the exit.
    pub path: Vec<(f64, [f64; 3])>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Escaped(EscapeEvent),
    Censored,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub events: Vec<EscapeEvent>,
    /// Realizations that reached `max_time` inside the basin.
    pub censored: Vec<usize>,
    pub aborted: Vec<(usize, String)>,
}

impl SimResult {
    pub fn escape_fraction(&self) -> f64 {
        let n = self.events.len() + self.censored.len() + self.aborted.len();
        self.events.len() as f64 / n.max(1) as f64
    }

    /// Probe coordinate `axis` of every event that crossed the probe.
    pub fn probe_values(&self, axis: usize) -> Vec<f64> {
        self.events.iter().filter_map(|e| e.probe_point.map(|p| p[axis])).collect()
    }
}

fn run_one<M: StochasticModel + ?Sized>(model: &M, config: &SimConfig, index: usize) -> Outcome {
    let mut rng = realization_rng(config.seed, index);
    let h = config.step;
    let sqrt_h = h.sqrt();
    let mut s = Vec3::from(config.initial);
    let mut probe = None;
    let mut path = Vec::new();
    if config.path_stride.is_some() {
        path.push((0.0, config.initial));
    }
    for k in 1..=config.steps() {
        let dw = draw(&mut rng, sqrt_h);
        let next = heun_step(model, &s, h, config.noise, &dw);
        if !next.iter().all(|v| v.is_finite()) {
            return Outcome::Aborted(format!("non-finite state at t = {}", k as f64 * h));
        }
        if let Some(p) = config.probe {
            let (a, b) = (s[p.axis] - p.level, next[p.axis] - p.level);
            if a > 0.0 && b <= 0.0 {
                let w = a / (a - b);
                probe = Some((s + w * (next - s)).into());
            }
        }
        s = next;
        let t = k as f64 * h;
        if let Some(stride) = config.path_stride {
            if k as usize % stride == 0 {
                path.push((t, s.into()));
            }
        }
        if model.basin_margin_at(&s) <= -config.stop_tol {
            if config.path_stride.is_some() && path.last().map(|p| p.0) != Some(t) {
                path.push((t, s.into()));
            }
            return Outcome::Escaped(EscapeEvent {
                realization: index,
                seed: config.seed,
                exit_time: t,
                exit_point: s.into(),
                probe_point: probe,
                path,
            });
        }
    }
    Outcome::Censored
}

/// Runs independent realizations from `config.initial` until each leaves the basin
/// or reaches `max_time`. Results are in realization order.
pub fn simulate_escapes<M: StochasticModel + ?Sized>(model: &M, config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let s0 = Vec3::from(config.initial);
    model.check_state(&s0)?;
    if model.basin_margin_at(&s0) <= 0.0 {
        return Err(Error::Domain("initial state is outside the basin".into()));
    }
    let outcomes: Vec<Outcome> = (0..config.realizations).into_par_iter().map(|i| run_one(model, config, i)).collect();
    let mut result = SimResult { events: Vec::new(), censored: Vec::new(), aborted: Vec::new() };
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Outcome::Escaped(e) => result.events.push(e),
            Outcome::Censored => result.censored.push(i),
            Outcome::Aborted(msg) => result.aborted.push((i, msg)),
        }
    }
    Ok(result)
}

/// Samples `observable` every `every` time units after `burn_in`, over independent
/// realizations without a stop set.
pub fn sample_stationary<M, O>(
    model: &M,
    config: &SimConfig,
    burn_in: f64,
    every: f64,
    per_realization: usize,
    observable: O,
) -> Result<Vec<f64>>
where
    M: StochasticModel + ?Sized,
    O: Fn(&Vec3) -> f64 + Sync,
{
    config.validate()?;
    ensure_finite(&[burn_in, every], "sampling schedule")?;
    if !(every > 0.0) || burn_in < 0.0 || per_realization == 0 {
        return Err(Error::Config("sampling needs every > 0, burn_in >= 0 and at least one sample".into()));
    }
    let s0 = Vec3::from(config.initial);
    model.check_state(&s0)?;
    let h = config.step;
    let burn = (burn_in / h).round() as usize;
    let gap = ((every / h).round() as usize).max(1);
    let runs: Vec<Result<Vec<f64>>> = (0..config.realizations)
        .into_par_iter()
        .map(|i| {
            let mut rng = realization_rng(config.seed, i);
            let mut s = s0;
            let mut out = Vec::with_capacity(per_realization);
            for k in 1..=burn + gap * per_realization {
                let dw = draw(&mut rng, h.sqrt());
                s = heun_step(model, &s, h, config.noise, &dw);
                if !s.iter().all(|v| v.is_finite()) {
                    return Err(Error::Domain(format!("non-finite state in realization {i}")));
                }
                if k > burn && (k - burn) % gap == 0 {
                    out.push(observable(&s));
                }
            }
            Ok(out)
        })
        .collect();
    Ok(runs.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

/// Energy law `exp(-alpha eps / (noise (1 + alpha^2)))` of the unpolarised macrospin,
/// tabulated on a midpoint grid in `(m_z, phi)`.
#[derive(Debug, Clone)]
pub struct StationaryEnergyLaw {
    pub beta: f64,
    energies: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StationaryEnergyLaw {
    pub fn new(model: &Macrospin, noise: f64, resolution: usize) -> Result<Self> {
        if model.current != 0.0 {
            return Err(Error::Domain("the stationary energy law needs zero current".into()));
        }
        if !(noise > 0.0) {
            return Err(Error::Config(format!("noise strength must be positive, got {noise}")));
        }
        let a = model.alpha;
        Self::with_beta(model, a / (noise * (1.0 + a * a)), resolution)
    }

    /// Same tabulation for an arbitrary inverse temperature.
    pub fn with_beta(model: &Macrospin, beta: f64, resolution: usize) -> Result<Self> {
        if resolution < 8 {
            return Err(Error::TooFewPoints { needed: 8, got: resolution });
        }
        let n = resolution;
        let mut cells = Vec::with_capacity(n * n);
        for i in 0..n {
            let z = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
            for j in 0..n {
                let phi = std::f64::consts::TAU * (j as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let e = model.energy(&Vec3::new(r * phi.cos(), r * phi.sin(), z));
                cells.push((e, (-beta * e).exp()));
            }
        }
        cells.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(cells.len());
        for c in &cells {
            acc += c.1;
            cumulative.push(acc);
        }
        cumulative.iter_mut().for_each(|c| *c /= acc);
        Ok(Self { beta, energies: cells.into_iter().map(|c| c.0).collect(), cumulative })
    }

    pub fn cdf(&self, energy: f64) -> f64 {
        let k = self.energies.partition_point(|&e| e <= energy);
        if k == 0 { 0.0 } else { self.cumulative[k - 1] }
    }
}
