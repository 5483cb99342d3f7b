//! Stochastic models of the Overhauser dephasing field.
//!
//! Two regimes: a quasi-static Gaussian offset (correlation time effectively
//! infinite compared to the gate) and an Ornstein-Uhlenbeck process with
//! finite correlation time, integrated by Euler-Maruyama. All values are in
//! rad/us; times in us.
//!
//! Reproducibility: every Monte-Carlo realization owns a ChaCha substream
//! derived from (master seed, realization index), so parallel and serial
//! runs produce bit-identical draws.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// RNG substream for realization `index` under `master_seed`. Streams are
/// independent ChaCha nonces, so any subset can be generated in any order.
pub fn substream(master_seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Quasi-static Gaussian field: a constant drawn once per realization.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuasiStaticGaussian {
    pub mean: f64,
    pub std_dev: f64,
}

impl QuasiStaticGaussian {
    pub fn new(mean: f64, std_dev: f64) -> Result<Self> {
        if !(std_dev >= 0.0) || !std_dev.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidNoise(format!(
                "quasi-static Gaussian needs finite mean and std_dev >= 0, got ({mean}, {std_dev})"
            )));
        }
        Ok(Self { mean, std_dev })
    }

    /// Centered Gaussian with standard deviation `std_dev`.
    pub fn centered(std_dev: f64) -> Result<Self> {
        Self::new(0.0, std_dev)
    }

    /// One draw from N(mean, std_dev^2).
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.std_dev == 0.0 {
            return self.mean;
        }
        let normal = Normal::new(self.mean, self.std_dev).expect("validated at construction");
        normal.sample(rng)
    }
}

/// Ornstein-Uhlenbeck parameters for
/// d delta0 = -((delta0 - mu)/tau_e) dt + sigma * sqrt(2/tau_e) dW.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OuParams {
    pub mean: f64,
    pub std_dev: f64,
    /// Correlation time tau_e in us.
    pub correlation_time: f64,
    /// Euler-Maruyama step in us; must satisfy dt <= tau_e / 10.
    pub dt: f64,
    pub seed: u64,
}

impl OuParams {
    pub fn new(mean: f64, std_dev: f64, correlation_time: f64, dt: f64, seed: u64) -> Result<Self> {
        if !(correlation_time > 0.0) {
            return Err(Error::InvalidNoise(format!(
                "OU correlation time must be positive, got {correlation_time}"
            )));
        }
        if !(std_dev >= 0.0) {
            return Err(Error::InvalidNoise(format!(
                "OU std_dev must be >= 0, got {std_dev}"
            )));
        }
        let limit = correlation_time / 10.0;
        if !(dt > 0.0) || dt > limit {
            return Err(Error::OuStepTooLarge { dt, limit });
        }
        Ok(Self {
            mean,
            std_dev,
            correlation_time,
            dt,
            seed,
        })
    }
}

/// A sampled dephasing trajectory delta0(t) on a uniform grid covering
/// [0, T]. Lookup is zero-order hold (piecewise constant between grid
/// points).
#[derive(Clone, Debug)]
pub struct NoiseTrajectory {
    dt: f64,
    values: Vec<f64>,
}

impl NoiseTrajectory {
    /// Constant trajectory (handy for the quasi-static limit).
    pub fn constant(value: f64, t_total: f64, dt: f64) -> Self {
        let n = (t_total / dt).ceil() as usize + 1;
        Self {
            dt,
            values: vec![value; n],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| k as f64 * self.dt)
    }

    /// Zero-order-hold lookup; clamps beyond the last grid point.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = (t / self.dt).floor();
        let idx = if k < 0.0 { 0 } else { k as usize };
        self.values[idx.min(self.values.len() - 1)]
    }

    /// CSV dump with columns `t_us, delta0_rad_per_us`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_us,delta0_rad_per_us")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", k as f64 * self.dt, v)?;
        }
        Ok(())
    }
}

/// Euler-Maruyama OU trajectory over [0, T], seeded from `params.seed`.
pub fn ou_trajectory(params: &OuParams, t_total: f64) -> Result<NoiseTrajectory> {
    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
    ou_trajectory_with(params, t_total, &mut rng)
}

/// Euler-Maruyama OU trajectory drawing from a caller-owned stream.
/// The initial value comes from the stationary distribution N(mu, sigma^2).
pub fn ou_trajectory_with(
    params: &OuParams,
    t_total: f64,
    rng: &mut impl Rng,
) -> Result<NoiseTrajectory> {
    if !(t_total > 0.0) {
        return Err(Error::InvalidNoise(format!(
            "OU trajectory length must be positive, got {t_total}"
        )));
    }
    // revalidate so hand-built params cannot bypass the dt invariant
    let p = OuParams::new(
        params.mean,
        params.std_dev,
        params.correlation_time,
        params.dt,
        params.seed,
    )?;
    let n = (t_total / p.dt).ceil() as usize + 1;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut values = Vec::with_capacity(n);
    let mut x = p.mean + p.std_dev * unit.sample(rng);
    values.push(x);
    let drift = p.dt / p.correlation_time;
    let diffusion = p.std_dev * (2.0 * p.dt / p.correlation_time).sqrt();
    for _ in 1..n {
        x = x - (x - p.mean) * drift + diffusion * unit.sample(rng);
        values.push(x);
    }
    Ok(NoiseTrajectory { dt: p.dt, values })
}
