//! Base-parameter orbits and orbit averages.

use crate::error::{Error, Result};
use crate::stats::{batch_means, BatchAccumulator, Estimate};
use crate::systems::SystemDef;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};

pub const DEFAULT_SPINUP: usize = 1000;

/// Magnitude of the roundoff-scale jitter added to degenerate orbits.
const DITHER: f64 = 1.0 / (1u64 << 50) as f64;

#[derive(Clone, Debug, PartialEq)]
pub enum OrbitStart {
    /// Random point in the chart drawn from this seed.
    Seed(u64),
    Point(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct OrbitSpec {
    pub start: OrbitStart,
    pub spinup: usize,
    pub n_steps: usize,
    /// Add jitter of size 2⁻⁵⁰ after every step. Defaults to
    /// [`SystemDef::needs_dither`].
    pub dither: Option<bool>,
}

impl OrbitSpec {
    pub fn new(start: OrbitStart, spinup: usize, n_steps: usize) -> Self {
        OrbitSpec {
            start,
            spinup,
            n_steps,
            dither: None,
        }
    }

    pub fn seeded(seed: u64, n_steps: usize) -> Self {
        OrbitSpec::new(OrbitStart::Seed(seed), DEFAULT_SPINUP, n_steps)
    }

    fn seed(&self) -> u64 {
        match self.start {
            OrbitStart::Seed(s) => s,
            OrbitStart::Point(_) => 0,
        }
    }
}

/// Stored orbit `x_0, …, x_N` at `γ = 0` (spin-up discarded).
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitData {
    dim: usize,
    points: Vec<f64>,
    pub spinup: usize,
    pub seed: u64,
}

impl OrbitData {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of steps `N`; there are `N + 1` points.
    pub fn steps(&self) -> usize {
        self.points.len() / self.dim - 1
    }

    #[inline]
    pub fn point(&self, n: usize) -> &[f64] {
        &self.points[n * self.dim..(n + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Little-endian dump: `u64` header `{M, N, spinup, seed}` followed by
    /// the `(N+1)·M` coordinates as row-major `f64`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_u64::<LittleEndian>(self.dim as u64)?;
        w.write_u64::<LittleEndian>(self.steps() as u64)?;
        w.write_u64::<LittleEndian>(self.spinup as u64)?;
        w.write_u64::<LittleEndian>(self.seed)?;
        for &v in &self.points {
            w.write_f64::<LittleEndian>(v)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<OrbitData> {
        let dim = r.read_u64::<LittleEndian>()? as usize;
        let steps = r.read_u64::<LittleEndian>()? as usize;
        let spinup = r.read_u64::<LittleEndian>()? as usize;
        let seed = r.read_u64::<LittleEndian>()?;
        if dim == 0 {
            return Err(Error::Invalid("orbit dump with zero dimension".into()));
        }
        let mut points = vec![0.0; (steps + 1) * dim];
        r.read_f64_into::<LittleEndian>(&mut points)?;
        Ok(OrbitData {
            dim,
            points,
            spinup,
            seed,
        })
    }
}

fn initial_point(sys: &SystemDef, start: &OrbitStart) -> Result<Vec<f64>> {
    match start {
        OrbitStart::Point(p) => {
            if p.len() != sys.dim() {
                return Err(Error::Invalid(format!(
                    "initial point has {} coordinates, system has {}",
                    p.len(),
                    sys.dim()
                )));
            }
            Ok(p.clone())
        }
        OrbitStart::Seed(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*s);
            Ok((0..sys.dim())
                .map(|i| {
                    if sys.is_periodic(i) {
                        rng.gen::<f64>()
                    } else {
                        rng.gen_range(-0.5..0.5)
                    }
                })
                .collect())
        }
    }
}

/// Walks the orbit of `spec` at parameter `gamma`, calling `visit(n, x_n)`
/// for `n = 0..=N` after spin-up.
pub fn walk_orbit<F: FnMut(usize, &[f64])>(
    sys: &SystemDef,
    gamma: f64,
    spec: &OrbitSpec,
    mut visit: F,
) -> Result<()> {
    let m = sys.dim();
    let mut x = initial_point(sys, &spec.start)?;
    sys.wrap(&mut x);
    let mut next = vec![0.0; m];
    let dither = spec.dither.unwrap_or_else(|| sys.needs_dither());
    let mut jitter = ChaCha8Rng::seed_from_u64(spec.seed() ^ 0x9e37_79b9_7f4a_7c15);
    for step in 0..spec.spinup + spec.n_steps + 1 {
        if step >= spec.spinup {
            visit(step - spec.spinup, &x);
        }
        if step == spec.spinup + spec.n_steps {
            break;
        }
        sys.step(&x, gamma, &mut next);
        if dither {
            for v in next.iter_mut() {
                *v += DITHER * jitter.gen::<f64>();
            }
            sys.wrap(&mut next);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: step + 1 });
        }
        std::mem::swap(&mut x, &mut next);
    }
    Ok(())
}

pub fn generate_orbit_with(sys: &SystemDef, spec: &OrbitSpec) -> Result<OrbitData> {
    if spec.n_steps < 1 {
        return Err(Error::Invalid("orbit needs at least one step".into()));
    }
    let m = sys.dim();
    let mut points = Vec::with_capacity((spec.n_steps + 1) * m);
    walk_orbit(sys, 0.0, spec, |_, x| points.extend_from_slice(x))?;
    Ok(OrbitData {
        dim: m,
        points,
        spinup: spec.spinup,
        seed: spec.seed(),
    })
}

/// Orbit of `N` steps from a seeded random point, default spin-up.
pub fn generate_orbit(
    sys: &SystemDef,
    start: OrbitStart,
    spinup: usize,
    n_steps: usize,
) -> Result<OrbitData> {
    generate_orbit_with(sys, &OrbitSpec::new(start, spinup, n_steps))
}

/// Orbit mean of `g` with a batch-means standard error.
pub fn empirical_average<G: Fn(&[f64]) -> f64>(orbit: &OrbitData, g: G) -> Estimate {
    let vals: Vec<f64> = (0..=orbit.steps()).map(|n| g(orbit.point(n))).collect();
    batch_means(&vals)
}

/// Orbit mean of `g` at parameter `gamma` without storing the orbit.
pub fn streaming_average<G: Fn(&[f64]) -> f64>(
    sys: &SystemDef,
    gamma: f64,
    spec: &OrbitSpec,
    g: G,
) -> Result<Estimate> {
    let mut acc = BatchAccumulator::new(spec.n_steps + 1);
    walk_orbit(sys, gamma, spec, |_, x| acc.push(g(x)))?;
    Ok(acc.finish())
}
