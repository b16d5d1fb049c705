use alloc::vec::Vec;
use num_traits::Float;

use super::integrator::{drive, IntegrateOptions, Status};
use super::FlowField;
use crate::{Error, Result};

/// Distance on a chart or on an abstract phase space.
pub trait ChartMetric {
    fn dist(&self, a: &[f64], b: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl ChartMetric for Euclidean {
    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Euclidean distance on `R^d / (period · Z^d)`.
#[derive(Debug, Clone, Copy)]
pub struct FlatTorus {
    pub period: f64,
}

impl FlatTorus {
    pub fn wrap(&self, d: f64) -> f64 {
        let r = d - self.period * (d / self.period).floor();
        r.min(self.period - r)
    }
}

impl ChartMetric for FlatTorus {
    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let d = self.wrap(x - y);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Anything that can report an orbit at integer times.
pub trait OrbitSampler {
    fn dim(&self) -> usize;

    /// Appends the states at times `0, 1, …, steps` to `out`.
    fn sample(&self, x0: &[f64], steps: usize, out: &mut Vec<f64>) -> Result<()>;
}

/// Samples a chart field by integrating one unit of time at a time.
pub struct FieldSampler<'a, F: ?Sized> {
    pub field: &'a F,
    pub tol: f64,
}

impl<F: FlowField + ?Sized> OrbitSampler for FieldSampler<'_, F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn sample(&self, x0: &[f64], steps: usize, out: &mut Vec<f64>) -> Result<()> {
        let mut x = x0.to_vec();
        out.extend_from_slice(&x);
        for _ in 0..steps {
            let s = drive(self.field, &x, 1.0, IntegrateOptions::new(self.tol), |_, _| true);
            if s.status != Status::Completed {
                return Err(Error::invalid(
                    "orbit did not complete a unit of time inside the chart",
                ));
            }
            x = s.x;
            out.extend_from_slice(&x);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SeparatedSetEstimate {
    pub t: f64,
    pub epsilon: f64,
    pub cardinality: usize,
    /// `ln(cardinality) / t`.
    pub h_estimate: f64,
    pub sample_size: usize,
}

/// Orbit samples for every seed, each `(steps + 1) · dim` long.
pub fn sample_orbits<S: OrbitSampler + ?Sized>(
    sampler: &S,
    seeds: &[Vec<f64>],
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    seeds
        .iter()
        .map(|s| {
            let mut out = Vec::with_capacity((steps + 1) * s.len());
            sampler.sample(s, steps, &mut out)?;
            Ok(out)
        })
        .collect()
}

/// Greedy maximal `(horizon, eps)`-separated subset: an orbit joins when at
/// some integer time `0..=horizon` it is more than `eps` away from every
/// orbit already chosen. Returns the chosen indices.
pub fn separated_subset<M: ChartMetric + ?Sized>(
    orbits: &[Vec<f64>],
    dim: usize,
    horizon: usize,
    eps: f64,
    metric: &M,
) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for (i, orb) in orbits.iter().enumerate() {
        let separated_from_all = chosen.iter().all(|&c| {
            let other = &orbits[c];
            (0..=horizon).any(|k| {
                let r = k * dim..(k + 1) * dim;
                metric.dist(&orb[r.clone()], &other[r]) > eps
            })
        });
        if separated_from_all {
            chosen.push(i);
        }
    }
    chosen
}

fn check_orbits(orbits: &[Vec<f64>], dim: usize, horizon: usize) -> Result<()> {
    if orbits.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    if orbits.iter().any(|o| o.len() < (horizon + 1) * dim) {
        return Err(Error::invalid("orbit samples are shorter than the horizon"));
    }
    Ok(())
}

/// Separated-set estimate from precomputed orbit samples.
pub fn estimate_from_orbits<M: ChartMetric + ?Sized>(
    orbits: &[Vec<f64>],
    dim: usize,
    t: f64,
    eps: f64,
    metric: &M,
) -> Result<SeparatedSetEstimate> {
    if !(t >= 1.0) {
        return Err(Error::invalid("t must be at least 1"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    let horizon = t.floor() as usize;
    check_orbits(orbits, dim, horizon)?;
    let n = separated_subset(orbits, dim, horizon, eps, metric).len();
    Ok(SeparatedSetEstimate {
        t,
        epsilon: eps,
        cardinality: n,
        h_estimate: (n as f64).ln() / t,
        sample_size: orbits.len(),
    })
}

pub fn separated_entropy<S, M>(
    sampler: &S,
    seeds: &[Vec<f64>],
    t: f64,
    eps: f64,
    metric: &M,
) -> Result<SeparatedSetEstimate>
where
    S: OrbitSampler + ?Sized,
    M: ChartMetric + ?Sized,
{
    if !(t >= 1.0) {
        return Err(Error::invalid("t must be at least 1"));
    }
    let orbits = sample_orbits(sampler, seeds, t.floor() as usize)?;
    estimate_from_orbits(&orbits, sampler.dim(), t, eps, metric)
}

/// Growth rate of separated-set cardinality between two horizons.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SlopeEstimate {
    pub t1: f64,
    pub t2: f64,
    pub epsilon: f64,
    pub card1: usize,
    pub card2: usize,
    /// `(ln card2 - ln card1) / (t2 - t1)`.
    pub slope: f64,
    /// The larger set used at least half of the seeds, so the slope is
    /// capped by the sample rather than by the dynamics.
    pub saturated: bool,
}

/// Slope estimate from precomputed samples covering horizon `t2`.
pub fn slope_from_orbits<M: ChartMetric + ?Sized>(
    orbits: &[Vec<f64>],
    dim: usize,
    t1: usize,
    t2: usize,
    eps: f64,
    metric: &M,
) -> Result<SlopeEstimate> {
    if !(t1 >= 1 && t2 > t1) {
        return Err(Error::invalid("horizons must satisfy 1 <= t1 < t2"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    check_orbits(orbits, dim, t2)?;
    let card1 = separated_subset(orbits, dim, t1, eps, metric).len();
    let card2 = separated_subset(orbits, dim, t2, eps, metric).len();
    Ok(SlopeEstimate {
        t1: t1 as f64,
        t2: t2 as f64,
        epsilon: eps,
        card1,
        card2,
        slope: ((card2 as f64).ln() - (card1 as f64).ln()) / (t2 - t1) as f64,
        saturated: 2 * card2 >= orbits.len(),
    })
}

/// Separated-set growth between integer horizons `t1 < t2`. Unlike
/// `ln(card)/t`, the slope does not carry the `t = 0` offset `ln(1/eps^d)`.
pub fn growth_slope<S, M>(
    sampler: &S,
    seeds: &[Vec<f64>],
    t1: usize,
    t2: usize,
    eps: f64,
    metric: &M,
) -> Result<SlopeEstimate>
where
    S: OrbitSampler + ?Sized,
    M: ChartMetric + ?Sized,
{
    let orbits = sample_orbits(sampler, seeds, t2)?;
    slope_from_orbits(&orbits, sampler.dim(), t1, t2, eps, metric)
}
