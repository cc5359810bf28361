//! Path simulation of the randomized process Y and the stitched process Z.
//!
//! Each path draws Theta once, then Lévy increments tilted by Theta. Path `i`
//! consumes its own ChaCha8 stream (`set_stream(i)` on the master seed), so a
//! batch is a function of (seed, config, grid, N) alone, whatever the number
//! of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nef_family::FamilySpec;
use crate::randomization::{check_assumptions, default_support_points, RandomizationLaw};

/// Random stream of path `path` under master seed `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// (0, 1) -> (0, inf), t -> r t / (1 - t)
    Pre,
    /// (1, inf) -> (0, inf), t -> r / (t - 1)
    Post,
}

pub fn time_map(t: f64, r: f64, side: Side) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::argument(format!("time map needs r > 0, got {r}")));
    }
    match side {
        Side::Pre if t > 0.0 && t < 1.0 => Ok(r * t / (1.0 - t)),
        Side::Post if t > 1.0 && t.is_finite() => Ok(r / (t - 1.0)),
        _ => Err(Error::argument(format!("t = {t} is outside the {side:?} interval"))),
    }
}

pub fn time_map_inverse(mapped: f64, r: f64, side: Side) -> Result<f64> {
    if !(r > 0.0) || !(mapped > 0.0) || !mapped.is_finite() {
        return Err(Error::argument(format!(
            "inverse time map needs r > 0 and a positive time, got {mapped}"
        )));
    }
    Ok(match side {
        Side::Pre => mapped / (r + mapped),
        Side::Post => 1.0 + r / mapped,
    })
}

/// Strictly increasing positive sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    contains_one: bool,
}

impl TimeGrid {
    pub fn new(mut times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::argument("time grid is empty"));
        }
        times.sort_by(f64::total_cmp);
        for w in times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::argument(format!("time grid repeats {}", w[0])));
            }
        }
        if !(times[0] > 0.0) || !times[times.len() - 1].is_finite() {
            return Err(Error::argument("grid times must be positive and finite"));
        }
        let contains_one = times.contains(&1.0);
        Ok(TimeGrid { times, contains_one })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn contains_one(&self) -> bool {
        self.contains_one
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or(Error::Grid(t))
    }
}

/// Family, p and r plus the derived centering m = p / r and scale v.
#[derive(Debug, Clone)]
pub struct StitchConfig {
    law: RandomizationLaw,
    m: f64,
    v: f64,
}

impl StitchConfig {
    /// Validates (p, r) and the endpoint-decay conditions at the default
    /// support points.
    pub fn new(family: FamilySpec, p: f64, r: f64) -> Result<Self> {
        let law = RandomizationLaw::new(family, p, r)?;
        let report = check_assumptions(&family, p, r, &default_support_points(&family)?);
        if !report.pass {
            return Err(Error::argument(format!(
                "decay conditions fail for {family} at p={p}, r={r}"
            )));
        }
        let k = law.kprime_moments();
        Ok(StitchConfig {
            law,
            m: k.mean,
            v: k.variance.sqrt(),
        })
    }

    pub fn law(&self) -> &RandomizationLaw {
        &self.law
    }

    pub fn family(&self) -> &FamilySpec {
        self.law.family()
    }

    pub fn p(&self) -> f64 {
        self.law.p()
    }

    pub fn r(&self) -> f64 {
        self.law.r()
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn v(&self) -> f64 {
        self.v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessTag {
    Y,
    Z,
}

/// The Y / Y' values behind each Z column: Y at r t/(1-t) for t < 1,
/// kappa'(Theta) at t = 1, Y' at r/(t-1) for t > 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingredients {
    /// Mapped time per grid column (none at t = 1).
    pub mapped_times: Vec<Option<f64>>,
    values: Vec<f64>,
}

/// N simulated paths on a grid, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    grid: TimeGrid,
    n_paths: usize,
    values: Vec<f64>,
    thetas: Vec<f64>,
    seed: u64,
    tag: ProcessTag,
    ingredients: Option<Ingredients>,
}

impl PathBatch {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tag(&self) -> ProcessTag {
        self.tag
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Values of all paths at grid time `t`.
    pub fn column(&self, t: f64) -> Result<&[f64]> {
        let j = self.grid.index_of(t)?;
        Ok(&self.values[j * self.n_paths..(j + 1) * self.n_paths])
    }

    /// Path `i` across the grid.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.grid.len())
            .map(|j| self.values[j * self.n_paths + i])
            .collect()
    }

    pub fn ingredients(&self) -> Option<&Ingredients> {
        self.ingredients.as_ref()
    }

    /// Ingredient values (Y_{t'}, kappa'(Theta) or Y'_{u'}) behind the Z
    /// column at `t`, with the mapped time.
    pub fn ingredient_column(&self, t: f64) -> Result<(Option<f64>, &[f64])> {
        let ing = self
            .ingredients
            .as_ref()
            .ok_or_else(|| Error::argument("batch carries no ingredient paths"))?;
        let j = self.grid.index_of(t)?;
        Ok((
            ing.mapped_times[j],
            &ing.values[j * self.n_paths..(j + 1) * self.n_paths],
        ))
    }
}

/// Runs `fill(i, row)` for each path in parallel and returns column-major
/// data plus thetas.
fn generate<F>(n_paths: usize, width: usize, fill: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(usize, &mut [f64]) -> Result<f64> + Sync,
{
    if n_paths == 0 {
        return Err(Error::argument("need at least one path"));
    }
    let mut rows = vec![0.0; n_paths * width];
    let mut thetas = vec![0.0; n_paths];
    rows.par_chunks_mut(width)
        .zip(thetas.par_iter_mut())
        .enumerate()
        .try_for_each(|(i, (row, theta))| {
            *theta = fill(i, row)?;
            Ok::<(), Error>(())
        })?;
    let mut cols = vec![0.0; n_paths * width];
    for (i, row) in rows.chunks_exact(width).enumerate() {
        for (j, &x) in row.iter().enumerate() {
            cols[j * n_paths + i] = x;
        }
    }
    Ok((cols, thetas))
}

/// Cumulative sums of increments at increasing `times`, written to `out`.
fn levy_path<R: rand::Rng>(
    family: &FamilySpec,
    theta: f64,
    times: impl Iterator<Item = f64>,
    rng: &mut R,
    mut out: impl FnMut(f64),
) -> Result<()> {
    let (mut t_prev, mut y) = (0.0, 0.0);
    for t in times {
        y += family.increment_sample_direct(theta, t - t_prev, rng)?;
        t_prev = t;
        out(y);
    }
    Ok(())
}

/// N paths of Y on `grid`: Theta from `law`, then tilted Lévy increments.
pub fn simulate_y(law: &RandomizationLaw, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathBatch> {
    let family = *law.family();
    let k = grid.len();
    let (values, thetas) = generate(n_paths, k, |i, row| {
        let mut rng = path_rng(seed, i as u64);
        let theta = law.sample_theta(&mut rng);
        let mut j = 0;
        levy_path(&family, theta, grid.times().iter().copied(), &mut rng, |y| {
            row[j] = y;
            j += 1;
        })?;
        Ok(theta)
    })?;
    Ok(PathBatch {
        grid: grid.clone(),
        n_paths,
        values,
        thetas,
        seed,
        tag: ProcessTag::Y,
        ingredients: None,
    })
}

/// N paths of the stitched process Z on `grid`, keeping the Y / Y' values
/// each column was built from.
pub fn simulate_z(config: &StitchConfig, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathBatch> {
    let (p, r, v) = (config.p(), config.r(), config.v());
    if !(v > 0.0) {
        return Err(Error::argument(format!("stitching needs v > 0, got {v}")));
    }
    let family = *config.family();
    let law = config.law();
    let times = grid.times();
    let k = times.len();
    let pre: Vec<usize> = (0..k).filter(|&j| times[j] < 1.0).collect();
    let post: Vec<usize> = (0..k).filter(|&j| times[j] > 1.0).collect();
    let one = (0..k).find(|&j| times[j] == 1.0);
    let mut mapped = vec![None; k];
    for &j in &pre {
        mapped[j] = Some(time_map(times[j], r, Side::Pre)?);
    }
    for &j in &post {
        mapped[j] = Some(time_map(times[j], r, Side::Post)?);
    }
    // Y' is visited in increasing mapped time, i.e. decreasing t
    let post_order: Vec<usize> = post.iter().rev().copied().collect();

    // each row holds Z values followed by the ingredient values
    let (data, thetas) = generate(n_paths, 2 * k, |i, row| {
        let mut rng = path_rng(seed, i as u64);
        let theta = law.sample_theta(&mut rng);
        let (z, ing) = row.split_at_mut(k);
        let mut it = pre.iter();
        levy_path(&family, theta, pre.iter().map(|&j| mapped[j].unwrap()), &mut rng, |y| {
            let j = *it.next().unwrap();
            ing[j] = y;
            z[j] = (1.0 - times[j]) / (r * v) * y - times[j] * p / (r * v);
        })?;
        if let Some(j) = one {
            let kp = family.kappa_prime(theta)?;
            ing[j] = kp;
            z[j] = (kp - p / r) / v;
        }
        let mut it = post_order.iter();
        levy_path(
            &family,
            theta,
            post_order.iter().map(|&j| mapped[j].unwrap()),
            &mut rng,
            |y| {
                let j = *it.next().unwrap();
                ing[j] = y;
                z[j] = (times[j] - 1.0) / (r * v) * y - p / (r * v);
            },
        )?;
        Ok(theta)
    })?;
    let split = k * n_paths;
    let (values, ing_values) = (data[..split].to_vec(), data[split..].to_vec());
    Ok(PathBatch {
        grid: grid.clone(),
        n_paths,
        values,
        thetas,
        seed,
        tag: ProcessTag::Z,
        ingredients: Some(Ingredients {
            mapped_times: mapped,
            values: ing_values,
        }),
    })
}
