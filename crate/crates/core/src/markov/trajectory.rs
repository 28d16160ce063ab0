use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{stationary_distribution, TransitionModel};
use crate::error::{dim_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::io::{open, write_file, Lines, FORMAT_VERSION};
use crate::tensor::{DenseTensor, StateSpace};

pub const TRAJECTORY_MAGIC: &str = "LRMC-TRAJ";

/// Ordered sequence of observed states, stored as flat indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    space: StateSpace,
    states: Vec<usize>,
    seed: Option<u64>,
}

impl Trajectory {
    pub fn new(space: StateSpace, states: Vec<usize>, seed: Option<u64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InsufficientData("a trajectory needs at least one state".into()));
        }
        if let Some(&bad) = states.iter().find(|&&s| s >= space.total()) {
            return dim_err(format!("state {bad} out of range for {} states", space.total()));
        }
        Ok(Self { space, states, seed })
    }

    /// Builds from 0-based multi-indices.
    pub fn from_multi(space: StateSpace, states: &[Vec<usize>], seed: Option<u64>) -> Result<Self> {
        let flat = states.iter().map(|s| space.flat_index(s)).collect::<Result<_>>()?;
        Self::new(space, flat, seed)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn flat_states(&self) -> &[usize] {
        &self.states
    }

    pub fn state(&self, n: usize) -> Vec<usize> {
        self.space.multi_index(self.states[n]).expect("validated on construction")
    }

    /// Consecutive `(s_n, s_{n+1})` pairs as flat indices.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.states.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Where the first state of a simulated trajectory comes from.
#[derive(Debug, Clone)]
pub enum Init<T> {
    /// Chain's stationary distribution (power iteration).
    Stationary,
    /// Fixed 0-based multi-index.
    State(Vec<usize>),
    /// Explicit distribution over the state space.
    Distribution(DenseTensor<T>),
}

/// Inverse-CDF sampler over one row.
struct RowSampler {
    cdf: Vec<f64>,
}

impl RowSampler {
    fn new(weights: impl Iterator<Item = f64>) -> Result<Self> {
        let mut acc = 0.0;
        let cdf: Vec<f64> = weights
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if !(acc > 0.0) || !acc.is_finite() {
            return Err(Error::Domain(format!("distribution has invalid mass {acc}")));
        }
        Ok(Self { cdf })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("non-empty");
        let u = rng.random::<f64>() * total;
        // First state whose cumulative mass exceeds u; zero-mass states are never chosen.
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// Simulates `n` states: `s_1 ~ init`, then `burn_in` discarded steps, then
/// each `s_{k+1} ~ P(s_k, .)`. The RNG is ChaCha8 seeded with `seed`.
pub fn sample_trajectory<T: Scalar>(
    chain: &TransitionModel<T>,
    n: usize,
    init: &Init<T>,
    burn_in: usize,
    seed: u64,
) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::InsufficientData("trajectory length must be at least 1".into()));
    }
    let states = chain.num_states();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = match init {
        Init::Stationary => {
            let pi = stationary_distribution(chain, T::lit(1e-12).max(T::epsilon() * T::lit(16.0)), 1_000_000)?;
            RowSampler::new(pi.data().iter().map(|x| x.as_f64()))?.draw(&mut rng)
        }
        Init::State(s) => chain.space().flat_index(s)?,
        Init::Distribution(d) => {
            if d.len() != states {
                return dim_err(format!("init distribution has {} entries for {states} states", d.len()));
            }
            let mass = d.sum().as_f64();
            if (mass - 1.0).abs() > 1e-8 {
                return Err(Error::Domain(format!("init distribution has mass {mass}")));
            }
            RowSampler::new(d.data().iter().map(|x| x.as_f64()))?.draw(&mut rng)
        }
    };
    let rows: Vec<RowSampler> = (0..states)
        .map(|s| RowSampler::new(chain.row(s).iter().map(|x| x.as_f64())))
        .collect::<Result<_>>()?;
    let mut current = first;
    for _ in 0..burn_in {
        current = rows[current].draw(&mut rng);
    }
    let mut out = Vec::with_capacity(n);
    out.push(current);
    for _ in 1..n {
        current = rows[current].draw(&mut rng);
        out.push(current);
    }
    Trajectory::new(chain.space().clone(), out, Some(seed))
}

/// Trajectory file:
///
/// ```text
/// LRMC-TRAJ 1
/// order <D>
/// dims <I_1> ... <I_D>
/// n <N>
/// seed <u64 or none>
/// data
/// <s_1>,<s_2>,...,<s_D>     # one line per step, 1-based coordinates
/// end
/// ```
pub fn trajectory_to_string(t: &Trajectory) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{TRAJECTORY_MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "order {}", t.space.order());
    let dims: Vec<String> = t.space.dims().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "dims {}", dims.join(" "));
    let _ = writeln!(out, "n {}", t.len());
    match t.seed {
        Some(seed) => {
            let _ = writeln!(out, "seed {seed}");
        }
        None => out.push_str("seed none\n"),
    }
    out.push_str("data\n");
    for n in 0..t.len() {
        let coords: Vec<String> = t.state(n).iter().map(|c| (c + 1).to_string()).collect();
        out.push_str(&coords.join(","));
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

pub fn read_trajectory_from<R: BufRead>(reader: R) -> Result<Trajectory> {
    let mut lines = Lines::new(reader);
    lines.header(TRAJECTORY_MAGIC)?;
    let order = lines.single("order")?;
    let dims = lines.usizes("dims")?;
    if dims.len() != order {
        return lines.err(format!("dims has {} entries, order says {order}", dims.len()));
    }
    let space = StateSpace::new(dims)?;
    let n = lines.single("n")?;
    let seed = match lines.keyword("seed")?.as_slice() {
        [s] if s == "none" => None,
        [s] => Some(lines.parse(s)?),
        _ => return lines.err("expected `seed <value>`"),
    };
    lines.keyword("data")?;
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next_content()?;
        let coords: Vec<usize> = line
            .split(',')
            .map(|c| lines.parse::<usize>(c.trim()))
            .collect::<Result<_>>()?;
        if coords.len() != order || coords.contains(&0) {
            return lines.err(format!("expected {order} 1-based coordinates, found `{line}`"));
        }
        let zero_based: Vec<usize> = coords.iter().map(|c| c - 1).collect();
        match space.flat_index(&zero_based) {
            Ok(k) => states.push(k),
            Err(e) => return lines.err(e.to_string()),
        }
    }
    let end_line = lines.line();
    lines.keyword("end").map_err(|_| Error::Format {
        line: end_line + 1,
        message: format!("expected `end` after {n} states"),
    })?;
    Trajectory::new(space, states, seed)
}

pub fn write_trajectory(path: &Path, t: &Trajectory) -> Result<()> {
    write_file(path, &trajectory_to_string(t))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory_from(open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize, rows: &[f64]) -> TransitionModel<f64> {
        let space = StateSpace::new(vec![n]).unwrap();
        TransitionModel::new(space, DenseTensor::new(vec![n, n], rows.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn permutation_chain_follows_orbit() {
        // 0 -> 2 -> 1 -> 0
        let p = chain(3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let t = sample_trajectory(&p, 7, &Init::State(vec![0]), 0, 5).unwrap();
        assert_eq!(t.flat_states(), &[0, 2, 1, 0, 2, 1, 0]);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let p = chain(2, &[0.9, 0.1, 0.3, 0.7]);
        let a = sample_trajectory(&p, 500, &Init::Stationary, 0, 11).unwrap();
        let b = sample_trajectory(&p, 500, &Init::Stationary, 0, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_trajectory(&p, 500, &Init::Stationary, 0, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_frequencies_approach_stationary() {
        let p = chain(2, &[0.9, 0.1, 0.3, 0.7]);
        // pi solves pi_0 * 0.1 = pi_1 * 0.3.
        let pi = [0.75, 0.25];
        let t = sample_trajectory(&p, 100_000, &Init::Stationary, 0, 3).unwrap();
        let ones = t.flat_states().iter().filter(|&&s| s == 1).count() as f64 / t.len() as f64;
        let l1 = (pi[0] - (1.0 - ones)).abs() + (pi[1] - ones).abs();
        assert!(l1 <= 0.02, "l1 {l1}");
    }

    #[test]
    fn invalid_init_mass_is_domain_error() {
        let p = chain(2, &[0.5, 0.5, 0.5, 0.5]);
        let d = DenseTensor::new(vec![2], vec![0.5, 0.6]).unwrap();
        assert!(matches!(
            sample_trajectory(&p, 3, &Init::Distribution(d), 0, 0),
            Err(Error::Domain(_))
        ));
        assert!(sample_trajectory(&p, 0, &Init::Stationary, 0, 0).is_err());
    }

    #[test]
    fn file_round_trip_and_one_based_coords() {
        let space = StateSpace::new(vec![3, 2]).unwrap();
        let t = Trajectory::from_multi(space, &[vec![0, 0], vec![2, 1], vec![1, 0]], Some(7)).unwrap();
        let text = trajectory_to_string(&t);
        assert!(text.contains("\n1,1\n3,2\n2,1\nend\n"));
        assert_eq!(read_trajectory_from(text.as_bytes()).unwrap(), t);
        let bad = text.replace("3,2", "4,2");
        assert!(read_trajectory_from(bad.as_bytes()).is_err());
    }
}
