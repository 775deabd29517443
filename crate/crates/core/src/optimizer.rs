//! Covariance matrix adaptation evolution strategy.
//!
//! Minimizes a black-box function over R^n by sampling candidates from an
//! adapted multivariate normal distribution. The implementation is the
//! standard (mu/mu_w, lambda) formulation with log-rank recombination weights,
//! cumulative step-size adaptation, and rank-one plus rank-mu covariance
//! updates. Fully deterministic given the seed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const SIGMA_MIN: f64 = 1e-12;
const SIGMA_MAX: f64 = 1e7;

/// One evaluated sample: a parameter vector and its fitness (lower is better).
#[derive(Debug, Clone)]
pub struct Candidate {
    pub genome: Vec<f64>,
    pub fitness: f64,
}

/// CMA-ES distribution state plus strategy constants.
#[derive(Debug, Clone)]
pub struct Cmaes {
    dimension: usize,
    population: usize,

    mean: DVector<f64>,
    sigma: f64,
    covariance: DMatrix<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
    generation: u64,
    rng: ChaCha8Rng,
    best: Option<Candidate>,
}

impl Cmaes {
    /// Starts a strategy at `mean` with global step size `sigma`, identity
    /// covariance, and strategy constants derived from the dimension and
    /// population size.
    pub fn new(mean: Vec<f64>, sigma: f64, population: usize, seed: u64) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidHyperparameters("empty mean vector".into()));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidHyperparameters(
                "mean vector must be finite".into(),
            ));
        }
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(Error::InvalidHyperparameters(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        if population < 2 {
            return Err(Error::InvalidHyperparameters(format!(
                "population must be at least 2, got {population}"
            )));
        }

        let n = mean.len() as f64;
        let mu = population / 2;
        let raw: Vec<f64> = (0..mu)
            .map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu =
            (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff)).min(1.0 - c_1);
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

        let dimension = mean.len();
        Ok(Cmaes {
            dimension,
            population,
            mean: DVector::from_vec(mean),
            sigma,
            covariance: DMatrix::identity(dimension, dimension),
            path_sigma: DVector::zeros(dimension),
            path_c: DVector::zeros(dimension),
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            generation: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            best: None,
        })
    }

    /// Samples one population: `x_k = mean + sigma * B * D * z_k` with
    /// standard-normal `z_k` and `B D^2 B^T` the eigendecomposition of the
    /// covariance.
    pub fn ask(&mut self) -> Result<Vec<Vec<f64>>> {
        self.check_sigma()?;
        let bd = self.sampling_transform()?;
        let mut samples = Vec::with_capacity(self.population);
        for _ in 0..self.population {
            let z = DVector::from_iterator(
                self.dimension,
                (0..self.dimension).map(|_| -> f64 { StandardNormal.sample(&mut self.rng) }),
            );
            let x = &self.mean + &bd * z * self.sigma;
            samples.push(x.iter().copied().collect());
        }
        Ok(samples)
    }

    /// Ranks the candidates (ascending fitness, ties kept in sample order) and
    /// updates mean, evolution paths, covariance, and step size.
    pub fn tell(&mut self, candidates: Vec<Candidate>) -> Result<()> {
        if candidates.len() != self.population {
            return Err(Error::CandidateCount {
                expected: self.population,
                actual: candidates.len(),
            });
        }
        for (index, c) in candidates.iter().enumerate() {
            if !c.fitness.is_finite() {
                return Err(Error::NonFiniteFitness { index });
            }
            if c.genome.len() != self.dimension {
                return Err(Error::InvalidHyperparameters(format!(
                    "candidate {index} has dimension {}, expected {}",
                    c.genome.len(),
                    self.dimension
                )));
            }
        }

        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| {
            candidates[a]
                .fitness
                .partial_cmp(&candidates[b].fitness)
                .expect("finite fitnesses compare")
        });

        let old_mean = self.mean.clone();
        let mut new_mean = DVector::zeros(self.dimension);
        for (w, &idx) in self.weights.iter().zip(&order) {
            let x = DVector::from_column_slice(&candidates[idx].genome);
            new_mean += x * *w;
        }

        let mean_shift = (&new_mean - &old_mean) / self.sigma;

        // C^{-1/2} for the conjugate step-size path.
        let eigen = SymmetricEigen::new(self.covariance.clone());
        for &v in eigen.eigenvalues.iter() {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::NumericalDegeneracy(format!(
                    "non-positive covariance eigenvalue {v}"
                )));
            }
        }
        let inv_sqrt = DMatrix::from_diagonal(&eigen.eigenvalues.map(|v| 1.0 / v.sqrt()));
        let c_inv_sqrt = &eigen.eigenvectors * inv_sqrt * eigen.eigenvectors.transpose();

        self.path_sigma = &self.path_sigma * (1.0 - self.c_sigma)
            + c_inv_sqrt * &mean_shift * (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt();

        let gen_decay = 1.0 - (1.0 - self.c_sigma).powi(2 * (self.generation as i32 + 1));
        let h_sigma = if self.path_sigma.norm()
            < (1.4 + 2.0 / (self.dimension as f64 + 1.0)) * self.chi_n * gen_decay.sqrt()
        {
            1.0
        } else {
            0.0
        };

        self.path_c = &self.path_c * (1.0 - self.c_c)
            + &mean_shift * (h_sigma * (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt());

        let mut rank_mu = DMatrix::zeros(self.dimension, self.dimension);
        for (w, &idx) in self.weights.iter().zip(&order) {
            let y = (DVector::from_column_slice(&candidates[idx].genome) - &old_mean) / self.sigma;
            rank_mu += &y * y.transpose() * *w;
        }

        let delta_h = (1.0 - h_sigma) * self.c_c * (2.0 - self.c_c);
        let keep = 1.0 - self.c_1 - self.c_mu + self.c_1 * delta_h;
        self.covariance = &self.covariance * keep
            + &self.path_c * self.path_c.transpose() * self.c_1
            + rank_mu * self.c_mu;
        // Symmetrize away floating-point drift.
        self.covariance = (&self.covariance + self.covariance.transpose()) * 0.5;

        self.sigma *=
            ((self.c_sigma / self.d_sigma) * (self.path_sigma.norm() / self.chi_n - 1.0)).exp();

        self.mean = new_mean;
        self.generation += 1;

        let gen_best = &candidates[order[0]];
        let improved = match &self.best {
            Some(best) => gen_best.fitness < best.fitness,
            None => true,
        };
        if improved {
            self.best = Some(gen_best.clone());
        }

        self.check_sigma()
    }

    /// The lowest-fitness candidate seen across all completed generations.
    pub fn best_seen(&self) -> Result<&Candidate> {
        self.best.as_ref().ok_or(Error::NoGenerations)
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> Vec<f64> {
        self.mean.iter().copied().collect()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    fn check_sigma(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < SIGMA_MIN || self.sigma > SIGMA_MAX {
            return Err(Error::SigmaOutOfRange(self.sigma));
        }
        Ok(())
    }

    fn sampling_transform(&self) -> Result<DMatrix<f64>> {
        let eigen = SymmetricEigen::new(self.covariance.clone());
        for &v in eigen.eigenvalues.iter() {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::NumericalDegeneracy(format!(
                    "non-positive covariance eigenvalue {v}"
                )));
            }
        }
        let sqrt_d = DMatrix::from_diagonal(&eigen.eigenvalues.map(f64::sqrt));
        Ok(&eigen.eigenvectors * sqrt_d)
    }
}

/// Convenience loop: run `generations` ask/tell rounds against `objective`,
/// stopping early when the best fitness drops below `target`. Returns the best
/// candidate and the number of evaluations spent.
pub fn minimize<F>(
    objective: F,
    mean: Vec<f64>,
    sigma: f64,
    population: usize,
    seed: u64,
    max_evaluations: usize,
    target: f64,
) -> Result<(Candidate, usize)>
where
    F: Fn(&[f64]) -> f64,
{
    let mut state = Cmaes::new(mean, sigma, population, seed)?;
    let mut spent = 0usize;
    while spent + population <= max_evaluations {
        let genomes = state.ask()?;
        let candidates: Vec<Candidate> = genomes
            .into_iter()
            .map(|genome| {
                let fitness = objective(&genome);
                Candidate { genome, fitness }
            })
            .collect();
        spent += population;
        state.tell(candidates)?;
        if state.best_seen()?.fitness < target {
            break;
        }
    }
    Ok((state.best_seen()?.clone(), spent))
}
