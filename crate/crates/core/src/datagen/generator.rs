use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::longtail::LongTailParams;
use crate::data::{Group, InteractionDataset, ItemId, Provenance};
use crate::error::{Error, Result};
use crate::seed::{SeedSpec, StreamRng};

/// Log-normal fitted to per-item interaction counts of Movielens-1M.
pub const MOVIELENS_ITEM_POPULARITY: LongTailParams = LongTailParams {
    family: super::longtail::LongTailFamily::LogNormal,
    mu: 4.76,
    sigma: 1.66,
};

/// Log-normal fitted to per-user interaction counts of Movielens-1M.
pub const MOVIELENS_USER_COUNTS: LongTailParams = LongTailParams {
    family: super::longtail::LongTailFamily::LogNormal,
    mu: 4.57,
    sigma: 1.04,
};

/// Knobs of the synthetic generator. Every field has a default, so a JSON
/// config only needs the fields it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_features: usize,
    pub n_user_categories: usize,
    pub n_item_categories: usize,
    /// Dirichlet concentration on features outside the own category block.
    pub epsilon: f64,
    /// Strength of the popularity exponent in candidate sampling.
    pub delta: f64,
    pub item_pop_params: LongTailParams,
    pub user_count_params: LongTailParams,
    /// Minimum interactions per user (before capping at the candidate count).
    pub tau: usize,
    pub minority_ratio: f64,
    /// Dirichlet concentration on the own category block.
    pub in_category_alpha: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_users: 4000,
            n_items: 4000,
            n_features: 8,
            n_user_categories: 2,
            n_item_categories: 2,
            epsilon: 0.5,
            delta: 10.0,
            item_pop_params: MOVIELENS_ITEM_POPULARITY,
            user_count_params: MOVIELENS_USER_COUNTS,
            tau: 10,
            minority_ratio: 0.3,
            in_category_alpha: 1.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_users < 4 || self.n_items < 2 {
            return fail(format!(
                "need at least 4 users and 2 items, got {} / {}",
                self.n_users, self.n_items
            ));
        }
        if self.n_user_categories < 2 || self.n_item_categories < 1 {
            return fail("need at least 2 user categories and 1 item category".into());
        }
        let blocks = self.n_user_categories.max(self.n_item_categories);
        if self.n_features == 0 || self.n_features % blocks != 0 {
            return fail(format!(
                "n_features {} must be a positive multiple of {blocks}",
                self.n_features
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return fail(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.in_category_alpha > 0.0 && self.in_category_alpha.is_finite()) {
            return fail(format!("in_category_alpha must be > 0, got {}", self.in_category_alpha));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return fail(format!("delta must be >= 0, got {}", self.delta));
        }
        if self.tau < 1 {
            return fail("tau must be >= 1".into());
        }
        if !(self.minority_ratio > 0.0 && self.minority_ratio <= 0.5) {
            return fail(format!("minority_ratio must be in (0, 0.5], got {}", self.minority_ratio));
        }
        self.item_pop_params.validate()?;
        self.user_count_params.validate()
    }

    /// Dirichlet concentration vector for an entity of `category` when the
    /// features are cut into `n_categories` equal blocks.
    fn concentration(&self, category: usize, n_categories: usize) -> Vec<f64> {
        let block = self.n_features / n_categories;
        (0..self.n_features)
            .map(|f| {
                if f / block == category {
                    self.in_category_alpha
                } else {
                    self.epsilon
                }
            })
            .collect()
    }
}

/// Points on the feature simplex for every user and item.
#[derive(Clone, Debug)]
pub struct LatentProfiles {
    pub user_vectors: Vec<Vec<f64>>,
    pub item_vectors: Vec<Vec<f64>>,
    pub user_categories: Vec<usize>,
    pub item_categories: Vec<usize>,
    pub user_groups: Vec<Group>,
}

/// Popularity scores and their rescaled density.
#[derive(Clone, Debug)]
pub struct ItemPopularity {
    pub pop: Vec<f64>,
    /// `pdf(pop_i) / max_j pdf(pop_j)`, in [0, 1] with maximum 1.
    pub normalized_density: Vec<f64>,
}

/// Candidate items of each user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSets {
    pub n_items: usize,
    pub sets: Vec<Vec<ItemId>>,
}

/// Draw from a Dirichlet distribution, computed in log space so that tiny
/// concentrations (which underflow a plain gamma draw) still yield a point on
/// the simplex.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let log_gammas: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            if a >= 1.0 {
                Gamma::new(a, 1.0).expect("positive shape").sample(rng).ln()
            } else {
                // G(a) = G(a + 1) * U^(1/a)
                let g = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
                let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
                g.ln() + u.ln() / a
            }
        })
        .collect();
    let max = log_gammas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_gammas.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

fn user_category<R: Rng + ?Sized>(config: &GeneratorConfig, rng: &mut R) -> usize {
    let draw: f64 = rng.random();
    if draw >= config.minority_ratio {
        0
    } else {
        // minority mass shared evenly by categories 1..C
        let others = config.n_user_categories - 1;
        1 + ((draw / config.minority_ratio) * others as f64).floor().min(others as f64 - 1.0) as usize
    }
}

/// Assigns categories and draws every user and item vector.
///
/// User category 0 maps to the majority group, all other user categories to
/// the minority. If the draw leaves the "minority" larger, labels are
/// swapped so that `Minority` is always the smaller group.
pub fn sample_latent_profiles(config: &GeneratorConfig, seed: SeedSpec) -> Result<LatentProfiles> {
    config.validate()?;
    let user_seed = seed.derive("user-profiles");
    let mut user_categories = Vec::with_capacity(config.n_users);
    let mut user_vectors = Vec::with_capacity(config.n_users);
    for u in 0..config.n_users {
        let mut rng = user_seed.derive_index("user", u as u64).rng();
        let c = user_category(config, &mut rng);
        user_vectors.push(sample_dirichlet(&config.concentration(c, config.n_user_categories), &mut rng));
        user_categories.push(c);
    }

    let item_seed = seed.derive("item-profiles");
    let mut item_categories = Vec::with_capacity(config.n_items);
    let mut item_vectors = Vec::with_capacity(config.n_items);
    for i in 0..config.n_items {
        let mut rng = item_seed.derive_index("item", i as u64).rng();
        let c = rng.random_range(0..config.n_item_categories);
        item_vectors.push(sample_dirichlet(&config.concentration(c, config.n_item_categories), &mut rng));
        item_categories.push(c);
    }

    let mut user_groups: Vec<Group> = user_categories
        .iter()
        .map(|&c| if c == 0 { Group::Majority } else { Group::Minority })
        .collect();
    let minority = user_groups.iter().filter(|g| g.is_minority()).count();
    if minority > config.n_users - minority {
        for g in &mut user_groups {
            *g = g.other();
        }
    }
    Ok(LatentProfiles {
        user_vectors,
        item_vectors,
        user_categories,
        item_categories,
        user_groups,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Utility of an item for a user: the raw dot product divided by the user's
/// largest raw dot product over all items.
pub fn utility(user_vector: &[f64], item_vector: &[f64], per_user_normalizer: f64) -> f64 {
    (dot(user_vector, item_vector) / per_user_normalizer).clamp(0.0, 1.0)
}

/// Largest raw dot product of a user over the item universe.
pub fn utility_normalizer(user_vector: &[f64], item_vectors: &[Vec<f64>]) -> f64 {
    item_vectors
        .iter()
        .map(|i| dot(user_vector, i))
        .fold(0.0, f64::max)
}

/// Draws popularity scores and rescales their density into [0, 1].
pub fn sample_popularity(params: &LongTailParams, n_items: usize, seed: SeedSpec) -> Result<ItemPopularity> {
    let pop = super::longtail::sample_long_tail(params, n_items, seed.derive("popularity"))?;
    let ln_pdf: Vec<f64> = pop.iter().map(|&p| params.ln_pdf(p)).collect();
    let max = ln_pdf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let normalized_density = ln_pdf.iter().map(|l| (l - max).exp()).collect();
    Ok(ItemPopularity {
        pop,
        normalized_density,
    })
}

/// Probability that an item is a candidate: `t^(delta * (1 - density))`.
pub fn inclusion_probability(utility: f64, delta: f64, normalized_density: f64) -> f64 {
    let exponent = delta * (1.0 - normalized_density.clamp(0.0, 1.0));
    utility.powf(exponent)
}

/// Bernoulli candidate sampling over every (user, item) pair.
pub fn generate_candidates(
    profiles: &LatentProfiles,
    popularity: &ItemPopularity,
    delta: f64,
    seed: SeedSpec,
) -> Result<CandidateSets> {
    if popularity.normalized_density.len() != profiles.item_vectors.len() {
        return Err(Error::InvalidArgument("popularity and item profiles disagree in length".into()));
    }
    if popularity
        .normalized_density
        .iter()
        .any(|d| !(0.0..=1.0).contains(d))
    {
        return Err(Error::InvalidArgument("normalized density outside [0, 1]".into()));
    }
    let seed = seed.derive("candidates");
    let sets = profiles
        .user_vectors
        .iter()
        .enumerate()
        .map(|(u, user)| {
            let mut rng = seed.derive_index("user", u as u64).rng();
            let norm = utility_normalizer(user, &profiles.item_vectors);
            profiles
                .item_vectors
                .iter()
                .zip(&popularity.normalized_density)
                .enumerate()
                .filter_map(|(i, (item, &density))| {
                    let p = inclusion_probability(utility(user, item, norm), delta, density);
                    (rng.random::<f64>() < p).then_some(i as ItemId)
                })
                .collect()
        })
        .collect();
    Ok(CandidateSets {
        n_items: profiles.item_vectors.len(),
        sets,
    })
}

fn interaction_count(params: &LongTailParams, tau: usize, available: usize, rng: &mut StreamRng) -> usize {
    let extra = params.sample_one(rng).floor();
    let extra = if extra.is_finite() && extra > 0.0 {
        extra.min(usize::MAX as f64 / 2.0) as usize
    } else {
        0
    };
    extra.saturating_add(tau).min(available)
}

/// Draws `n_u = floor(n_u') + tau` interactions per user uniformly without
/// replacement from the candidates, capped at the candidate count.
pub fn sample_interactions(
    candidates: &CandidateSets,
    groups: &[Group],
    user_count_params: &LongTailParams,
    tau: usize,
    seed: SeedSpec,
) -> Result<InteractionDataset> {
    user_count_params.validate()?;
    let seed = seed.derive("interactions");
    let mut histories = Vec::with_capacity(candidates.sets.len());
    for (u, set) in candidates.sets.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::EmptyCandidates { user: u });
        }
        let mut rng = seed.derive_index("user", u as u64).rng();
        let n = interaction_count(user_count_params, tau, set.len(), &mut rng);
        let mut picked: Vec<ItemId> = index::sample(&mut rng, set.len(), n)
            .into_iter()
            .map(|j| set[j])
            .collect();
        picked.sort_unstable();
        histories.push(picked);
    }
    InteractionDataset::new(candidates.n_items, histories, groups.to_vec(), Provenance::Synthetic)
}

/// Full pipeline: profiles, popularity, candidates, interactions.
pub fn generate_dataset(config: &GeneratorConfig, seed: SeedSpec) -> Result<InteractionDataset> {
    config.validate()?;
    let profiles = sample_latent_profiles(config, seed)?;
    let popularity = sample_popularity(&config.item_pop_params, config.n_items, seed)?;
    let candidates = generate_candidates(&profiles, &popularity, config.delta, seed)?;
    sample_interactions(
        &candidates,
        &profiles.user_groups,
        &config.user_count_params,
        config.tau,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small(epsilon: f64) -> GeneratorConfig {
        GeneratorConfig {
            n_users: 400,
            n_items: 300,
            epsilon,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(GeneratorConfig::default().validate().is_ok());
        let bad = [
            GeneratorConfig { epsilon: 0.0, ..Default::default() },
            GeneratorConfig { n_features: 7, ..Default::default() },
            GeneratorConfig { tau: 0, ..Default::default() },
            GeneratorConfig { minority_ratio: 0.6, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn config_json_defaults() {
        let c: GeneratorConfig = serde_json::from_str(r#"{"epsilon": 0.1, "n_users": 50}"#).unwrap();
        assert_eq!(c.epsilon, 0.1);
        assert_eq!(c.n_users, 50);
        assert_eq!(c.n_items, 4000);
        assert_eq!(c.minority_ratio, 0.3);
        assert!(serde_json::from_str::<GeneratorConfig>(r#"{"epsilon_typo": 1}"#).is_err());
    }

    #[test]
    fn utility_edge_cases() {
        let a = [1.0, 0.0, 0.0, 0.0];
        let b = [0.0, 1.0, 0.0, 0.0];
        let universe = vec![a.to_vec(), b.to_vec()];
        assert_eq!(utility(&a, &a, utility_normalizer(&a, &universe)), 1.0);
        assert_eq!(utility(&a, &b, utility_normalizer(&a, &universe)), 0.0);
        let uniform = [0.25; 4];
        assert_abs_diff_eq!(dot(&uniform, &uniform), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn inclusion_probability_identities() {
        assert_eq!(inclusion_probability(1.0, 7.0, 0.1), 1.0);
        assert_eq!(inclusion_probability(0.2, 7.0, 1.0), 1.0);
        assert_abs_diff_eq!(inclusion_probability(0.5, 2.0, 0.5), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn dirichlet_points_lie_on_simplex() {
        let mut rng = SeedSpec::new(1).rng();
        for alpha in [[0.001, 1.0, 1.0, 0.001], [0.02; 4], [5.0, 1.0, 0.5, 2.0]] {
            let x = sample_dirichlet(&alpha, &mut rng);
            assert!(x.iter().all(|&v| v >= 0.0));
            assert_abs_diff_eq!(x.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn profiles_lie_on_simplex() {
        let p = sample_latent_profiles(&small(0.05), SeedSpec::new(3)).unwrap();
        for v in p.user_vectors.iter().chain(&p.item_vectors) {
            assert!(v.iter().all(|&x| x >= 0.0));
            assert_abs_diff_eq!(v.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn popularity_density_is_rescaled() {
        let pop = sample_popularity(&MOVIELENS_ITEM_POPULARITY, 500, SeedSpec::new(2)).unwrap();
        assert!(pop.normalized_density.iter().all(|d| (0.0..=1.0).contains(d)));
        assert_eq!(pop.normalized_density.iter().copied().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn count_cap_and_minimum() {
        let candidates = CandidateSets {
            n_items: 10,
            sets: vec![vec![1, 4, 7], (0..10).collect()],
        };
        let groups = [Group::Majority, Group::Minority];
        let ds = sample_interactions(&candidates, &groups, &MOVIELENS_USER_COUNTS, 5, SeedSpec::new(0)).unwrap();
        assert_eq!(ds.history(0), &[1, 4, 7]);
        assert!(ds.history(1).len() >= 5);

        let empty = CandidateSets { n_items: 3, sets: vec![vec![0], vec![]] };
        assert!(matches!(
            sample_interactions(&empty, &groups, &MOVIELENS_USER_COUNTS, 1, SeedSpec::new(0)),
            Err(Error::EmptyCandidates { user: 1 })
        ));
    }

    #[test]
    fn generation_is_deterministic() {
        let c = small(0.3);
        let a = generate_dataset(&c, SeedSpec::new(4)).unwrap();
        let b = generate_dataset(&c, SeedSpec::new(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_dataset(&c, SeedSpec::new(5)).unwrap());
    }
}
