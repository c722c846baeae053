//! Matching mechanisms, entrywise sampling probabilities and noisy reward
//! observations.

mod batch;
mod matching;
mod scheme;
mod truncated;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Result};
use crate::matmodel::RewardMatrix;

pub use batch::{Observation, ObservationBatch};
pub use matching::{sample_matching, Matching};
pub use scheme::MatchingScheme;
pub use truncated::{sample_truncated_binomial, TruncatedBinomial, MAX_REJECTIONS};

/// ν, the probability a fixed entry is revealed by one matching draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntrywiseProbability {
    pub nu: f64,
    /// Monte Carlo standard error; `None` when ν is exact.
    pub mc_se: Option<f64>,
}

/// ν = 1/d₂ (one-to-one), Kp₀/d₂ (one-to-many), or a Monte Carlo estimate
/// of E[min(B_r, B_s)]/(d₁d₂) from `mc_samples` arrival draws (two-sided).
pub fn entrywise_probability<R: Rng + ?Sized>(
    scheme: &MatchingScheme,
    d1: usize,
    d2: usize,
    mc_samples: usize,
    rng: &mut R,
) -> Result<EntrywiseProbability> {
    scheme.validate(d1, d2)?;
    Ok(match *scheme {
        MatchingScheme::OneToOne => EntrywiseProbability { nu: 1.0 / d2 as f64, mc_se: None },
        MatchingScheme::OneToMany { k, p0 } => EntrywiseProbability {
            nu: k as f64 * p0 / d2 as f64,
            mc_se: None,
        },
        MatchingScheme::TwoSided { p1, p2, c_r, c_s, gamma } => {
            ensure_arg!(mc_samples >= 1, "two-sided nu needs at least one Monte Carlo sample");
            let tb = TruncatedBinomial { d1, p1, d2, p2, c_r, c_s, gamma };
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..mc_samples {
                let (br, bs) = tb.sample(rng)?;
                let x = br.min(bs) as f64;
                sum += x;
                sum_sq += x * x;
            }
            let n = mc_samples as f64;
            let mean = sum / n;
            let var = if mc_samples > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
            let cells = (d1 * d2) as f64;
            EntrywiseProbability {
                nu: mean / cells,
                mc_se: Some((var / n).sqrt() / cells),
            }
        }
    })
}

/// T matchings from `scheme` with rewards M(i, j) + N(0, σ²) per revealed
/// entry.
pub fn observe<R: Rng + ?Sized>(
    m: &RewardMatrix,
    scheme: &MatchingScheme,
    t: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<ObservationBatch> {
    ensure_arg!(t >= 1, "need at least one observation");
    ensure_arg!(sigma >= 0.0 && sigma.is_finite(), "noise level must be nonnegative, got {sigma}");
    let (d1, d2) = m.dims();
    let values = m.values();
    let mut records = Vec::with_capacity(t);
    for _ in 0..t {
        let matching = sample_matching(scheme, d1, d2, rng)?;
        let y = matching
            .pairs
            .iter()
            .map(|&(i, j)| {
                let z: f64 = StandardNormal.sample(rng);
                values[(i, j)] + sigma * z
            })
            .collect();
        records.push(Observation { pairs: matching.pairs, y });
    }
    Ok(ObservationBatch { scheme: *scheme, d1, d2, sigma, seed: None, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matmodel::generate_low_rank;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_nu() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let oto = entrywise_probability(&MatchingScheme::OneToOne, 100, 750, 0, &mut rng).unwrap();
        assert_eq!(oto.nu, 1.0 / 750.0);
        assert!(oto.mc_se.is_none());
        let otm = MatchingScheme::OneToMany { k: 5, p0: 0.8 };
        let nu = entrywise_probability(&otm, 100, 750, 0, &mut rng).unwrap().nu;
        assert!((nu - 4.0 / 750.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_rewards_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = generate_low_rank(5, 9, 2, 3.0, &mut rng).unwrap();
        let b = observe(&m, &MatchingScheme::OneToOne, 50, 0.0, &mut rng).unwrap();
        for rec in &b.records {
            for (i, j, y) in rec.entries() {
                assert_eq!(y, m.values()[(i, j)]);
            }
        }
    }

    #[test]
    fn jsonl_round_trip_and_rejects_bad_records() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = generate_low_rank(3, 6, 1, 3.0, &mut rng).unwrap();
        let mut b = observe(&m, &MatchingScheme::OneToMany { k: 2, p0: 0.5 }, 4, 1.0, &mut rng).unwrap();
        b.seed = Some(9);
        let mut buf = Vec::new();
        b.write_jsonl(&mut buf).unwrap();
        let back = ObservationBatch::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, b);

        let bad = "{\"scheme\":{\"type\":\"one_to_one\"},\"d1\":2,\"d2\":2,\"sigma\":1.0,\"seed\":null}\n{\"t\":0,\"pairs\":[[0,0],[1,0]],\"y\":[1.0,2.0]}\n";
        assert!(matches!(ObservationBatch::read_jsonl(bad.as_bytes()), Err(crate::Error::Format(_))));
    }
}
