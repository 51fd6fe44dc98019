"""Deterministic synthetic user tables with planted, recoverable signal.

Count-like activity columns are log-normal draws tied to a shared latent
activity level, rate-like columns are bounded beta/uniform draws, and each
prediction target is generated from a known linear-plus-interaction score
with a noise level chosen to pin the achievable R². Missingness is injected
per strategy group: structural absence for code-derived columns, random
holes for the neighbour- and distribution-imputed groups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schema import user_table_schema, violation_density_columns
from .table import UserFeatureTable

#: Columns whose holes are filled by the zero strategy (structural absence).
ZERO_GROUP = ("Code Length",) + violation_density_columns()
#: Columns whose holes are filled from similar profiles (nearest neighbours).
KNN_GROUP = (
    "Comments", "Edits", "Badges", "Post Readability",
    "Post Attention to Detail", "User Contribution Frequency",
)
#: Columns whose holes are filled by a joint Gaussian fit.
EM_GROUP = (
    "About Me Polarity", "Comment Polarity", "Question Polarity",
    "Answer Polarity", "User Popularity Index",
)


@dataclass(frozen=True)
class SyntheticProfile:
    """Knobs for the generator: planted signal strength and missingness rates."""

    signal_r2: float = 0.8  # achievable R² ceiling for the activity target
    quality_signal_r2: float = 0.5  # ceiling for the code-quality targets
    dropout_rate: float = 0.55  # prevalence of the positive dropout label
    dropout_signal: float = 3.0  # logit scale of the planted dropout score
    missing_zero: float = 0.30  # fraction of users with no code at all
    missing_knn: float = 0.08  # random hole rate in the neighbour group
    missing_em: float = 0.08  # random hole rate in the Gaussian group

    def key(self) -> tuple:
        return (
            self.signal_r2, self.quality_signal_r2, self.dropout_rate,
            self.dropout_signal, self.missing_zero, self.missing_knn,
            self.missing_em,
        )

    @classmethod
    def from_mapping(cls, data: dict) -> "SyntheticProfile":
        return cls(**{k: float(v) for k, v in data.items()})


def _standardize(x: np.ndarray) -> np.ndarray:
    if x.size == 0:
        return x.astype(np.float64)
    sd = x.std()
    return (x - x.mean()) / (sd if sd > 0 else 1.0)


def _count_column(rng: np.random.Generator, activity: np.ndarray,
                  weight: float, mu: float, sigma: float) -> np.ndarray:
    noise = rng.lognormal(mu, sigma, activity.shape[0])
    return np.floor(activity ** weight * noise)


def _noise_sigma(signal_sigma: float, r2: float) -> float:
    """Log-scale noise so that Var(E[y|x])/Var(y) of the log-normal target
    equals ``r2`` (exact for exp of independent Gaussian signal and noise)."""
    s2 = signal_sigma**2
    total = np.log1p(np.expm1(s2) / r2)
    return float(np.sqrt(total - s2))


def _prevalence_offset(score: np.ndarray, rate: float) -> float:
    """Intercept c such that mean(sigmoid(score + c)) == rate, by bisection."""
    lo, hi = -30.0, 30.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if np.mean(1.0 / (1.0 + np.exp(-(score + mid)))) < rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_synthetic_users(n: int, seed: int,
                             profile: SyntheticProfile | None = None
                             ) -> UserFeatureTable:
    """Generate ``n`` synthetic users; a pure function of its arguments."""
    if n < 0:
        raise ValueError(f"row count must be non-negative, got {n}")
    profile = profile or SyntheticProfile()
    schema = user_table_schema()
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC0A)))

    cols: dict[str, np.ndarray] = {}
    activity = rng.lognormal(0.5, 1.0, n)

    cols["Gender"] = rng.integers(0, 2, n).astype(np.float64)
    cols["ProfileLength"] = np.floor(rng.lognormal(3.0, 1.0, n))
    cols["YearlyDurationUsage"] = rng.uniform(0.1, 15.0, n)
    cols["UpVotes"] = _count_column(rng, activity, 0.9, 0.8, 0.9)
    cols["DownVotes"] = _count_column(rng, activity, 0.6, -1.2, 1.0)
    cols["Views"] = _count_column(rng, activity, 1.0, 1.5, 1.0)
    cols["Reputation"] = _count_column(rng, activity, 1.1, 2.0, 1.1)
    cols["Questions"] = _count_column(rng, activity, 0.9, 0.0, 0.7)
    cols["Comments"] = _count_column(rng, activity, 0.8, 0.3, 0.8)
    cols["Edits"] = _count_column(rng, activity, 0.7, -0.5, 0.9)
    cols["Badges"] = _count_column(rng, activity, 0.8, -0.2, 0.7)
    cols["Post Readability"] = 100.0 * rng.beta(5.0, 2.0, n)
    cols["Post Attention to Detail"] = 100.0 * rng.beta(2.0, 5.0, n)
    cols["About Me Polarity"] = 2.0 * rng.beta(5.0, 5.0, n) - 1.0
    cols["Comment Polarity"] = 2.0 * rng.beta(6.0, 4.0, n) - 1.0
    cols["Question Polarity"] = 2.0 * rng.beta(4.0, 5.0, n) - 1.0
    cols["Answer Polarity"] = 2.0 * rng.beta(5.0, 4.0, n) - 1.0
    cols["User Profile Completion Rate"] = rng.beta(2.0, 2.0, n)
    cols["User Popularity Index"] = (
        0.6 * _standardize(np.log1p(cols["Views"]))
        + 0.4 * _standardize(np.log1p(cols["Reputation"]))
        + rng.normal(0.0, 0.8, n)
    )
    cols["User Disengagement Rate"] = rng.uniform(0.0, 48.0, n)
    days = cols["YearlyDurationUsage"] * 365.0
    cols["User Contribution Frequency"] = (cols["Questions"] + activity) / days
    cols["Code Length"] = _count_column(rng, activity, 0.8, 2.5, 1.2)

    # Planted regression score: linear part plus one interaction, built on
    # log-compressed activity columns so the target stays right-skewed.
    z_q = _standardize(np.log1p(cols["Questions"]))
    z_c = _standardize(np.log1p(cols["Comments"]))
    z_b = _standardize(np.log1p(cols["Badges"]))
    z_read = _standardize(cols["Post Readability"])
    z_pol = _standardize(cols["About Me Polarity"])
    # Both factors are clipped at 3 standard deviations so the exponential
    # link keeps a strong right skew without an untrainable extreme tail.
    signal = 0.75 * np.clip(_standardize(
        0.9 * z_q + 0.7 * z_c + 0.5 * z_b + 0.4 * z_read + 0.3 * z_pol
        + 0.6 * z_q * z_c
    ), -3.0, 3.0)
    eps = _noise_sigma(0.75, profile.signal_r2) * \
        np.clip(rng.normal(0.0, 1.0, n), -3.0, 3.0)
    cols["Answers"] = np.floor(np.exp(2.3 + signal + eps))

    cols["User Development Index"] = cols["Questions"] + cols["Answers"]
    cols["User Management Index"] = cols["UpVotes"] + cols["DownVotes"]

    # Planted classification score for the dropout label (1 = dropped out).
    z_dur = _standardize(cols["YearlyDurationUsage"])
    z_dis = _standardize(cols["User Disengagement Rate"])
    drop_score = profile.dropout_signal * _standardize(
        -1.0 * z_dur - 0.8 * z_q + 0.7 * z_dis - 0.5 * z_pol
        + 0.5 * z_dur * z_q
    )
    if n > 0:
        drop_score = drop_score + _prevalence_offset(
            drop_score, profile.dropout_rate
        )
    p_drop = 1.0 / (1.0 + np.exp(-drop_score))
    cols["Dropout"] = (rng.random(n) < p_drop).astype(np.float64)

    # Code-quality targets: per-column planted mixes of code size, activity,
    # and attention, at the configured (weaker) ceiling.
    z_len = _standardize(np.log1p(cols["Code Length"]))
    z_att = _standardize(cols["Post Attention to Detail"])
    vd_eps_sigma = _noise_sigma(0.8, profile.quality_signal_r2)
    for i, name in enumerate(violation_density_columns()):
        w = 0.5 + 0.5 * ((i * 2654435761) % 97) / 97.0  # fixed per-column mix
        vd_signal = _standardize(
            w * z_len + (1.2 - w) * z_q - 0.4 * z_att + 0.3 * z_c * z_len
        )
        vd_eps = rng.normal(0.0, vd_eps_sigma, n)
        cols[name] = np.round(np.exp(-1.5 + 0.8 * vd_signal + vd_eps) / 10.0, 6)

    values = np.column_stack([cols[c.name] for c in schema.columns]) \
        if n > 0 else np.empty((0, len(schema.columns)))
    mask = np.zeros_like(values, dtype=bool)

    # Structural absence: users without any code have no code-derived cells.
    no_code = rng.random(n) < profile.missing_zero
    for name in ZERO_GROUP:
        mask[no_code, schema.index(name)] = True
    for name in KNN_GROUP:
        mask[rng.random(n) < profile.missing_knn, schema.index(name)] = True
    for name in EM_GROUP:
        mask[rng.random(n) < profile.missing_em, schema.index(name)] = True

    values = values.copy()
    values[mask] = np.nan
    return UserFeatureTable(schema, values, mask)
