import warnings

import numpy as np
import pytest

from cqabench.config import (default_strategy_entries, resolve_strategy_map)
from cqabench.impute import EmParams, KnnParams
from cqabench.impute import apply_strategy_map
from cqabench.schema import rq1_schema, rq3_schema
from cqabench.synth import SyntheticProfile, generate_synthetic_users
from cqabench.table import UserFeatureTable

warnings.filterwarnings("ignore", category=UserWarning)


def restrict(full: UserFeatureTable, schema) -> UserFeatureTable:
    keep = [full.schema.index(c.name) for c in schema.columns]
    return UserFeatureTable(schema, full.values[:, keep], full.missing[:, keep])


def imputed_table(schema, n: int, seed: int,
                  profile: SyntheticProfile | None = None) -> UserFeatureTable:
    full = generate_synthetic_users(n, seed, profile)
    t = restrict(full, schema)
    strategy_map = resolve_strategy_map(default_strategy_entries(), schema,
                                        KnnParams(), EmParams())
    return apply_strategy_map(t, strategy_map)


@pytest.fixture(scope="session")
def planted_rq1():
    """Imputed activity-target table at the discrimination-test scale."""
    return imputed_table(rq1_schema(), 5000, 7)


@pytest.fixture(scope="session")
def planted_rq3():
    """Imputed dropout-target table at the discrimination-test scale."""
    return imputed_table(rq3_schema(), 5000, 7)


@pytest.fixture(scope="session")
def small_rq1():
    return imputed_table(rq1_schema(), 1500, 3)


@pytest.fixture(scope="session")
def small_rq3():
    return imputed_table(rq3_schema(), 1500, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
