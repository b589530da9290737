import numpy as np
import pytest

from lago.data import TrialDataset, from_center_blocks
from lago.fixtures import make_dataset


@pytest.fixture(scope="session")
def checklist_trial() -> TrialDataset:
    return make_dataset()


def random_dataset(rng: np.random.Generator, n_centers: int = 12, n_per: int = 25,
                   p: int = 2, q: int = 1, link="identity", beta=None,
                   sigma: float = 1.0, stages: int = 1) -> TrialDataset:
    """Small synthetic dataset with packages/covariates drawn at random."""
    from lago.links import Link, inverse
    lk = Link.parse(link) if isinstance(link, str) else link
    if beta is None:
        beta = np.concatenate([[0.2], rng.normal(0, 0.3, p), rng.normal(0, 0.3, q)])
    blocks = []
    for j in range(n_centers):
        stage = 1 + (j % stages)
        ctrl = j % 3 == 0
        a = np.zeros(p) if ctrl else rng.uniform(0.2, 3.0, p)
        z = rng.normal(0, 1, q)
        eta = beta[0] + beta[1:1 + p] @ a + beta[1 + p:] @ z
        y = inverse(lk, eta) + rng.normal(0, sigma, n_per)
        blocks.append((stage, f"c{j:03d}", not ctrl, a, z, y))
    return from_center_blocks(blocks)
