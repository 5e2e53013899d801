import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from quadqbd import corpus  # noqa: E402
from quadqbd.model import DIRECTIONS  # noqa: E402


def random_weights(seed):
    """Random direction weights, some of them zero."""
    rng = np.random.default_rng(seed)
    w = {key: float(rng.uniform(0.1, 1.0)) for key in DIRECTIONS}
    for key in rng.choice(DIRECTIONS, size=rng.integers(0, 4), replace=False):
        if key != "00":
            w[key] = 0.0
    return w


def random_spec(seed):
    rng = np.random.default_rng(seed)
    weights = random_weights(seed)
    if rng.uniform() < 0.5:
        return corpus.level_independent(k=int(rng.integers(1, 4)), seed=seed, weights=weights)
    period = int(rng.integers(2, 4))
    kfun = lambda n, m: 1 + (n * 2 + m) % period  # noqa: E731
    return corpus.variable_k(kfun, inner=int(rng.integers(2, 6)), k_out=int(rng.integers(1, 3)),
                             seed=seed, weights=weights)


CORPUS = {
    "product-form": corpus.product_form,
    "level-independent": corpus.level_independent,
    "variable-k": corpus.variable_k,
}


@pytest.fixture(params=sorted(CORPUS))
def corpus_spec(request):
    return CORPUS[request.param]()


@pytest.fixture(scope="session")
def product_form():
    return corpus.product_form()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
