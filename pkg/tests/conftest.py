import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from psjnet.model.params import ModelConfig
from psjnet.model.sequence import MixedSequence
from psjnet.trainer import init_params

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_events(rng, n, n_a=9, n_b=9):
    out = []
    for _ in range(n):
        dom = "A" if rng.random() < 0.5 else "B"
        out.append((dom, int(rng.integers(n_a if dom == "A" else n_b))))
    return tuple(out)


def jittered_params(cfg, sizes, seed, scale=0.3):
    """Initialised parameters with non-zero biases so every term matters."""
    params = init_params(cfg, sizes, seed)
    rng = np.random.default_rng(seed + 1000)
    return {k: v + scale * rng.normal(size=v.shape) for k, v in params.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_seq():
    return MixedSequence(
        (("A", 3), ("B", 1), ("A", 7), ("A", 2), ("B", 14), ("B", 0), ("A", 19), ("B", 5), ("A", 11), ("B", 9))
    )


ALL_CONFIGS = [
    ModelConfig(variant="psjnet1", k=3, hidden=5),
    ModelConfig(variant="psjnet2", k=3, hidden=5),
    ModelConfig(variant="psjnet1", k=3, hidden=5, ablate="sj"),
    ModelConfig(variant="psjnet2", k=3, hidden=5, ablate="s"),
    ModelConfig(variant="psjnet2", k=3, hidden=5, ablate="j"),
    ModelConfig(variant="psjnet1", k=3, hidden=5, ablate="psj"),
    ModelConfig(variant="psjnet2", k=3, hidden=5, ablate="psj"),
    ModelConfig(variant="psjnet2", k=3, hidden=5, share_role_transfer=True),
]


@pytest.fixture
def acceptance(request):
    """``record(number, title, ok, detail)`` for the acceptance summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(number, title, ok, detail=""):
        lines.append((number, f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else "")))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
