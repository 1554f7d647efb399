import numpy as np
import pytest

from n2vlab.experiment import ExperimentSpec, run_experiment
from n2vlab.graph import Graph, SbmSpec, generate_sbm, les_miserables


@pytest.fixture(scope="session")
def lesmis():
    return les_miserables()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def k3():
    return Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)])


@pytest.fixture
def path3():
    return Graph.from_edges(3, [(0, 1), (1, 2)])


def tiny_spec(repeats=10, **kw):
    base = dict(
        graph={"sbm": {"block_sizes": [6, 6], "p_intra": 0.8, "p_inter": 0.1, "seed": 3}, "id": "tiny"},
        grid={"L": [3], "N": [2], "d": [4], "C": [2], "q": [1, 2]},
        repeats=repeats,
        experiment_seed=7,
        training={"epochs_max": 2},
    )
    base.update(kw)
    return ExperimentSpec(**base)


@pytest.fixture(scope="session")
def tiny_store(tmp_path_factory):
    """Two groups x 10 repeats on a 12-node SBM."""
    out = tmp_path_factory.mktemp("tiny") / "store"
    spec = tiny_spec()
    run_experiment(spec, out)
    return out, spec


_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance verdict; the test still asserts it afterwards."""

    def report(num: int, ok: bool, detail: str) -> bool:
        _CRITERIA[num] = (bool(ok), detail)
        print(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")
        return bool(ok)

    return report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        ok, detail = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")
