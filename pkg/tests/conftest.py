from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"
LAG_CSV = DATA / "lag.csv"
SYNTHETIC_CSV = DATA / "example_synthetic.csv"


def simulate_normal(rng, n, mu=(0.65, -1.45), sd=(0.3, 0.7), rho=-0.2, v_range=(0.05, 0.5)):
    """Draw ``(y, S)`` from the bivariate normal-normal model with diagonal S_i."""
    v = rng.uniform(*v_range, size=(n, 2))
    S = np.zeros((n, 2, 2))
    S[:, 0, 0] = v[:, 0]
    S[:, 1, 1] = v[:, 1]
    sigma = np.array([[sd[0] ** 2, rho * sd[0] * sd[1]], [rho * sd[0] * sd[1], sd[1] ** 2]])
    y = np.array([rng.multivariate_normal(mu, S[i] + sigma) for i in range(n)])
    return y, S


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def synthetic_csv():
    return SYNTHETIC_CSV



def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, label): acceptance criterion tag")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", f"{m.args[0]:>2} {m.args[1]}"))


def pytest_terminal_summary(terminalreporter):
    passed, failed = set(), set()
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            label = dict(getattr(rep, "user_properties", [])).get("criterion")
            if label is None:
                continue
            if outcome != "passed":
                failed.add(label)
            elif rep.when == "call":
                passed.add(label)
    labels = passed | failed
    if labels:
        terminalreporter.section("acceptance criteria")
        for label in sorted(labels, key=lambda t: int(t.split()[0])):
            verdict = "FAIL" if label in failed else "PASS"
            terminalreporter.write_line(f"criterion {label}: {verdict}")
