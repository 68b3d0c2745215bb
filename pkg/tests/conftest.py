import numpy as np
import pytest

from excitrans.dynamics import Structure


def random_structure(rng, n, id=0):
    coords = np.vstack([[0.0, 0.0, 0.0], rng.random((n - 2, 3)), [1.0, 1.0, 1.0]])
    return Structure(id, coords)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def expm_taylor(a, terms=30):
    """exp(a) by scaling, Taylor series and repeated squaring."""
    norm = np.abs(a).sum(axis=0).max()
    k = max(0, int(np.ceil(np.log2(norm))) + 4) if norm > 0 else 0
    b = a / 2.0**k
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for j in range(1, terms):
        term = term @ b / j
        out = out + term
    for _ in range(k):
        out = out @ out
    return out


# -- desk-scale ensemble and acceptance reporting ---------------------------

DESK = dict(n_sites=6, samples=10_000_000, master_seed=1)
ACCEPTANCE = []


def record(number, title, passed, detail):
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """Full pipeline on the desk-scale n=6 ensemble (about five minutes on one core)."""
    import os
    from excitrans import pipeline as P
    from excitrans.campaign import CampaignConfig
    out = tmp_path_factory.mktemp("desk6")
    cfg = CampaignConfig(**DESK, workers=os.cpu_count() or 1, output_dir=str(out))
    P.run_all(cfg)
    return out
