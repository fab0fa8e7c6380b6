import pytest

from polyset.dataset import DatasetConfig, generate_corpus


@pytest.fixture(scope="session")
def small_corpus():
    cfg = DatasetConfig(n_groups=30, chains_per_ensemble=256, master_seed=3)
    return cfg, generate_corpus(cfg)


@pytest.fixture(scope="session")
def iso_corpus():
    """Ten groups pinned at Mn = 1e6, dispersity 3: forty records."""
    cfg = DatasetConfig(n_groups=10, mn_range=(1e6, 1e6), dispersity_range=(3.0, 3.0), master_seed=11)
    return generate_corpus(cfg)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
