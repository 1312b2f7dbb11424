import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory):
    """10 pairs per kind, written once per session."""
    from v2v_encounters.synthgen import generate_corpus

    out = tmp_path_factory.mktemp("corpus") / "raw"
    generate_corpus(out, n_per_kind=10, seed=11, noise_sigma=1.0)
    return out


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
