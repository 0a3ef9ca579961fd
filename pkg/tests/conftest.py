import os
import warnings

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

P = 11
D_K = 8
PSI_MATRIX = [[0, 4], [2, 0]]  # i_p(psi(sqrt 8)); z_psi = sqrt(8)/2


@pytest.fixture(scope="session")
def datum():
    from artifact.quatalg import fixture_datum

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fixture_datum(P)


@pytest.fixture(scope="session")
def emb(datum):
    from artifact.darmon import embedding_from_matrix

    return embedding_from_matrix(datum, D_K, 1, PSI_MATRIX)


@pytest.fixture(scope="session")
def pipeline_cache():
    """Lifts shared across tests, keyed by (datum, params, shift)."""
    return {}


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key][1])
