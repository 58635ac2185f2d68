import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion, regardless of
    # output capturing
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {status}: {name}", flush=True)


@pytest.fixture
def clean_corpus(tmp_path):
    """Small noise-free synthetic corpus with caches."""
    from mapscreen.noise import NoiseSpec, generate_corpus

    return generate_corpus(tmp_path / "corpus", total=48, noise=NoiseSpec(edits=0, seed=3))
