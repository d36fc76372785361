import numpy as np
import pytest

from persona_motion.config import ModelConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_cfg():
    """A narrow model configuration for fast structural tests."""
    return ModelConfig(d_model=16, d_txt=16, d_clip=8, d_proj=8, heads=2, ff_mult=2,
                       clip_depth=1, extractor_depth=1, denoiser_depth=2, max_len=80)


@pytest.fixture(scope="session")
def experiments():
    """Lazily trained desk-scale pipelines, keyed by seed (see experiment.py)."""
    from experiment import Experiments
    return Experiments()


@pytest.fixture(scope="session")
def trained(experiments):
    return experiments(0)


_CRITERIA = {}


def pytest_runtest_logreport(report):
    """Remember the outcome of each acceptance criterion test."""
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or report.failed:
        number = int(report.nodeid.split("test_criterion_")[1].split("_")[0])
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[number] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        verdict, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {detail}")
