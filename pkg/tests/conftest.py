import warnings

import numpy as np
import pytest

from tlsloss.inference import LossFitConfig, fit_loss_model
from tlsloss.simulate import Scenario, synth_loss_data
from tlsloss.tlsmodel import TemperatureRangeWarning


@pytest.fixture(autouse=True)
def _quiet_hot_temperatures():
    # heated baths above 2 K are part of several scenarios
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TemperatureRangeWarning)
        yield


@pytest.fixture(scope="session")
def as_deposited_data():
    return synth_loss_data(Scenario("as-deposited", seed=11))


@pytest.fixture(scope="session")
def annealed_data():
    return synth_loss_data(Scenario("annealed", seed=11))


@pytest.fixture(scope="session")
def as_deposited_fit(as_deposited_data):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TemperatureRangeWarning)
        return fit_loss_model(*as_deposited_data, LossFitConfig(self_heating="fit"))


@pytest.fixture(scope="session")
def annealed_fit(annealed_data):
    return fit_loss_model(*annealed_data, LossFitConfig(self_heating="off"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------- acceptance summary

ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the verdict follows the test outcome."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])
    entry = {"id": None, "text": "", "detail": "", "ok": False}

    def record(cid, text):
        entry["id"], entry["text"] = cid, text
        return entry

    yield record
    if entry["id"] is not None:
        rep = getattr(request.node, "rep_call", None)
        entry["ok"] = bool(rep is not None and rep.passed)
        lines.append(entry)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for e in sorted(lines, key=lambda e: (int("".join(c for c in e["id"] if c.isdigit())), e["id"])):
        verdict = "PASS" if e["ok"] else "FAIL"
        detail = f"  [{e['detail']}]" if e["detail"] else ""
        terminalreporter.write_line(f"{verdict}  {e['id']:>3}  {e['text']}{detail}")
