import numpy as np
import pytest

from empc_dispatch.tariff import BessParams, TariffSchedule


@pytest.fixture
def tariff():
    return TariffSchedule(r_ec=0.1, r_nc=24.48, r_op=19.19)


@pytest.fixture
def bess():
    return BessParams(energy_kwh=2500.0, power_kw=700.0, eta=0.8, soc_min=0.2, soc_max=0.8,
                      soc_init=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion with the measured detail."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid or rep.when != "call":
                continue
            name = nodeid.split("::")[-1]
            number = int(name.split("_")[2])
            detail = "; ".join(f"{k}={v}" for k, v in rep.user_properties)
            lines.append((number, f"criterion {number:2d}: {outcome.upper():6s} {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
