import pathlib

import numpy as np
import pytest

from slhnet import CcdParams, ModeRegistry, OperatorExpr

REPO_ROOT = pathlib.Path(__file__).resolve().parent.parent

# verdict lines from the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def reg():
    return ModeRegistry(["a", "b"])


@pytest.fixture
def ab(reg):
    return (OperatorExpr.annihilation(reg, "a"),
            OperatorExpr.annihilation(reg, "b"))


@pytest.fixture
def ccd_params():
    # well-separated features inside the default sweep window
    return CcdParams(lambda_p_nm=1549.90, lambda_c_nm=1550.15, kappa=2.0e11,
                     gamma_p=3.0e10, gamma_c=1.2e11, phi=0.55, eta=0.12,
                     drive_amplitude=1.0)


@pytest.fixture
def ccd_netlist_path():
    return REPO_ROOT / "ccd.slh"


def random_params(rng: np.random.Generator) -> CcdParams:
    """Randomized physical-range CCD parameters (Q ~ 1e3..4e3 regime)."""
    return CcdParams(
        lambda_p_nm=float(rng.uniform(1548.0, 1552.0)),
        lambda_c_nm=float(rng.uniform(1548.0, 1552.0)),
        kappa=float(rng.uniform(5e10, 4e11)),
        gamma_p=float(rng.uniform(0.0, 1e11)),
        gamma_c=float(rng.uniform(0.0, 2e11)),
        phi=float(rng.uniform(0.0, 2.0 * np.pi)),
        eta=float(rng.uniform(0.0, 0.6)),
        drive_amplitude=complex(rng.normal(), rng.normal()),
    )
