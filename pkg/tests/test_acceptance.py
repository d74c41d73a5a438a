"""Acceptance criteria C1-C13, each at its stated tolerance, on the default configuration.

Every criterion reports one PASS/FAIL line in the terminal summary.
"""
from functools import lru_cache

import pytest

from csslab.cli import load_config
from csslab.experiments import SCENARIOS


@lru_cache(maxsize=None)
def scenario(name):
    return SCENARIOS[name](load_config())


def _judge(log, crit, names):
    checks = [c for n in names for c in scenario(n).checks if c.criterion == crit]
    assert checks, f"no checks recorded for {crit}"
    failed = [c for c in checks if not c.passed]
    detail = f"{len(checks) - len(failed)}/{len(checks)} checks"
    if failed:
        detail += "; failed: " + "; ".join(f"{c.name} = {c.value} ({c.bound})" for c in failed)
    log.append((crit, not failed, detail))
    assert not failed, detail


def test_c1_kernel_identities(acceptance_log):
    _judge(acceptance_log, "C1", ["verify-kernels"])


def test_c2_conjugation_identity(acceptance_log):
    _judge(acceptance_log, "C2", ["verify-kernels"])


def test_c3_green_inverses(acceptance_log):
    _judge(acceptance_log, "C3", ["greens"])


def test_c4_generalized_kernel_element(acceptance_log):
    _judge(acceptance_log, "C4", ["rho"])


def test_c5_cb_constant(acceptance_log):
    _judge(acceptance_log, "C5", ["profiles"])


def test_c6_profile_residual_scalings(acceptance_log):
    _judge(acceptance_log, "C6", ["profiles"])


def test_c7_cubic_cancellation(acceptance_log):
    _judge(acceptance_log, "C7", ["profiles"])


def test_c8_decomposition(acceptance_log):
    _judge(acceptance_log, "C8", ["decompose-roundtrip"])


def test_c9_parameter_laws(acceptance_log):
    _judge(acceptance_log, "C9", ["ode-law", "rate-fit"])


@pytest.mark.slow
def test_c10_pde_vs_ode(acceptance_log):
    _judge(acceptance_log, "C10", ["pde-vs-ode"])


@pytest.mark.slow
def test_c11_bootstrap_and_energy(acceptance_log):
    _judge(acceptance_log, "C11", ["pde-vs-ode"])


def test_c12_pseudoconformal(acceptance_log):
    _judge(acceptance_log, "C12", ["infinite-time"])


def test_c13_norm_suites(acceptance_log):
    _judge(acceptance_log, "C13", ["norm-suite"])
