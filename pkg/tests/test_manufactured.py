import numpy as np
import pytest

from ensheat.manufactured import (
    ManufacturedSolution,
    UnsupportedFamilyError,
    attach_manufactured_forcing,
    derive_forcing,
    interface_residual,
    manufactured_family,
    pde_residual,
    residual_gate,
)
from ensheat.sampling import Constant, SinusoidalInTime, case1_samples, case2_samples

KAPPAS = [0.01, 1.0, 10.0]
EPS = [0.6207, 0.1841, 0.2691]


def unit_ms():
    return ManufacturedSolution(kappa=1.0, nu1=Constant(1.0), nu2=Constant(1.0))


def test_upper_forcing_spot_value():
    # f1 = -u1 + 2 a nu1 (1-y) e^{-t}; at (t, x, y) = (0, 0.5, 0.5) with
    # a = nu1 = 1: u1 = 0.25 * 0.5 = 0.125, so f1 = -0.125 + 1.0 = 0.875.
    ms = unit_ms()
    assert abs(ms.f1(0.5, 0.5, 0.0) - 0.875) <= 1e-15


def test_forcing_decays_with_the_solution():
    ms = unit_ms()
    assert abs(ms.f1(0.3, 0.4, 50.0)) <= 1e-20
    assert abs(ms.f2(0.3, -0.4, 50.0)) <= 1e-20


def test_outer_boundary_values_vanish():
    samples = case2_samples(KAPPAS, EPS)
    for ms in manufactured_family(samples):
        for t in (0.0, 0.4, 1.0):
            x = np.linspace(0.0, 1.0, 17)
            assert np.abs(ms.u1(0.0, np.linspace(0, 1, 9), t)).max() <= 1e-14
            assert np.abs(ms.u1(1.0, np.linspace(0, 1, 9), t)).max() <= 1e-14
            assert np.abs(ms.u1(x, 1.0, t)).max() <= 1e-14
            assert np.abs(ms.u2(0.0, np.linspace(-1, 0, 9), t)).max() <= 1e-14
            assert np.abs(ms.u2(1.0, np.linspace(-1, 0, 9), t)).max() <= 1e-14
            # c1 - c2 + c3 = 0 makes the bottom boundary vanish even with
            # time-dependent coefficients.
            assert np.abs(ms.u2(x, -1.0, t)).max() <= 1e-10


def test_pde_residual_constant_coefficients():
    ms = unit_ms()
    rng = np.random.default_rng(0)
    x = rng.uniform(0.05, 0.95, 1000)
    y1 = rng.uniform(0.05, 0.95, 1000)
    y2 = -rng.uniform(0.05, 0.95, 1000)
    t = rng.uniform(0.05, 0.95, 1000)
    assert pde_residual(ms, 1, x, y1, t).max() <= 1e-10
    assert pde_residual(ms, 2, x, y2, t).max() <= 1e-10


def test_residual_gate_constant_and_sinusoidal():
    for samples in (
        case1_samples(KAPPAS),
        case2_samples(KAPPAS, EPS),
    ):
        family = manufactured_family(samples)
        assert residual_gate(family, npoints=1000) <= 1e-8


def test_interface_conditions():
    samples = case2_samples(KAPPAS, EPS)
    rng = np.random.default_rng(2)
    x = rng.uniform(0.0, 1.0, 500)
    t = rng.uniform(0.0, 1.0, 500)
    for ms in manufactured_family(samples):
        assert interface_residual(ms, x, t).max() <= 1e-8


def test_gradients_match_finite_differences():
    ms = ManufacturedSolution(
        kappa=0.3, nu1=SinusoidalInTime(1.0, 1.5), nu2=SinusoidalInTime(1.0, 1.5)
    )
    rng = np.random.default_rng(3)
    d = 1e-2  # fields are quadratic per variable: central diffs are exact
    for sub, ylo, yhi in ((1, 0.1, 0.9), (2, -0.9, -0.1)):
        x = rng.uniform(0.1, 0.9, 200)
        y = rng.uniform(ylo, yhi, 200)
        t = rng.uniform(0.0, 1.0, 200)
        gx, gy = ms.grad(sub, x, y, t)
        fdx = (ms.u(sub, x + d, y, t) - ms.u(sub, x - d, y, t)) / (2 * d)
        fdy = (ms.u(sub, x, y + d, t) - ms.u(sub, x, y - d, t)) / (2 * d)
        assert np.abs(gx - fdx).max() <= 1e-10
        assert np.abs(gy - fdy).max() <= 1e-10


def test_derive_forcing_returns_the_pair():
    ms = unit_ms()
    f1, f2 = derive_forcing(ms)
    assert f1(0.5, 0.5, 0.0) == ms.f1(0.5, 0.5, 0.0)
    assert f2(0.5, -0.5, 0.2) == ms.f2(0.5, -0.5, 0.2)


def test_attach_forcing_sets_sample_callables():
    samples = case2_samples(KAPPAS, EPS)
    family = attach_manufactured_forcing(samples)
    assert len(family) == 9
    for j in range(9):
        assert samples.f1[j](0.3, 0.4, 0.5) == family[j].f1(0.3, 0.4, 0.5)
        assert samples.f2[j](0.3, -0.4, 0.5) == family[j].f2(0.3, -0.4, 0.5)


def test_spatially_varying_family_rejected():
    class Wavy:
        spatially_constant = False
        time_dependent = False

        def __call__(self, x, y, t):
            return 1.0 + 0.1 * np.sin(x)

    with pytest.raises(UnsupportedFamilyError):
        ManufacturedSolution(kappa=1.0, nu1=Wavy(), nu2=Constant(1.0))


def test_family_without_time_derivative_rejected():
    class NoDt:
        spatially_constant = True
        time_dependent = True

        def __call__(self, x, y, t):
            return 1.0

        def at_time(self, t):
            return 1.0

    with pytest.raises(UnsupportedFamilyError):
        ManufacturedSolution(kappa=1.0, nu1=NoDt(), nu2=NoDt())
