import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import rigidflow as rf
from rigidflow.eos import EosParams, HyperbolicityBox, ThermoPair, density, sound_speed, symmetrizer_coefficients
from rigidflow.errors import DomainError, RegionError

PAR = EosParams()
BOX = HyperbolicityBox()


def forward_pressure(rho, s, par=PAR):
    # independent route: the pressure law evaluated with math.* scalars
    return par.kappa * math.exp(s / par.c_v) * math.pow(rho, par.gamma)


def test_density_unit_normalization():
    assert density(1.0, 0.0, PAR) == pytest.approx(1.0, abs=1e-15)


def test_density_rejects_nonpositive_pressure():
    with pytest.raises(DomainError):
        density(0.0, 0.0, PAR)
    with pytest.raises(DomainError):
        density(np.array([1.0, -2.0]), np.zeros(2), PAR)


def test_density_inverts_forward_law():
    p = forward_pressure(2.0, 0.0)
    assert density(p, 0.0, PAR) == pytest.approx(2.0, rel=1e-12)


def test_sound_speed_closed_form():
    assert sound_speed(1.0, 0.0, PAR) == pytest.approx(math.sqrt(1.4), rel=1e-13)


def test_sound_speed_isothermal_limit():
    # gamma = 1 is outside the parameter domain; approach it from above
    par = EosParams(gamma=1.0 + 1e-9)
    assert sound_speed(1.0, 0.0, par) == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(DomainError):
        EosParams(gamma=1.0)


def test_sound_speed_pressure_scaling():
    c1 = sound_speed(1.0, 0.3, PAR)
    c4 = sound_speed(4.0, 0.3, PAR)
    expected = 4.0 ** ((1.0 - 1.0 / PAR.gamma) / 2.0)
    assert c4 / c1 == pytest.approx(expected, rel=1e-13)


def test_symmetrizer_ideal_gas_values():
    alpha, eta = symmetrizer_coefficients(1.0, 0.0, PAR, BOX)
    assert alpha == pytest.approx(1.4, rel=1e-13)   # gamma * p
    assert eta == pytest.approx(1.0, rel=1e-13)


def test_symmetrizer_out_of_box_raises():
    with pytest.raises(RegionError) as err:
        symmetrizer_coefficients(100.0, 0.0, PAR, BOX)
    assert err.value.box is BOX
    assert err.value.point[0] == pytest.approx(100.0)


def test_alpha_over_eta_is_sound_speed_squared():
    rng = np.random.default_rng(7)
    p = rng.uniform(BOX.p_min, BOX.p_max, 10)
    s = rng.uniform(BOX.s_min, BOX.s_max, 10)
    alpha, eta = symmetrizer_coefficients(p, s, PAR, BOX)
    c = sound_speed(p, s, PAR)
    assert np.abs(alpha / eta - c**2).max() < 1e-12 * np.abs(c**2).max()


def test_density_monotone_in_pressure():
    p = np.linspace(BOX.p_min, BOX.p_max, 100)
    for s in (-0.5, 0.0, 0.5):
        rho = density(p, np.full_like(p, s), PAR)
        assert np.all(np.diff(rho) > 0.0)


@settings(max_examples=60, deadline=None)
@given(
    p=st.floats(min_value=BOX.p_min, max_value=BOX.p_max),
    s=st.floats(min_value=BOX.s_min, max_value=BOX.s_max),
)
def test_roundtrip_and_positivity(p, s):
    rho = density(p, s, PAR)
    c = sound_speed(p, s, PAR)
    assert rho > 0.0 and c > 0.0
    assert forward_pressure(float(rho), s) == pytest.approx(p, rel=1e-12)
    alpha, eta = symmetrizer_coefficients(p, s, PAR, BOX)
    assert alpha == pytest.approx(eta * c**2, rel=1e-12)


def test_parameter_validation():
    for bad in (dict(kappa=0.0), dict(c_v=-1.0)):
        with pytest.raises(DomainError):
            EosParams(**bad)
    with pytest.raises(DomainError):
        HyperbolicityBox(p_min=-1.0)
    with pytest.raises(DomainError):
        HyperbolicityBox(p_min=2.0, p_max=1.0)
    with pytest.raises(DomainError):
        HyperbolicityBox(s_min=1.0, s_max=-1.0)
    with pytest.raises(DomainError):
        ThermoPair(np.inf, 0.0)


def test_box_contains_is_elementwise():
    inside = BOX.contains(np.array([1.0, 100.0]), np.array([0.0, 0.0]))
    assert inside.tolist() == [True, False]
