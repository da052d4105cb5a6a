import math

import numpy as np
import pytest

from spinsim.core import expand_product_basis, pauli_matrix, pm_coefficients
from spinsim.hamiltonian import (
    ConfigError,
    DipolarCoupling,
    GradientSpec,
    SpinSystem,
    alanine,
    gradient_phase,
    liquid_hamiltonian,
    liquid_terms,
    parse_system,
    render_system,
    rf_rotation,
    rotation_2x2,
    solid_hamiltonian,
    solid_terms,
)


def test_alanine_constants():
    sys = alanine()
    assert [s.larmor_offset_hz for s in sys.spins] == [0.0, -12580.0, 3440.0]
    assert sys.j("a", "b") == 53.0 and sys.j("c", "a") == 38.0 and sys.j("b", "c") == 1.2
    terms = liquid_terms(sys)
    assert terms["1Z1"] == pytest.approx(math.pi * -12580)
    assert terms["ZZ1"] == pytest.approx(math.pi / 2 * 53)
    assert "Z11" not in terms  # carrier sits on spin a


def test_liquid_hamiltonian_is_diagonal_and_matches_terms():
    sys = alanine()
    H = liquid_hamiltonian(sys)
    assert np.count_nonzero(H - np.diag(H.diagonal())) == 0
    got = {k: v.real for k, v in expand_product_basis(H).items()}
    assert got == pytest.approx(liquid_terms(sys))


def test_flip_flop_ratio_like_spins():
    sys = SpinSystem.build([("a", "1H", 0.0), ("b", "1H", 0.0)], dipolar={("a", "b"): DipolarCoupling(1000.0, 0.0)})
    c = pm_coefficients(solid_hamiltonian(sys))
    zz = c[1, 1]
    flip_flop = c[2, 3]  # sigma_+ sigma_- coefficient
    assert flip_flop / zz == pytest.approx(-0.25)
    assert c[3, 2] == pytest.approx(flip_flop)


def test_heteronuclear_pair_keeps_only_zz():
    sys = SpinSystem.build([("h", "1H", 0.0), ("c", "13C", 0.0)], dipolar={("h", "c"): DipolarCoupling(500.0, 0.3)})
    assert set(solid_terms(sys)) == {"ZZ"}
    assert set(solid_terms(sys, heteronuclear_secular=False)) == {"ZZ", "XX", "YY"}


def test_magic_angle_removes_dipolar():
    from spinsim.hamiltonian import MAGIC_ANGLE

    assert DipolarCoupling(1.0, MAGIC_ANGLE).orientation_factor == pytest.approx(0.0, abs=1e-15)


def test_from_geometry_scale():
    # two protons 1 angstrom apart: mu0 hbar gamma^2 / (4 pi r^3) ~ 2 pi * 120 kHz
    d = DipolarCoupling.from_geometry(1e-10, 0.0, 267.5221874e6, 267.5221874e6)
    assert 4 * d.b_rad_per_s / (2 * math.pi) == pytest.approx(120.1e3, rel=1e-2)


def test_rotation_examples():
    U = rotation_2x2((1, 0, 0), math.pi / 2)
    assert np.allclose(U, np.array([[1, -1j], [-1j, 1]]) / math.sqrt(2))
    h = rotation_2x2((1 / math.sqrt(2), 0, 1 / math.sqrt(2)), math.pi)
    assert np.allclose(h, -1j * np.array([[1, 1], [1, -1]]) / math.sqrt(2))
    # 180 degree pulses are exact
    assert rotation_2x2((0, 1, 0), math.pi)[0, 0] == 0
    with pytest.raises(ValueError):
        rotation_2x2((1, 1, 0), 1.0)


def test_rf_rotation_on_subset():
    U = rf_rotation([1], (0, 1, 0), math.pi, 2)
    assert np.allclose(U, np.kron(np.eye(2), -1j * pauli_matrix("Y")))


def test_gradient_phase_flip():
    sys = SpinSystem.build([("h", "1H", 0.0)])
    gamma = sys.gamma(0)
    g = GradientSpec(0.1, 1e-3)
    z = math.pi / (gamma * g.strength_t_per_m * g.duration_s)
    U = gradient_phase(g, z, sys)
    assert np.allclose(U, np.diag([np.exp(-0.5j * math.pi), np.exp(0.5j * math.pi)]))


def test_system_validation():
    with pytest.raises(ValueError):
        SpinSystem.build([("a", "1H", 0.0), ("a", "1H", 1.0)])
    with pytest.raises(ValueError):
        SpinSystem.build([("a", "1H", 0.0)], j={("a", "b"): 3.0})
    with pytest.raises(ValueError):
        SpinSystem.build([("a", "1H", 0.0)], j={("a", "a"): 3.0})
    with pytest.raises(ValueError):
        SpinSystem.build([("a", "XX", 0.0)]).gamma(0)
    sys = alanine()
    assert sys.resolve("13C") == (0, 1, 2) and sys.resolve("b") == (1,)
    with pytest.raises(KeyError):
        sys.resolve("q")


CONFIG = """
# alanine
[spins]
a 13C 0
b 13C -12580
c 13C 3440
[j]
a b 53
a c 38
b c 1.2
"""


def test_parse_and_render_round_trip():
    sys = parse_system(CONFIG)
    assert sys == alanine()
    assert parse_system(render_system(sys)) == sys
    solid = SpinSystem.build([("a", "1H", 10.0), ("b", "1H", 0.0)], dipolar={("a", "b"): DipolarCoupling(94247.78, math.radians(23))})
    back = parse_system(render_system(solid))
    assert back.dipolar[(0, 1)].b_rad_per_s == 94247.78
    assert back.dipolar[(0, 1)].theta_rad == pytest.approx(math.radians(23), abs=1e-15)


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("[j]\na b 1\n", None, "missing [spins]"),
        ("[spins]\na 13C zero\n", 2, "malformed number"),
        ("[spins]\na 13C 0\n[j]\na q 3\n", 4, "unknown spin label"),
        ("[spins]\na 13C 0\na 13C 1\n", 3, "duplicate"),
        ("a 13C 0\n", 1, "before the first section"),
        ("[spins]\na 13C 0\n[bogus]\n", 3, "unknown section"),
        ("[spins]\na 13C 0\nb 13C 0\n[j]\na b 1\nb a 2\n", 6, "given twice"),
    ],
)
def test_config_errors_name_the_line(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_system(text, "mol.sys")
    assert exc.value.line == line
    assert fragment in str(exc.value)
    assert str(exc.value).startswith("mol.sys")
