import math

import numpy as np
import pytest

from spinsim import measure
from spinsim.core import basis_projector, expand_product_basis, pauli_matrix, single_spin_operator
from spinsim.hamiltonian import SpinSystem, alanine, liquid_hamiltonian
from spinsim.verify import alanine_spectrum_lines, random_density_matrix


def one_spin(offset_hz):
    return SpinSystem.build([("h", "1H", offset_hz)])


def test_single_spin_sign_convention():
    f, eps = 37.0, 1e-4
    sys = one_spin(f)
    rho = np.eye(2) / 2 + eps * pauli_matrix("X") / 2
    fid = measure.acquire(rho, sys, liquid_hamiltonian(sys), 64, 1e-3)
    assert np.allclose(fid.samples, eps * np.exp(2j * math.pi * f * fid.times), atol=1e-18)
    assert fid.channel == "1H"


def test_single_spin_peak_within_a_bin():
    f = -123.4
    sys = one_spin(f)
    rho = np.eye(2) / 2 + 1e-4 * pauli_matrix("X") / 2
    fid = measure.acquire(rho, sys, liquid_hamiltonian(sys), 2048, 1e-3)
    spec = measure.spectrum(fid)
    peaks = measure.pick_peaks(spec)
    assert len(peaks) == 1
    assert abs(peaks[0][0] - f) <= spec.resolution_hz


def test_spectrum_scaling_and_integral():
    sys = one_spin(50.0)
    rho = np.eye(2) / 2 + 1e-4 * pauli_matrix("Y") / 2
    fid = measure.acquire(rho, sys, liquid_hamiltonian(sys), 256, 1e-3)
    for zf in (None, 1024):
        spec = measure.spectrum(fid, zerofill_to=zf)
        # the sum over all bins is the first sample
        assert measure.peak_integral(spec, 0.0, 1e9) == pytest.approx(fid.samples[0], abs=1e-18)
    assert len(measure.spectrum(fid, zerofill_to=1024).freqs_hz) == 1024


def test_line_broadening_width():
    sys = one_spin(0.0)
    rho = np.eye(2) / 2 + pauli_matrix("X") / 2
    fid = measure.acquire(rho, sys, liquid_hamiltonian(sys), 8192, 1e-3)
    spec = measure.spectrum(fid, line_broaden_hz=4.0)
    # on resonance with zero phase the real part is the absorption Lorentzian
    absorption = spec.amplitudes.real
    above = spec.freqs_hz[absorption >= absorption.max() / 2]
    assert above.max() - above.min() == pytest.approx(4.0, abs=2 * spec.resolution_hz)


def test_double_quantum_gives_no_signal():
    sys = alanine()
    rho = np.eye(8) / 8 + 1e-3 * pauli_matrix("XX1")
    fid = measure.acquire(rho, sys, liquid_hamiltonian(sys), 128, 1e-4)
    assert np.abs(fid.samples).max() < 1e-18


def test_alanine_twelve_lines():
    sys = alanine()
    rho = np.eye(8) / 8 + 1e-4 * sum(single_spin_operator("X", k, 3) for k in range(3))
    dwell = 1 / 32768
    fid = measure.acquire(rho, sys, liquid_hamiltonian(sys), 4 * 32768, dwell)
    peaks = measure.pick_peaks(measure.spectrum(fid, 2 * len(fid), 0.5), threshold=0.3)
    found = sorted(f for f, _ in peaks)
    expected = alanine_spectrum_lines(sys)
    assert len(found) == 12
    assert max(abs(a - b) for a, b in zip(found, expected)) <= 0.25
    # centre of each multiplet is the chemical shift
    for k, shift in enumerate((-12580.0, 0.0, 3440.0)):
        assert np.mean(found[4 * k:4 * k + 4]) == pytest.approx(shift, abs=0.05)


def test_decoupled_acquisition_shows_ab_doublets_only():
    sys = alanine()
    rho = np.eye(8) / 8 + 1e-4 * sum(single_spin_operator("X", k, 3) for k in range(3))
    fid = measure.acquire(rho, sys, liquid_hamiltonian(sys), 4 * 32768, 1 / 32768, decouple=["c"])
    found = sorted(f for f, _ in measure.pick_peaks(measure.spectrum(fid, line_broaden_hz=0.5), threshold=0.3))
    assert found == pytest.approx([-12606.5, -12553.5, -26.5, 26.5], abs=0.25)


def test_pick_peaks_parabolic_refinement():
    t = np.arange(1000) * 1e-3
    fid = measure.Fid(np.exp(2j * math.pi * 100.37 * t) * np.exp(-t * 5), 1e-3)
    (f, _), = measure.pick_peaks(measure.spectrum(fid), threshold=0.5)
    assert abs(f - 100.37) < 0.2  # refined well inside the 1 Hz bin
    assert measure.pick_peaks(measure.Spectrum(np.arange(4.0), np.zeros(4))) == []


@pytest.mark.parametrize("s, cls", [("X11", "direct"), ("1Y1", "direct"), ("XZ1", "indirect"),
                                    ("ZZY", "indirect"), ("XX1", "invisible"), ("ZZ1", "invisible")])
def test_observable_classes(s, cls):
    assert measure.observable_class(s) == cls


def test_single_flip_lines():
    lines = measure.single_flip_lines(3)
    assert len(lines) == 12
    for r, c, j in lines:
        assert r ^ c == 1 << (2 - j) and r & (1 << (2 - j))


def test_greedy_reproduces_frozen_readouts():
    assert measure.greedy_readouts(3) == measure.TOMOGRAPHY_READOUTS


def test_tomography_pseudo_pure():
    sys = alanine()
    rho = basis_projector("000")
    res = measure.tomography(rho, sys)
    want = expand_product_basis(rho, 0.0)
    assert len(res.coefficients) == 64
    assert max(abs(res.coefficients[k] - want.get(k, 0).real) for k in res.coefficients) <= 1e-8
    assert res.npoints > 0 and res.dwell_s > 0


def test_tomography_random_state_and_callable(monkeypatch):
    monkeypatch.setenv("SPINSIM_THREADS", "4")
    rng = np.random.default_rng(99)
    rho = random_density_matrix(rng, 3)
    calls = []

    def prepare():
        calls.append(1)
        return rho

    res = measure.tomography(prepare, alanine())
    assert len(calls) == len(measure.TOMOGRAPHY_READOUTS)
    assert np.abs(res.rho - rho).max() <= 1e-8


def test_tomography_errors():
    sys = alanine()
    with pytest.raises(ValueError, match="does not determine"):
        measure.tomography(np.eye(8) / 8, sys, readouts=("111", "xxx"))
    flat = SpinSystem.build([("a", "13C", 0.0), ("b", "13C", 100.0), ("c", "13C", 200.0)])
    with pytest.raises(ValueError, match="coincide"):
        measure.tomography(np.eye(8) / 8, flat)
    with pytest.raises(ValueError, match="not resolved"):
        measure.acquisition_plan(sys, acquisition_s=0.01)
    with pytest.raises(ValueError):
        measure.tomography(np.eye(4) / 4, SpinSystem.build([("a", "13C", 0.0), ("b", "13C", 10.0)], j={("a", "b"): 5.0}))


def test_fid_file_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    fid = measure.Fid(rng.normal(size=50) + 1j * rng.normal(size=50), 3.0517578125e-05, "13C")
    path = tmp_path / "x.csv"
    measure.write_fid(path, fid)
    back = measure.read_fid(path)
    assert np.array_equal(back.samples, fid.samples)
    assert back.dwell_s == fid.dwell_s and back.channel == "13C"


def test_fid_file_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("# dwell_s=0.001\n1,2\n3;4\n")
    with pytest.raises(ValueError, match=r"bad.csv:3"):
        measure.read_fid(bad)
    bad.write_text("1,2\n3,4\n")
    with pytest.raises(ValueError, match="dwell_s"):
        measure.read_fid(bad)
    with pytest.raises(ValueError):
        measure.Fid(np.zeros(1), 1e-3)


def test_spectrum_file(tmp_path):
    spec = measure.Spectrum(np.array([-1.0, 0.0, 1.0]), np.array([1 + 2j, 0, -1j]))
    path = tmp_path / "s.csv"
    measure.write_spectrum(path, spec)
    data = np.loadtxt(path, delimiter=",")
    assert data.shape == (3, 3)
    assert data[0].tolist() == [-1.0, 1.0, 2.0]
