import csv
import io
import math

import numpy as np
import pytest

from spinsim import aht
from spinsim.core import pauli_coefficients
from spinsim.hamiltonian import DipolarCoupling, SpinSystem, alanine, liquid_hamiltonian, liquid_terms, solid_terms
from spinsim.pulseprog import CompileError, parse
from spinsim.seqlib import decouple_sequence, noop_sequence, wahuha_sequence


def shifted_system():
    return SpinSystem.build(
        [("a", "13C", 120.0), ("b", "13C", -340.0), ("c", "13C", 910.0)],
        j={("a", "b"): 41.0, ("a", "c"): -17.0, ("b", "c"): 8.0},
    )


def signs(frames, key, bare):
    """Toggling sign of one term per interval, relative to its bare value."""
    return [round(iv.terms.get(key, 0.0) / bare[key]) for iv in aht.magnus(frames, 0).intervals]


def test_noop_sign_table():
    sys = shifted_system()
    bare = liquid_terms(sys)
    frames = aht.toggling_frames(noop_sequence(), bare, sys)
    assert len(frames) == 4 and frames.cyclic
    assert signs(frames, "Z11", bare) == [1, 1, -1, -1]
    assert signs(frames, "1Z1", bare) == [1, -1, 1, -1]
    assert signs(frames, "11Z", bare) == [1, -1, -1, 1]
    assert signs(frames, "ZZ1", bare) == [1, -1, -1, 1]
    assert signs(frames, "Z1Z", bare) == [1, -1, 1, -1]
    assert signs(frames, "1ZZ", bare) == [1, 1, -1, -1]


def test_noop_average_vanishes_exactly():
    sys = shifted_system()
    rep = aht.average_hamiltonian(noop_sequence(), liquid_terms(sys), sys, order=1)
    assert np.abs(pauli_coefficients(rep.h0_matrix)).max() == 0.0
    # all frames are diagonal, so they commute and the first order is zero
    assert np.abs(rep.h1_matrix).max() == 0.0
    assert rep.h0 == {} and rep.h1 == {}


def test_decoupling_sign_table_and_average():
    sys = shifted_system()
    bare = liquid_terms(sys)
    frames = aht.toggling_frames(decouple_sequence("c"), bare, sys)
    assert signs(frames, "11Z", bare) == [1, -1]
    assert signs(frames, "Z1Z", bare) == [1, -1]
    assert signs(frames, "ZZ1", bare) == [1, 1]
    rep = aht.magnus(frames, 0)
    want = {"Z11": math.pi * 120.0, "1Z1": math.pi * -340.0, "ZZ1": math.pi / 2 * 41.0}
    assert rep.h0.keys() == want.keys()
    for k, v in want.items():
        assert abs(rep.h0[k] - v) <= 1e-12


def test_no_pulses_single_interval():
    sys = alanine()
    H = liquid_hamiltonian(sys)
    frames = aht.toggling_frames(parse("delay 1e-3"), H, sys)
    assert len(frames) == 1
    assert np.allclose(frames.intervals[0][1], H)
    assert frames.cyclic


def test_dense_and_mapping_inputs_agree():
    sys = shifted_system()
    prog = parse("delay 1e-4\npulse a 90 x\ndelay 2e-4\npulse a 90 -x")
    a = aht.average_hamiltonian(prog, liquid_terms(sys), sys)
    b = aht.average_hamiltonian(prog, liquid_hamiltonian(sys), sys)
    assert np.allclose(a.h0_matrix, b.h0_matrix, atol=1e-10)
    assert np.allclose(a.h1_matrix, b.h1_matrix, atol=1e-10)


def test_first_order_brute_force():
    sys = shifted_system()
    prog = parse("delay 3e-5\npulse all 90 x\ndelay 5e-5\npulse b 90 y\ndelay 2e-5\npulse b 90 -y\npulse all 90 -x")
    frames = aht.toggling_frames(prog, liquid_hamiltonian(sys), sys)
    T = frames.cycle_time
    pieces = frames.intervals
    h1 = np.zeros_like(pieces[0][1])
    for k in range(len(pieces)):
        for j in range(k):
            tk, Hk = pieces[k]
            tj, Hj = pieces[j]
            h1 += tj * tk * (Hk @ Hj - Hj @ Hk)
    h1 *= -0.5j / T
    rep = aht.magnus(frames, 1)
    assert np.allclose(rep.h1_matrix, h1, atol=1e-9)
    assert np.abs(h1).max() > 1.0
    # including the first order shrinks the residual
    assert rep.residual_norm < aht.magnus(frames, 0).residual_norm


def test_magnus_slopes():
    from spinsim.verify import magnus_slopes

    s0, s1 = magnus_slopes()
    assert abs(s0 - 2) <= 0.3 and abs(s1 - 3) <= 0.3


def test_wahuha():
    sys = SpinSystem.build(
        [("a", "1H", 1800.0), ("b", "1H", -600.0)],
        dipolar={("a", "b"): DipolarCoupling(2 * math.pi * 20e3, 0.2)},
    )
    rep = aht.wahuha_check(sys)
    assert rep.cyclic
    assert aht.dipolar_part(rep.h0) == {}
    c = pauli_coefficients(rep.h0_matrix)
    assert max(abs(c[i, i]) for i in (1, 2, 3)) < 1e-12
    for axis in (1, 2, 3):
        assert c[axis, 0].real == pytest.approx(math.pi * 1800.0 / 3, rel=1e-14)
        assert c[0, axis].real == pytest.approx(math.pi * -600.0 / 3, rel=1e-14)
    assert rep.cycle_time == pytest.approx(6e-5)


def test_wahuha_trivial_and_errors():
    quiet = SpinSystem.build([("a", "1H", 0.0), ("b", "1H", 0.0)], dipolar={("a", "b"): DipolarCoupling(0.0, 0.0)})
    assert aht.wahuha_check(quiet).h0 == {}
    hetero = SpinSystem.build([("h", "1H", 0.0), ("c", "13C", 0.0)], dipolar={("h", "c"): DipolarCoupling(1e3, 0.0)})
    with pytest.raises(ValueError, match="heteronuclear"):
        aht.wahuha_check(hetero)
    with pytest.raises(ValueError):
        aht.wahuha_check(alanine())


def test_rejects_non_cycle_events():
    sys = alanine()
    H = liquid_terms(sys)
    for text in ("pulse a 90 x 1e-6", "grad 1 0", "crush", "acquire 8 1e-3"):
        with pytest.raises(CompileError):
            aht.toggling_frames(parse(text), H, sys)


def test_magnus_errors():
    sys = alanine()
    frames = aht.toggling_frames(parse("pulse a 90 x"), liquid_terms(sys), sys)
    with pytest.raises(ValueError, match="zero total duration"):
        aht.magnus(frames)
    ok = aht.toggling_frames(parse("delay 1e-3"), liquid_terms(sys), sys)
    with pytest.raises(ValueError):
        aht.magnus(ok, order=2)


def test_non_cyclic_flag():
    sys = alanine()
    frames = aht.toggling_frames(parse("delay 1e-3\npulse a 90 x\ndelay 1e-3"), liquid_terms(sys), sys)
    assert not frames.cyclic


def test_report_text_and_csv():
    sys = shifted_system()
    rep = aht.average_hamiltonian(decouple_sequence("c"), liquid_terms(sys), sys, order=1)
    text = aht.format_report(rep, sys.labels)
    assert text.startswith("spins: a b c")
    assert "cyclic: yes" in text
    assert "11Z" in text and "average" in text
    rows = list(csv.DictReader(io.StringIO(aht.report_csv(rep))))
    h0 = {r["term"]: float(r["coefficient"]) for r in rows if r["block"] == "h0"}
    assert h0 == rep.h0
    assert {r["block"] for r in rows} >= {"1", "2", "h0"}


def test_wahuha_sequence_timing():
    prog = wahuha_sequence(2e-6)
    assert prog.duration() == pytest.approx(12e-6)
