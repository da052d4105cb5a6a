"""
Self-checks reproducing the reference results; run with ``spinsim verify``.

Each check returns a :class:`CheckResult`; :func:`run_all` runs them in
order.  They are deterministic (fixed seeds) and together take a few seconds.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

from . import aht, engine, measure, seqlib
from .core import (
    cnot_matrix,
    embed_two_spin,
    expand_product_basis,
    from_pm_coefficients,
    from_product_basis,
    gate_fidelity,
    is_hermitian,
    is_unitary,
    pauli_coefficients,
    pauli_matrix,
    pm_coefficients,
    purity,
    single_spin_operator,
    state_fidelity,
    thermal_state,
    traceless_part,
)
from .hamiltonian import (
    DipolarCoupling,
    SpinSystem,
    alanine,
    liquid_hamiltonian,
    liquid_terms,
)
from .pulseprog import Delay, Pulse, PulseProgram, compile_program, net_propagator


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _result(name: str, ok: bool, detail: str) -> CheckResult:
    return CheckResult(name, bool(ok), detail)


def random_liquid_system(rng: np.random.Generator, labels=("a", "b", "c")) -> SpinSystem:
    spins = [(lab, "13C", float(rng.uniform(-15e3, 15e3))) for lab in labels]
    pairs = [(labels[i], labels[j]) for i in range(len(labels)) for j in range(i + 1, len(labels))]
    return SpinSystem.build(spins, j={p: float(rng.uniform(-150, 150)) for p in pairs})


# ---------------------------------------------------------------------------


def alanine_spectrum_lines(sys: SpinSystem) -> list[float]:
    """Expected line positions: every spin's offset plus ``+/- J/2`` per partner."""
    lines = []
    for i, spin in enumerate(sys.spins):
        partners = [sys.j(spin.label, other.label) for k, other in enumerate(sys.spins) if k != i]
        for signs in np.ndindex(*(2,) * len(partners)):
            lines.append(spin.larmor_offset_hz + sum((0.5 - s) * j for s, j in zip(signs, partners)))
    return sorted(lines)


def check_alanine_spectrum(acq_s: float = 4.0) -> CheckResult:
    sys = alanine()
    n = sys.n
    start = time.perf_counter()
    rho = np.eye(2**n) / 2**n + 1e-4 * sum(single_spin_operator("X", k, n) for k in range(n))
    dwell = 1 / 32768
    fid = measure.acquire(rho, sys, liquid_hamiltonian(sys), int(acq_s / dwell), dwell)
    spec = measure.spectrum(fid, zerofill_to=2 * len(fid), line_broaden_hz=0.5)
    peaks = measure.pick_peaks(spec, threshold=0.3)
    elapsed = time.perf_counter() - start
    expected = alanine_spectrum_lines(sys)
    found = sorted(f for f, _ in peaks)
    bin_hz = 1 / acq_s
    ok = len(found) == len(expected) and all(abs(f - e) <= bin_hz for f, e in zip(found, expected))
    err = max((abs(f - e) for f, e in zip(found, expected)), default=float("inf"))
    ok = ok and elapsed < 2.0
    return _result("alanine spectrum", ok, f"{len(found)}/12 lines, max offset {err:.3f} Hz (bin {bin_hz} Hz), {elapsed:.2f} s")


def check_noop(seed: int = 1, trials: int = 20) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_f, worst_h = 1.0, 0.0
    prog = seqlib.noop_sequence()
    for _ in range(trials):
        sys = random_liquid_system(rng)
        U = net_propagator(compile_program(prog, sys, liquid_hamiltonian(sys)))
        worst_f = min(worst_f, gate_fidelity(U, np.eye(8)))
        rep = aht.average_hamiltonian(prog, liquid_terms(sys), sys, order=0)
        worst_h = max(worst_h, float(np.abs(pauli_coefficients(rep.h0_matrix)).max()))
    ok = worst_f >= 1 - 1e-9 and worst_h < 1e-12
    return _result("no-op cycle", ok, f"min fidelity 1-{1 - worst_f:.1e}, max |H0| coefficient {worst_h:.1e}")


def check_decoupling() -> CheckResult:
    sys = alanine()
    rep = aht.average_hamiltonian(seqlib.decouple_sequence("c"), liquid_terms(sys), sys, order=0)
    a, b = sys.spins[0], sys.spins[1]
    target = {"Z11": a.omega / 2, "1Z1": b.omega / 2, "ZZ1": math.pi / 2 * sys.j("a", "b")}
    expected = pauli_coefficients(from_product_basis({k: v for k, v in target.items() if v}, 3))
    err = float(np.abs(pauli_coefficients(rep.h0_matrix) - expected).max())
    # acquisition with c decoupled
    rho = np.eye(8) / 8 + 1e-4 * sum(single_spin_operator("X", k, 3) for k in range(3))
    dwell = 1 / 32768
    fid = measure.acquire(rho, sys, liquid_hamiltonian(sys), 4 * 32768, dwell, decouple=["c"])
    peaks = sorted(f for f, _ in measure.pick_peaks(measure.spectrum(fid, line_broaden_hz=0.5), threshold=0.3))
    expected_lines = sorted([a.larmor_offset_hz + s * 26.5 for s in (-1, 1)] + [b.larmor_offset_hz + s * 26.5 for s in (-1, 1)])
    lines_ok = len(peaks) == 4 and all(abs(p - e) <= 0.25 for p, e in zip(peaks, expected_lines))
    ok = err <= 1e-12 and lines_ok
    return _result("decoupling", ok, f"H0 max deviation {err:.1e}; decoupled spectrum lines {[round(p, 2) for p in peaks]}")


def check_cnot(perturb_j_hz: float = 0.0) -> CheckResult:
    sys = alanine()
    prog = seqlib.cnot_sequence("a", "b", sys)
    actual = sys.with_j("a", "b", sys.j("a", "b") + perturb_j_hz) if perturb_j_hz else sys
    U = net_propagator(compile_program(prog, actual, liquid_hamiltonian(actual)))
    f = gate_fidelity(U, embed_two_spin(cnot_matrix(), 0, 1, 3))
    delay = sum(ev.t_s for ev in prog if isinstance(ev, Delay))
    ok = f >= 1 - 1e-9 and abs(delay - 1 / 106) < 1e-15
    extra = f", J_ab perturbed by {perturb_j_hz:g} Hz" if perturb_j_hz else ""
    return _result("CNOT a->b", ok, f"gate fidelity 1-{1 - f:.1e}, coupling delay {delay * 1e3:.4f} ms{extra}")


#: Averaged gradient phases in units of theta for the rows
#: +++, ++-, +-+, -++, +--, -+-, --+, --- (E_+ / E_- on spins a, b, c).
PSEUDO_PURE_TABLE = {"+++": 0, "++-": -1, "+-+": 1, "-++": 0, "+--": 2, "-+-": -1, "--+": 1, "---": 2}


def check_pseudo_pure() -> CheckResult:
    sys = alanine()
    H = liquid_hamiltonian(sys)
    prog = seqlib.pseudo_pure_sequence(sys)
    table = seqlib.gradient_phase_table(prog, sys, H)
    rows_ok = all(abs(table[k][1] - v) < 1e-12 for k, v in PSEUDO_PURE_TABLE.items())
    rho = np.eye(8) / 8 + 1e-3 * single_spin_operator("Z", 0, 3)
    out = engine.evolve(rho, compile_program(prog, sys, H))
    up = np.diag([1.0, 0.0])
    target = np.kron(single_spin_operator("X", 0, 1), np.kron(up, up))
    f = state_fidelity(traceless_part(out), target)
    ok = rows_ok and abs(1 - f) <= 1e-9
    return _result("pseudo-pure", ok, f"gradient table rows {'match' if rows_ok else 'differ'}; traceless-part fidelity to X_a |00><00|_bc 1-{1 - f:.1e}")


def check_kite() -> CheckResult:
    mask = engine.kite_mask(3)
    groups = engine.kite_groups(3)
    expected = {"111": 1, "Z11": 3, "ZZ1": 3, "ZZZ": 1, "±11": 6, "±Z1": 12, "±ZZ": 6, "±∓1": 6,
                "±∓Z": 6, "±±1": 6, "±±Z": 6, "±±∓": 6, "±±±": 2}
    ok = len(mask) == 120 and groups == expected
    return _result("Redfield kite", ok, f"{len(mask)} nonzero positions, {len(groups)} groups")


def wahuha_test_system() -> SpinSystem:
    return SpinSystem.build(
        [("a", "1H", 2500.0), ("b", "1H", -900.0)],
        dipolar={("a", "b"): DipolarCoupling(2 * math.pi * 15e3, 0.4)},
    )


def check_wahuha() -> CheckResult:
    sys = wahuha_test_system()
    rep = aht.wahuha_check(sys)
    c = pauli_coefficients(rep.h0_matrix)
    dip = max(abs(c[i, i]) for i in (1, 2, 3))
    scale_ok = True
    worst = 0.0
    for k, spin in enumerate(sys.spins):
        for axis in (1, 2, 3):
            idx = [0, 0]
            idx[k] = axis
            ratio = c[tuple(idx)].real / (spin.omega / 2)
            worst = max(worst, abs(ratio - 1 / 3))
    scale_ok = worst < 1e-12
    ok = dip < 1e-12 and scale_ok and rep.cyclic
    return _result(
        "WAHUHA",
        ok,
        f"dipolar part {dip:.1e} rad/s; shift scale 1/3 per axis within {worst:.1e} (net 1/sqrt(3) along (1,1,1))",
    )


def magnus_test_cycle(T: float) -> PulseProgram:
    """Asymmetric cycle ``T/3, 90x, 2T/3, 90(-x)`` whose frames do not commute."""
    return PulseProgram([Delay(T / 3), Pulse(("all",), 90.0, (1.0, 0.0, 0.0)), Delay(2 * T / 3), Pulse(("all",), 90.0, (-1.0, 0.0, 0.0))])


def magnus_test_system() -> SpinSystem:
    return SpinSystem.build([("a", "1H", 400.0), ("b", "1H", -250.0)], j={("a", "b"): 90.0})


def magnus_slopes(n_points: int = 6) -> tuple[float, float]:
    sys = magnus_test_system()
    H = liquid_terms(sys)
    times = np.geomspace(2e-5, 2e-4, n_points)
    e0, e1 = [], []
    for T in times:
        frames = aht.toggling_frames(magnus_test_cycle(T), H, sys)
        e0.append(aht.magnus(frames, 0).residual_norm)
        e1.append(aht.magnus(frames, 1).residual_norm)
    s0 = np.polyfit(np.log(times), np.log(e0), 1)[0]
    s1 = np.polyfit(np.log(times), np.log(e1), 1)[0]
    return float(s0), float(s1)


def check_magnus_scaling() -> CheckResult:
    s0, s1 = magnus_slopes()
    ok = abs(s0 - 2) <= 0.3 and abs(s1 - 3) <= 0.3
    return _result("Magnus scaling", ok, f"log-log slopes {s0:.3f} (zeroth order), {s1:.3f} (through first order)")


def check_antiphase(j_hz: float = 53.0) -> CheckResult:
    sys = SpinSystem.build([("a", "13C", 0.0), ("b", "13C", 0.0)], j={("a", "b"): j_hz})
    H = liquid_hamiltonian(sys)
    rho0 = pauli_matrix("XZ")
    times = np.linspace(0, 2 / j_hz, 100)
    worst_exact, worst_closed = 0.0, 0.0
    for t in times:
        rho = engine.evolve(rho0, compile_program(PulseProgram([Delay(float(t))]), sys, H))
        U = expm(-1j * H * t)
        ref = U @ rho0 @ U.conj().T
        got = pauli_coefficients(rho)
        want = pauli_coefficients(ref)
        for idx in ((1, 3), (2, 0)):  # XZ and Y1
            worst_exact = max(worst_exact, abs(got[idx] - want[idx]))
        worst_closed = max(
            worst_closed,
            abs(got[1, 3] - math.cos(math.pi * j_hz * t)),
            abs(got[2, 0] - math.sin(math.pi * j_hz * t)),
        )
    ok = worst_exact <= 1e-11 and worst_closed <= 1e-11
    return _result(
        "antiphase evolution",
        ok,
        f"vs expm {worst_exact:.1e}; vs cos/sin(pi J t) {worst_closed:.1e} (the (pi/2) J t argument is off by 2)",
    )


def random_density_matrix(rng: np.random.Generator, n: int) -> np.ndarray:
    A = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


def check_tomography(seed: int = 7, trials: int = 20) -> CheckResult:
    rng = np.random.default_rng(seed)
    sys = alanine()
    worst = 0.0
    for _ in range(trials):
        rho = random_density_matrix(rng, 3)
        worst = max(worst, float(np.abs(measure.tomography(rho, sys).rho - rho).max()))
    return _result("tomography round trip", worst <= 1e-8, f"{trials} states, {len(measure.TOMOGRAPHY_READOUTS)} readouts, max error {worst:.1e}")


def random_program(rng: np.random.Generator, labels) -> PulseProgram:
    events = []
    for _ in range(int(rng.integers(1, 8))):
        if rng.random() < 0.5:
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            width = 0.0 if rng.random() < 0.5 else float(rng.uniform(1e-6, 2e-5))
            targets = tuple(sorted(rng.choice(labels, size=int(rng.integers(1, len(labels) + 1)), replace=False)))
            events.append(Pulse(targets, float(rng.uniform(-360, 360)), tuple(axis), width))
        else:
            events.append(Delay(float(rng.uniform(0, 5e-3))))
    return PulseProgram(events)


def check_structure(seed: int = 11, runs: int = 200) -> CheckResult:
    rng = np.random.default_rng(seed)
    labels = ("a", "b", "c")
    problems = []
    for _ in range(runs):
        sys = random_liquid_system(rng, labels)
        H = liquid_hamiltonian(sys)
        segs = compile_program(random_program(rng, labels), sys, H)
        U = net_propagator(segs, 8)
        rho = random_density_matrix(rng, 3)
        out = engine.evolve(rho, segs)
        if not is_unitary(U):
            problems.append("unitarity")
        if abs(np.trace(out) - 1) > 1e-10:
            problems.append("trace")
        if not is_hermitian(out, 1e-10):
            problems.append("hermiticity")
        if abs(purity(out) - purity(rho)) > 1e-10:
            problems.append("purity")
    # crusher idempotence and product-basis round trips
    sys = random_liquid_system(rng, labels)
    for _ in range(20):
        rho = random_density_matrix(rng, 3)
        once = engine.apply_crusher(rho, "ideal", sys)
        if np.abs(engine.apply_crusher(once, "ideal", sys) - once).max() > 1e-13:
            problems.append("crusher idempotence")
        if np.abs(from_pm_coefficients(pm_coefficients(rho)) - rho).max() > 1e-13:
            problems.append("pm round trip")
        if np.abs(from_product_basis(expand_product_basis(rho, 0.0), 3) - rho).max() > 1e-13:
            problems.append("Pauli round trip")
    ok = not problems
    return _result("structural invariants", ok, f"{runs} random programs" + ("" if ok else f"; failed: {sorted(set(problems))}"))


CHECKS: list[tuple[str, Callable[[], CheckResult]]] = [
    ("alanine", check_alanine_spectrum),
    ("noop", check_noop),
    ("decouple", check_decoupling),
    ("cnot", check_cnot),
    ("pseudo-pure", check_pseudo_pure),
    ("kite", check_kite),
    ("wahuha", check_wahuha),
    ("magnus", check_magnus_scaling),
    ("antiphase", check_antiphase),
    ("tomography", check_tomography),
    ("structure", check_structure),
]


def run_all(only: list[str] | None = None, perturb_j_hz: float = 0.0) -> list[CheckResult]:
    results = []
    for key, fn in CHECKS:
        if only and key not in only:
            continue
        start = time.perf_counter()
        res = check_cnot(perturb_j_hz) if key == "cnot" else fn()
        res.seconds = time.perf_counter() - start
        results.append(res)
    return results


def format_results(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'PASS' if r.passed else 'FAIL'}  {r.name.ljust(width)}  {r.seconds:6.2f} s  {r.detail}" for r in results]
    total = sum(r.seconds for r in results)
    lines.append(f"{sum(r.passed for r in results)}/{len(results)} passed in {total:.1f} s")
    return "\n".join(lines) + "\n"
