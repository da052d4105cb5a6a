"""
Constructors for the standard sequences, returned as :class:`PulseProgram`.

All delays are concrete numbers, so a program built for one spin system can
be compiled against another (with perturbed couplings, say) to see how
sensitive it is.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import hadamard

from .core import single_spin_operator
from .hamiltonian import SpinSystem
from .pulseprog import (
    Delay,
    FrameShift,
    Grad,
    GradientSegment,
    Pulse,
    PulseProgram,
    UnitarySegment,
    compile_program,
)

X, Y = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)
MINUS_X, MINUS_Y = (-1.0, 0.0, 0.0), (0.0, -1.0, 0.0)

DEFAULT_TAU_S = 1e-3


def _pulse(targets, angle, axis) -> Pulse:
    return Pulse(tuple(targets), float(angle), axis)


def noop_sequence(n: int = 3, tau_s: float = DEFAULT_TAU_S, labels=("a", "b", "c")) -> PulseProgram:
    """Four equal delays separated by 180-degree y pulses on ``b,c`` and ``a,b``.

    Every single-spin ``Z`` and every ``ZZ`` pair flips sign in exactly two of
    the four intervals, so the average internal Hamiltonian vanishes and the
    cycle is the identity up to a global phase.
    """
    if n != 3:
        raise ValueError("the refocusing cycle is defined for three spins")
    a, b, c = labels
    ev = []
    for pair in ((b, c), (a, b), (b, c), (a, b)):
        ev += [Delay(tau_s), _pulse(pair, 180, Y)]
    return PulseProgram(ev)


def decouple_sequence(c: str = "c", tau_s: float = DEFAULT_TAU_S) -> PulseProgram:
    """Two delays, each followed by a 180-degree y pulse on ``c``."""
    return PulseProgram([Delay(tau_s), _pulse([c], 180, Y), Delay(tau_s), _pulse([c], 180, Y)])


def _flip_times(row: np.ndarray) -> list[int]:
    """Indices ``k`` at whose start the sign of ``row`` changes, plus ``len(row)`` if it ends negative."""
    flips = [k for k in range(1, len(row)) if row[k] != row[k - 1]]
    if row[-1] < 0:
        flips.append(len(row))
    return flips


def refocused_delay(sys: SpinSystem, a: str, b: str, total_s: float) -> PulseProgram:
    """Let only the ``a``-``b`` coupling act for ``total_s`` seconds.

    The delay is cut into ``N`` equal pieces (``N`` a power of two, at least
    the spin count) and each spin follows a row of the Hadamard matrix: a
    180-degree y pulse wherever its row changes sign, and one more at the end
    if the row finishes negative.  ``a`` and ``b`` share a row, every other
    spin gets a different one, so all shifts and every coupling except
    ``a``-``b`` average to zero while ``Z_a Z_b`` keeps its sign throughout.
    """
    others = [s for s in sys.labels if s not in (a, b)]
    size = 2
    while size < len(others) + 2:
        size *= 2
    H = hadamard(size)
    # fewest sign changes first so that the pair needs the fewest pulses
    rows = sorted(range(1, size), key=lambda r: (len(_flip_times(H[r])), r))
    assignment = {a: H[rows[0]], b: H[rows[0]]}
    for label, r in zip(others, rows[1:]):
        assignment[label] = H[r]
    pulses_at: dict[int, list[str]] = {}
    for label in sys.labels:
        for k in _flip_times(assignment[label]):
            pulses_at.setdefault(k, []).append(label)
    ev = []
    piece = total_s / size
    for k in range(1, size + 1):
        ev.append(Delay(piece))
        if k in pulses_at:
            ev.append(_pulse(pulses_at[k], 180, Y))
    return PulseProgram(ev)


def cnot_sequence(a: str, b: str, sys: SpinSystem) -> PulseProgram:
    """Controlled-NOT with control ``a`` and target ``b``.

    Uses ``U = e^{-i pi/4} e^{i pi/4 X_b} e^{i pi/4 Z_a} e^{-i pi/4 Z_a X_b}``,
    in which all factors commute.  The ``Z_a X_b`` rotation is a refocused
    ``1/(2|J_ab|)`` coupling period sandwiched between 90-degree pulses on
    ``b``; the ``Z_a`` rotation is a frame change and ``X_b`` a -x pulse.

    Raises
    ------
    ValueError
        If ``J_ab`` is zero.
    """
    if a == b:
        raise ValueError("control and target must differ")
    j = sys.j(a, b)
    if j == 0:
        raise ValueError(f"J({a},{b}) is zero: the coupling period would be infinite")
    first, second = (MINUS_Y, Y) if j > 0 else (Y, MINUS_Y)
    block = refocused_delay(sys, a, b, 1 / (2 * abs(j)))
    ev = [_pulse([b], 90, first), *block.events, _pulse([b], 90, second), FrameShift(a, -90.0), _pulse([b], 90, MINUS_X)]
    return PulseProgram(ev)


def pseudo_pure_sequence(sys: SpinSystem, labels=None) -> PulseProgram:
    """Turn ``Z_a`` into ``X_a |00><00|_bc`` with three gradients and two CNOTs.

    A 90-degree y pulse makes ``X_a``; gradients of relative area ``+1, -2,
    +1`` interleaved with ``CNOT(b -> a)`` and ``CNOT(c -> a)`` leave the
    ``a`` coherence unwound only where spins b and c are both up.
    """
    if sys.n != 3:
        raise ValueError("pseudo-pure preparation is defined for three spins")
    a, b, c = labels or sys.labels
    ev = [_pulse([a], 90, Y), Grad(1.0, 0.0)]
    ev += cnot_sequence(b, a, sys).events
    ev.append(Grad(-2.0, 0.0))
    ev += cnot_sequence(c, a, sys).events
    ev.append(Grad(1.0, 0.0))
    return PulseProgram(ev)


def wahuha_sequence(tau_s: float = 1e-5, labels=("all",)) -> PulseProgram:
    """WAHUHA: ``tau, 90x, tau, 90(-y), 2 tau, 90y, tau, 90(-x), tau``.

    The toggling frame visits ``Z, Y, X, Y, Z`` for ``tau, tau, 2 tau, tau,
    tau``, so each axis is occupied for a third of the cycle.
    """
    targets = ("all",) if tuple(labels) == ("all",) else tuple(labels)
    return PulseProgram([
        Delay(tau_s), _pulse(targets, 90, X),
        Delay(tau_s), _pulse(targets, 90, MINUS_Y),
        Delay(2 * tau_s), _pulse(targets, 90, Y),
        Delay(tau_s), _pulse(targets, 90, MINUS_X),
        Delay(tau_s),
    ])


# ---------------------------------------------------------------------------
# gradient bookkeeping in the toggling frame of the pulses


#: Row order of the population patterns in printed gradient tables.
GRADIENT_ROWS = ("+++", "++-", "+-+", "-++", "+--", "-+-", "--+", "---")


def gradient_phase_table(prog: PulseProgram, sys: SpinSystem, H_int: np.ndarray, spin: str | None = None):
    """Gradient phase on one spin's coherence, per population pattern of the others.

    Each gradient ``k`` contributes ``G~_k = P_k^dag G P_k`` with ``G`` the sum
    of ``Z`` over all spins (weighted by relative gyromagnetic ratio) and
    ``P_k`` the propagator from the first gradient up to gradient ``k``.  The
    coefficient of ``Z_spin`` in ``G~_k``, taken in the population pattern of
    the remaining spins, times the gradient area, is the phase in that
    interval.  Values are in units of ``theta``, the largest gradient area.

    Returns
    -------
    dict
        Maps an ``E`` pattern such as ``"+-+"`` (``E_+`` for up, ``E_-`` for
        down, one sign per spin) to ``(per_interval_phases, total)``.
    """
    segs = compile_program(prog, sys, H_int, fold_frames=False)
    n = sys.n
    target = sys.index(spin or sys.labels[0])
    gammas = [abs(sys.gamma(k)) if _known(sys, k) else 1.0 for k in range(n)]
    weights = [g / max(gammas) for g in gammas]
    G = sum(w * single_spin_operator("Z", k, n) for k, w in enumerate(weights))
    P = None
    areas, frames = [], []
    for seg in segs:
        if isinstance(seg, UnitarySegment):
            if P is not None:
                P = seg.U @ P
        elif isinstance(seg, GradientSegment):
            if P is None:
                P = np.eye(2**n, dtype=complex)
            areas.append(seg.area)
            frames.append(P.conj().T @ G @ P)
    if not areas:
        raise ValueError("program contains no gradient")
    theta = max(abs(x) for x in areas)
    table = {}
    for pattern in (_pattern(i, n) for i in range(2**n)):
        proj = np.ones((1, 1))
        for k, sgn in enumerate(pattern):
            e = np.diag([1.0, 0.0]) if sgn == "+" else np.diag([0.0, 1.0])
            proj = np.kron(proj, single_spin_operator("Z", 0, 1) if k == target else e)
        phases = [area * float(np.trace(Gk @ proj).real) / 2 / theta for area, Gk in zip(areas, frames)]
        phases = [0.0 if abs(p) < 1e-12 else p for p in phases]
        table[pattern] = (phases, float(sum(phases)) if abs(sum(phases)) > 1e-12 else 0.0)
    return table


def _known(sys: SpinSystem, k: int) -> bool:
    try:
        sys.gamma(k)
    except ValueError:
        return False
    return True


def _pattern(i: int, n: int) -> str:
    return "".join("-" if (i >> (n - 1 - k)) & 1 else "+" for k in range(n))


# ---------------------------------------------------------------------------
# registry for export


def _alanine_cnot():
    from .hamiltonian import alanine

    return cnot_sequence("a", "b", alanine())


def _alanine_pseudo_pure():
    from .hamiltonian import alanine

    return pseudo_pure_sequence(alanine())


SEQUENCES = {
    "noop": noop_sequence,
    "decouple": decouple_sequence,
    "cnot": _alanine_cnot,
    "pseudo-pure": _alanine_pseudo_pure,
    "wahuha": wahuha_sequence,
}


def named_sequence(name: str) -> PulseProgram:
    """One of the registered sequences with default parameters (alanine where a system is needed)."""
    try:
        return SEQUENCES[name]()
    except KeyError:
        raise ValueError(f"unknown sequence {name!r}; choose from {', '.join(SEQUENCES)}") from None
