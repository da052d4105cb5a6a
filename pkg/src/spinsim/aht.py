"""
Average Hamiltonian theory for cycles of ideal pulses and free evolution.

Between pulses the internal Hamiltonian is viewed from the toggling frame of
the pulses applied so far, ``H~_k = P_k^dag H P_k``.  Over a cycle of length
``T`` the Magnus expansion gives

    H0 = (1/T) sum_k t_k H~_k
    H1 = (-i / 2T) sum_{j<k} t_j t_k [H~_k, H~_j]

for piecewise-constant pieces, with the later interval standing on the left.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import (
    PAULI_SYMBOLS,
    expand_product_basis,
    from_pauli_coefficients,
    from_product_basis,
    is_hermitian,
    pauli_coefficients,
    pauli_matrix,
)
from .engine import propagator
from .hamiltonian import SpinSystem, solid_terms
from .pulseprog import (
    Acquire,
    CompileError,
    Crush,
    Delay,
    FrameShift,
    Grad,
    Pulse,
    PulseProgram,
    UnitarySegment,
    compile_program,
)

#: Coefficients below this (relative to the largest Hamiltonian coefficient)
#: are treated as zero in reports.
REPORT_TOL = 1e-13


@dataclass(frozen=True)
class TogglingFrames:
    """Free-evolution intervals of a cycle seen from the pulse toggling frame.

    ``intervals`` holds ``(duration_s, H~_k)`` pairs, ``rf_propagators`` the
    cumulative pulse propagator ``P_k`` in force during each interval and
    ``net_rf`` the cumulative pulse propagator after the whole cycle.
    """

    intervals: list[tuple[float, np.ndarray]]
    rf_propagators: list[np.ndarray] = field(repr=False)
    net_rf: np.ndarray = field(repr=False)
    cyclic: bool = False
    base: np.ndarray | None = field(default=None, repr=False)
    images: list[dict] | None = field(default=None, repr=False)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def cycle_time(self) -> float:
        return float(sum(t for t, _ in self.intervals))


def _is_identity_up_to_phase(U: np.ndarray, tol: float = 1e-9) -> bool:
    dim = U.shape[0]
    phase = np.trace(U) / dim
    return abs(abs(phase) - 1) < tol and np.abs(U - phase * np.eye(dim)).max() < tol


def _operator_and_coefficients(H_int, n: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(H_int, Mapping) and all(set(k) <= set(PAULI_SYMBOLS) for k in H_int):
        base = np.zeros((4,) * n, dtype=complex)
        for k, v in H_int.items():
            base[tuple(PAULI_SYMBOLS.index(ch) for ch in k)] += v
    else:
        if isinstance(H_int, Mapping):
            H_int = from_product_basis(H_int, n)
        H_int = np.asarray(H_int, dtype=complex)
        base = pauli_coefficients(H_int)
        # a dense matrix carries rounding noise of order eps * |H| on every
        # string; anything that small is not a term of the Hamiltonian
        base[np.abs(base) < 16 * np.finfo(float).eps * np.abs(base).sum()] = 0
    # the identity part only contributes a global phase
    base[(0,) * base.ndim] = 0
    return from_pauli_coefficients(base), base


def toggling_frames(prog: PulseProgram, H_int, sys: SpinSystem) -> TogglingFrames:
    """Split a cycle of ideal pulses and delays into toggling-frame intervals.

    ``H_int`` is a dense matrix or a ``{string: coefficient}`` mapping; the
    mapping form avoids the rounding noise of a dense matrix, which matters
    when checking that averages vanish to 1e-12 in rad/s.  The identity
    component is dropped since it only adds a global phase.

    Pulses (and ``zrot`` frame changes, which act as ideal z pulses) update
    the cumulative propagator; every delay becomes one interval.  Pulses
    after the last delay are part of ``net_rf`` and of the cyclicity check
    but add no interval.

    Raises
    ------
    CompileError
        If the program holds a finite-width pulse, a gradient, a crusher or an
        acquisition.
    """
    for ev in prog:
        if isinstance(ev, Pulse) and not ev.ideal:
            raise CompileError("average Hamiltonian analysis needs ideal (zero-width) pulses")
        if isinstance(ev, (Grad, Crush, Acquire)):
            raise CompileError(f"{type(ev).__name__.lower()} events cannot be part of an AHT cycle")
    H_int, base = _operator_and_coefficients(H_int, sys.n)
    dim = H_int.shape[0]
    P = np.eye(dim, dtype=complex)
    intervals, rf, images = [], [], []
    for ev in prog:
        seg = compile_program(PulseProgram([ev]), sys, H_int, fold_frames=False)
        if isinstance(ev, Delay):
            img = _string_images(base, P)
            c = sum((base[idx] * m for idx, m in img.items()), np.zeros_like(base))
            intervals.append((seg[0].duration_s, from_pauli_coefficients(c)))
            rf.append(P)
            images.append(img)
        elif isinstance(ev, (Pulse, FrameShift)):
            assert isinstance(seg[0], UnitarySegment)
            P = seg[0].U @ P
    if not intervals:
        intervals.append((0.0, H_int.astype(complex)))
        rf.append(np.eye(dim, dtype=complex))
        images.append(_string_images(base, np.eye(dim, dtype=complex)))
    return TogglingFrames(intervals, rf, P, _is_identity_up_to_phase(P), base, images)


def _snap(x: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    out = x.copy()
    for part in (out.real, out.imag):
        r = np.round(part)
        close = np.abs(part - r) < tol
        part[close] = r[close]
    return out


def _string_images(base: np.ndarray, P: np.ndarray) -> dict[tuple[int, ...], np.ndarray]:
    """Pauli coefficients of ``P^dag sigma P`` for every string present in ``base``.

    Images of unit strings are O(1); entries within 1e-14 of an integer are
    rounded to it, so Clifford pulses give exactly signed strings.
    """
    n = base.ndim
    out = {}
    for idx in zip(*np.nonzero(base)):
        sigma = pauli_matrix("".join(PAULI_SYMBOLS[i] for i in idx), n)
        out[idx] = _snap(pauli_coefficients(P.conj().T @ sigma @ P))
    return out


@dataclass(frozen=True)
class Interval:
    duration_s: float
    terms: dict[str, float]


@dataclass(frozen=True)
class AhtReport:
    """Average-Hamiltonian summary of one cycle.

    Term mappings go from product strings (``"ZZ1"``) to real coefficients in
    rad/s.  ``residual_norm`` is the largest entry of the difference between
    the exact toggling-frame propagator and ``exp(-i (H0 + H1) T)`` (with
    ``H1 = 0`` for ``order=0``).
    """

    intervals: list[Interval]
    h0: dict[str, float]
    h1: dict[str, float]
    cyclic: bool
    residual_norm: float
    order: int
    cycle_time: float
    h0_matrix: np.ndarray = field(repr=False)
    h1_matrix: np.ndarray = field(repr=False)


def _real_terms(op: np.ndarray, scale: float) -> dict[str, float]:
    terms = expand_product_basis(op, tol=0.0)
    cutoff = REPORT_TOL * max(scale, 1.0)
    return {k: float(v.real) for k, v in terms.items() if abs(v) > cutoff}


def _nonzero_items(base: np.ndarray):
    idxs = list(zip(*np.nonzero(base)))
    return idxs, [base[i] for i in idxs]


def exact_propagator(frames: TogglingFrames) -> np.ndarray:
    """Toggling-frame propagator of the cycle: the ordered product of interval propagators."""
    dim = frames.intervals[0][1].shape[0]
    U = np.eye(dim, dtype=complex)
    for t, H in frames:
        U = propagator(H, t) @ U
    return U


def first_order_term(frames: TogglingFrames) -> np.ndarray:
    T = frames.cycle_time
    dim = frames.intervals[0][1].shape[0]
    h1 = np.zeros((dim, dim), dtype=complex)
    running = np.zeros((dim, dim), dtype=complex)  # sum_{j<k} t_j H~_j
    for t, H in frames:
        h1 += t * (H @ running - running @ H)
        running += t * H
    return -0.5j / T * h1


def magnus(frames: TogglingFrames, order: int = 1) -> AhtReport:
    """Zeroth- and (optionally) first-order average Hamiltonian of a cycle.

    Raises
    ------
    ValueError
        For an empty frame list, zero cycle time or an order other than 0 or 1.
    """
    if order not in (0, 1):
        raise ValueError("only orders 0 and 1 are implemented")
    if len(frames) == 0:
        raise ValueError("no intervals")
    T = frames.cycle_time
    if T <= 0:
        raise ValueError("cycle has zero total duration")
    if frames.images is not None:
        # Sum the O(1) interval weights per source string before scaling by
        # its coefficient, so that refocusing cancels exactly instead of to
        # the rounding level of the (large) rad/s coefficients.
        h0c = np.zeros_like(frames.base)
        for idx, c in zip(*_nonzero_items(frames.base)):
            w = sum((t / T) * img[idx] for (t, _), img in zip(frames, frames.images))
            h0c = h0c + c * w
        h0 = from_pauli_coefficients(h0c)
    else:
        h0 = sum(t * H for t, H in frames) / T
    h1 = first_order_term(frames) if order == 1 else np.zeros_like(h0)
    if not (is_hermitian(h0, 1e-9 * max(1.0, np.abs(h0).max())) and is_hermitian(h1, 1e-9 * max(1.0, np.abs(h1).max()))):
        raise AssertionError("average Hamiltonian is not Hermitian")
    scale = max((np.abs(H).max() for _, H in frames), default=1.0)
    residual = np.abs(exact_propagator(frames) - propagator(h0 + h1, T)).max()
    return AhtReport(
        intervals=[Interval(t, _real_terms(H, scale)) for t, H in frames],
        h0=_real_terms(h0, scale),
        h1=_real_terms(h1, scale),
        cyclic=frames.cyclic,
        residual_norm=float(residual),
        order=order,
        cycle_time=T,
        h0_matrix=h0,
        h1_matrix=h1,
    )


def average_hamiltonian(prog: PulseProgram, H_int, sys: SpinSystem, order: int = 1) -> AhtReport:
    """Shorthand for ``magnus(toggling_frames(prog, H_int, sys), order)``."""
    return magnus(toggling_frames(prog, H_int, sys), order)


def wahuha_check(sys: SpinSystem, tau_s: float = 1e-5, order: int = 0) -> AhtReport:
    """Average Hamiltonian of the WAHUHA cycle for a like-spin dipolar pair.

    Raises
    ------
    ValueError
        If ``sys`` is not a two-spin system on a single channel.
    """
    from .seqlib import wahuha_sequence

    if sys.n != 2:
        raise ValueError("WAHUHA check expects a two-spin system")
    if len(sys.channels()) != 1:
        raise ValueError("WAHUHA averages homonuclear couplings only; got a heteronuclear pair")
    return average_hamiltonian(wahuha_sequence(tau_s), solid_terms(sys), sys, order)


def dipolar_part(terms: dict[str, float]) -> dict[str, float]:
    """Two-spin bilinear terms of an expansion (strings with two non-identity factors)."""
    return {k: v for k, v in terms.items() if sum(ch != "1" for ch in k) >= 2}


# ---------------------------------------------------------------------------
# reporting


def _fmt(v: float | None) -> str:
    if v is None:
        return "0"
    return f"{v:.6g}"


def format_report(report: AhtReport, labels: tuple[str, ...] | None = None) -> str:
    """Plain-text tables: term coefficients per interval with the averages.

    One row per product string present in any interval or average, one
    column per interval plus the averaged terms.
    """
    keys = {k for iv in report.intervals for k in iv.terms} | set(report.h0) | set(report.h1)
    # order by weight, then by which spins carry the factors (spin a first)
    keys = sorted(keys, key=lambda s: (sum(ch != "1" for ch in s), [i for i, ch in enumerate(s) if ch != "1"], s))
    header = ["term"] + [str(i + 1) for i in range(len(report.intervals))] + ["average"]
    if report.order == 1:
        header.append("first order")
    rows = [header, ["t (s)"] + [f"{iv.duration_s:.6g}" for iv in report.intervals] + [f"{report.cycle_time:.6g}"]]
    if report.order == 1:
        rows[-1].append("")
    for k in keys:
        row = [k] + [_fmt(iv.terms.get(k)) for iv in report.intervals] + [_fmt(report.h0.get(k))]
        if report.order == 1:
            row.append(_fmt(report.h1.get(k)))
        rows.append(row)
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    lines = []
    for i, r in enumerate(rows):
        lines.append("  ".join(cell.rjust(w) if c else cell.ljust(w) for c, (cell, w) in enumerate(zip(r, widths))))
        if i == 1:
            lines.append("  ".join("-" * w for w in widths))
    if labels:
        lines.insert(0, "spins: " + " ".join(labels))
    lines.append("")
    lines.append(f"cyclic: {'yes' if report.cyclic else 'no'}")
    lines.append(f"residual (max entry): {report.residual_norm:.3e}")
    return "\n".join(lines) + "\n"


def report_csv(report: AhtReport) -> str:
    """Comma-separated dump with columns ``block,duration_s,term,coefficient``.

    ``block`` is the 1-based interval number, ``h0`` or ``h1``.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block", "duration_s", "term", "coefficient"])
    for i, iv in enumerate(report.intervals, 1):
        for k, v in iv.terms.items():
            w.writerow([i, repr(iv.duration_s), k, repr(v)])
    for name, terms in (("h0", report.h0), ("h1", report.h1)):
        for k, v in terms.items():
            w.writerow([name, repr(report.cycle_time), k, repr(v)])
    return buf.getvalue()
