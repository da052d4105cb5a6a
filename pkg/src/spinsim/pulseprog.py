"""
Pulse-program DSL: parsing, rendering and compilation to segment lists.

One event per line (keywords are case-insensitive, ``#`` starts a comment)::

    pulse <targets|all> <angle_deg> <axis> [width_s]
    delay <seconds | 1/(2J:label,label)>
    grad <relative_area> <duration_s>
    crush
    zrot <target> <angle_deg>
    acquire <npoints> <dwell_s> [decouple:<label,...>]

``axis`` is one of ``x y z -x -y -z`` or a unit vector ``vx,vy,vz``.  Targets
are comma-separated spin labels or channel tags.  The formal grammar lives in
``docs/formats.md``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .core import single_spin_operator
from .hamiltonian import (
    GradientSpec,
    SpinSystem,
    local_rotations,
    rf_hamiltonian,
    rotation_2x2,
)

_NAMED_AXES = {
    "x": (1.0, 0.0, 0.0),
    "y": (0.0, 1.0, 0.0),
    "z": (0.0, 0.0, 1.0),
    "-x": (-1.0, 0.0, 0.0),
    "-y": (0.0, -1.0, 0.0),
    "-z": (0.0, 0.0, -1.0),
}
_AXIS_NAMES = {v: k for k, v in _NAMED_AXES.items()}


# ---------------------------------------------------------------------------
# events


@dataclass(frozen=True)
class Pulse:
    targets: tuple[str, ...]
    angle_deg: float
    axis: tuple[float, float, float]
    width_s: float = 0.0

    @property
    def angle_rad(self) -> float:
        return math.radians(self.angle_deg)

    @property
    def ideal(self) -> bool:
        return self.width_s == 0


@dataclass(frozen=True)
class Delay:
    """Free evolution for ``t_s`` seconds or ``1/(2 J_ab)`` when ``j_pair`` is set."""

    t_s: float | None = None
    j_pair: tuple[str, str] | None = None

    def seconds(self, sys: SpinSystem | None = None) -> float:
        if self.j_pair is None:
            return self.t_s
        if sys is None:
            raise ValueError("binding a J-expression delay needs a spin system")
        try:
            j = sys.j(*self.j_pair)
        except KeyError as exc:
            raise CompileError(f"unresolved label {exc.args[0]!r} in delay") from None
        if j == 0:
            raise CompileError(f"J({self.j_pair[0]},{self.j_pair[1]}) is zero; delay undefined")
        return 1 / (2 * j)


@dataclass(frozen=True)
class Grad:
    area: float
    duration_s: float


@dataclass(frozen=True)
class Crush:
    pass


@dataclass(frozen=True)
class Acquire:
    npoints: int
    dwell_s: float
    decouple: tuple[str, ...] = ()


@dataclass(frozen=True)
class FrameShift:
    """A z-rotation handled as transmitter-phase bookkeeping (``zrot``)."""

    target: str
    angle_deg: float

    @property
    def phase_rad(self) -> float:
        return math.radians(self.angle_deg)


Event = Union[Pulse, Delay, Grad, Crush, Acquire, FrameShift]


@dataclass(frozen=True)
class PulseProgram:
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    def __add__(self, other: "PulseProgram") -> "PulseProgram":
        return PulseProgram(self.events + other.events)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def render(self) -> str:
        return render(self)

    def duration(self, sys: SpinSystem | None = None) -> float:
        total = 0.0
        for ev in self.events:
            if isinstance(ev, Pulse):
                total += ev.width_s
            elif isinstance(ev, Delay):
                total += ev.seconds(sys)
            elif isinstance(ev, Grad):
                total += ev.duration_s
            elif isinstance(ev, Acquire):
                total += ev.npoints * ev.dwell_s
        return total


# ---------------------------------------------------------------------------
# parsing


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int, source: str = "<string>"):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{source}:{line}:{column}: {message}")


class CompileError(ValueError):
    pass


_J_DELAY = re.compile(r"^1/\(2J:([^,()\s]+),([^,()\s]+)\)$", re.IGNORECASE)


def _float(tok: str, col: int, what: str, lineno: int, source: str, minimum: float | None = None) -> float:
    try:
        value = float(tok)
    except ValueError:
        raise ParseError(f"malformed number {tok!r} for {what}", lineno, col, source) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} must be finite", lineno, col, source)
    if minimum is not None and value < minimum:
        raise ParseError(f"{what} must be >= {minimum:g}, got {tok}", lineno, col, source)
    return value


def _axis(tok: str, col: int, lineno: int, source: str) -> tuple[float, float, float]:
    named = _NAMED_AXES.get(tok.lower())
    if named is not None:
        return named
    parts = tok.split(",")
    if len(parts) != 3:
        raise ParseError(f"axis must be x, y, z, -x, -y, -z or vx,vy,vz; got {tok!r}", lineno, col, source)
    vec = tuple(_float(p, col, "axis component", lineno, source) for p in parts)
    if abs(math.sqrt(sum(c * c for c in vec)) - 1) > 1e-9:
        raise ParseError(f"axis {tok!r} is not a unit vector", lineno, col, source)
    return vec


def _targets(tok: str, col: int, lineno: int, source: str) -> tuple[str, ...]:
    if tok.lower() == "all":
        return ("all",)
    names = tuple(tok.split(","))
    if any(not n for n in names):
        raise ParseError(f"empty target in {tok!r}", lineno, col, source)
    return names


def _tokens(line: str) -> list[tuple[str, int]]:
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", line)]


def parse(text: str, source: str = "<string>") -> PulseProgram:
    """Parse DSL text into a :class:`PulseProgram`.

    Raises :class:`ParseError` with a 1-based line and column on bad input.
    """
    events: list[Event] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = _tokens(line)
        if not toks:
            continue
        (kw, kcol), args = toks[0], toks[1:]
        kw = kw.lower()

        def need(lo: int, hi: int, usage: str):
            if not lo <= len(args) <= hi:
                col = args[hi][1] if len(args) > hi else kcol
                raise ParseError(f"usage: {usage}", lineno, col, source)

        if kw == "pulse":
            need(3, 4, "pulse <targets|all> <angle_deg> <axis> [width_s]")
            targets = _targets(*args[0], lineno, source)
            angle = _float(*args[1], "angle_deg", lineno, source)
            axis = _axis(*args[2], lineno, source)
            width = _float(*args[3], "width_s", lineno, source, minimum=0.0) if len(args) == 4 else 0.0
            events.append(Pulse(targets, angle, axis, width))
        elif kw == "delay":
            need(1, 1, "delay <seconds|1/(2J:label,label)>")
            tok, col = args[0]
            m = _J_DELAY.match(tok)
            if m:
                events.append(Delay(j_pair=(m.group(1), m.group(2))))
            else:
                events.append(Delay(_float(tok, col, "delay", lineno, source, minimum=0.0)))
        elif kw == "grad":
            need(2, 2, "grad <relative_area> <duration_s>")
            area = _float(*args[0], "gradient area", lineno, source)
            events.append(Grad(area, _float(*args[1], "duration_s", lineno, source, minimum=0.0)))
        elif kw == "crush":
            need(0, 0, "crush")
            events.append(Crush())
        elif kw == "zrot":
            need(2, 2, "zrot <target> <angle_deg>")
            events.append(FrameShift(args[0][0], _float(*args[1], "angle_deg", lineno, source)))
        elif kw == "acquire":
            need(2, 3, "acquire <npoints> <dwell_s> [decouple:<labels>]")
            tok, col = args[0]
            if not re.fullmatch(r"\d+", tok) or int(tok) < 2:
                raise ParseError(f"npoints must be an integer >= 2, got {tok!r}", lineno, col, source)
            dwell = _float(*args[1], "dwell_s", lineno, source)
            if dwell <= 0:
                raise ParseError("dwell_s must be positive", lineno, args[1][1], source)
            decouple: tuple[str, ...] = ()
            if len(args) == 3:
                opt, ocol = args[2]
                if not opt.lower().startswith("decouple:") or len(opt) <= len("decouple:"):
                    raise ParseError(f"expected decouple:<labels>, got {opt!r}", lineno, ocol, source)
                decouple = _targets(opt[len("decouple:"):], ocol, lineno, source)
            events.append(Acquire(int(tok), dwell, decouple))
        else:
            raise ParseError(f"unknown keyword {toks[0][0]!r}", lineno, kcol, source)
    return PulseProgram(tuple(events))


def load_program(path) -> PulseProgram:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), str(path))


def _fmt_axis(axis) -> str:
    name = _AXIS_NAMES.get(tuple(float(c) for c in axis))
    return name if name is not None else ",".join(repr(float(c)) for c in axis)


def _num(x) -> str:
    # shortest text that reads back to the same double
    return repr(float(x))


def render_event(ev: Event) -> str:
    if isinstance(ev, Pulse):
        text = f"pulse {','.join(ev.targets)} {_num(ev.angle_deg)} {_fmt_axis(ev.axis)}"
        return text + (f" {_num(ev.width_s)}" if ev.width_s else "")
    if isinstance(ev, Delay):
        if ev.j_pair is not None:
            return f"delay 1/(2J:{ev.j_pair[0]},{ev.j_pair[1]})"
        return f"delay {_num(ev.t_s)}"
    if isinstance(ev, Grad):
        return f"grad {_num(ev.area)} {_num(ev.duration_s)}"
    if isinstance(ev, Crush):
        return "crush"
    if isinstance(ev, FrameShift):
        return f"zrot {ev.target} {_num(ev.angle_deg)}"
    if isinstance(ev, Acquire):
        text = f"acquire {ev.npoints} {_num(ev.dwell_s)}"
        return text + (f" decouple:{','.join(ev.decouple)}" if ev.decouple else "")
    raise TypeError(f"not a pulse-program event: {ev!r}")


def render(prog: PulseProgram) -> str:
    return "".join(render_event(ev) + "\n" for ev in prog.events)


# ---------------------------------------------------------------------------
# compilation


@dataclass(frozen=True)
class UnitarySegment:
    U: np.ndarray = field(repr=False)
    duration_s: float
    hamiltonian: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class GradientSegment:
    """A gradient pulse of relative ``area``; phases depend on sample position.

    ``weights`` are the per-spin gyromagnetic ratios relative to the largest
    one.  ``hamiltonian`` is the internal Hamiltonian active during the pulse.
    """

    area: float
    duration_s: float
    weights: tuple[float, ...]
    hamiltonian: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CrusherSegment:
    """Removes spatially recoverable coherence; ``grad=None`` is the ideal limit.

    ``gammas`` are the spins' gyromagnetic ratios (``None``: treat all spins
    alike, which only the ideal limit allows).
    """

    grad: GradientSpec | None = None
    gammas: tuple[float, ...] | None = None


@dataclass(frozen=True)
class AcquisitionSegment:
    npoints: int
    dwell_s: float
    observable: np.ndarray = field(repr=False)
    hamiltonian: np.ndarray = field(repr=False)
    channel: str = ""
    decoupled: tuple[int, ...] = ()


Segment = Union[UnitarySegment, GradientSegment, CrusherSegment, AcquisitionSegment]
SegmentList = tuple


def _resolve(sys: SpinSystem, names) -> tuple[int, ...]:
    out: list[int] = []
    for name in names:
        try:
            idx = sys.resolve(name)
        except KeyError:
            raise CompileError(f"unresolved label {name!r}") from None
        out.extend(i for i in idx if i not in out)
    return tuple(out)


def bind(prog: PulseProgram, sys: SpinSystem) -> PulseProgram:
    """Resolve J-expression delays to seconds and check every label."""
    events = []
    for ev in prog.events:
        if isinstance(ev, Delay):
            t = ev.seconds(sys)
            if t < 0:
                raise CompileError(f"delay resolves to a negative time ({t:g} s)")
            events.append(Delay(t))
        else:
            if isinstance(ev, Pulse):
                _resolve(sys, ev.targets)
            elif isinstance(ev, FrameShift):
                _resolve(sys, [ev.target])
            elif isinstance(ev, Acquire):
                _resolve(sys, ev.decouple)
            events.append(ev)
    return PulseProgram(tuple(events))


def _phase_rotated(axis, phase: float) -> np.ndarray:
    # axis seen through an accumulated z frame rotation -> rotate by -phase about z
    c, s = math.cos(phase), math.sin(phase)
    x, y, z = axis
    return np.array([c * x + s * y, -s * x + c * y, z])


def _frame_segment(phases: list[float], n: int) -> UnitarySegment:
    U = local_rotations(n, {k: rotation_2x2((0, 0, 1), p) for k, p in enumerate(phases) if p})
    return UnitarySegment(U, 0.0)


def decoupled_hamiltonian(H: np.ndarray, spins: tuple[int, ...]) -> np.ndarray:
    """Average Hamiltonian under ideal decoupling of ``spins``.

    Every product-operator term with a non-identity factor on a decoupled spin
    is removed, which traces those spins out of the evolution.
    """
    from .core import from_pauli_coefficients, pauli_coefficients

    if not spins:
        return H
    coeffs = pauli_coefficients(H).copy()
    for k in spins:
        sl = [slice(None)] * coeffs.ndim
        sl[k] = slice(1, None)
        coeffs[tuple(sl)] = 0
    return from_pauli_coefficients(coeffs)


def observable_operator(indices, n: int) -> np.ndarray:
    """``sum_j sigma_+^j`` over the given spins."""
    out = np.zeros((2**n, 2**n), dtype=complex)
    for j in indices:
        out += single_spin_operator("+", j, n)
    return out


def acquisition_segment(ev: Acquire, sys: SpinSystem, H_int: np.ndarray) -> AcquisitionSegment:
    dec = _resolve(sys, ev.decouple)
    observed = [k for k in range(sys.n) if k not in dec]
    if not observed:
        raise CompileError("acquisition with every spin decoupled has no observable")
    channel = sys.spins[observed[0]].channel
    observed = [k for k in observed if sys.spins[k].channel == channel]
    return AcquisitionSegment(
        ev.npoints,
        ev.dwell_s,
        observable_operator(observed, sys.n),
        decoupled_hamiltonian(H_int, dec),
        channel,
        dec,
    )


def _known_gammas(sys: SpinSystem, required: bool) -> tuple[float, ...] | None:
    try:
        return tuple(sys.gamma(k) for k in range(sys.n))
    except ValueError:
        if required or len(sys.channels()) > 1:
            raise CompileError("crusher needs gyromagnetic ratios for every channel") from None
        return None


def compile_program(
    prog: PulseProgram,
    sys: SpinSystem,
    H_int: np.ndarray,
    fold_frames: bool = True,
    crusher: GradientSpec | None = None,
) -> SegmentList:
    """Compile a program against a spin system into a tuple of segments.

    Ideal pulses become pure rotations, delays ``exp(-i H_int t)`` and finite
    pulses ``exp(-i (H_int + H_rf) t)`` with a constant RF amplitude of
    ``angle / width`` about the pulse axis.

    With ``fold_frames`` a ``zrot`` changes the phase reference of later
    pulses on that spin instead of emitting a rotation; the accumulated
    z-rotation is emitted once before each acquisition and at the end so the
    net propagator is the same as for explicit rotations.  ``crusher`` sets a
    finite gradient model for ``crush`` events (default: ideal).
    """
    from .engine import propagator

    n = sys.n
    if H_int.shape != (2**n, 2**n):
        raise CompileError(f"H_int has shape {H_int.shape}, expected {(2**n, 2**n)}")
    gammas = None
    if any(isinstance(e, Grad) for e in prog):
        known = _known_gammas(sys, required=False)
        gammas = [1.0] * n if known is None else [abs(g) for g in known]
    phases = [0.0] * n
    segs: list[Segment] = []

    def flush():
        if any(phases):
            segs.append(_frame_segment(phases, n))
            phases[:] = [0.0] * n

    for ev in prog.events:
        if isinstance(ev, Pulse):
            targets = _resolve(sys, ev.targets)
            axes = {k: _phase_rotated(ev.axis, phases[k]) for k in targets}
            if ev.ideal:
                U = local_rotations(n, {k: rotation_2x2(axes[k], ev.angle_rad) for k in targets})
                segs.append(UnitarySegment(U, 0.0))
            else:
                amp = ev.angle_rad / ev.width_s
                H = H_int.copy()
                for k in targets:
                    H = H + rf_hamiltonian([k], axes[k], amp, n)
                segs.append(UnitarySegment(propagator(H, ev.width_s), ev.width_s, H))
        elif isinstance(ev, Delay):
            t = ev.seconds(sys)
            if t < 0:
                raise CompileError(f"delay resolves to a negative time ({t:g} s)")
            segs.append(UnitarySegment(propagator(H_int, t), t, H_int))
        elif isinstance(ev, FrameShift):
            targets = _resolve(sys, [ev.target])
            if fold_frames:
                for k in targets:
                    phases[k] += ev.phase_rad
            else:
                U = local_rotations(n, {k: rotation_2x2((0, 0, 1), ev.phase_rad) for k in targets})
                segs.append(UnitarySegment(U, 0.0))
        elif isinstance(ev, Grad):
            top = max(gammas)
            segs.append(GradientSegment(ev.area, ev.duration_s, tuple(g / top for g in gammas), H_int))
        elif isinstance(ev, Crush):
            segs.append(CrusherSegment(crusher, _known_gammas(sys, required=crusher is not None)))
        elif isinstance(ev, Acquire):
            flush()
            segs.append(acquisition_segment(ev, sys, H_int))
        else:
            raise TypeError(f"not a pulse-program event: {ev!r}")
    flush()
    return tuple(segs)


compile = compile_program  # noqa: A001 - public name used throughout the docs


def net_propagator(segs: SegmentList, dim: int | None = None) -> np.ndarray:
    """Product of all unitary segments (later segments on the left).

    ``dim`` is needed only when ``segs`` holds no unitary segment.
    """
    U = None if dim is None else np.eye(dim, dtype=complex)
    for seg in segs:
        if isinstance(seg, UnitarySegment):
            U = seg.U @ (np.eye(seg.U.shape[0], dtype=complex) if U is None else U)
        elif isinstance(seg, AcquisitionSegment):
            continue
        else:
            raise ValueError("net propagator is only defined for purely unitary segment lists")
    if U is None:
        raise ValueError("empty segment list; pass dim")
    return U

