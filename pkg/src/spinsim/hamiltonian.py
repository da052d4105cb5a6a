"""
Spin systems and the Hamiltonians built from them.

Everything is expressed in the multi-channel rotating frame: Larmor offsets
are given relative to each channel's transmitter in Hz and converted once to
rad/s.  Hamiltonians are returned in rad/s.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import constants

from .core import PauliString, from_product_basis, pauli_matrix

# rad s^-1 T^-1
GYROMAGNETIC_RATIOS = {
    "1H": 267.5221874e6,
    "13C": 67.2828e6,
    "15N": -27.116e6,
    "19F": 251.815e6,
    "29Si": -53.190e6,
    "31P": 108.291e6,
}

MAGIC_ANGLE = math.acos(1 / math.sqrt(3))


@dataclass(frozen=True)
class Spin:
    label: str
    channel: str
    larmor_offset_hz: float = 0.0

    @property
    def omega(self) -> float:
        """Offset in rad/s."""
        return 2 * math.pi * self.larmor_offset_hz


@dataclass(frozen=True)
class DipolarCoupling:
    """Secular dipolar coupling between two spins.

    ``b_rad_per_s`` is the prefactor of ``sigma_z sigma_z`` before the
    orientation factor ``3 cos^2(theta) - 1``.
    """

    b_rad_per_s: float
    theta_rad: float

    @classmethod
    def from_geometry(cls, r_m: float, theta_rad: float, gamma_i: float, gamma_j: float):
        if r_m <= 0:
            raise ValueError("internuclear distance must be positive")
        # mu0 hbar gamma_i gamma_j / (4 pi r^3) is the full dipolar constant; the
        # Pauli-operator form carries an extra 1/4
        b = constants.mu_0 / (4 * math.pi) * constants.hbar * gamma_i * gamma_j / (4 * r_m**3)
        return cls(b, theta_rad)

    @property
    def orientation_factor(self) -> float:
        return 3 * math.cos(self.theta_rad) ** 2 - 1


@dataclass(frozen=True)
class GradientSpec:
    """A pulsed field gradient followed by a diffusion delay."""

    strength_t_per_m: float
    duration_s: float
    diffusion_coeff_m2_per_s: float = 0.0
    diffusion_delay_s: float = 0.0

    def __post_init__(self):
        if self.duration_s < 0:
            raise ValueError("gradient duration must be non-negative")
        if self.diffusion_coeff_m2_per_s < 0:
            raise ValueError("diffusion coefficient must be non-negative")
        if self.diffusion_delay_s < 0:
            raise ValueError("diffusion delay must be non-negative")


def _pair_key(i: int, j: int) -> tuple[int, int]:
    if i == j:
        raise ValueError("self-couplings are not allowed")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class SpinSystem:
    """A molecule: spins, scalar couplings and optional dipolar couplings.

    Couplings are keyed by sorted spin-index pairs.  Use :meth:`build` to
    construct from label pairs.
    """

    spins: tuple[Spin, ...]
    j_couplings: Mapping[tuple[int, int], float] = field(default_factory=dict)
    dipolar: Mapping[tuple[int, int], DipolarCoupling] = field(default_factory=dict)

    def __post_init__(self):
        if not self.spins:
            raise ValueError("a spin system needs at least one spin")
        labels = [s.label for s in self.spins]
        if len(set(labels)) != len(labels):
            raise ValueError(f"spin labels must be unique: {labels}")
        for s in self.spins:
            if not math.isfinite(s.larmor_offset_hz):
                raise ValueError(f"offset of spin {s.label!r} is not finite")
        for table in (self.j_couplings, self.dipolar):
            for i, j in table:
                if not (0 <= i < j < len(self.spins)):
                    raise ValueError(f"invalid coupling key {(i, j)}")

    @classmethod
    def build(
        cls,
        spins: Sequence[tuple[str, str, float]] | Sequence[Spin],
        j: Mapping[tuple[str, str], float] | None = None,
        dipolar: Mapping[tuple[str, str], DipolarCoupling] | None = None,
    ) -> "SpinSystem":
        """Construct from ``(label, channel, offset_hz)`` tuples and label-keyed couplings."""
        spins = tuple(s if isinstance(s, Spin) else Spin(*s) for s in spins)
        index = {s.label: k for k, s in enumerate(spins)}

        def keyed(table):
            out = {}
            for (a, b), value in (table or {}).items():
                try:
                    key = _pair_key(index[a], index[b])
                except KeyError as exc:
                    raise ValueError(f"unknown spin label {exc.args[0]!r}") from None
                if key in out and out[key] != value:
                    raise ValueError(f"conflicting values for coupling {a}-{b}")
                out[key] = value
            return out

        return cls(spins, keyed(j), keyed(dipolar))

    @property
    def n(self) -> int:
        return len(self.spins)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.spins)

    def index(self, label: str) -> int:
        for k, s in enumerate(self.spins):
            if s.label == label:
                return k
        raise KeyError(label)

    def j(self, a, b) -> float:
        i = a if isinstance(a, int) else self.index(a)
        k = b if isinstance(b, int) else self.index(b)
        return self.j_couplings.get(_pair_key(i, k), 0.0)

    def gamma(self, i: int) -> float:
        channel = self.spins[i].channel
        try:
            return GYROMAGNETIC_RATIOS[channel]
        except KeyError:
            raise ValueError(f"no gyromagnetic ratio known for channel {channel!r}") from None

    def channels(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(s.channel for s in self.spins))

    def resolve(self, target: str) -> tuple[int, ...]:
        """Spin indices named by a label, a channel tag, or ``all``."""
        if target.lower() == "all":
            return tuple(range(self.n))
        if target in self.labels:
            return (self.index(target),)
        on_channel = tuple(k for k, s in enumerate(self.spins) if s.channel == target)
        if on_channel:
            return on_channel
        raise KeyError(target)

    def with_j(self, a: str, b: str, value: float) -> "SpinSystem":
        couplings = dict(self.j_couplings)
        couplings[_pair_key(self.index(a), self.index(b))] = value
        return SpinSystem(self.spins, couplings, dict(self.dipolar))

    def with_offsets(self, offsets_hz: Sequence[float]) -> "SpinSystem":
        spins = tuple(Spin(s.label, s.channel, float(f)) for s, f in zip(self.spins, offsets_hz, strict=True))
        return SpinSystem(spins, dict(self.j_couplings), dict(self.dipolar))


def alanine() -> SpinSystem:
    """The three 13C spins of labelled alanine at 9.4 T, carrier on spin ``a``."""
    return SpinSystem.build(
        [("a", "13C", 0.0), ("b", "13C", -12580.0), ("c", "13C", 3440.0)],
        j={("a", "b"): 53.0, ("a", "c"): 38.0, ("b", "c"): 1.2},
    )


def _string(n: int, placements: Mapping[int, str]) -> str:
    return "".join(placements.get(k, "1") for k in range(n))


def liquid_terms(sys: SpinSystem) -> dict[str, float]:
    """Product-operator coefficients of the weak-coupling liquid Hamiltonian.

    ``H = 1/2 sum_i omega_i Z_i + pi/2 sum_{i<j} J_ij Z_i Z_j`` in rad/s.
    """
    terms: dict[str, float] = {}
    for i, s in enumerate(sys.spins):
        if s.larmor_offset_hz != 0:
            terms[_string(sys.n, {i: "Z"})] = s.omega / 2
    for (i, j), value in sorted(sys.j_couplings.items()):
        if value != 0:
            terms[_string(sys.n, {i: "Z", j: "Z"})] = math.pi / 2 * value
    return terms


def liquid_hamiltonian(sys: SpinSystem) -> np.ndarray:
    """Weak-coupling internal Hamiltonian (diagonal, rad/s)."""
    n = sys.n
    diag = np.zeros(2**n)
    for s, c in liquid_terms(sys).items():
        diag += c * pauli_matrix(PauliString(s), n).diagonal().real
    return np.diag(diag).astype(complex)


def solid_terms(sys: SpinSystem, heteronuclear_secular: bool = True) -> dict[str, float]:
    """Product-operator coefficients of the solid-state internal Hamiltonian.

    Chemical shifts plus, for each dipolar pair,
    ``b P (Z Z) - (b P / 4)(sigma_+ sigma_- + sigma_- sigma_+)`` with
    ``P = 3 cos^2 theta - 1``.  The flip-flop part equals ``-(b P / 2)(XX + YY)``
    and is dropped for heteronuclear pairs when ``heteronuclear_secular``.
    """
    n = sys.n
    terms: dict[str, float] = {}
    for i, s in enumerate(sys.spins):
        if s.larmor_offset_hz != 0:
            terms[_string(n, {i: "Z"})] = s.omega / 2
    for (i, j), d in sorted(sys.dipolar.items()):
        zz = d.b_rad_per_s * d.orientation_factor
        if zz == 0:
            continue
        terms[_string(n, {i: "Z", j: "Z"})] = terms.get(_string(n, {i: "Z", j: "Z"}), 0.0) + zz
        hetero = sys.spins[i].channel != sys.spins[j].channel
        if not (heteronuclear_secular and hetero):
            terms[_string(n, {i: "X", j: "X"})] = -zz / 2
            terms[_string(n, {i: "Y", j: "Y"})] = -zz / 2
    for (i, j), value in sorted(sys.j_couplings.items()):
        if value != 0:
            key = _string(n, {i: "Z", j: "Z"})
            terms[key] = terms.get(key, 0.0) + math.pi / 2 * value
    return terms


def solid_hamiltonian(
    sys: SpinSystem,
    heteronuclear_secular: bool = True,
    pairs: Iterable[tuple[str, str]] | None = None,
) -> np.ndarray:
    """Solid-state internal Hamiltonian in rad/s.

    ``pairs`` optionally names the label pairs that must carry dipolar
    parameters; a missing entry raises ``ValueError``.
    """
    for a, b in pairs or ():
        if _pair_key(sys.index(a), sys.index(b)) not in sys.dipolar:
            raise ValueError(f"no dipolar parameters for pair {a}-{b}")
    return from_product_basis(solid_terms(sys, heteronuclear_secular), sys.n)


def internal_hamiltonian(sys: SpinSystem) -> np.ndarray:
    """Solid-state form when dipolar couplings are present, liquid form otherwise."""
    return solid_hamiltonian(sys) if sys.dipolar else liquid_hamiltonian(sys)


def rotation_2x2(axis: Sequence[float], angle_rad: float) -> np.ndarray:
    """``exp(-i (v . sigma) phi / 2)`` for a unit vector ``v``."""
    v = np.asarray(axis, dtype=float)
    if v.shape != (3,) or abs(np.linalg.norm(v) - 1) > 1e-9:
        raise ValueError(f"rotation axis must be a unit 3-vector, got {axis}")
    vs = v[0] * np.array([[0, 1], [1, 0]]) + v[1] * np.array([[0, -1j], [1j, 0]]) + v[2] * np.diag([1, -1])
    c, s = _half_angle_trig(angle_rad)
    return c * np.eye(2) - 1j * s * vs


def _half_angle_trig(angle_rad: float) -> tuple[float, float]:
    # Multiples of 180 degrees get exact zeros so that refocusing cancels to
    # machine zero instead of leaving ~1e-16 relative residues.
    half = angle_rad / 2
    quarter_turns = half / (math.pi / 2)
    k = round(quarter_turns)
    if abs(quarter_turns - k) < 1e-15 * max(1, abs(k)):
        return ((1.0, 0.0, -1.0, 0.0)[k % 4], (0.0, 1.0, 0.0, -1.0)[k % 4])
    return math.cos(half), math.sin(half)


def local_rotations(n: int, rotations: Mapping[int, np.ndarray]) -> np.ndarray:
    """Tensor product of per-spin 2x2 unitaries (identity where absent)."""
    out = np.ones((1, 1), dtype=complex)
    for k in range(n):
        out = np.kron(out, rotations.get(k, np.eye(2, dtype=complex)))
    return out


def rf_rotation(targets: Iterable[int], axis: Sequence[float], angle_rad: float, n: int) -> np.ndarray:
    """Ideal (instantaneous) rotation of the target spins about ``axis``.

    Examples
    --------
    >>> np.round(rf_rotation([0], (1, 0, 0), np.pi / 2, 1) * np.sqrt(2), 12)
    array([[1.+0.j, 0.-1.j],
           [0.-1.j, 1.+0.j]])
    """
    r = rotation_2x2(axis, angle_rad)
    return local_rotations(n, {k: r for k in targets})


def z_rotation(targets: Iterable[int], angle_rad: float, n: int) -> np.ndarray:
    return rf_rotation(targets, (0.0, 0.0, 1.0), angle_rad, n)


def rf_hamiltonian(targets: Iterable[int], axis: Sequence[float], amplitude_rad_per_s: float, n: int) -> np.ndarray:
    """Constant on-resonance RF term ``(omega_1 / 2) sum_targets v . sigma``."""
    v = np.asarray(axis, dtype=float)
    out = np.zeros((2**n, 2**n), dtype=complex)
    for k in targets:
        for comp, sym in zip(v, "XYZ"):
            if comp:
                out += amplitude_rad_per_s / 2 * comp * pauli_matrix(_string(n, {k: sym}), n)
    return out


def gradient_hamiltonian(g: GradientSpec, z_m: float, sys: SpinSystem) -> np.ndarray:
    """``(dB_z/dz) z sum_j (gamma_j / 2) Z_j`` in rad/s."""
    n = sys.n
    diag = np.zeros(2**n)
    for j in range(sys.n):
        diag += sys.gamma(j) / 2 * pauli_matrix(_string(n, {j: "Z"}), n).diagonal().real
    return np.diag(g.strength_t_per_m * z_m * diag).astype(complex)


def gradient_phase(g: GradientSpec, z_m: float, sys: SpinSystem) -> np.ndarray:
    """Propagator of a gradient pulse at position ``z_m``.

    Spin ``j`` is rotated about z by ``gamma_j * g * z * duration``.
    """
    h = gradient_hamiltonian(g, z_m, sys).diagonal()
    return np.diag(np.exp(-1j * h * g.duration_s))


# ---------------------------------------------------------------------------
# spin-system configuration files


class ConfigError(ValueError):
    """Malformed spin-system file; carries the source and line number."""

    def __init__(self, message: str, line: int | None = None, source: str = "<string>"):
        self.message = message
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


_SECTIONS = ("spins", "j", "dipolar")
_SECTION_RE = re.compile(r"^\[\s*([A-Za-z]+)\s*\]$")


def _number(token: str, what: str, line: int, source: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ConfigError(f"malformed number {token!r} for {what}", line, source) from None
    if not math.isfinite(value):
        raise ConfigError(f"{what} must be finite", line, source)
    return value


def parse_system(text: str, source: str = "<string>") -> SpinSystem:
    """Parse the line-oriented spin-system format (see ``docs/formats.md``)."""
    section = None
    seen: dict[str, int] = {}
    spins: list[Spin] = []
    j: dict[tuple[str, str], float] = {}
    dip: dict[tuple[str, str], DipolarCoupling] = {}
    pair_lines: list[tuple[str, str, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).lower()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{m.group(1)}]", lineno, source)
            if section in seen:
                raise ConfigError(f"section [{section}] repeated (first at line {seen[section]})", lineno, source)
            seen[section] = lineno
            continue
        if section is None:
            raise ConfigError("content before the first section header", lineno, source)
        tokens = line.split()
        if section == "spins":
            if len(tokens) != 3:
                raise ConfigError("expected: label channel offset_hz", lineno, source)
            label, channel, offset = tokens
            if any(s.label == label for s in spins):
                raise ConfigError(f"duplicate spin label {label!r}", lineno, source)
            spins.append(Spin(label, channel, _number(offset, "offset_hz", lineno, source)))
        elif section == "j":
            if len(tokens) != 3:
                raise ConfigError("expected: label label j_hz", lineno, source)
            a, b, value = tokens
            if a == b:
                raise ConfigError(f"self-coupling of {a!r}", lineno, source)
            key = tuple(sorted((a, b)))
            if key in j:
                raise ConfigError(f"coupling {a}-{b} given twice", lineno, source)
            j[key] = _number(value, "j_hz", lineno, source)
            pair_lines.append((a, b, lineno))
        else:
            if len(tokens) != 4:
                raise ConfigError("expected: label label b_rad_per_s theta_deg", lineno, source)
            a, b, bval, theta = tokens
            if a == b:
                raise ConfigError(f"self-coupling of {a!r}", lineno, source)
            key = tuple(sorted((a, b)))
            if key in dip:
                raise ConfigError(f"dipolar coupling {a}-{b} given twice", lineno, source)
            dip[key] = DipolarCoupling(
                _number(bval, "b_rad_per_s", lineno, source),
                math.radians(_number(theta, "theta_deg", lineno, source)),
            )
            pair_lines.append((a, b, lineno))

    if "spins" not in seen:
        raise ConfigError("missing [spins] section", None, source)
    if not spins:
        raise ConfigError("[spins] section is empty", seen["spins"], source)
    labels = {s.label for s in spins}
    for a, b, lineno in pair_lines:
        for lab in (a, b):
            if lab not in labels:
                raise ConfigError(f"unknown spin label {lab!r}", lineno, source)
    return SpinSystem.build(spins, j, dip)


def load_system(path) -> SpinSystem:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc.strerror}", None, str(path)) from None
    return parse_system(text, str(path))


def render_system(sys: SpinSystem) -> str:
    lines = ["[spins]"]
    lines += [f"{s.label} {s.channel} {float(s.larmor_offset_hz)!r}" for s in sys.spins]
    if sys.j_couplings:
        lines.append("[j]")
        for (i, k), v in sorted(sys.j_couplings.items()):
            lines.append(f"{sys.spins[i].label} {sys.spins[k].label} {float(v)!r}")
    if sys.dipolar:
        lines.append("[dipolar]")
        for (i, k), d in sorted(sys.dipolar.items()):
            lines.append(f"{sys.spins[i].label} {sys.spins[k].label} {float(d.b_rad_per_s)!r} {math.degrees(d.theta_rad)!r}")
    return "\n".join(lines) + "\n"
