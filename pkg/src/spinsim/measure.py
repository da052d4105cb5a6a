"""
Weak ensemble measurement: FIDs, spectra, observable classes and tomography.

Sign convention
---------------
A sample is ``Tr[sum_j sigma_+^j rho(t)]``.  For one spin with offset ``f``
and ``rho = I/2 + eps X/2`` this is ``eps exp(+2 pi i f t)``, so a positive
offset gives a peak at positive frequency after :func:`spectrum`.
"""
from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.signal import find_peaks

from .core import PAULI_SYMBOLS, PauliString, from_pauli_coefficients, n_spins, pauli_matrix
from .engine import KiteModel, sample_signal
from .hamiltonian import SpinSystem, liquid_hamiltonian, local_rotations, rotation_2x2
from .pulseprog import Acquire, acquisition_segment


@dataclass(frozen=True)
class Fid:
    samples: np.ndarray
    dwell_s: float
    channel: str = ""

    def __post_init__(self):
        if len(self.samples) < 2:
            raise ValueError("an FID needs at least two samples")
        if self.dwell_s <= 0:
            raise ValueError("dwell time must be positive")

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dwell_s

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class Spectrum:
    freqs_hz: np.ndarray
    amplitudes: np.ndarray

    @property
    def resolution_hz(self) -> float:
        return float(self.freqs_hz[1] - self.freqs_hz[0])


def acquire(
    rho0: np.ndarray,
    sys: SpinSystem,
    H_int: np.ndarray,
    npoints: int,
    dwell_s: float,
    kite: KiteModel | None = None,
    decouple: Iterable[str] = (),
) -> Fid:
    """Record an FID from ``rho0`` under ``H_int``.

    The observable is ``sum sigma_+`` over the non-decoupled spins on the
    channel of the first of them.  Decoupled spins have every coupling and
    shift term removed from ``H_int`` during acquisition.
    """
    if dwell_s <= 0:
        raise ValueError("dwell time must be positive")
    seg = acquisition_segment(Acquire(int(npoints), float(dwell_s), tuple(decouple)), sys, H_int)
    samples, _ = sample_signal(np.asarray(rho0, dtype=complex), seg.hamiltonian, seg.observable, seg.npoints, seg.dwell_s, kite)
    return Fid(samples, seg.dwell_s, seg.channel)


def spectrum(fid: Fid, zerofill_to: int | None = None, line_broaden_hz: float = 0.0) -> Spectrum:
    """Fourier transform of an (optionally apodized and zero-filled) FID.

    Apodization multiplies by ``exp(-pi lb t)``, a Lorentzian of FWHM ``lb``.
    Amplitudes are scaled by the dwell time so that integrating a peak over
    frequency gives the same value whatever the zero filling.
    """
    s = np.asarray(fid.samples, dtype=complex)
    if line_broaden_hz:
        s = s * np.exp(-np.pi * line_broaden_hz * fid.times)
    size = max(len(s), zerofill_to or 0)
    amps = np.fft.fftshift(np.fft.fft(s, size)) * fid.dwell_s
    freqs = np.fft.fftshift(np.fft.fftfreq(size, fid.dwell_s))
    return Spectrum(freqs, amps)


def pick_peaks(spec: Spectrum, threshold: float = 0.05, min_separation_hz: float = 0.0) -> list[tuple[float, float]]:
    """Local maxima of ``|amplitude|`` above ``threshold`` times the largest one.

    Positions are refined by a parabola through the three samples at each
    maximum.  Returns ``(freq_hz, height)`` pairs sorted by frequency.
    """
    mag = np.abs(spec.amplitudes)
    top = mag.max(initial=0.0)
    if top == 0:
        return []
    distance = max(1, int(min_separation_hz / spec.resolution_hz)) if min_separation_hz else None
    idx, _ = find_peaks(mag, height=threshold * top, distance=distance)
    df = spec.resolution_hz
    out = []
    for i in idx:
        f = spec.freqs_hz[i]
        if 0 < i < len(mag) - 1:
            a, b, c = mag[i - 1], mag[i], mag[i + 1]
            denom = a - 2 * b + c
            if denom != 0:
                f = f + 0.5 * (a - c) / denom * df
        out.append((float(f), float(mag[i])))
    return out


def peak_integral(spec: Spectrum, center_hz: float, half_width_hz: float) -> complex:
    """Integral of the complex spectrum over ``center +/- half_width``."""
    sel = np.abs(spec.freqs_hz - center_hz) <= half_width_hz
    return complex(spec.amplitudes[sel].sum() * spec.resolution_hz)


def observable_class(ps) -> str:
    """``"direct"``, ``"indirect"`` or ``"invisible"`` for a product string.

    Direct strings are a single X or Y factor with identities elsewhere; they
    give signal straight away.  Indirect strings add Z factors on other spins
    and turn into direct ones under scalar-coupling evolution (assuming those
    couplings are nonzero).  Everything else, such as multiple-quantum terms
    like ``XX1``, does not reach the observable by free evolution.
    """
    s = str(ps) if isinstance(ps, PauliString) else ps
    s = PauliString(s).factors
    transverse = sum(ch in "XY" for ch in s)
    if transverse != 1 or set(s) - set("1XYZ"):
        return "invisible"
    return "direct" if "Z" not in s else "indirect"


# ---------------------------------------------------------------------------
# tomography

#: Readout pulses used by :func:`tomography`, one letter per spin:
#: ``1`` none, ``x`` a 90-degree x pulse, ``y`` a 90-degree y pulse.  Chosen
#: by :func:`greedy_readouts` for three weakly coupled spins and frozen here.
TOMOGRAPHY_READOUTS = ("111", "xxx", "11y", "xyx", "y11", "y1y", "11x")

_READOUT_AXES = {"1": None, "x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0)}


def readout_unitary(code: str) -> np.ndarray:
    rots = {k: rotation_2x2(_READOUT_AXES[ch], np.pi / 2) for k, ch in enumerate(code) if ch != "1"}
    return local_rotations(len(code), rots)


def single_flip_lines(n: int) -> list[tuple[int, int, int]]:
    """Density-matrix positions ``(r, c, spin)`` seen by ``sum sigma_+``.

    Row ``r`` has the spin down (bit 1), column ``c`` has it up and all other
    bits agree.  In the eigenbasis of a diagonal Hamiltonian each such entry
    is one line at ``(E_c - E_r) / 2 pi`` with amplitude ``2 rho_rc``.
    """
    out = []
    for j in range(n):
        bit = 1 << (n - 1 - j)
        for c in range(2**n):
            if not c & bit:
                out.append((c | bit, c, j))
    return out


def _line_model(code: str, n: int) -> np.ndarray:
    """Complex map from the traceless Pauli coefficients to the line amplitudes."""
    R = readout_unitary(code)
    lines = single_flip_lines(n)
    cols = []
    for idx in itertools.product(range(4), repeat=n):
        if not any(idx):
            continue
        P = pauli_matrix("".join(PAULI_SYMBOLS[i] for i in idx), n)
        Q = R @ P @ R.conj().T
        cols.append([2 * Q[r, c] for r, c, _ in lines])
    return np.array(cols).T


def _real_stack(M: np.ndarray) -> np.ndarray:
    return np.vstack([M.real, M.imag])


def greedy_readouts(n: int = 3, max_experiments: int = 16) -> tuple[str, ...]:
    """Grow a readout set from products of ``{1, 90x, 90y}`` until full rank.

    Each step adds the candidate that raises the rank of the stacked line
    model the most (ties go to fewer pulses, then alphabetical order).
    """
    target = 4**n - 1
    codes = sorted(("".join(p) for p in itertools.product("1xy", repeat=n)), key=lambda c: (n - c.count("1"), c))
    chosen: list[str] = []
    blocks = []
    rank = 0
    while rank < target:
        if len(chosen) >= max_experiments:
            raise RuntimeError(f"no full-rank readout set within {max_experiments} experiments")
        best = None
        for code in codes:
            if code in chosen:
                continue
            r = np.linalg.matrix_rank(np.vstack(blocks + [_real_stack(_line_model(code, n))]))
            if best is None or r > best[1]:
                best = (code, r)
        chosen.append(best[0])
        blocks.append(_real_stack(_line_model(best[0], n)))
        rank = best[1]
    return tuple(chosen)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SPINSIM_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class TomographyResult:
    rho: np.ndarray
    coefficients: dict[str, float]
    amplitudes: dict[str, np.ndarray]
    dwell_s: float
    npoints: int


def acquisition_plan(sys: SpinSystem, acquisition_s: float | None = None, H: np.ndarray | None = None):
    """Line frequencies (Hz), dwell and point count for resolving every line.

    Raises ``ValueError`` when two lines coincide or lie closer than the
    resolution ``1 / acquisition_s`` allows.
    """
    H = liquid_hamiltonian(sys) if H is None else H
    E = H.diagonal().real
    freqs = np.array([(E[c] - E[r]) / (2 * np.pi) for r, c, _ in single_flip_lines(sys.n)])
    gaps = np.abs(freqs[:, None] - freqs[None, :])[np.triu_indices(len(freqs), 1)]
    sep = float(gaps.min())
    scale = max(1.0, float(np.abs(freqs).max()))
    if sep < 1e-9 * scale:
        raise ValueError("spectral lines coincide; couplings are degenerate and tomography cannot separate them")
    T = 4.0 / sep if acquisition_s is None else float(acquisition_s)
    if T * sep < 1.0:
        raise ValueError(f"lines {sep:.3g} Hz apart are not resolved in a {T:.3g} s acquisition")
    dwell = 1.0 / (2.5 * scale)
    return freqs, dwell, int(np.ceil(T / dwell))


@lru_cache(maxsize=8)
def _line_projector(freqs: tuple[float, ...], dwell: float, npoints: int) -> np.ndarray:
    t = np.arange(npoints) * dwell
    return np.linalg.pinv(np.exp(2j * np.pi * np.outer(t, freqs)))


def tomography(
    prepare: np.ndarray | Callable[[], np.ndarray],
    sys: SpinSystem,
    readouts: Sequence[str] = TOMOGRAPHY_READOUTS,
    acquisition_s: float | None = None,
    trace: float = 1.0,
) -> TomographyResult:
    """Reconstruct a state from FIDs taken after a set of readout pulses.

    ``prepare`` is the state or a callable returning it (called once per
    experiment, as a fresh preparation would be).  Each FID is recorded under
    the liquid Hamiltonian of ``sys``; complex line amplitudes at the known
    transition frequencies are found by linear least squares and the 63
    traceless coefficients follow from the stacked linear model.  The
    identity part is fixed by ``trace``.
    """
    if sys.n != 3:
        raise ValueError("tomography is implemented for three spins")
    n = sys.n
    H = liquid_hamiltonian(sys)
    freqs, dwell, npoints = acquisition_plan(sys, acquisition_s, H)
    pinv = _line_projector(tuple(freqs), dwell, npoints)
    model = np.vstack([_real_stack(_line_model(code, n)) for code in readouts])
    if np.linalg.matrix_rank(model) < 4**n - 1:
        raise ValueError("readout set does not determine the state")
    obs = sum(pauli_matrix(PauliString("1" * k + "+" + "1" * (n - k - 1))) for k in range(n))

    def run(code: str) -> np.ndarray:
        rho = prepare() if callable(prepare) else prepare
        rho = np.asarray(rho, dtype=complex)
        if n_spins(rho) != n:
            raise ValueError("prepared state does not match the spin system")
        R = readout_unitary(code)
        sig, _ = sample_signal(R @ rho @ R.conj().T, H, obs, npoints, dwell)
        return pinv @ sig

    with ThreadPoolExecutor(max_workers=min(_threads(), len(readouts))) as pool:
        amplitudes = list(pool.map(run, readouts))
    data = np.concatenate([_real_stack(a[:, None]).ravel() for a in amplitudes])
    c, *_ = np.linalg.lstsq(model, data, rcond=None)
    coeffs = np.zeros((4,) * n)
    coeffs.reshape(-1)[1:] = c
    coeffs.reshape(-1)[0] = trace / 2**n
    rho = from_pauli_coefficients(coeffs)
    named = {"".join(PAULI_SYMBOLS[i] for i in idx): float(coeffs[idx]) for idx in itertools.product(range(4), repeat=n)}
    return TomographyResult(rho, named, dict(zip(readouts, amplitudes)), dwell, npoints)


# ---------------------------------------------------------------------------
# text formats


def write_fid(path, fid: Fid) -> None:
    lines = [f"# dwell_s={float(fid.dwell_s)!r}", f"# channel={fid.channel}", "# re,im"]
    lines += [f"{float(z.real)!r},{float(z.imag)!r}" for z in np.asarray(fid.samples, dtype=complex)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_fid(path) -> Fid:
    dwell, channel, rows = None, "", []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key == "dwell_s":
                dwell = float(value)
            elif key == "channel":
                channel = value
            continue
        try:
            re_, im_ = line.split(",")
            rows.append(complex(float(re_), float(im_)))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected 're,im', got {line!r}") from None
    if dwell is None:
        raise ValueError(f"{path}:1: missing '# dwell_s=' header")
    return Fid(np.array(rows), dwell, channel)


def write_spectrum(path, spec: Spectrum) -> None:
    lines = ["# freq_hz,re,im"] + [f"{float(f)!r},{float(a.real)!r},{float(a.imag)!r}" for f, a in zip(spec.freqs_hz, spec.amplitudes)]
    Path(path).write_text("\n".join(lines) + "\n")


def format_peaks(peaks: Sequence[tuple[float, float]]) -> str:
    return "".join(f"{f:.4f} {h:.6g}\n" for f, h in peaks)
