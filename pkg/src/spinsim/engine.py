"""
Exact propagation of piecewise-constant Hamiltonians and non-unitary channels.

Gradient pulses are handled by following an ensemble of sample slices at
equally spaced positions ``z = j / M`` (in units of the sample length); a
gradient of relative area ``a`` rotates spin ``k`` about z by
``2 pi a w_k z`` where ``w_k`` is its relative gyromagnetic ratio.  Results are
slice averages, which makes dephasing by integer-area gradients exact once
``M`` exceeds the largest net phase winding.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .core import (
    PM_SYMBOLS,
    from_pm_coefficients,
    is_hermitian,
    n_spins,
    pm_coefficients,
)
from .hamiltonian import GradientSpec, SpinSystem
from .pulseprog import (
    AcquisitionSegment,
    CrusherSegment,
    GradientSegment,
    UnitarySegment,
)


def propagator(H: np.ndarray, t_s: float) -> np.ndarray:
    """``exp(-i H t)`` via Hermitian eigendecomposition.

    Examples
    --------
    >>> np.allclose(propagator(np.zeros((2, 2)), 1.0), np.eye(2))
    True
    """
    H = np.asarray(H, dtype=complex)
    if not is_hermitian(H):
        raise ValueError("propagator needs a Hermitian Hamiltonian")
    if t_s == 0 or not H.any():
        return np.eye(H.shape[0], dtype=complex)
    if np.count_nonzero(H - np.diag(H.diagonal())) == 0:
        return np.diag(np.exp(-1j * H.diagonal().real * t_s))
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * t_s)) @ V.conj().T


# ---------------------------------------------------------------------------
# coherence-order bookkeeping in the {1, Z, +, -} product basis

_ORDER = np.array([0, 0, 1, -1])


def coherence_weights(n: int, weights: Sequence[float] | None = None) -> np.ndarray:
    """Array of shape ``(4,)*n`` holding ``sum_k w_k m_k`` for every pm string."""
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    grid = np.zeros([4] * n)
    for k in range(n):
        shape = [1] * n
        shape[k] = 4
        grid = grid + w[k] * _ORDER.reshape(shape)
    return grid


def _spin_weights(sys: SpinSystem | None, n: int) -> np.ndarray | None:
    if sys is None:
        return None
    if sys.n != n:
        raise ValueError(f"spin system has {sys.n} spins, state has {n}")
    return np.array([sys.gamma(k) for k in range(n)])


def apply_crusher(
    rho: np.ndarray,
    mode="ideal",
    sys: SpinSystem | None = None,
    gammas: Sequence[float] | None = None,
) -> np.ndarray:
    """Dephase a state by a crusher gradient.

    ``rho`` is expanded over ``{1, Z, sigma_+, sigma_-}`` strings and each term
    is scaled by ``a(m)`` where ``m`` is its coherence order, weighted by the
    spins' gyromagnetic ratios when ``sys`` is given.  ``mode="ideal"`` keeps
    only ``m = 0``; a :class:`GradientSpec` gives the diffusion attenuation
    ``exp(-(g delta m_gamma)^2 D tau)`` and needs the ratios from ``sys`` (or
    ``gammas`` in rad/s/T).
    """
    rho = np.asarray(rho, dtype=complex)
    n = n_spins(rho)
    coeffs = pm_coefficients(rho)
    if gammas is None:
        gammas = _spin_weights(sys, n)
    elif len(gammas) != n:
        raise ValueError(f"{len(gammas)} gyromagnetic ratios for {n} spins")
    if isinstance(mode, str):
        if mode != "ideal":
            raise ValueError(f"unknown crusher mode {mode!r}")
        rel = None if gammas is None else np.asarray(gammas) / np.abs(gammas).max()
        factor = (np.abs(coherence_weights(n, rel)) < 1e-9).astype(float)
    elif isinstance(mode, GradientSpec):
        if gammas is None:
            raise ValueError("an attenuating crusher needs the spin system for gyromagnetic ratios")
        k = coherence_weights(n, gammas) * mode.strength_t_per_m * mode.duration_s
        factor = np.exp(-(k**2) * mode.diffusion_coeff_m2_per_s * mode.diffusion_delay_s)
    else:
        raise TypeError(f"crusher mode must be 'ideal' or a GradientSpec, got {mode!r}")
    return from_pm_coefficients(coeffs * factor)


# ---------------------------------------------------------------------------
# Redfield kite


def _pm_strings(n: int):
    return ("".join(p) for p in itertools.product(PM_SYMBOLS, repeat=n))


def kite_group(pm_string: str) -> str:
    """Symmetry group label of a ``1 Z + -`` string, e.g. ``"+Z-"`` -> ``"±∓Z"``.

    Groups collect strings that relax at the same rate when every spin sees
    the same fluctuating field: the label lists the majority transverse
    sign as ``±``, the minority as ``∓``, then the ``Z`` and ``1`` factors.
    """
    plus, minus = pm_string.count("+"), pm_string.count("-")
    z = pm_string.count("Z")
    ones = len(pm_string) - plus - minus - z
    if plus + minus + z + ones != len(pm_string) or set(pm_string) - set(PM_SYMBOLS):
        raise ValueError(f"not a 1/Z/+/- string: {pm_string!r}")
    hi, lo = max(plus, minus), min(plus, minus)
    return "±" * hi + "∓" * lo + "Z" * z + "1" * ones


def kite_groups(n: int) -> dict[str, int]:
    """Multiplicity (number of strings) of every symmetry group."""
    counts: dict[str, int] = {}
    for s in _pm_strings(n):
        g = kite_group(s)
        counts[g] = counts.get(g, 0) + 1
    return counts


def kite_mask(n: int) -> set[tuple[str, str]]:
    """Nonzero positions of the relaxation superoperator without cross-correlation.

    Longitudinal strings (only ``1`` and ``Z`` factors) all relax into each
    other; every string carrying a transverse factor relaxes only into
    itself.  For three spins this gives 64 + 56 = 120 positions.
    """
    if n < 1:
        raise ValueError("spin count must be positive")
    strings = list(_pm_strings(n))
    longitudinal = [s for s in strings if set(s) <= {"1", "Z"}]
    mask = {(r, c) for r in longitudinal for c in longitudinal}
    mask |= {(s, s) for s in strings if s not in longitudinal}
    return mask


@dataclass(frozen=True)
class KiteModel:
    """Diagonal relaxation: every pm product term decays at its group's rate (1/s).

    Groups missing from ``rates`` do not decay.
    """

    rates: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for g, r in self.rates.items():
            if r < 0:
                raise ValueError(f"negative rate for group {g!r}")
            if set(g) <= {"1"} and r != 0:
                raise ValueError("the identity group cannot relax")

    @classmethod
    def uniform(cls, rate: float, n: int) -> "KiteModel":
        return cls({g: (0.0 if set(g) <= {"1"} else rate) for g in kite_groups(n)})

    @classmethod
    def t1_t2(cls, t1: float, t2: float, n: int) -> "KiteModel":
        """Rates from single-spin T1 and T2, additive over the factors of each group."""
        rates = {}
        for g in kite_groups(n):
            transverse = g.count("±") + g.count("∓")
            rates[g] = g.count("Z") / t1 + transverse / t2
        return cls(rates)

    def rate_grid(self, n: int) -> np.ndarray:
        return _rate_grid(n, tuple(sorted(self.rates.items())))

    def decay(self, rho: np.ndarray, t_s: float) -> np.ndarray:
        if t_s == 0 or not self.rates:
            return rho
        n = n_spins(rho)
        return from_pm_coefficients(pm_coefficients(rho) * np.exp(-self.rate_grid(n) * t_s))


@lru_cache(maxsize=32)
def _rate_grid(n: int, rates: tuple[tuple[str, float], ...]) -> np.ndarray:
    table = dict(rates)
    grid = np.array([table.get(kite_group(s), 0.0) for s in _pm_strings(n)])
    return grid.reshape([4] * n)


# ---------------------------------------------------------------------------
# evolution


def default_slices(segs, n: int) -> int:
    winding = sum(abs(s.area) for s in segs if isinstance(s, GradientSegment))
    return max(64, int(math.ceil(n * winding)) + 1)


def _gradient_unitary(seg: GradientSegment, z: float) -> np.ndarray:
    n = len(seg.weights)
    zdiag = np.zeros(2**n)
    for k, w in enumerate(seg.weights):
        bit = (np.arange(2**n) >> (n - 1 - k)) & 1
        zdiag += w * (1 - 2 * bit)
    angle = 2 * math.pi * seg.area * z
    if seg.duration_s == 0 or not seg.hamiltonian.any():
        kick = np.diag(np.exp(-1j * angle * zdiag / 2))
        return kick @ propagator(seg.hamiltonian, seg.duration_s)
    H = seg.hamiltonian + np.diag(angle / seg.duration_s * zdiag / 2)
    return propagator(H, seg.duration_s)


def _check(rho: np.ndarray, trace0: complex) -> None:
    if abs(np.trace(rho) - trace0) > 1e-10 * max(1.0, abs(trace0)):
        raise AssertionError("trace not preserved")
    if not is_hermitian(rho, 1e-10):
        raise AssertionError("state lost Hermiticity")


def _superoperator(step, dim: int) -> np.ndarray:
    cols = []
    for k in range(dim * dim):
        e = np.zeros(dim * dim, dtype=complex)
        e[k] = 1
        cols.append(step(e.reshape(dim, dim)).reshape(-1))
    return np.array(cols).T


def sample_signal(
    rho: np.ndarray,
    H: np.ndarray,
    observable: np.ndarray,
    npoints: int,
    dwell_s: float,
    kite: KiteModel | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Samples ``Tr[O rho(k dwell)]`` and the state after ``npoints`` dwells."""
    if dwell_s <= 0:
        raise ValueError("dwell time must be positive")
    t = np.arange(npoints) * dwell_s
    dim = rho.shape[0]
    if kite is None or not any(kite.rates.values()):
        w, V = np.linalg.eigh(H)
        r = V.conj().T @ rho @ V
        o = V.conj().T @ observable @ V
        amp = o.T * r  # amp[r, c] = O[c, r] rho[r, c]
        freq = w[None, :] - w[:, None]  # omega_c - omega_r
        keep = np.abs(amp) > 1e-300
        signal = np.exp(1j * np.outer(t, freq[keep])) @ amp[keep]
        U = propagator(H, npoints * dwell_s)
        return signal, U @ rho @ U.conj().T
    U = propagator(H, dwell_s)
    step = lambda m: kite.decay(U @ m @ U.conj().T, dwell_s)  # noqa: E731
    signal = np.empty(npoints, dtype=complex)
    if dim <= 32:
        S = _superoperator(step, dim)
        vec = rho.reshape(-1).astype(complex)
        obs = observable.T.reshape(-1)  # Tr[O rho] = sum O[c, r] rho[r, c]
        for k in range(npoints):
            signal[k] = obs @ vec
            vec = S @ vec
        return signal, vec.reshape(dim, dim)
    for k in range(npoints):
        signal[k] = np.trace(observable @ rho)
        rho = step(rho)
    return signal, rho


@dataclass
class SimulationResult:
    state: np.ndarray
    signals: list[np.ndarray]
    acquisitions: list[AcquisitionSegment]
    trajectory: list[np.ndarray] | None = None


def _run_single(rho, segs, kite, z, record, keep_trajectory):
    signals, traj = [], [] if keep_trajectory else None
    trace0 = np.trace(rho)
    for seg in segs:
        if isinstance(seg, UnitarySegment):
            rho = seg.U @ rho @ seg.U.conj().T
            if kite is not None:
                rho = kite.decay(rho, seg.duration_s)
        elif isinstance(seg, GradientSegment):
            U = _gradient_unitary(seg, z)
            rho = U @ rho @ U.conj().T
            if kite is not None:
                rho = kite.decay(rho, seg.duration_s)
        elif isinstance(seg, CrusherSegment):
            rho = apply_crusher(rho, "ideal" if seg.grad is None else seg.grad, gammas=seg.gammas)
        elif isinstance(seg, AcquisitionSegment):
            sig, rho = sample_signal(rho, seg.hamiltonian, seg.observable, seg.npoints, seg.dwell_s, kite)
            if record:
                signals.append(sig)
        else:
            raise TypeError(f"unknown segment {seg!r}")
        if __debug__:
            _check(rho, trace0)
        if keep_trajectory:
            traj.append(rho)
    return rho, signals, traj


def simulate(
    rho: np.ndarray,
    segs,
    kite: KiteModel | None = None,
    trajectory: bool = False,
    slices: int | None = None,
) -> SimulationResult:
    """Run a segment list, recording every acquisition.

    With gradient segments present the run is repeated over ``slices``
    positions (default :func:`default_slices`) and all outputs are averaged.
    """
    rho = np.asarray(rho, dtype=complex)
    n = n_spins(rho)
    segs = tuple(segs)
    for seg in segs:
        U = getattr(seg, "U", None)
        if U is not None and U.shape != rho.shape:
            raise ValueError(f"segment dimension {U.shape} does not match state {rho.shape}")
    acqs = [s for s in segs if isinstance(s, AcquisitionSegment)]
    if not any(isinstance(s, GradientSegment) for s in segs):
        state, signals, traj = _run_single(rho, segs, kite, 0.0, True, trajectory)
        return SimulationResult(state, signals, acqs, traj)
    m = slices or default_slices(segs, n)
    state = np.zeros_like(rho)
    signals = None
    traj = None
    for j in range(m):
        s, sig, tr = _run_single(rho, segs, kite, j / m, True, trajectory)
        state += s / m
        signals = [x / m for x in sig] if signals is None else [a + x / m for a, x in zip(signals, sig)]
        if trajectory:
            traj = [x / m for x in tr] if traj is None else [a + x / m for a, x in zip(traj, tr)]
    return SimulationResult(state, signals, acqs, traj)


def evolve(rho: np.ndarray, segs, kite: KiteModel | None = None, trajectory: bool = False, slices: int | None = None):
    """Evolve a density matrix through compiled segments.

    Unitary segments act as ``U rho U^dag`` followed by kite decay over the
    segment duration.  Returns the final state, or ``(state, trajectory)``
    with the state after every segment when ``trajectory`` is set.
    """
    res = simulate(rho, segs, kite, trajectory, slices)
    return (res.state, res.trajectory) if trajectory else res.state
