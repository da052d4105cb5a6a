"""
Operator and product-operator algebra for spin-1/2 registers.

Conventions
-----------
- Spin 1 occupies the leftmost (most significant) tensor slot, so the basis
  state ``|b1 b2 ... bn>`` has index ``int("b1b2...bn", 2)``.
- Raising and lowering factors are ``sigma_pm = sigma_x +/- i sigma_y`` with no
  factor of one half, i.e. ``sigma_+ = [[0, 2], [0, 0]]``.
- Operators and density matrices are plain ``numpy.ndarray`` objects of shape
  ``(2**n, 2**n)`` with complex dtype.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Mapping

import numpy as np

MAX_SPINS = 8

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10

_MATRICES = {
    "1": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "+": np.array([[0, 2], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [2, 0]], dtype=complex),
}
_ALIASES = {"I": "1", "x": "X", "y": "Y", "z": "Z", "−": "-", "i": "1"}

PAULI_SYMBOLS = "1XYZ"
PM_SYMBOLS = "1Z+-"

# single-spin Pauli products: (a, b) -> (phase, symbol) with a*b = phase*symbol
_PAULI_PRODUCT = {}
for _a, _b in itertools.product(PAULI_SYMBOLS, repeat=2):
    _m = _MATRICES[_a] @ _MATRICES[_b]
    for _s in PAULI_SYMBOLS:
        _phase = np.trace(_MATRICES[_s].conj().T @ _m) / 2
        if abs(_phase) > 0.5:
            _PAULI_PRODUCT[_a, _b] = (complex(np.round(_phase)), _s)
            break
del _a, _b, _m, _s, _phase


def _symbol(s: str) -> str:
    s = _ALIASES.get(s, s)
    if s not in _MATRICES:
        raise ValueError(f"unknown product-operator factor {s!r}")
    return s


@dataclass(frozen=True)
class PauliString:
    """A tensor product of single-spin factors times a complex coefficient.

    Parameters
    ----------
    factors : str or sequence of str
        One symbol per spin from ``1 X Y Z + -`` (``I`` is accepted for the
        identity).
    coefficient : complex
        Overall scalar multiplying the product.
    """

    factors: tuple[str, ...]
    coefficient: complex = 1.0

    def __init__(self, factors, coefficient: complex = 1.0):
        object.__setattr__(self, "factors", tuple(_symbol(f) for f in factors))
        object.__setattr__(self, "coefficient", complex(coefficient))

    def __len__(self) -> int:
        return len(self.factors)

    def __str__(self) -> str:
        return "".join(self.factors)

    def matrix(self) -> np.ndarray:
        return pauli_matrix(self, len(self.factors))

    def __mul__(self, other):
        if isinstance(other, PauliString):
            return self.compose(other)
        return PauliString(self.factors, self.coefficient * other)

    def __rmul__(self, other):
        return PauliString(self.factors, self.coefficient * other)

    def compose(self, other: "PauliString") -> "PauliString":
        """Symbolic operator product ``self @ other`` for ``1 X Y Z`` strings."""
        if len(self) != len(other):
            raise ValueError("strings act on different spin counts")
        coeff = self.coefficient * other.coefficient
        out = []
        for a, b in zip(self.factors, other.factors):
            if a in "+-" or b in "+-":
                raise ValueError("symbolic products are defined for 1/X/Y/Z strings only")
            phase, s = _PAULI_PRODUCT[a, b]
            coeff *= phase
            out.append(s)
        return PauliString(out, coeff)

    def tensor(self, other: "PauliString") -> "PauliString":
        """Concatenate along the tensor axis (``self`` on the leading spins)."""
        return PauliString(self.factors + other.factors, self.coefficient * other.coefficient)


def _check_spin_count(n: int) -> None:
    if not 1 <= n <= MAX_SPINS:
        raise ValueError(f"spin count must be between 1 and {MAX_SPINS}, got {n}")


def n_spins(op: np.ndarray) -> int:
    """Spin count of a square ``2**n`` operator; raises for other shapes."""
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"operator must be square, got shape {op.shape}")
    dim = op.shape[0]
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise ValueError(f"operator dimension {dim} is not a power of two")
    _check_spin_count(n)
    return n


def pauli_matrix(ps, n: int | None = None) -> np.ndarray:
    """Dense matrix of a product operator.

    Examples
    --------
    >>> pauli_matrix(PauliString("Z1"), 2).real.diagonal()
    array([ 1.,  1., -1., -1.])
    """
    if not isinstance(ps, PauliString):
        ps = PauliString(ps)
    if n is None:
        n = len(ps)
    if len(ps) != n:
        raise ValueError(f"string has {len(ps)} factors but {n} spins were requested")
    _check_spin_count(n)
    return ps.coefficient * reduce(np.kron, (_MATRICES[f] for f in ps.factors))


def single_spin_operator(symbol: str, index: int, n: int) -> np.ndarray:
    """``symbol`` on spin ``index`` (0-based), identity elsewhere."""
    factors = ["1"] * n
    factors[index] = symbol
    return pauli_matrix(PauliString(factors), n)


def embed(op2: np.ndarray, index: int, n: int) -> np.ndarray:
    """Embed a 2x2 operator on spin ``index`` of an ``n``-spin register."""
    mats = [np.eye(2, dtype=complex)] * n
    mats[index] = np.asarray(op2, dtype=complex)
    return reduce(np.kron, mats)


# ---------------------------------------------------------------------------
# basis changes shared by the Pauli and raising/lowering expansions.
# A 2x2 block is flattened in (00, 01, 10, 11) order.

_PAULI_ANALYSIS = np.array([_MATRICES[s].conj().reshape(4) / 2 for s in PAULI_SYMBOLS])
_PAULI_SYNTHESIS = np.array([_MATRICES[s].reshape(4) for s in PAULI_SYMBOLS]).T
# dual basis of {1, Z, sigma_+, sigma_-}
_PM_SYNTHESIS = np.array([_MATRICES[s].reshape(4) for s in PM_SYMBOLS]).T
_PM_ANALYSIS = np.linalg.inv(_PM_SYNTHESIS)


def _interleave(op: np.ndarray, n: int) -> np.ndarray:
    t = np.asarray(op, dtype=complex).reshape([2] * (2 * n))
    order = [ax for k in range(n) for ax in (k, n + k)]
    return t.transpose(order).reshape([4] * n)


def _deinterleave(t: np.ndarray, n: int) -> np.ndarray:
    t = t.reshape([2] * (2 * n))
    order = [2 * k for k in range(n)] + [2 * k + 1 for k in range(n)]
    return t.transpose(order).reshape(2**n, 2**n)


def _per_spin(t: np.ndarray, mat: np.ndarray) -> np.ndarray:
    for axis in range(t.ndim):
        t = np.moveaxis(np.tensordot(mat, t, axes=([1], [axis])), 0, axis)
    return t


def pauli_coefficients(op: np.ndarray) -> np.ndarray:
    """Coefficients ``Tr[P^dag op] / 2**n`` as an array of shape ``(4,)*n``.

    Axis ``k`` indexes the factor on spin ``k`` in ``1 X Y Z`` order.
    """
    n = n_spins(op)
    return _per_spin(_interleave(op, n), _PAULI_ANALYSIS)


def from_pauli_coefficients(coeffs: np.ndarray) -> np.ndarray:
    n = coeffs.ndim
    return _deinterleave(_per_spin(np.asarray(coeffs, dtype=complex), _PAULI_SYNTHESIS), n)


def pm_coefficients(op: np.ndarray) -> np.ndarray:
    """Expansion over the ``{1, Z, sigma_+, sigma_-}`` product basis, shape ``(4,)*n``."""
    n = n_spins(op)
    return _per_spin(_interleave(op, n), _PM_ANALYSIS)


def from_pm_coefficients(coeffs: np.ndarray) -> np.ndarray:
    n = coeffs.ndim
    return _deinterleave(_per_spin(np.asarray(coeffs, dtype=complex), _PM_SYNTHESIS), n)


def expand_product_basis(op: np.ndarray, tol: float = 1e-14) -> dict[str, complex]:
    """Expand an operator over ``1 X Y Z`` product strings.

    Returns a mapping from the string (e.g. ``"ZX"``) to its coefficient
    ``Tr[P^dag op] / 2**n``; coefficients with magnitude at or below
    ``tol * max(1, max|c|)`` are omitted.

    Examples
    --------
    >>> cnot = np.array([[1,0,0,0],[0,1,0,0],[0,0,0,1],[0,0,1,0]])
    >>> {k: v.real for k, v in expand_product_basis(cnot).items()}
    {'11': 0.5, '1X': 0.5, 'Z1': 0.5, 'ZX': -0.5}
    """
    coeffs = pauli_coefficients(op)
    cutoff = tol * max(1.0, float(np.abs(coeffs).max(initial=0.0)))
    out = {}
    for idx in zip(*np.nonzero(np.abs(coeffs) > cutoff)):
        out["".join(PAULI_SYMBOLS[i] for i in idx)] = complex(coeffs[idx])
    return dict(sorted(out.items()))


def from_product_basis(terms: Mapping[str, complex], n: int | None = None) -> np.ndarray:
    """Re-sum a ``{string: coefficient}`` mapping into a dense matrix."""
    if n is None:
        if not terms:
            raise ValueError("spin count needed for an empty expansion")
        n = len(next(iter(terms)))
    _check_spin_count(n)
    out = np.zeros((2**n, 2**n), dtype=complex)
    for s, c in terms.items():
        out += pauli_matrix(PauliString(s, c), n)
    return out


def coherence_order(ps) -> int:
    """Net number of raising minus lowering factors.

    Only ``1 Z + -`` factors are allowed; rewrite X/Y factors as
    ``(sigma_+ +/- sigma_-)`` combinations first.
    """
    factors = ps.factors if isinstance(ps, PauliString) else PauliString(ps).factors
    if any(f in "XY" for f in factors):
        raise ValueError("coherence order needs factors from {1, Z, +, -}; convert X/Y first")
    return factors.count("+") - factors.count("-")


# ---------------------------------------------------------------------------
# checks and figures of merit


def is_hermitian(op: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    op = np.asarray(op)
    return bool(np.max(np.abs(op - op.conj().T), initial=0.0) <= tol * max(1.0, np.abs(op).max(initial=0.0)))


def is_unitary(op: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    op = np.asarray(op)
    return bool(np.max(np.abs(op.conj().T @ op - np.eye(op.shape[0]))) <= tol)


def check_density_matrix(rho: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity; returns ``rho`` as an array."""
    rho = np.asarray(rho, dtype=complex)
    n_spins(rho)
    if not is_hermitian(rho, tol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"density matrix trace is {np.trace(rho).real:.3g}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValueError("density matrix has negative eigenvalues")
    return rho


def traceless_part(op: np.ndarray) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    return op - np.trace(op) / op.shape[0] * np.eye(op.shape[0])


def gate_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """``|Tr[U^dag V]| / 2**n``; insensitive to a global phase."""
    u, v = np.asarray(u), np.asarray(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch {u.shape} vs {v.shape}")
    return float(min(1.0, abs(np.trace(u.conj().T @ v)) / u.shape[0]))


def state_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized overlap ``Tr[ab] / sqrt(Tr[a^2] Tr[b^2])`` clipped to ``[0, 1]``.

    Used to compare traceless parts of pseudo-pure states, where the overall
    intensity is irrelevant.
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    num = np.trace(a @ b).real
    den = np.sqrt(np.trace(a @ a).real * np.trace(b @ b).real)
    if den == 0:
        return 0.0
    return float(np.clip(num / den, 0.0, 1.0))


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    return float(np.trace(rho @ rho).real)


# ---------------------------------------------------------------------------
# standard states


def thermal_state(n: int, epsilon: float) -> np.ndarray:
    """High-temperature equilibrium ``I / 2**n + epsilon * sum_i sigma_z^i``."""
    _check_spin_count(n)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    dim = 2**n
    rho = np.eye(dim, dtype=complex) / dim
    for i in range(n):
        rho += epsilon * single_spin_operator("Z", i, n)
    return rho


def basis_projector(bits: str) -> np.ndarray:
    if not bits or set(bits) - {"0", "1"}:
        raise ValueError(f"basis label must be a non-empty 0/1 string, got {bits!r}")
    dim = 2 ** len(bits)
    p = np.zeros((dim, dim), dtype=complex)
    idx = int(bits, 2)
    p[idx, idx] = 1
    return p


def pseudo_pure_state(bits: str, epsilon: float) -> np.ndarray:
    """``(1 - epsilon) I / 2**n + epsilon |bits><bits|``."""
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    dim = 2 ** len(bits)
    return (1 - epsilon) * np.eye(dim, dtype=complex) / dim + epsilon * basis_projector(bits)


def cnot_matrix() -> np.ndarray:
    """Controlled-not with the first spin as control."""
    return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def embed_two_spin(op4: np.ndarray, i: int, j: int, n: int) -> np.ndarray:
    """Embed a 4x4 operator acting on spins ``(i, j)`` (in that tensor order)."""
    op4 = np.asarray(op4, dtype=complex).reshape(2, 2, 2, 2)
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - k)) & 1 for k in range(n)]
        for ri, rj in itertools.product((0, 1), repeat=2):
            amp = op4[ri, rj, bits[i], bits[j]]
            if amp == 0:
                continue
            rbits = list(bits)
            rbits[i], rbits[j] = ri, rj
            row = int("".join(map(str, rbits)), 2)
            out[row, col] += amp
    return out
