"""Dense Pauli algebra and Kronecker embeddings.

All operators are plain complex128 numpy arrays. The raising/lowering
operators follow the factor-2 convention sigma_pm = sigma_x +- i sigma_y,
so sigma_plus @ sigma_minus = 2*(1 + sigma_z) and a fully excited spin
decays at rate 4*gamma.
"""

from __future__ import annotations

import numpy as np

# dense feasibility cap for 2^n state spaces
MAX_SITES = 14

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_ID = np.eye(2, dtype=complex)

_PAULI = {
    "x": _SX,
    "y": _SY,
    "z": _SZ,
    "plus": _SX + 1j * _SY,
    "minus": _SX - 1j * _SY,
    "identity": _ID,
}


def pauli(label: str) -> np.ndarray:
    """Return the 2x2 single-site operator for `label`.

    Labels: x, y, z, plus, minus, identity.
    """
    try:
        return _PAULI[label].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli label {label!r}") from None


def embed(label: str, site: int, n_sites: int) -> np.ndarray:
    """Embed a single-site operator into an n_sites chain: 1 x ... x op x ... x 1.

    Site 0 is the leftmost tensor factor.
    """
    if not 1 <= n_sites <= MAX_SITES:
        raise ValueError(f"n_sites must be in [1, {MAX_SITES}], got {n_sites}")
    if not 0 <= site < n_sites:
        raise ValueError(f"site {site} out of range for {n_sites} sites")
    op = pauli(label)
    out = np.ones((1, 1), dtype=complex)
    for k in range(n_sites):
        out = np.kron(out, op if k == site else _ID)
    return out


def site_ops(label: str, n_sites: int) -> list[np.ndarray]:
    """embed(label, k, n_sites) for every site k."""
    return [embed(label, k, n_sites) for k in range(n_sites)]


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_dims(a, b)
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_dims(a, b)
    return a @ b + b @ a


def frobenius_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def is_hermitian(a: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(a - a.conj().T)) < tol)


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
