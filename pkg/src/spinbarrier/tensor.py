"""Dense linear algebra on the small composite Hilbert spaces of the chain.

Operators, state vectors and density matrices are plain complex numpy
arrays. Site 0 is the leftmost (most significant) tensor factor. Qubit sites
have levels |0>, |1>; barrier sites have |0>, |1>, |T> in that order.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

MAX_DIM = 12
HERMITIAN_TOL = 1e-12


def _frozen(a):
    a = np.asarray(a, dtype=complex)
    a.setflags(write=False)
    return a


I2 = _frozen(np.eye(2))
SIGMA_X = _frozen([[0, 1], [1, 0]])
SIGMA_Y = _frozen([[0, -1j], [1j, 0]])
SIGMA_Z = _frozen([[1, 0], [0, -1]])

LEVEL_0, LEVEL_1, LEVEL_T = 0, 1, 2


@dataclass(frozen=True)
class SiteLayout:
    """Level counts per site, left to right."""

    site_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.site_dims)
        object.__setattr__(self, "site_dims", dims)
        if not 1 <= len(dims) <= 3:
            raise ValueError(f"chain must have 1 to 3 sites, got {len(dims)}")
        if any(d not in (2, 3) for d in dims):
            raise ValueError(f"site dimensions must be 2 or 3, got {dims}")

    @property
    def dim(self) -> int:
        return int(np.prod(self.site_dims))

    @property
    def n_sites(self) -> int:
        return len(self.site_dims)

    def check_site(self, site: int) -> int:
        if not isinstance(site, (int, np.integer)) or not 0 <= site < self.n_sites:
            raise IndexError(f"site {site!r} out of range for layout {self.site_dims}")
        return int(site)


def kron(a, b) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(ops: Sequence) -> np.ndarray:
    return reduce(kron, ops)


def lift_to_site(op, site_dim: int) -> np.ndarray:
    """Place a 2x2 spin operator on the {|0>, |1>} block of a site; |T> is annihilated."""
    op = np.asarray(op, dtype=complex)
    if op.shape == (site_dim, site_dim):
        return op
    if op.shape == (2, 2) and site_dim == 3:
        out = np.zeros((3, 3), dtype=complex)
        out[:2, :2] = op
        return out
    raise ValueError(f"operator of shape {op.shape} does not fit a {site_dim}-level site")


def embed(op, site: int, layout: SiteLayout) -> np.ndarray:
    """Operator acting as `op` on one site and as identity on all others."""
    site = layout.check_site(site)
    factors = [np.eye(d, dtype=complex) for d in layout.site_dims]
    factors[site] = lift_to_site(op, layout.site_dims[site])
    return kron_all(factors)


def transition(to_level: int, from_level: int, site_dim: int = 3) -> np.ndarray:
    """|to><from| on a single site."""
    out = np.zeros((site_dim, site_dim), dtype=complex)
    out[to_level, from_level] = 1.0
    return out


def basis_state(levels: Sequence[int], layout: SiteLayout) -> np.ndarray:
    """Product basis vector |l_0 l_1 ...>."""
    if len(levels) != layout.n_sites:
        raise ValueError(f"need {layout.n_sites} levels, got {len(levels)}")
    index = np.ravel_multi_index(tuple(levels), layout.site_dims)
    psi = np.zeros(layout.dim, dtype=complex)
    psi[index] = 1.0
    return psi


def product_state(site_states: Sequence) -> np.ndarray:
    return kron_all([np.asarray(s, dtype=complex) for s in site_states])


def ket(level: int, site_dim: int) -> np.ndarray:
    v = np.zeros(site_dim, dtype=complex)
    v[level] = 1.0
    return v


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def partial_trace(rho, keep_site: int, layout: SiteLayout) -> np.ndarray:
    """Reduced density matrix of a single site."""
    keep_site = layout.check_site(keep_site)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (layout.dim, layout.dim):
        raise ValueError(f"rho shape {rho.shape} does not match layout dim {layout.dim}")
    n = layout.n_sites
    t = rho.reshape(layout.site_dims * 2)
    # move the kept site's row/column axes to the front, then trace the rest pairwise
    row_axes = [keep_site] + [i for i in range(n) if i != keep_site]
    col_axes = [n + i for i in row_axes]
    t = np.transpose(t, row_axes + col_axes)
    d_keep = layout.site_dims[keep_site]
    d_rest = layout.dim // d_keep
    t = t.reshape(d_keep, d_rest, d_keep, d_rest)
    return np.einsum("ajbj->ab", t)


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.max(np.abs(a - a.conj().T), initial=0.0) < tol


def matrix_exp(h, t: float) -> np.ndarray:
    """Propagator exp(-i h t) of a Hermitian generator via eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise ValueError("matrix_exp requires a Hermitian generator")
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


def check_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-8) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > trace_tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real:.3g} != 1")
    if np.linalg.eigvalsh(rho).min() < -eig_tol:
        raise ValueError("density matrix has negative eigenvalues")
    return rho


def check_state(psi, tol: float = 1e-9) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise ValueError(f"state vector must be 1-D, got shape {psi.shape}")
    if abs(np.linalg.norm(psi) - 1) > tol:
        raise ValueError(f"state vector norm {np.linalg.norm(psi):.12g} != 1")
    return psi


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.trace(rho @ rho)))
