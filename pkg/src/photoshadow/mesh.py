"""Mach-Zehnder mesh model of the photonic processor.

A unit cell acting on channels ``(top, top+1)`` is

    S(theta, phi) = 1/2 [[1 - a,        -i (1 + a) e^{-i phi}],
                         [-i (1 + a),   -(1 - a) e^{-i phi}  ]],   a = e^{-i theta}

i.e. the bare interferometer ``S(theta, 0)`` preceded by the external phase
``e^{-i phi}`` on its second input.  A mesh applies its cells layer by layer
and then the diagonal of output phases, so the realized transfer matrix is
``diag(output_phases) @ T_last @ ... @ T_first``.

``decompose_unitary`` places d(d-1)/2 cells in the rectangular (Clements)
arrangement by nulling the lower triangle alternately from the right and the
left, then commuting the left-hand cells through the residual diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .haar import as_generator, standard_normal_pairs
from .matcore import DimensionError, as_matrix, validate_unitary

TWO_PI = 2.0 * np.pi


def wrap_phase(x: float) -> float:
    w = float(np.mod(x, TWO_PI))
    return 0.0 if w >= TWO_PI else w


def unit_cell_matrix(theta: float, phi: float) -> np.ndarray:
    a = np.exp(-1j * theta)
    e = np.exp(-1j * phi)
    return 0.5 * np.array([[1 - a, -1j * (1 + a) * e], [-1j * (1 + a), -(1 - a) * e]])


@dataclass(frozen=True)
class MZICell:
    theta: float
    phi: float
    layer: int
    top_channel: int

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_phase(self.theta))
        object.__setattr__(self, "phi", wrap_phase(self.phi))
        if self.top_channel < 0 or self.layer < 0:
            raise ValueError("layer and top_channel must be non-negative")

    def matrix(self) -> np.ndarray:
        return unit_cell_matrix(self.theta, self.phi)


@dataclass(frozen=True)
class MeshConfig:
    d: int
    cells: tuple[MZICell, ...] = ()
    output_phases: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("mesh dimension must be >= 1")
        object.__setattr__(self, "cells", tuple(self.cells))
        out = np.ones(self.d, dtype=complex) if self.output_phases is None else np.asarray(
            self.output_phases, dtype=complex).copy()
        if out.shape != (self.d,):
            raise DimensionError(f"need {self.d} output phases, got {out.shape}")
        if np.max(np.abs(np.abs(out) - 1.0)) > 1e-10:
            raise ValueError("output phases must have unit modulus")
        out.setflags(write=False)
        object.__setattr__(self, "output_phases", out)
        for c in self.cells:
            if c.top_channel + 1 >= self.d:
                raise ValueError(f"cell on channels ({c.top_channel}, {c.top_channel + 1}) exceeds d={self.d}")

    def ordered_cells(self) -> list[MZICell]:
        """Cells sorted by layer (stable), after checking each layer is overlap-free."""
        by_layer: dict[int, set[int]] = {}
        for c in self.cells:
            used = by_layer.setdefault(c.layer, set())
            if c.top_channel in used or c.top_channel + 1 in used:
                raise ValueError(f"overlapping cells in layer {c.layer} at channel {c.top_channel}")
            used.update((c.top_channel, c.top_channel + 1))
        return sorted(self.cells, key=lambda c: c.layer)

    @property
    def depth(self) -> int:
        return 1 + max((c.layer for c in self.cells), default=-1)


def _apply_left(u: np.ndarray, t: np.ndarray, m: int) -> None:
    u[m:m + 2, :] = t @ u[m:m + 2, :]


def _apply_right(u: np.ndarray, t: np.ndarray, m: int) -> None:
    u[:, m:m + 2] = u[:, m:m + 2] @ t


def compose_mesh(cfg: MeshConfig) -> np.ndarray:
    u = np.eye(cfg.d, dtype=complex)
    for c in cfg.ordered_cells():
        _apply_left(u, c.matrix(), c.top_channel)
    return cfg.output_phases[:, None] * u


def _null_from_right(x: complex, y: complex) -> tuple[float, float]:
    # row [x, y] @ S^H has a zero first entry
    theta = 2.0 * np.arctan2(abs(y), abs(x))
    phi = np.angle(x) - np.angle(y) if abs(x) > 0 and abs(y) > 0 else 0.0
    return theta, phi


def _null_from_left(x: complex, y: complex) -> tuple[float, float]:
    # S @ [x, y]^T has a zero second entry
    theta = 2.0 * np.arctan2(abs(x), abs(y))
    phi = np.angle(y) - np.angle(x) - np.pi if abs(x) > 0 and abs(y) > 0 else 0.0
    return theta, phi


def _assign_layers(seq: list[tuple[int, float, float]], d: int) -> list[MZICell]:
    """Earliest-layer scheduling; preserves the product since disjoint cells commute."""
    busy = [-1] * d
    cells = []
    for m, theta, phi in seq:
        layer = max(busy[m], busy[m + 1]) + 1
        busy[m] = busy[m + 1] = layer
        cells.append(MZICell(theta, phi, layer, m))
    return cells


def decompose_unitary(u, tol: float = 1e-10) -> MeshConfig:
    """Rectangular mesh phases realizing ``u`` (compose_mesh(result) ~ u).

    Raises:
        ValueError: non-unitary input or d < 2.
    """
    u = as_matrix(u)
    d = u.shape[0]
    if d < 2:
        raise ValueError("decomposition needs d >= 2")
    if not validate_unitary(u, tol):
        raise ValueError("decompose_unitary needs a unitary matrix")
    v = u.copy()
    right: list[tuple[int, float, float]] = []
    left: list[tuple[int, float, float]] = []
    for i in range(d - 1):
        if i % 2 == 0:
            for j in range(i + 1):
                r, m = d - 1 - j, i - j
                theta, phi = _null_from_right(v[r, m], v[r, m + 1])
                _apply_right(v, unit_cell_matrix(theta, phi).conj().T, m)
                right.append((m, theta, phi))
        else:
            for j in range(1, i + 2):
                m, col = d + j - i - 3, j - 1
                theta, phi = _null_from_left(v[m, col], v[m + 1, col])
                _apply_left(v, unit_cell_matrix(theta, phi), m)
                left.append((m, theta, phi))
    diag = np.diagonal(v).copy()
    # S(t, f)^H diag(d1, d2) = diag(g1, g2) S(t, f') with f' = arg d1 - arg d2,
    # g1 = -e^{i t} d1, g2 = -e^{i t} e^{i f} d1
    moved = []
    for m, theta, phi in reversed(left):
        d1, d2 = diag[m], diag[m + 1]
        k = -np.exp(1j * theta)
        diag[m], diag[m + 1] = k * d1, k * np.exp(1j * phi) * d1
        moved.append((m, theta, np.angle(d1) - np.angle(d2)))
    # u = diag . L'_1 ... L'_k . R_n ... R_1 ; light meets R_1 first, L'_1 last
    seq = right + moved
    diag = diag / np.abs(diag)
    return MeshConfig(d, tuple(_assign_layers(seq, d)), diag)


@dataclass(frozen=True)
class SubspaceEmbedding:
    sub_dim: int
    full_dim: int
    offset: int = 0

    def __post_init__(self):
        if self.sub_dim < 1 or self.offset < 0 or self.offset + self.sub_dim > self.full_dim:
            raise ValueError(f"invalid embedding {self}")

    @property
    def window(self) -> slice:
        return slice(self.offset, self.offset + self.sub_dim)


def embed_unitary(u_sub, emb: SubspaceEmbedding) -> np.ndarray:
    """Block-diagonal direct sum: ``u_sub`` on the window, identity elsewhere.

    Accepts a single matrix or a stack of shape (n, k, k).
    """
    u_sub = np.asarray(u_sub, dtype=complex)
    if u_sub.shape[-2:] != (emb.sub_dim, emb.sub_dim):
        raise DimensionError(f"sub-unitary has shape {u_sub.shape[-2:]}, embedding expects {emb.sub_dim}")
    out = np.broadcast_to(np.eye(emb.full_dim, dtype=complex), u_sub.shape[:-2] + (emb.full_dim,) * 2).copy()
    w = emb.window
    out[..., w, w] = u_sub
    return out


def perturb_mesh(cfg: MeshConfig, sigma: float, rng) -> MeshConfig:
    """Shift every theta and phi by an independent N(0, sigma^2) draw (wrapped)."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0 or not cfg.cells:
        return cfg
    z0, z1 = standard_normal_pairs(as_generator(rng), len(cfg.cells))
    cells = tuple(replace(c, theta=c.theta + sigma * a, phi=c.phi + sigma * b)
                  for c, a, b in zip(cfg.cells, z0, z1))
    return MeshConfig(cfg.d, cells, cfg.output_phases)
