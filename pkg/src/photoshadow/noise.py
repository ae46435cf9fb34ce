"""Phenomenological device noise: a static coherent distortion and depolarization.

The realized measurement unitary is ``U @ u_c`` for a fixed ``u_c`` close to the
identity, and the state is additionally depolarized with strength ``p``:

    P(b_i = 1) = (1 - p) (U u_c rho u_c^H U^H)_ii + p / d

so an ideal Haar reconstruction converges to
``(1 - p) u_c rho u_c^H + (p/d) I`` instead of ``rho``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .haar import as_generator, standard_normal_pairs
from .matcore import DimensionError, as_matrix, as_unitary, purity

PROB_CLAMP_TOL = 1e-9


def first_row_epsilon(u_c: np.ndarray) -> float:
    """RMS magnitude of the off-diagonal entries in the first row of ``u_c``."""
    d = u_c.shape[0]
    if d < 2:
        return 0.0
    return float(np.sqrt(np.sum(np.abs(u_c[0, 1:]) ** 2) / (d - 1)))


@dataclass(frozen=True)
class NoiseModel:
    p: float
    u_c: np.ndarray
    epsilon: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"depolarization p must lie in [0, 1], got {self.p}")
        u = as_unitary(self.u_c)
        u.setflags(write=False)
        object.__setattr__(self, "u_c", u)
        eps = first_row_epsilon(u)
        if self.epsilon is not None and abs(self.epsilon - eps) > 1e-12:
            raise ValueError(f"stored epsilon {self.epsilon} disagrees with u_c ({eps})")
        object.__setattr__(self, "epsilon", eps)

    @property
    def d(self) -> int:
        return self.u_c.shape[0]

    @classmethod
    def depolarizing_only(cls, d: int, p: float) -> "NoiseModel":
        return cls(p, np.eye(d, dtype=complex))

    def with_p(self, p: float) -> "NoiseModel":
        return NoiseModel(p, self.u_c)


def apply_depolarizing(rho, p: float) -> np.ndarray:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarization p must lie in [0, 1], got {p}")
    rho = as_matrix(rho)
    d = rho.shape[0]
    return (1 - p) * rho + (p / d) * np.eye(d)


def distorted_state(rho, noise: NoiseModel) -> np.ndarray:
    """The state an ideal reconstruction converges to under ``noise``."""
    rho = as_matrix(rho)
    if rho.shape[0] != noise.d:
        raise DimensionError(f"state has d={rho.shape[0]}, noise model has d={noise.d}")
    u = noise.u_c
    return apply_depolarizing(u @ rho @ u.conj().T, noise.p)


def clamp_probabilities(p: np.ndarray, tol: float = PROB_CLAMP_TOL) -> np.ndarray:
    """Zero out rounding-level negatives and renormalize along the last axis.

    Raises:
        ValueError: if any entry is below ``-tol`` (a model bug, not rounding).
    """
    p = np.real(np.asarray(p))
    if np.any(p < -tol):
        raise ValueError(f"probability {p.min():.3g} below -{tol:g}")
    p = np.where(p < 0, 0.0, p)
    return p / p.sum(axis=-1, keepdims=True)


def noisy_probabilities(rho, u, noise: NoiseModel | None) -> np.ndarray:
    """Output distribution of the device for intended unitary ``u``.

    ``u`` may be a single matrix or a stack (n, d, d); the result has shape
    (d,) or (n, d) respectively.
    """
    rho = as_matrix(rho)
    u = np.asarray(u, dtype=complex)
    d = rho.shape[0]
    if u.shape[-2:] != (d, d):
        raise DimensionError(f"unitary shape {u.shape[-2:]} does not match state d={d}")
    if noise is not None:
        if noise.d != d:
            raise DimensionError(f"noise model d={noise.d} does not match state d={d}")
        rho = noise.u_c @ rho @ noise.u_c.conj().T
    probs = np.sum((u @ rho) * u.conj(), axis=-1).real
    if noise is not None and noise.p > 0:
        probs = (1 - noise.p) * probs + noise.p / d
    return clamp_probabilities(probs)


def _random_hermitian(gen: np.random.Generator, d: int) -> np.ndarray:
    re, im = standard_normal_pairs(gen, (d, d))
    off = np.triu((re + 1j * im) / np.sqrt(2.0), 1)
    return off + off.conj().T + np.diag(re.diagonal())


def sample_coherent_distortion(d: int, epsilon_target: float, rng, grid: int = 4000) -> NoiseModel:
    """Random static distortion ``u_c = exp(i alpha H)`` with a prescribed epsilon.

    ``H`` is Hermitian with unit-variance complex off-diagonals and N(0,1)
    diagonal.  ``alpha`` is the smallest scale on a grid over one phase period
    at which the first-row epsilon reaches the target, refined by bisection.
    The returned model has ``p = 0``.

    Raises:
        ValueError: if the target is outside ``[0, sqrt(1/(d-1))]`` or not
            reached along the sampled direction.
    """
    if d < 2:
        raise ValueError("coherent distortion needs d >= 2")
    if not 0.0 <= epsilon_target <= np.sqrt(1.0 / (d - 1)) + 1e-15:
        raise ValueError(f"epsilon target {epsilon_target} unreachable for d={d}")
    if epsilon_target == 0:
        return NoiseModel(0.0, np.eye(d, dtype=complex))
    h = _random_hermitian(as_generator(rng), d)
    lam, v = np.linalg.eigh(h)

    def u_of(alpha: float) -> np.ndarray:
        return (v * np.exp(1j * alpha * lam)) @ v.conj().T

    def eps_of(alpha: float) -> float:
        return first_row_epsilon(u_of(alpha))

    span = np.max(np.abs(lam))
    alphas = np.linspace(0.0, 2.0 * np.pi / span, grid)
    hi = None
    for a in alphas[1:]:
        if eps_of(a) >= epsilon_target:
            hi = a
            break
    if hi is None:
        raise ValueError(f"epsilon target {epsilon_target} not reached for this draw")
    lo = hi - alphas[1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if eps_of(mid) < epsilon_target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return NoiseModel(0.0, u_of(hi))


def coherent_error(psi_projector, u_c) -> float:
    """1 - |<psi|u_c|psi>|^2 for a pure state, cross-checked against the trace form.

    Raises:
        ValueError: if the state is not a rank-1 projector.
        ArithmeticError: if the two forms disagree beyond 1e-12.
    """
    rho = as_matrix(psi_projector)
    u_c = as_matrix(u_c)
    if rho.shape != u_c.shape:
        raise DimensionError("state and distortion dimensions differ")
    if abs(purity(rho) - 1.0) > 1e-10 or abs(np.trace(rho) - 1.0) > 1e-10:
        raise ValueError("coherent_error needs a pure state projector")
    vals, vecs = np.linalg.eigh((rho + rho.conj().T) / 2)
    psi = vecs[:, -1]
    overlap_form = 1.0 - abs(psi.conj() @ u_c @ psi) ** 2
    trace_form = purity(rho) - float(np.trace(u_c @ rho @ u_c.conj().T @ rho).real)
    if abs(overlap_form - trace_form) > 1e-12:
        raise ArithmeticError(f"coherent error forms disagree: {overlap_form} vs {trace_form}")
    return float(overlap_form)
