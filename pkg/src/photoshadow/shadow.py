"""Shadow-tomography engine: estimators, reconstruction and protocol simulation.

Single-snapshot estimators for a unitary ``U`` and output distribution ``p``:

* intensity: ``(d+1) sum_k p_k U^H |k><k| U - I`` (uses the whole distribution)
* click:     ``(d+1) U^H |b><b| U - I`` with one outcome ``b ~ p``

``reconstruct`` averages intensity estimators.  ``run_protocol`` simulates the
four measurement protocols on the 8-channel device and records the squared
Frobenius error of the running reconstruction on an M grid.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .haar import RngSeed, haar_chunks, sample_haar
from .matcore import DimensionError, as_matrix, basis_projector, frobenius_distance
from .mesh import SubspaceEmbedding, embed_unitary
from .noise import NoiseModel, clamp_probabilities, noisy_probabilities

D_FULL = 8
SUB_DIM = 4
CLICK_TAG = 1


def born_probabilities(rho, u) -> np.ndarray:
    """Diagonal of ``U rho U^H`` (works on a stack of unitaries too)."""
    return noisy_probabilities(rho, u, None)


@dataclass(frozen=True)
class Snapshot:
    unitary_id: int
    reported_unitary: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        u = as_matrix(self.reported_unitary)
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (u.shape[0],):
            raise DimensionError(f"snapshot {self.unitary_id}: {p.size} probabilities for d={u.shape[0]}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"snapshot {self.unitary_id}: probabilities must be >= 0 and sum to 1")
        object.__setattr__(self, "reported_unitary", u)
        object.__setattr__(self, "probabilities", p / p.sum())

    @property
    def d(self) -> int:
        return self.reported_unitary.shape[0]


def _weighted_projector_sum(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """sum_b U_b^H diag(w_b) U_b for stacks u (n, d, d) and w (n, d)."""
    d = u.shape[-1]
    x = (u.conj() * w[..., None]).reshape(-1, d)
    return x.T @ u.reshape(-1, d)


def snapshot_intensity_estimator(s: Snapshot) -> np.ndarray:
    d = s.d
    a = _weighted_projector_sum(s.reported_unitary[None], s.probabilities[None])
    return (d + 1) * a - np.eye(d)


def sample_outcomes(p: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Categorical draws by inverse CDF on one uniform per row of ``p``."""
    p = np.atleast_2d(p)
    cdf = np.cumsum(p, axis=-1)
    u = gen.random(p.shape[0])[:, None] * cdf[:, -1:]
    return np.minimum((cdf <= u).sum(axis=-1), p.shape[-1] - 1)


def snapshot_click_estimator(s: Snapshot, rng) -> np.ndarray:
    gen = rng if isinstance(rng, np.random.Generator) else RngSeed(*_seed_tuple(rng)).generator()
    b = int(sample_outcomes(s.probabilities, gen)[0])
    row = s.reported_unitary[b]
    return (s.d + 1) * np.outer(row.conj(), row) - np.eye(s.d)


def _seed_tuple(rng) -> tuple[int, int]:
    if isinstance(rng, RngSeed):
        return rng.seed, rng.stream
    return int(rng), 0


def reconstruct(snapshots: Sequence[Snapshot], target_d: int) -> np.ndarray:
    """Mean of the intensity estimators of ``snapshots``.

    Raises:
        ValueError: on an empty list.
        DimensionError: if any snapshot has a dimension other than ``target_d``.
    """
    if not snapshots:
        raise ValueError("cannot reconstruct from zero snapshots")
    for s in snapshots:
        if s.d != target_d:
            raise DimensionError(f"snapshot {s.unitary_id} has d={s.d}, expected {target_d}")
    u = np.stack([s.reported_unitary for s in snapshots])
    p = np.stack([s.probabilities for s in snapshots])
    return (target_d + 1) * _weighted_projector_sum(u, p) / len(snapshots) - np.eye(target_d)


def expected_mse(d: int, M: int, purity: float) -> float:
    """Ideal-Haar mean squared Frobenius error ``(d Tr(rho^2) - 1) / M``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    return (d * purity - 1.0) / M


class Protocol(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"

    @property
    def randomized(self) -> bool:
        return self in (Protocol.II, Protocol.IV)

    @property
    def sub_dim(self) -> int:
        return SUB_DIM if self in (Protocol.III, Protocol.IV) else D_FULL


@dataclass(frozen=True)
class ProtocolSpec:
    """Which protocol to run and the seeds behind its random unitaries.

    Replication ``r`` draws its Haar sequence from ``haar_seed.substream(r)``.
    The hidden randomizer of protocols II and IV is one Haar draw from
    ``hidden_randomizer_seed`` and never reaches the reconstruction.
    """

    kind: Protocol
    haar_seed: RngSeed = RngSeed(0, 0)
    hidden_randomizer_seed: RngSeed = RngSeed(0, 2**31)
    d_full: int = D_FULL

    def __post_init__(self):
        object.__setattr__(self, "kind", Protocol(self.kind))
        if self.d_full < self.kind.sub_dim:
            raise ValueError("device has fewer channels than the protocol needs")

    @property
    def d_sub(self) -> int:
        return self.kind.sub_dim

    @property
    def embedding(self) -> SubspaceEmbedding:
        return SubspaceEmbedding(self.d_sub, self.d_full, 0)

    def hidden_randomizer(self) -> np.ndarray:
        if not self.kind.randomized:
            return np.eye(self.d_sub, dtype=complex)
        return sample_haar(self.d_sub, self.hidden_randomizer_seed)

    def input_state(self) -> np.ndarray:
        """Light injected into channel 1, restricted to the active subspace."""
        return basis_projector(self.d_sub, 0)

    def target_state(self) -> np.ndarray:
        r = self.hidden_randomizer()
        return r @ self.input_state() @ r.conj().T


class Device:
    """Simulated processor for one protocol.

    The device is programmed with ``embed(U_haar @ U_rdm)``, realizes it with
    the static distortion ``u_c`` (acting on the active subspace), reads the
    active channels, normalizes over them and applies depolarization ``p``.
    """

    def __init__(self, spec: ProtocolSpec, noise: NoiseModel | None = None):
        if noise is not None and noise.d != spec.d_sub:
            raise DimensionError(f"noise model d={noise.d} but protocol {spec.kind.value} acts on d={spec.d_sub}")
        self.spec = spec
        self.noise = noise
        self._rdm = spec.hidden_randomizer()
        emb = spec.embedding
        state = spec.input_state()
        if noise is not None:
            state = noise.u_c @ state @ noise.u_c.conj().T
        full = np.zeros((spec.d_full, spec.d_full), dtype=complex)
        full[emb.window, emb.window] = state
        self._state_full = full

    def probabilities(self, u_haar: np.ndarray) -> np.ndarray:
        emb = self.spec.embedding
        u_meas = embed_unitary(u_haar @ self._rdm, emb)
        full = np.sum((u_meas @ self._state_full) * u_meas.conj(), axis=-1).real
        p = clamp_probabilities(full[..., emb.window])
        if self.noise is not None and self.noise.p > 0:
            p = (1 - self.noise.p) * p + self.noise.p / emb.sub_dim
        return p


@dataclass(frozen=True)
class ReconstructionResult:
    estimate: np.ndarray
    M: int
    target: np.ndarray
    frobenius_error: float = field(default=None)

    def __post_init__(self):
        err = frobenius_distance(self.estimate, self.target)
        if self.frobenius_error is not None and abs(self.frobenius_error - err) > 1e-12:
            raise ValueError("stored frobenius_error disagrees with estimate and target")
        object.__setattr__(self, "frobenius_error", err)


@dataclass(frozen=True)
class ScalingSeries:
    d: int
    M: np.ndarray
    mse_mean: np.ndarray
    mse_stderr: np.ndarray
    replications: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=float) for a in (self.M, self.mse_mean, self.mse_stderr, self.replications)]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
            raise DimensionError("series columns must be 1-D and of equal length")
        if np.any(np.diff(arrs[0]) <= 0):
            raise ValueError("M must be strictly increasing")
        if np.any(arrs[3] < 1) or np.any(arrs[1] < 0) or np.any(arrs[2] < 0):
            raise ValueError("replications must be >= 1 and mse values >= 0")
        for name, a in zip(("M", "mse_mean", "mse_stderr", "replications"), arrs):
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return self.M.size

    @property
    def frobenius_norm(self) -> np.ndarray:
        return np.sqrt(self.mse_mean)


def default_grid(m_min: int = 10, m_max: int = 100_000, points: int = 20) -> list[int]:
    """Log-spaced integer grid, duplicates removed."""
    if m_min < 1 or m_max < m_min:
        raise ValueError("invalid grid bounds")
    g = np.unique(np.rint(np.logspace(np.log10(m_min), np.log10(m_max), points)).astype(int))
    return [int(x) for x in g]


def _check_grid(m_grid: Sequence[int], M: int) -> list[int]:
    grid = sorted({int(m) for m in m_grid})
    if not grid or grid[0] < 1 or grid[-1] > M or len(grid) != len(list(m_grid)):
        raise ValueError(f"M grid must be distinct values within [1, {M}]")
    return grid


@dataclass
class SimulationRun:
    """Raw replication output: per-replication squared errors and final estimates."""

    spec: ProtocolSpec
    grid: list[int]
    M: int
    target: np.ndarray
    sq_errors: np.ndarray        # (replications, len(grid))
    estimates: np.ndarray        # (replications, d, d) at M

    def series(self) -> ScalingSeries:
        r = self.sq_errors.shape[0]
        mean = self.sq_errors.mean(axis=0)
        err = self.sq_errors.std(axis=0, ddof=1) / np.sqrt(r) if r > 1 else np.zeros_like(mean)
        return ScalingSeries(self.target.shape[0], np.array(self.grid), mean, err, np.full(len(self.grid), r))

    def result(self, replication: int = 0) -> ReconstructionResult:
        return ReconstructionResult(self.estimates[replication], self.M, self.target)


def _one_replication(args) -> tuple[np.ndarray, np.ndarray]:
    spec, noise, M, grid, rep, estimator, chunk = args
    device = Device(spec, noise)
    target = spec.target_state()
    d = spec.d_sub
    seed = spec.haar_seed.substream(rep)
    click_gen = None
    if estimator == "click":
        ss = np.random.SeedSequence(seed.seed, spawn_key=(seed.stream, CLICK_TAG))
        click_gen = np.random.Generator(np.random.Philox(ss))
    acc = np.zeros((d, d), dtype=complex)
    errs = np.empty(len(grid))
    stops = list(grid) + ([M] if grid[-1] != M else [])
    done, gi = 0, 0
    eye = np.eye(d)
    for u in haar_chunks(d, M, seed, chunk):
        p = device.probabilities(u)
        if click_gen is not None:
            b = sample_outcomes(p, click_gen)
            p = np.zeros_like(p)
            p[np.arange(len(b)), b] = 1.0
        start = 0
        while start < len(u):
            stop = min(len(u), start + stops[gi] - done) if gi < len(stops) else len(u)
            acc += _weighted_projector_sum(u[start:stop], p[start:stop])
            done += stop - start
            start = stop
            if gi < len(stops) and done == stops[gi]:
                if gi < len(grid):
                    rec = (d + 1) * acc / done - eye
                    errs[gi] = np.sum(np.abs(rec - target) ** 2)
                gi += 1
    final = (d + 1) * acc / M - eye
    return errs, (final + final.conj().T) / 2


def simulate_replications(spec: ProtocolSpec, M: int, noise: NoiseModel | None = None,
                          m_grid: Sequence[int] | None = None, replications: int = 20,
                          estimator: str = "intensity", workers: int = 1,
                          chunk: int = 8192) -> SimulationRun:
    """Run independent replications of a protocol; output independent of ``workers``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if replications < 1:
        raise ValueError("need at least one replication")
    if estimator not in ("intensity", "click"):
        raise ValueError(f"unknown estimator {estimator!r}")
    if m_grid is None:
        m_grid = default_grid(min(10, M), M)
    grid = _check_grid(m_grid, M)
    jobs = [(spec, noise, M, grid, r, estimator, chunk) for r in range(replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_one_replication, jobs))
    else:
        out = [_one_replication(j) for j in jobs]
    return SimulationRun(spec, grid, M, spec.target_state(),
                         np.array([o[0] for o in out]), np.array([o[1] for o in out]))


def run_protocol(spec: ProtocolSpec, M: int, noise: NoiseModel | None = None,
                 m_grid: Sequence[int] | None = None, replications: int = 20,
                 workers: int = 1) -> tuple[ReconstructionResult, ScalingSeries]:
    """Simulate a protocol; returns the replication-0 reconstruction at ``M`` and the series."""
    run = simulate_replications(spec, M, noise, m_grid, replications, workers=workers)
    return run.result(0), run.series()


@dataclass(frozen=True)
class VoltageRecord:
    run_id: int
    unitary_id: int
    voltages: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.voltages, dtype=float)
        if v.ndim != 1 or np.any(~np.isfinite(v)) or np.any(v < 0):
            raise ValueError(f"run {self.run_id}, unitary {self.unitary_id}: voltages must be finite and >= 0")
        object.__setattr__(self, "voltages", v)


def normalize_voltages(rec: VoltageRecord, emb: SubspaceEmbedding | None = None) -> np.ndarray:
    """Photodiode voltages to probabilities over the active channels.

    Raises:
        ValueError: if every voltage in the active window is zero.
    """
    v = rec.voltages
    if emb is not None:
        if emb.full_dim != v.size:
            raise DimensionError(f"embedding expects {emb.full_dim} channels, record has {v.size}")
        v = v[emb.window]
    total = v.sum()
    if total <= 0:
        raise ValueError(f"run {rec.run_id}, unitary {rec.unitary_id}: no light in the active channels")
    return v / total


def snapshots_from_voltages(records: Sequence[VoltageRecord], unitaries: Sequence[np.ndarray],
                            kind: Protocol | str) -> list[Snapshot]:
    """Pair voltage rows with their reported unitaries.

    ``unitaries[k]`` is the matrix handed to reconstruction for ``unitary_id ==
    k``: 8x8 for protocols I/II, the 4x4 Haar block for III/IV.  Voltages of
    III/IV are normalized over the first four channels only.

    Raises:
        KeyError: a voltage row references a unitary id with no matrix.
    """
    kind = Protocol(kind)
    emb = SubspaceEmbedding(kind.sub_dim, D_FULL, 0) if kind.sub_dim != D_FULL else None
    out = []
    for rec in records:
        if not 0 <= rec.unitary_id < len(unitaries):
            raise KeyError(f"no unitary for unitary_id {rec.unitary_id} (run {rec.run_id})")
        u = as_matrix(unitaries[rec.unitary_id])
        if u.shape[0] != kind.sub_dim:
            raise DimensionError(f"unitary {rec.unitary_id} is {u.shape[0]}x{u.shape[0]}, "
                                 f"protocol {kind.value} needs {kind.sub_dim}x{kind.sub_dim}")
        out.append(Snapshot(rec.unitary_id, u, normalize_voltages(rec, emb)))
    return out
