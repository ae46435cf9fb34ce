"""Extraction of device parameters from reconstruction data.

Error model for a pure input state, M snapshots, depolarization ``p`` and
first-row distortion magnitude ``epsilon``:

    mse(M) = (1-p)^2 (d-1) / M  +  p^2 (1 - 1/d) + 2 (1-p) (d-1) epsilon^2
             \\___ statistical ___/   \\________ systematic floor ________/

so ``M * mse`` is linear in ``M`` with slope equal to the floor.

``p`` is estimated from the leading eigenvalue as
``(lambda_1 - D_1) / (lambda_1 - 1/d)``; for a pure target this is
``(1 - D_1) d/(d-1)``.  (The pure-state shortcut is sometimes quoted with the
factor inverted, ``(d-1)/d``; that form does not follow from the general one.)
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .haar import RngSeed
from .matcore import as_matrix, frobenius_distance, purity, spectral_decompose
from .noise import NoiseModel, distorted_state, sample_coherent_distortion
from .shadow import Protocol, ProtocolSpec, ScalingSeries, simulate_replications


class ModelInconsistencyError(ArithmeticError):
    """The data cannot be explained by the depolarizing + distortion model."""


class NoHorizonError(ValueError):
    """Zero systematic floor: the error keeps decreasing as 1/M."""


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    r_squared: float


@dataclass
class AnalysisReport:
    p_hat: float
    epsilon_hat: float
    fit: LinearFit
    floor: float
    m_crit: float | None
    theory_curve: list[tuple[int, float]] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["theory_curve"] = [{"M": int(m), "predicted_mse": float(v)} for m, v in self.theory_curve]
        return d


def estimate_p(d1: float, lambda1: float, d: int) -> float:
    """Depolarization from the leading eigenvalue of the reconstruction.

    Args:
        d1: leading eigenvalue of the reconstructed state.
        lambda1: leading eigenvalue of the ideal state (1 for a pure state).
        d: dimension.

    Returns:
        ``(lambda1 - d1) / (lambda1 - 1/d)`` clamped to [0, 1].
    """
    if lambda1 <= 1.0 / d:
        raise ValueError("lambda1 must exceed 1/d")
    if d1 > lambda1 + 0.05:
        raise ValueError(f"leading eigenvalue {d1} exceeds lambda1={lambda1} by more than 0.05")
    return float(np.clip((lambda1 - d1) / (lambda1 - 1.0 / d), 0.0, 1.0))


def scaled_error_fit(series: ScalingSeries) -> LinearFit:
    """Least-squares line through ``M * mse_mean`` versus ``M``.

    Points are weighted by ``1 / (M * mse_stderr)^2`` when every stderr is
    positive, unweighted otherwise.  Parameter errors are scaled by the
    residual variance (n - 2 degrees of freedom).
    """
    x = np.asarray(series.M, dtype=float)
    y = x * series.mse_mean
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 grid points")
    if np.ptp(x) == 0:
        raise ValueError("degenerate grid: all M equal")
    sig = x * series.mse_stderr
    w = 1.0 / sig**2 if np.all(sig > 0) else np.ones(n)
    sw = np.sqrt(w)
    a = np.column_stack([x, np.ones(n)])
    coef, *_ = np.linalg.lstsq(a * sw[:, None], y * sw, rcond=None)
    resid = y - a @ coef
    chi2 = float(np.sum(w * resid**2))
    cov = np.linalg.inv(a.T @ (a * w[:, None])) * chi2 / (n - 2)
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - chi2 / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(coef[0]), float(coef[1]), float(np.sqrt(max(cov[0, 0], 0.0))),
                     float(np.sqrt(max(cov[1, 1], 0.0))), float(r2))


def estimate_epsilon(slope: float, p: float, d: int, slope_stderr: float = 0.0) -> float:
    """Distortion magnitude from the scaled-error slope and depolarization.

    Args:
        slope: fitted slope of ``M * mse`` versus ``M``.
        p: depolarization estimate.
        d: dimension.
        slope_stderr: standard error of the slope; a slope below the
            depolarization term by less than three of these is read as zero
            distortion.

    Raises:
        ModelInconsistencyError: if ``slope`` lies below ``p^2 (1 - 1/d)`` by
            more than ``3 * slope_stderr + 1e-12``.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")
    excess = slope - p**2 * (1 - 1.0 / d)
    tol = 1e-12 + (3 * slope_stderr if np.isfinite(slope_stderr) and slope_stderr > 0 else 0.0)
    radicand = excess / (2 * (1 - p) * (d - 1))
    if excess < -tol:
        raise ModelInconsistencyError(
            f"slope {slope:.6g} is below the depolarization floor {p**2 * (1 - 1 / d):.6g}")
    return float(np.sqrt(max(radicand, 0.0)))


def systematic_floor(rho, noise: NoiseModel) -> float:
    """Squared distance between the distorted and the ideal state.

    Evaluated as ``p^2 [Tr rho^2 - 1/d] + 2 (1-p) [Tr rho^2 - Tr(u_c rho u_c^H rho)]``
    and checked against the direct Frobenius distance.
    """
    rho = as_matrix(rho)
    d = rho.shape[0]
    p, u = noise.p, noise.u_c
    t = purity(rho)
    overlap = float(np.trace(u @ rho @ u.conj().T @ rho).real)
    value = p**2 * (t - 1.0 / d) + 2 * (1 - p) * (t - overlap)
    direct = frobenius_distance(distorted_state(rho, noise), rho) ** 2
    if abs(value - direct) > 1e-10:
        raise ArithmeticError(f"floor formula {value} disagrees with direct distance {direct}")
    return float(value)


def model_floor(d: int, p: float, epsilon: float) -> float:
    return p**2 * (1 - 1.0 / d) + 2 * (1 - p) * (d - 1) * epsilon**2


def predict_mse_curve(d: int, p: float, epsilon: float, m_grid) -> list[tuple[int, float]]:
    floor = model_floor(d, p, epsilon)
    return [(int(m), (1 - p) ** 2 * (d - 1) / m + floor) for m in m_grid]


def detect_horizon(d: int, p: float, epsilon: float) -> float:
    """Sample size where the statistical term equals the systematic floor."""
    floor = model_floor(d, p, epsilon)
    if floor <= 0:
        raise NoHorizonError("zero systematic floor; no hardware horizon")
    return (1 - p) ** 2 * (d - 1) / floor


def analyze(d: int, d1: float, fit: LinearFit, lambda1: float = 1.0, m_grid=None) -> AnalysisReport:
    """Build a report from a leading eigenvalue and a scaled-error fit."""
    p = estimate_p(d1, lambda1, d)
    eps = estimate_epsilon(fit.slope, p, d, fit.slope_stderr)
    floor = model_floor(d, p, eps)
    try:
        m_crit = detect_horizon(d, p, eps)
    except NoHorizonError:
        m_crit = None
    curve = predict_mse_curve(d, p, eps, m_grid) if m_grid is not None else []
    return AnalysisReport(p, eps, fit, floor, m_crit, curve)


def _protocol_for(d: int) -> Protocol:
    if d == 8:
        return Protocol.I
    if d == 4:
        return Protocol.III
    raise ValueError("closed-loop recovery runs on d = 8 (protocol I) or d = 4 (protocol III)")


def closed_loop_recovery(d: int, p_true: float, epsilon_true: float, M: int = 100_000,
                         replications: int = 20, rng: RngSeed = RngSeed(0),
                         m_grid=None, workers: int = 1) -> AnalysisReport:
    """Inject (p, epsilon) into a simulated device and recover them.

    The distortion is drawn once (stream ``rng.stream + 2**30``) and shared by
    all replications.  ``p_hat`` uses the mean leading eigenvalue of the final
    reconstructions; ``epsilon_hat`` comes from the slope of the mean series.
    """
    kind = _protocol_for(d)
    noise = sample_coherent_distortion(d, epsilon_true, rng.substream(2**30)).with_p(p_true)
    spec = ProtocolSpec(kind, haar_seed=rng)
    run = simulate_replications(spec, M, noise, m_grid, replications, workers=workers)
    series = run.series()
    leading = np.array([spectral_decompose(e).leading for e in run.estimates])
    report = analyze(d, float(leading.mean()), scaled_error_fit(series), 1.0, series.M)
    report.extras = {
        "p_true": p_true,
        "epsilon_true": noise.epsilon,
        "p_error": report.p_hat - p_true,
        "epsilon_error": report.epsilon_hat - noise.epsilon,
        "leading_eigenvalues": leading.tolist(),
        "observed_mse": series.mse_mean.tolist(),
    }
    return report
