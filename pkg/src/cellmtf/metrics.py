"""Error metrics between surface fields and trajectories.

All norms use the discrete convention ||w||^2 = R * sum(c^2) for coefficient
vectors (equivalently R * sum(w_q * values^2) on the quadrature grid).
Relative metrics are invariant to that convention; absolute tables are not,
and report it explicitly.

Trajectory metrics evaluate at midsteps t_s + tau/2, represented by the
second-order average (w^s + w^{s+1}) / 2 of stored step samples.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "norm_discrete",
    "grid_norm_discrete",
    "re_2",
    "re_inf2",
    "re_22",
    "midstep_values",
    "successive_max_differences",
    "fit_slope",
]


def norm_discrete(coeffs: np.ndarray, radius: float) -> np.ndarray:
    """sqrt(R * sum c^2) along the last axis."""
    c = np.asarray(coeffs, dtype=float)
    return np.sqrt(radius * (c**2).sum(axis=-1))


def grid_norm_discrete(values: np.ndarray, weights: np.ndarray, radius: float):
    """Quadrature version of norm_discrete for pointwise surface data."""
    v = np.asarray(values, dtype=float)
    return np.sqrt(radius * (weights * v**2).sum(axis=-1))


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(
            f"trajectories do not share a grid: shapes {a.shape} vs {b.shape}"
        )


def re_2(reference: np.ndarray, approx: np.ndarray, radius: float) -> float:
    """Relative L2 surface error ||ref - approx|| / ||ref||."""
    reference = np.asarray(reference, dtype=float)
    approx = np.asarray(approx, dtype=float)
    _check_same_shape(reference, approx)
    denom = norm_discrete(reference, radius)
    if denom == 0.0:
        raise ValueError("reference field has zero norm")
    return float(norm_discrete(reference - approx, radius) / denom)


def midstep_values(trajectory: np.ndarray) -> np.ndarray:
    """Averages of consecutive step samples, one row per midstep."""
    t = np.asarray(trajectory, dtype=float)
    if t.shape[0] < 2:
        raise ValueError("need at least two step samples to form midsteps")
    return 0.5 * (t[:-1] + t[1:])


def re_inf2(
    reference: np.ndarray, approx: np.ndarray, radius: float, midsteps: bool = False
) -> float:
    """Relative sup-in-time L2-in-space error over midsteps.

    Inputs are (n_times, nm) arrays of step samples; set midsteps=True when
    they already hold midstep values (e.g. an analytic reference evaluated
    at t_s + tau/2).
    """
    reference = np.asarray(reference, dtype=float)
    approx = np.asarray(approx, dtype=float)
    _check_same_shape(reference, approx)
    if not midsteps:
        reference = midstep_values(reference)
        approx = midstep_values(approx)
    denom = norm_discrete(reference, radius).max()
    if denom == 0.0:
        raise ValueError("reference trajectory has zero norm")
    return float(norm_discrete(reference - approx, radius).max() / denom)


def re_22(
    reference: np.ndarray,
    approx: np.ndarray,
    times: np.ndarray,
    radius: float,
    midsteps: bool = False,
) -> float:
    """Relative L2-in-time L2-in-space error, trapezoid over midsteps.

    times holds the step times matching the trajectories (or midstep times
    when midsteps=True).
    """
    reference = np.asarray(reference, dtype=float)
    approx = np.asarray(approx, dtype=float)
    times = np.asarray(times, dtype=float)
    _check_same_shape(reference, approx)
    if times.shape[0] != reference.shape[0]:
        raise ValueError("times length does not match the trajectories")
    if not midsteps:
        reference = midstep_values(reference)
        approx = midstep_values(approx)
        times = 0.5 * (times[:-1] + times[1:])
    diff_sq = norm_discrete(reference - approx, radius) ** 2
    ref_sq = norm_discrete(reference, radius) ** 2
    denom = np.trapezoid(ref_sq, times)
    if denom == 0.0:
        raise ValueError("reference trajectory has zero norm")
    return float(np.sqrt(np.trapezoid(diff_sq, times) / denom))


def successive_max_differences(
    trajectories: list[np.ndarray], radius: float
) -> np.ndarray:
    """max-in-time discrete-norm differences of consecutive refinements.

    Entry i is max_t ||traj[i+1](t) - traj[i](t)|| with all trajectories
    sampled on one shared time grid.
    """
    out = []
    for a, b in zip(trajectories, trajectories[1:]):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        _check_same_shape(a, b)
        out.append(norm_discrete(b - a, radius).max())
    return np.array(out)


def fit_slope(x: np.ndarray, y: np.ndarray, log_x: bool = True) -> float:
    """Least-squares slope of log10(y) against x or log10(x).

    log_x=True gives the log-log rate (tau studies); log_x=False the
    log-linear rate against a plain abscissa (spectral degree sweeps).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ValueError("need matching x/y with at least two points")
    if np.any(y <= 0.0):
        raise ValueError("y values must be positive for a log fit")
    a = np.log10(x) if log_x else x
    return float(np.polyfit(a, np.log10(y), 1)[0])
