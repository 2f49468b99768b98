"""Target position solvers for multistatic bistatic-range measurements.

Every measurement models the sum of the target's distances to one
transmitter and one receiver.  Three estimators are provided:

* plain least squares over all pairs (gradient descent);
* iteratively reweighted least squares, where each receiver's weight is
  recomputed every iteration from its mean absolute residual through the
  redescending Andrews sine function, so receivers behind large biases
  lose influence;
* a pair-differencing solver that fits differences of measurements
  sharing a receiver (transmitter pairs) or sharing a transmitter
  (receiver pairs).  A constant bias on a receiver link cancels exactly
  in every transmitter-pair difference, and a transmitter-link bias in
  every receiver-pair difference, so each residual sees at most one
  side's biases.

A fusion rule averages the reweighted and differencing estimates and
falls back to the differencing estimate when the reweighted iteration
fails to converge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InsufficientGeometryError, UnderdeterminedError

_SINGULARITY_GUARD = 1e-9  # below this node distance the unit vector is zeroed
_DIVERGENCE_NORM = 1e6     # iterate norm beyond which descent is abandoned


@dataclass(frozen=True)
class SolverConfig:
    """Step sizes, stopping thresholds, and fusion weights.

    The plain least-squares descent reuses `irls_threshold` as its
    stopping threshold.
    """

    ls_step: float = 0.01
    irls_step: float = 0.01
    proposed_step: float = 0.001
    irls_threshold: float = 0.01
    proposed_threshold: float = 0.01
    max_iterations: int = 10_000
    e_max: float = 7.0
    fusion_weight_irls: float = 0.5
    fusion_weight_proposed: float = 0.5

    def __post_init__(self):
        positive = (
            ("ls_step", self.ls_step),
            ("irls_step", self.irls_step),
            ("proposed_step", self.proposed_step),
            ("irls_threshold", self.irls_threshold),
            ("proposed_threshold", self.proposed_threshold),
            ("e_max", self.e_max),
        )
        for name, value in positive:
            if value <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.fusion_weight_irls < 0 or self.fusion_weight_proposed < 0:
            raise ConfigurationError("fusion weights must be >= 0")
        if abs(self.fusion_weight_irls + self.fusion_weight_proposed - 1.0) > 1e-9:
            raise ConfigurationError("fusion weights must sum to 1")


@dataclass
class LocalizationResult:
    """Solver output: estimate, convergence flag, and diagnostics.

    A non-converged result carries the lowest-objective iterate seen
    during the descent as a best-effort estimate.
    """

    estimate: np.ndarray
    converged: bool
    iterations: int
    method: str
    ue_weights: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "estimate": [float(self.estimate[0]), float(self.estimate[1])],
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "ue_weights": None if self.ue_weights is None else [float(w) for w in self.ue_weights],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _ranges_of(measurements) -> np.ndarray:
    return np.asarray(getattr(measurements, "ranges", measurements), dtype=float)


def _distances_and_units(x, nodes):
    """Distances from x to each node and guarded unit vectors toward x."""
    delta = x - nodes
    dist = np.hypot(delta[:, 0], delta[:, 1])
    units = np.zeros_like(delta)
    np.divide(delta, dist[:, None], out=units, where=(dist[:, None] > _SINGULARITY_GUARD))
    return dist, units


def _pair_indices(n):
    return np.triu_indices(n, k=1)


def centroid_init(gnbs, ues) -> np.ndarray:
    """Mean of all node positions, the default descent start."""
    nodes = np.vstack([np.asarray(gnbs, float), np.asarray(ues, float)])
    return nodes.mean(axis=0)


def grid_search_init(objective, half_extent: float, points: int = 20) -> np.ndarray:
    """Coarse minimum of `objective` over a points x points square grid."""
    axis = np.linspace(-half_extent, half_extent, points)
    best_val, best_xy = np.inf, np.array([0.0, 0.0])
    for gx in axis:
        for gy in axis:
            val = objective(np.array([gx, gy]))
            if val < best_val:
                best_val, best_xy = val, np.array([gx, gy])
    return best_xy


def _grid_points(half_extent, points):
    axis = np.linspace(-half_extent, half_extent, points)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def ls_grid_init(measurements, gnbs, ues, half_extent: float, points: int = 20) -> np.ndarray:
    """Grid minimum of the least-squares objective, evaluated in one batch."""
    ranges = _ranges_of(measurements)
    gnbs, ues = np.asarray(gnbs, float), np.asarray(ues, float)
    pts = _grid_points(half_extent, points)
    dist_g = np.linalg.norm(pts[:, None, :] - gnbs[None, :, :], axis=2)  # (P, S)
    dist_u = np.linalg.norm(pts[:, None, :] - ues[None, :, :], axis=2)   # (P, K)
    res = ranges[None, :, :] - (dist_g[:, :, None] + dist_u[:, None, :])
    values = np.einsum("psk,psk->p", res, res)
    return pts[int(np.argmin(values))]


def difference_grid_init(measurements, gnbs, ues, half_extent: float, points: int = 20) -> np.ndarray:
    """Grid minimum of the pair-differencing objective, evaluated in one batch."""
    ranges = _ranges_of(measurements)
    gnbs, ues = np.asarray(gnbs, float), np.asarray(ues, float)
    (ig, jg), (iu, ju) = _difference_setup(ranges, gnbs, ues)
    pts = _grid_points(half_extent, points)
    dist_g = np.linalg.norm(pts[:, None, :] - gnbs[None, :, :], axis=2)
    dist_u = np.linalg.norm(pts[:, None, :] - ues[None, :, :], axis=2)
    res_g = (ranges[jg, :] - ranges[ig, :])[None, :, :] - (dist_g[:, jg] - dist_g[:, ig])[:, :, None]
    res_u = (ranges[:, iu] - ranges[:, ju])[None, :, :] - (dist_u[:, iu] - dist_u[:, ju])[:, None, :]
    values = np.einsum("pik,pik->p", res_g, res_g) + np.einsum("psi,psi->p", res_u, res_u)
    return pts[int(np.argmin(values))]


# ---------------------------------------------------------------------------
# Objectives and gradients
# ---------------------------------------------------------------------------

def _ls_value_grad(x, ranges, gnbs, ues, weights=None):
    """Weighted sum-of-squares value and gradient; uniform weights give LS."""
    dist_g, units_g = _distances_and_units(x, gnbs)
    dist_u, units_u = _distances_and_units(x, ues)
    res = ranges - (dist_g[:, None] + dist_u[None, :])
    if weights is None:
        value = float(np.sum(res * res))
        grad = -2.0 * (res.sum(axis=1) @ units_g + res.sum(axis=0) @ units_u)
    else:
        value = float(weights @ (res * res).sum(axis=0))
        grad = -2.0 * ((res @ weights) @ units_g + (weights * res.sum(axis=0)) @ units_u)
    return value, grad


def ls_objective(x, measurements, gnbs, ues) -> float:
    """Sum over pairs of squared range residuals at position x."""
    return _ls_value_grad(np.asarray(x, float), _ranges_of(measurements),
                          np.asarray(gnbs, float), np.asarray(ues, float))[0]


def ls_gradient(x, measurements, gnbs, ues) -> np.ndarray:
    return _ls_value_grad(np.asarray(x, float), _ranges_of(measurements),
                          np.asarray(gnbs, float), np.asarray(ues, float))[1]


def irls_objective(x, measurements, gnbs, ues, weights) -> float:
    """Receiver-weighted sum of squared range residuals at position x."""
    return _ls_value_grad(np.asarray(x, float), _ranges_of(measurements),
                          np.asarray(gnbs, float), np.asarray(ues, float),
                          np.asarray(weights, float))[0]


def irls_gradient(x, measurements, gnbs, ues, weights) -> np.ndarray:
    return _ls_value_grad(np.asarray(x, float), _ranges_of(measurements),
                          np.asarray(gnbs, float), np.asarray(ues, float),
                          np.asarray(weights, float))[1]


def residuals(measurements, gnbs, ues, x) -> np.ndarray:
    """Per-receiver mean absolute range residual at position x."""
    ranges = _ranges_of(measurements)
    dist_g, _ = _distances_and_units(np.asarray(x, float), np.asarray(gnbs, float))
    dist_u, _ = _distances_and_units(np.asarray(x, float), np.asarray(ues, float))
    res = ranges - (dist_g[:, None] + dist_u[None, :])
    return np.abs(res).mean(axis=0)


def andrews_weight(residual, e_max: float):
    """Redescending Andrews sine weight, before normalization.

    Equals sin(e/e_max)/(e/e_max) for 0 < e <= e_max (so 1 in the limit
    e -> 0 and sin(1) at e = e_max) and exactly 0 beyond e_max.
    """
    e = np.asarray(residual, dtype=float)
    w = np.zeros(e.shape)
    inside = (e > 0) & (e <= e_max)
    t = e[inside] / e_max
    w[inside] = np.sin(t) / t
    w[e == 0] = 1.0
    if w.ndim == 0:
        return float(w)
    return w


def difference_gnb_pairs(measurements):
    """Transmitter-pair differences of the measurements.

    For every receiver k and every transmitter pair s < s', emits
    ranges[s', k] - ranges[s, k].  A constant added to all measurements
    of one receiver cancels exactly.  Returns (pairs, diffs) with pairs a
    list of (s, s') tuples and diffs of shape (num_pairs, num_ues).
    """
    ranges = _ranges_of(measurements)
    num_gnbs = ranges.shape[0]
    if num_gnbs < 2:
        raise InsufficientGeometryError("transmitter-pair differences need >= 2 transmitters")
    i, j = _pair_indices(num_gnbs)
    diffs = ranges[j, :] - ranges[i, :]
    return list(zip(i.tolist(), j.tolist())), diffs


def difference_ue_pairs(measurements):
    """Receiver-pair differences of the measurements.

    For every transmitter s and every receiver pair k < k', emits
    ranges[s, k] - ranges[s, k'].  A constant added to all measurements
    of one transmitter cancels exactly.  Returns (pairs, diffs) with
    diffs of shape (num_gnbs, num_pairs).
    """
    ranges = _ranges_of(measurements)
    num_ues = ranges.shape[1]
    if num_ues < 2:
        raise InsufficientGeometryError("receiver-pair differences need >= 2 receivers")
    i, j = _pair_indices(num_ues)
    diffs = ranges[:, i] - ranges[:, j]
    return list(zip(i.tolist(), j.tolist())), diffs


def _difference_value_grad(x, ranges, gnbs, ues, pairs_g, pairs_u):
    ig, jg = pairs_g
    iu, ju = pairs_u
    dist_g, units_g = _distances_and_units(x, gnbs)
    dist_u, units_u = _distances_and_units(x, ues)
    # Transmitter pairs: data ranges[s'] - ranges[s] vs model |x-g_s'| - |x-g_s|.
    res_g = (ranges[jg, :] - ranges[ig, :]) - (dist_g[jg] - dist_g[ig])[:, None]
    # Receiver pairs: data ranges[:, k] - ranges[:, k'] vs model |x-u_k| - |x-u_k'|.
    res_u = (ranges[:, iu] - ranges[:, ju]) - (dist_u[iu] - dist_u[ju])[None, :]
    value = float(np.sum(res_g * res_g) + np.sum(res_u * res_u))
    grad = -2.0 * (
        res_g.sum(axis=1) @ (units_g[jg] - units_g[ig])
        + res_u.sum(axis=0) @ (units_u[iu] - units_u[ju])
    )
    return value, grad


def _difference_setup(ranges, gnbs, ues):
    if ranges.shape[0] < 2:
        raise InsufficientGeometryError("pair differencing needs >= 2 transmitters")
    if ranges.shape[1] < 2:
        raise InsufficientGeometryError("pair differencing needs >= 2 receivers")
    return _pair_indices(ranges.shape[0]), _pair_indices(ranges.shape[1])


def difference_objective(x, measurements, gnbs, ues) -> float:
    """Sum of squared transmitter-pair and receiver-pair difference residuals."""
    ranges = _ranges_of(measurements)
    gnbs, ues = np.asarray(gnbs, float), np.asarray(ues, float)
    pairs_g, pairs_u = _difference_setup(ranges, gnbs, ues)
    return _difference_value_grad(np.asarray(x, float), ranges, gnbs, ues, pairs_g, pairs_u)[0]


def difference_gradient(x, measurements, gnbs, ues) -> np.ndarray:
    ranges = _ranges_of(measurements)
    gnbs, ues = np.asarray(gnbs, float), np.asarray(ues, float)
    pairs_g, pairs_u = _difference_setup(ranges, gnbs, ues)
    return _difference_value_grad(np.asarray(x, float), ranges, gnbs, ues, pairs_g, pairs_u)[1]


# ---------------------------------------------------------------------------
# Descent drivers
# ---------------------------------------------------------------------------

def _descend(value_grad, x0, step, threshold, max_iterations, trace):
    """Fixed-step gradient descent with best-iterate fallback.

    Returns (estimate, converged, iterations).  Convergence means the
    last position update had norm <= threshold.  On NaN, runaway iterate
    norm, or iteration exhaustion, the lowest-objective iterate visited
    is returned with converged False.
    """
    x = np.array(x0, dtype=float)
    best_x, best_val = x.copy(), np.inf
    for iteration in range(1, max_iterations + 1):
        value, grad = value_grad(x)
        if trace is not None:
            trace.append(value)
        if value < best_val:
            best_val, best_x = value, x.copy()
        x_new = x - step * grad
        if not np.isfinite(x_new).all() or np.linalg.norm(x_new) > _DIVERGENCE_NORM:
            return best_x, False, iteration
        delta = np.linalg.norm(x_new - x)
        x = x_new
        if delta <= threshold:
            return x, True, iteration
    return best_x, False, max_iterations


def _prepare(measurements, gnbs, ues, config, init):
    ranges = _ranges_of(measurements)
    gnbs = np.asarray(gnbs, dtype=float)
    ues = np.asarray(ues, dtype=float)
    if ranges.shape != (gnbs.shape[0], ues.shape[0]):
        raise ValueError(
            f"ranges shape {ranges.shape} does not match "
            f"{gnbs.shape[0]} transmitters x {ues.shape[0]} receivers"
        )
    config = config if config is not None else SolverConfig()
    x0 = centroid_init(gnbs, ues) if init is None else np.asarray(init, dtype=float)
    return ranges, gnbs, ues, config, x0


def solve_ls(measurements, gnbs, ues, config=None, init=None, trace=None) -> LocalizationResult:
    """Plain least-squares position fit by gradient descent.

    Starts from `init` (default: node centroid) and descends the
    sum-of-squares objective with a fixed step until the update norm
    drops below the threshold.  Converges to a local minimum only.

    Args:
        measurements: MeasurementSet or (S, K) range matrix.
        gnbs: (S, 2) transmitter positions.
        ues: (K, 2) receiver positions.
        config: SolverConfig; defaults apply when omitted.
        init: optional (2,) starting point.
        trace: optional list collecting the objective value per iteration.
    """
    ranges, gnbs, ues, config, x0 = _prepare(measurements, gnbs, ues, config, init)
    if ranges.size < 3:
        raise UnderdeterminedError("need at least 3 measurements for a 2-D fit")
    estimate, converged, iterations = _descend(
        lambda x: _ls_value_grad(x, ranges, gnbs, ues),
        x0, config.ls_step, config.irls_threshold, config.max_iterations, trace,
    )
    return LocalizationResult(estimate, converged, iterations, method="ls")


def solve_irls(measurements, gnbs, ues, config=None, init=None, trace=None) -> LocalizationResult:
    """Iteratively reweighted least-squares fit with Andrews sine weights.

    Receiver weights start uniform.  Each iteration takes one gradient
    step of the weighted objective, recomputes per-receiver mean absolute
    residuals at the new position, maps them through the Andrews sine
    function (hard zero beyond e_max), and renormalizes the weights to
    sum to one.  Stops when the position update norm drops below the
    threshold.  All weights vanishing, a NaN, or iteration exhaustion is
    reported as non-convergence.
    """
    ranges, gnbs, ues, config, x0 = _prepare(measurements, gnbs, ues, config, init)
    if ranges.size < 3:
        raise UnderdeterminedError("need at least 3 measurements for a 2-D fit")
    if ranges.shape[1] < 2:
        raise InsufficientGeometryError("receiver reweighting needs >= 2 receivers")

    num_ues = ranges.shape[1]
    weights = np.full(num_ues, 1.0 / num_ues)
    x = x0.copy()
    best_val, best_x, best_w = np.inf, x.copy(), weights.copy()
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        value, grad = _ls_value_grad(x, ranges, gnbs, ues, weights)
        if trace is not None:
            trace.append(value)
        if value < best_val:
            best_val, best_x, best_w = value, x.copy(), weights.copy()
        x_new = x - config.irls_step * grad
        if not np.isfinite(x_new).all() or np.linalg.norm(x_new) > _DIVERGENCE_NORM:
            break
        raw = andrews_weight(residuals(ranges, gnbs, ues, x_new), config.e_max)
        total = raw.sum()
        if total <= 0.0:
            # Every receiver rejected: the weighted objective is undefined.
            break
        delta = np.linalg.norm(x_new - x)
        x, weights = x_new, raw / total
        if delta <= config.irls_threshold:
            converged = True
            break

    if converged:
        return LocalizationResult(x, True, iterations, method="irls", ue_weights=weights)
    return LocalizationResult(best_x, False, iterations, method="irls", ue_weights=best_w)


def solve_proposed(measurements, gnbs, ues, config=None, init=None, trace=None) -> LocalizationResult:
    """Pair-differencing position fit by gradient descent.

    Minimizes the squared mismatch between measured and geometric
    transmitter-pair and receiver-pair differences; each family of
    differences is blind to the other side's per-link biases.  Converges
    to a local minimum only.
    """
    ranges, gnbs, ues, config, x0 = _prepare(measurements, gnbs, ues, config, init)
    pairs_g, pairs_u = _difference_setup(ranges, gnbs, ues)
    estimate, converged, iterations = _descend(
        lambda x: _difference_value_grad(x, ranges, gnbs, ues, pairs_g, pairs_u),
        x0, config.proposed_step, config.proposed_threshold, config.max_iterations, trace,
    )
    return LocalizationResult(estimate, converged, iterations, method="proposed")


def fuse(irls_result: LocalizationResult, proposed_result: LocalizationResult,
         config: SolverConfig | None = None) -> LocalizationResult:
    """Convex combination of the two estimates, gated on IRLS convergence.

    When the reweighted fit converged, the fused estimate is
    fusion_weight_irls * irls + fusion_weight_proposed * proposed;
    otherwise the differencing estimate is returned unchanged.
    """
    config = config if config is not None else SolverConfig()
    if irls_result.converged:
        estimate = (
            config.fusion_weight_irls * irls_result.estimate
            + config.fusion_weight_proposed * proposed_result.estimate
        )
    else:
        estimate = proposed_result.estimate.copy()
    return LocalizationResult(
        estimate=estimate,
        converged=irls_result.converged or proposed_result.converged,
        iterations=irls_result.iterations + proposed_result.iterations,
        method="fused",
        ue_weights=irls_result.ue_weights,
    )


def solve_fused(measurements, gnbs, ues, config=None, init=None) -> LocalizationResult:
    """Run the reweighted and differencing solvers and fuse their estimates."""
    config = config if config is not None else SolverConfig()
    irls_result = solve_irls(measurements, gnbs, ues, config, init)
    proposed_result = solve_proposed(measurements, gnbs, ues, config, init)
    return fuse(irls_result, proposed_result, config)
