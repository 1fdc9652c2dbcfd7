"""Per-pixel event density and the acceptance-probability chain.

Each analysis window is summarized by a per-pixel event count ``lam``.
Treating counts as Poisson intensities, the probability that a pixel fired
at least once is ``f = 1 - exp(-lam)``, a bounded occupancy measure in
[0, 1).  Occupancy (optionally modulated by a spatial prior) is min-max
normalized, recentered so its mean sits at the target sampling rate, and
pushed through a sigmoid to yield per-pixel acceptance probabilities that
are strictly inside (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .events import EventStream, SensorGeometry

# Open-interval clamp bounds for acceptance probabilities.  The sigmoid
# saturates to exactly 0.0 or 1.0 in float64 for extreme arguments, which
# would break strict-bound guarantees downstream.
_P_LO = np.nextafter(0.0, 1.0)
_P_HI = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class SigmoidParams:
    """Slope and midpoint of the score sigmoid 1 / (1 + exp(-slope*(v - midpoint)))."""

    slope: float = 5.0
    midpoint: float = 0.5

    def __post_init__(self):
        if not (self.slope > 0 and np.isfinite(self.slope)):
            raise ValueError(f"sigmoid slope must be finite and > 0, got {self.slope}")
        if not np.isfinite(self.midpoint):
            raise ValueError("sigmoid midpoint must be finite")


@dataclass(frozen=True, eq=False)
class DensityMap:
    """Per-pixel event counts for one window, shape (height, width)."""

    geometry: SensorGeometry
    counts: np.ndarray
    window_id: int = 0


@dataclass(frozen=True, eq=False)
class OccupancyMap:
    """Per-pixel occupancy values in [0, 1), shape (height, width)."""

    geometry: SensorGeometry
    values: np.ndarray
    window_id: int = 0


@dataclass(frozen=True, eq=False)
class PriorMap:
    """Nonnegative spatial importance weights, shape (height, width).

    Weights must be finite, nonnegative, and not all zero.  Only the ratios
    between pixels matter: scoring normalizes by the maximum weight, so
    scaling every weight by a common factor leaves results unchanged.
    """

    geometry: SensorGeometry
    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.shape != (self.geometry.height, self.geometry.width):
            raise ValueError("prior shape must be (height, width)")
        if not np.all(np.isfinite(w)):
            raise ValueError("prior weights must be finite")
        if np.any(w < 0):
            raise ValueError("prior weights must be nonnegative")
        if not np.any(w > 0):
            raise ValueError("prior weights must not be all zero")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True, eq=False)
class ScoreMap:
    """Per-pixel acceptance probabilities, strictly inside (0, 1)."""

    geometry: SensorGeometry
    probabilities: np.ndarray
    window_id: int = 0

    def probability_at(self, x: int, y: int) -> float:
        if not (0 <= x < self.geometry.width and 0 <= y < self.geometry.height):
            raise ValueError(
                f"pixel ({x}, {y}) outside "
                f"{self.geometry.width}x{self.geometry.height} score map")
        return float(self.probabilities[y, x])


def accumulate_density(events: EventStream, window_id: int = 0) -> DensityMap:
    """Count events per pixel over the whole given stream slice.

    Every event contributes regardless of any sampling decision made about
    it.  Raises ValueError if an event lies outside the stream geometry.
    """
    geo = events.geometry
    oob = np.nonzero((events.x >= geo.width) | (events.y >= geo.height))[0]
    if oob.size:
        i = int(oob[0])
        raise ValueError(
            f"event {i} at ({int(events.x[i])}, {int(events.y[i])}) outside "
            f"{geo.width}x{geo.height} sensor")
    flat = np.bincount(events.y * geo.width + events.x, minlength=geo.n_pixels)
    counts = flat.reshape(geo.height, geo.width).astype(np.float64)
    return DensityMap(geo, counts, window_id)


def poisson_occupancy(density: DensityMap) -> OccupancyMap:
    """Map counts lam to occupancy f = 1 - exp(-lam).

    Computed as -expm1(-lam) for accuracy at small counts.  Zero counts map
    to exactly 0; occupancy is strictly below 1 for finite counts (values
    saturate at one ulp below 1 once lam exceeds about 37).
    """
    counts = np.asarray(density.counts, dtype=np.float64)
    if np.any(counts < 0) or not np.all(np.isfinite(counts)):
        raise ValueError("density counts must be finite and nonnegative")
    # exp(-lam) underflows past lam ~ 37 and the result would round to
    # exactly 1.0; clamp to keep the stated half-open range.
    values = np.minimum(-np.expm1(-counts), _P_HI)
    return OccupancyMap(density.geometry, values, density.window_id)


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Rescale to [0, 1] as (v - min) / (max - min).

    A constant input has no spread to normalize and maps to all zeros, which
    lets the downstream score collapse to a single uniform probability.
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def sigmoid(v, params: SigmoidParams = SigmoidParams()):
    """Score sigmoid with the output clamped to the open interval (0, 1)."""
    p = expit(params.slope * (np.asarray(v, dtype=np.float64) - params.midpoint))
    return np.clip(p, _P_LO, _P_HI)


def score_map(occupancy: OccupancyMap,
              alpha: float,
              params: SigmoidParams = SigmoidParams(),
              prior: PriorMap | None = None,
              window_id: int | None = None) -> ScoreMap:
    """Turn an occupancy map into per-pixel acceptance probabilities.

    The chain is: multiply occupancy by the prior (normalized to peak 1) if
    one is given, min-max normalize, shift so the mean over all pixels
    (active or not) equals ``alpha``, then apply the sigmoid.  Outputs are
    clamped strictly inside (0, 1).

    Parameters
    ----------
    occupancy : OccupancyMap
        Per-pixel occupancy from the previous window.
    alpha : float
        Target sampling rate in (0, 1].
    params : SigmoidParams
        Slope and midpoint of the score sigmoid.
    prior : PriorMap, optional
        Spatial importance weights; must share the occupancy geometry.
    window_id : int, optional
        Window tag for the result; defaults to the occupancy's tag.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    base = np.asarray(occupancy.values, dtype=np.float64)
    if prior is not None:
        if prior.geometry != occupancy.geometry:
            raise ValueError("prior geometry does not match occupancy geometry")
        # Dividing by the peak weight first makes scoring invariant to a
        # common scale factor on the prior whenever the scaling is exact in
        # float64 (the per-pixel ratios are then bit-identical).
        base = base * (prior.weights / prior.weights.max())
    g = minmax_normalize(base)
    shifted = g + (alpha - g.mean())
    probs = sigmoid(shifted, params)
    wid = occupancy.window_id if window_id is None else window_id
    return ScoreMap(occupancy.geometry, probs, wid)


def gaussian_prior(geometry: SensorGeometry,
                   sigma_x: float | None = None,
                   sigma_y: float | None = None) -> PriorMap:
    """Centered anisotropic Gaussian prior with peak weight 1.

    The center is ((width - 1) / 2, (height - 1) / 2).  Sigmas default to a
    quarter of the corresponding dimension.
    """
    sx = geometry.width / 4.0 if sigma_x is None else float(sigma_x)
    sy = geometry.height / 4.0 if sigma_y is None else float(sigma_y)
    if sx <= 0 or sy <= 0:
        raise ValueError("sigmas must be positive")
    cx = (geometry.width - 1) / 2.0
    cy = (geometry.height - 1) / 2.0
    xs = np.arange(geometry.width, dtype=np.float64)
    ys = np.arange(geometry.height, dtype=np.float64)
    gx = ((xs - cx) / sx) ** 2
    gy = ((ys - cy) / sy) ** 2
    weights = np.exp(-0.5 * (gy[:, None] + gx[None, :]))
    return PriorMap(geometry, weights)
