"""Single-pass streaming downsampler.

Events are consumed in timestamp order.  The stream is segmented into
tumbling analysis windows of ``t_us`` microseconds anchored at the first
event; window ``n`` spans [anchor + (n-1)*t_us, anchor + n*t_us).  For the
density-adaptive method, events in window ``n`` are scored with a map frozen
at the close of window ``n - 1``, so every acceptance decision depends only
on the past.  Window 1 has no predecessor and falls back to uniform
sampling at alpha.  A window that closes empty yields the degenerate
constant map (all pixels score sigmoid(alpha)); a stale map is never
carried across a gap.

The budget cap runs across windows: an event is dropped before evaluation
when the stream-wide kept/processed ratio already exceeds alpha, and such
drops consume no randomness.  With alpha = 1 every method passes all events
through (stochastic methods then use acceptance probability 1).

Decisions are evaluated window-by-window in vectorized batches.  The batch
path consumes the random stream exactly as the per-event kernels in
:mod:`evdown.samplers` would: the k-th stochastically evaluated event sees
the k-th variate of the generator.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .density import DensityMap, ScoreMap, poisson_occupancy, score_map
from .events import EventStream, SensorGeometry
from .samplers import DecisionCode, SamplerConfig, acceptance_window_us

METHODS = ("deterministic", "uniform", "poisson")

_ACCEPT = int(DecisionCode.ACCEPT)
_REJ_SAMPLER = int(DecisionCode.REJECT_SAMPLER)
_REJ_CAP = int(DecisionCode.REJECT_CAP)


@dataclass
class WindowState:
    """Mutable state of the currently open analysis window.

    ``scores`` is the frozen map used to score events of this window (None
    only for window 1, which falls back to uniform sampling).  ``counts``
    accumulates the density of this window for the next freeze.
    """

    geometry: SensorGeometry
    t_anchor: int
    t_us: int
    index: int = 1
    scores: ScoreMap | None = None
    counts: np.ndarray = None

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.geometry.height, self.geometry.width))

    @property
    def left_edge(self) -> int:
        return self.t_anchor + (self.index - 1) * self.t_us

    @property
    def right_edge(self) -> int:
        return self.t_anchor + self.index * self.t_us

    def contains(self, t_us: int) -> bool:
        return self.left_edge <= t_us < self.right_edge

    def add(self, x: int, y: int) -> None:
        """Count one event into this window's density (accepted or not)."""
        self.counts[y, x] += 1.0


def rollover(state: WindowState, config: SamplerConfig) -> WindowState:
    """Close the current window and open the next one.

    The closing window's density is frozen into the score map that governs
    the new window.  Advances exactly one window; when an incoming timestamp
    skips several windows, call repeatedly.  An empty closing window
    produces the degenerate constant map, so gaps never leave a stale map
    active.
    """
    density = DensityMap(state.geometry, state.counts, state.index)
    frozen = score_map(poisson_occupancy(density), config.alpha, config.theta,
                       config.prior, window_id=state.index)
    return WindowState(state.geometry, state.t_anchor, state.t_us,
                       index=state.index + 1, scores=frozen)


@dataclass
class DecisionLog:
    """Per-event record of one run, in stream order.

    code is a DecisionCode value.  probability is the acceptance probability
    the sampler used (or would have used, for cap rejections); NaN for the
    deterministic method, which draws nothing.
    """

    t: np.ndarray
    window: np.ndarray
    code: np.ndarray
    probability: np.ndarray

    def __len__(self) -> int:
        return self.t.shape[0]


@dataclass
class RunStats:
    """Counters and timing for one downsampling run.

    processed = retained + capped + sampler_rejected always holds.
    per_window lists (window_id, n_processed, n_retained) for every window
    that contained at least one event.
    """

    method: str
    alpha: float
    seed: int
    processed: int = 0
    retained: int = 0
    capped: int = 0
    sampler_rejected: int = 0
    per_window: tuple = ()
    total_s: float = 0.0
    pdf_s: float = 0.0
    eval_s: float = 0.0

    @property
    def ratio(self) -> float:
        return self.retained / self.processed if self.processed else 0.0

    @property
    def per_window_ratios(self) -> list[float]:
        return [r / p for (_, p, r) in self.per_window]

    def _per_kev(self, seconds: float) -> float:
        if self.processed == 0:
            return 0.0
        return seconds * 1e3 / (self.processed / 1e3)

    @property
    def ms_per_kev_total(self) -> float:
        return self._per_kev(self.total_s)

    @property
    def ms_per_kev_pdf(self) -> float:
        return self._per_kev(self.pdf_s)

    @property
    def ms_per_kev_eval(self) -> float:
        return self._per_kev(self.eval_s)


def timing_probe(stats: RunStats) -> dict[str, float]:
    """Per-phase cost of a finished run in milliseconds per thousand events."""
    return {
        "total_ms_per_kev": stats.ms_per_kev_total,
        "pdf_ms_per_kev": stats.ms_per_kev_pdf,
        "eval_ms_per_kev": stats.ms_per_kev_eval,
    }


def _require_valid(stream: EventStream) -> None:
    t, x, y = stream.t, stream.x, stream.y
    if len(stream) > 1:
        bad = np.nonzero(np.diff(t) < 0)[0]
        if bad.size:
            i = int(bad[0]) + 1
            raise ValueError(f"events out of order at index {i}: "
                             f"t={int(t[i])} after t={int(t[i - 1])}")
    geo = stream.geometry
    oob = np.nonzero((x >= geo.width) | (y >= geo.height))[0]
    if oob.size:
        i = int(oob[0])
        raise ValueError(f"event {i} at ({int(x[i])}, {int(y[i])}) outside "
                         f"{geo.width}x{geo.height} sensor")


def _capped_stochastic(pv, draws, di, retained, processed, alpha):
    """Sequential cap + draw evaluation for one batch of probabilities.

    pv and draws are plain Python lists; di is the index of the next unused
    draw.  Returns (codes, di, retained, processed).
    """
    codes = []
    append = codes.append
    for p in pv:
        if processed and retained > alpha * processed:
            append(2)
        else:
            u = draws[di]
            di += 1
            if u < p:
                append(0)
                retained += 1
            else:
                append(1)
        processed += 1
    return codes, di, retained, processed


def _capped_deterministic(ok, retained, processed, alpha):
    codes = []
    append = codes.append
    for a in ok:
        if processed and retained > alpha * processed:
            append(2)
        elif a:
            append(0)
            retained += 1
        else:
            append(1)
        processed += 1
    return codes, retained, processed


def run(stream: EventStream, method: str,
        config: SamplerConfig) -> tuple[EventStream, RunStats, DecisionLog]:
    """Downsample a stream in one causal pass.

    Returns the accepted sub-stream (with source_index pointing back into
    the input), run statistics, and the full per-event decision log.

    Raises ValueError for an unknown method, an out-of-order or out-of-bounds
    stream (reporting the first offending index), or a prior that does not
    match the method or geometry.
    """
    t_run0 = time.perf_counter()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    if config.prior is not None:
        if method != "poisson":
            raise ValueError("a spatial prior requires the poisson method")
        if config.prior.geometry != stream.geometry:
            raise ValueError("prior geometry does not match stream geometry")
    _require_valid(stream)

    n = len(stream)
    geo = stream.geometry
    alpha = config.alpha
    if n == 0:
        stats = RunStats(method, alpha, config.seed)
        log = DecisionLog(np.empty(0, np.int64), np.empty(0, np.int64),
                          np.empty(0, np.uint8), np.empty(0, np.float64))
        return stream.subset(np.empty(0, np.int64)), stats, log

    t = stream.t
    t0 = int(t[0])
    windows = (t - t0) // config.t_us + 1
    codes = np.empty(n, dtype=np.uint8)
    probs = np.full(n, np.nan)
    retained = 0
    processed = 0
    pdf_s = 0.0
    eval_s = 0.0
    cap = config.cap_enabled

    if method == "deterministic":
        ta = acceptance_window_us(alpha, config.tw_us)
        ok = ((t - t0) % config.tw_us) < ta
        te0 = time.perf_counter()
        if cap:
            chunk, retained, processed = _capped_deterministic(
                ok.tolist(), retained, processed, alpha)
            codes[:] = chunk
        else:
            codes[:] = np.where(ok, _ACCEPT, _REJ_SAMPLER)
            processed = n
            retained = int(np.count_nonzero(ok))
        eval_s += time.perf_counter() - te0
    elif method == "uniform":
        probs.fill(alpha)
        rng = config.rng()
        te0 = time.perf_counter()
        if cap:
            draws = rng.random(n).tolist()
            chunk, _, retained, processed = _capped_stochastic(
                probs.tolist(), draws, 0, retained, processed, alpha)
            codes[:] = chunk
        else:
            codes[:] = np.where(rng.random(n) < alpha, _ACCEPT, _REJ_SAMPLER)
            processed = n
            retained = int(np.count_nonzero(codes == _ACCEPT))
        eval_s += time.perf_counter() - te0
    else:
        rng = config.rng()
        draws = rng.random(n).tolist()
        di = 0
        xs, ys = stream.x, stream.y
        flat_idx = ys * geo.width + xs
        uniq, starts = np.unique(windows, return_index=True)
        ends = np.append(starts[1:], n)
        prev_wid = 0
        prev_slice = None
        degenerate_flat = None
        for wid, i0, i1 in zip(uniq.tolist(), starts.tolist(), ends.tolist()):
            if alpha == 1.0:
                pv = np.ones(i1 - i0)
            elif wid == 1:
                pv = np.full(i1 - i0, alpha)
            else:
                tp0 = time.perf_counter()
                if prev_wid == wid - 1:
                    counts = np.bincount(flat_idx[prev_slice],
                                         minlength=geo.n_pixels)
                    density = DensityMap(geo, counts.reshape(
                        geo.height, geo.width).astype(np.float64), prev_wid)
                    frozen = score_map(poisson_occupancy(density), alpha,
                                       config.theta, config.prior,
                                       window_id=prev_wid)
                    flat_scores = frozen.probabilities.ravel()
                else:
                    # The window before this one was empty; its frozen map is
                    # the same degenerate constant regardless of which window
                    # it is, so build it once.
                    if degenerate_flat is None:
                        density = DensityMap(geo, np.zeros((geo.height,
                                                            geo.width)))
                        frozen = score_map(poisson_occupancy(density), alpha,
                                           config.theta, config.prior)
                        degenerate_flat = frozen.probabilities.ravel()
                    flat_scores = degenerate_flat
                pv = flat_scores[flat_idx[i0:i1]]
                pdf_s += time.perf_counter() - tp0
            probs[i0:i1] = pv
            te0 = time.perf_counter()
            if cap:
                chunk, di, retained, processed = _capped_stochastic(
                    pv.tolist(), draws, di, retained, processed, alpha)
                codes[i0:i1] = chunk
            else:
                u = np.asarray(draws[i0:i1])
                codes[i0:i1] = np.where(u < pv, _ACCEPT, _REJ_SAMPLER)
                processed = i1
                retained += int(np.count_nonzero(codes[i0:i1] == _ACCEPT))
            eval_s += time.perf_counter() - te0
            prev_wid = wid
            prev_slice = slice(i0, i1)

    accepted_idx = np.nonzero(codes == _ACCEPT)[0]
    capped_n = int(np.count_nonzero(codes == _REJ_CAP))
    wmax = int(windows[-1])
    win_processed = np.bincount(windows, minlength=wmax + 1)
    win_retained = np.bincount(windows[accepted_idx], minlength=wmax + 1)
    per_window = tuple(
        (int(w), int(win_processed[w]), int(win_retained[w]))
        for w in range(1, wmax + 1) if win_processed[w] > 0)

    out = stream.subset(accepted_idx)
    log = DecisionLog(t.copy(), windows, codes, probs)
    stats = RunStats(
        method=method, alpha=alpha, seed=config.seed,
        processed=processed, retained=retained, capped=capped_n,
        sampler_rejected=processed - retained - capped_n,
        per_window=per_window,
        total_s=time.perf_counter() - t_run0, pdf_s=pdf_s, eval_s=eval_s)
    return out, stats, log
