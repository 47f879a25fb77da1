"""Histogram plug-in entropy and mutual information over sliding windows.

Samples are quantised into fixed-width bins anchored at 0.0, so the bin of a
sample ``s`` is ``floor(s / zeta)`` regardless of the window it falls in.
Entropies are in nats and scaled by ``epsilon``.

Every entropy, scalar or windowed, is computed by :func:`_row_entropies`,
which sums ``p ln p`` over the bin counts sorted ascending. Because the sum
depends only on the multiset of counts, ``H(x, y)`` and ``H(y, x)`` agree bit
for bit, and so does ``H(x, x)`` with ``H(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import uniform_filter1d

from .config import WindowConfig
from .errors import (
    EmptyInput,
    LengthMismatch,
    NonFiniteSample,
    SeriesTooShort,
    SignalTooShort,
)

__all__ = [
    "Histogram1D",
    "ScalarSeries",
    "build_histogram",
    "window_entropy",
    "joint_entropy",
    "mutual_information",
    "entropy_series",
    "mi_series",
    "mi_3d",
    "series_derivative",
    "series_to_csv",
]

BIN_ORIGIN = 0.0


@dataclass(frozen=True)
class Histogram1D:
    bin_origin: float
    bin_width: float
    counts: dict
    total: int


class ScalarSeries:
    """Values indexed by window center; centers are strictly increasing and evenly spaced."""

    __slots__ = ("centers", "values")

    def __init__(self, centers, values):
        c = np.array(centers, dtype=np.int64).reshape(-1)
        v = np.array(values, dtype=float).reshape(-1)
        if c.shape != v.shape:
            raise ValueError("centers and values must have equal length")
        if c.size > 1:
            d = np.diff(c)
            if np.any(d <= 0) or np.any(d != d[0]):
                raise ValueError("centers must be strictly increasing with constant spacing")
        c.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "values", v)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarSeries is immutable")

    def __len__(self):
        return self.centers.size

    def __iter__(self):
        return iter(zip(self.centers.tolist(), self.values.tolist()))

    def __eq__(self, other):
        if not isinstance(other, ScalarSeries):
            return NotImplemented
        return (np.array_equal(self.centers, other.centers)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.centers.tobytes(), self.values.tobytes()))

    def __repr__(self):
        return f"ScalarSeries(n={len(self)})"

    @property
    def spacing(self):
        return int(self.centers[1] - self.centers[0]) if len(self) > 1 else None

    def at(self, center):
        i = np.searchsorted(self.centers, center)
        if i >= self.centers.size or self.centers[i] != center:
            raise KeyError(center)
        return float(self.values[i])


def _as_samples(samples):
    arr = np.asarray(samples, dtype=float).reshape(-1)
    if arr.size == 0:
        raise EmptyInput("samples must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteSample("samples must be finite")
    return arr


def _bins(arr, zeta):
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    f = np.floor((arr - BIN_ORIGIN) / zeta)
    if f.size and np.abs(f).max() >= 2.0 ** 62:
        # indices beyond int64: only equality matters downstream, so use dense ranks
        _, rank = np.unique(f, return_inverse=True)
        return rank.reshape(f.shape).astype(np.int64)
    return f.astype(np.int64)


def _pair_keys(bx, by):
    # injective mixed-radix code for (bx, by) pairs
    lo_x, lo_y = int(bx.min()), int(by.min())
    nx, ny = int(bx.max()) - lo_x + 1, int(by.max()) - lo_y + 1
    if nx * ny >= 2 ** 62:
        # extreme value ranges: fall back to dense ranks
        _, ix = np.unique(bx, return_inverse=True)
        _, iy = np.unique(by, return_inverse=True)
        lo_x = lo_y = 0
        bx, by = ix.reshape(bx.shape).astype(np.int64), iy.reshape(by.shape).astype(np.int64)
        ny = int(by.max()) + 1
    return (bx - lo_x) * ny + (by - lo_y)


def _row_entropies(keys):
    """Plug-in entropy (nats, epsilon = 1) of each row of an integer key matrix."""
    keys = np.asarray(keys)
    n_rows, m = keys.shape
    s = np.sort(keys, axis=1)
    brk = np.empty((n_rows, m), dtype=bool)
    brk[:, 0] = True
    np.not_equal(s[:, 1:], s[:, :-1], out=brk[:, 1:])
    starts = np.flatnonzero(brk.ravel())
    counts = np.diff(np.append(starts, n_rows * m))
    rows = starts // m
    order = np.lexsort((counts, rows))
    p = counts[order] / m
    terms = p * np.log(p)
    first = np.searchsorted(rows[order], np.arange(n_rows))
    return 0.0 - np.add.reduceat(terms, first)


def build_histogram(samples, zeta) -> Histogram1D:
    arr = _as_samples(samples)
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    idx, cnt = np.unique(np.floor((arr - BIN_ORIGIN) / zeta), return_counts=True)
    counts = {int(i): int(c) for i, c in zip(idx, cnt)}
    return Histogram1D(BIN_ORIGIN, float(zeta), counts, int(arr.size))


def window_entropy(samples, zeta, epsilon=1.0) -> float:
    """Entropy ``-epsilon * sum p ln p`` of one window of samples."""
    arr = _as_samples(samples)
    return float(epsilon * _row_entropies(_bins(arr, zeta)[None, :])[0])


def _paired(x, y):
    x = _as_samples(x)
    y = _as_samples(y)
    if x.size != y.size:
        raise LengthMismatch(f"length mismatch: {x.size} vs {y.size}")
    return x, y


def joint_entropy(x, y, zeta, epsilon=1.0) -> float:
    """Entropy of the pairs ``(x_k, y_k)`` under the same bin width on both axes."""
    x, y = _paired(x, y)
    keys = _pair_keys(_bins(x, zeta), _bins(y, zeta))
    return float(epsilon * _row_entropies(keys[None, :])[0])


def mutual_information(x, y, zeta, epsilon=1.0) -> float:
    x, y = _paired(x, y)
    bx, by = _bins(x, zeta), _bins(y, zeta)
    h = _row_entropies(np.stack([bx, by, _pair_keys(bx, by)]))
    return float(epsilon * h[0] + epsilon * h[1] - epsilon * h[2])


def _check_signal(arr, cfg):
    if arr.size < cfg.phi:
        raise SignalTooShort(f"signal has {arr.size} samples, window needs {cfg.phi}")


def _windows(keys, centers, half):
    view = sliding_window_view(keys, 2 * half)
    return view[np.asarray(centers, dtype=np.int64) - half]


def _resolve_centers(n, cfg, centers):
    if centers is None:
        return cfg.centers(n)
    centers = np.asarray(centers, dtype=np.int64)
    if centers.size and (centers.min() < cfg.half or centers.max() > n - cfg.half):
        raise SignalTooShort("window center out of range")
    return centers


def entropy_series(signal, cfg: WindowConfig, centers=None) -> ScalarSeries:
    """Windowed entropy, one value per center ``phi/2, phi/2 + stride, ...``."""
    arr = _as_samples(signal)
    _check_signal(arr, cfg)
    centers = _resolve_centers(arr.size, cfg, centers)
    if centers.size == 0:
        return ScalarSeries(centers, [])
    keys = _windows(_bins(arr, cfg.zeta), centers, cfg.half)
    return ScalarSeries(centers, cfg.epsilon * _row_entropies(keys))


def _mi_values(x, y, centers, cfg):
    bx, by = _bins(x, cfg.zeta), _bins(y, cfg.zeta)
    bxy = _pair_keys(bx, by)
    eps = cfg.epsilon
    hx = eps * _row_entropies(_windows(bx, centers, cfg.half))
    hy = eps * _row_entropies(_windows(by, centers, cfg.half))
    hxy = eps * _row_entropies(_windows(bxy, centers, cfg.half))
    return hx + hy - hxy


def mi_series(x, y, cfg: WindowConfig, centers=None) -> ScalarSeries:
    x, y = _paired(x, y)
    _check_signal(x, cfg)
    centers = _resolve_centers(x.size, cfg, centers)
    if centers.size == 0:
        return ScalarSeries(centers, [])
    return ScalarSeries(centers, _mi_values(x, y, centers, cfg))


def mi_3d(a, b, cfg: WindowConfig, centers=None) -> ScalarSeries:
    """Per-window sum of the x, y and z mutual information of two tracks.

    ``a`` and ``b`` may be :class:`~infoscene.trajectory.EntityTrack` objects
    or ``(n, >=3)`` position arrays.
    """
    pa = np.asarray(getattr(a, "positions", a), dtype=float)
    pb = np.asarray(getattr(b, "positions", b), dtype=float)
    if pa.shape[0] != pb.shape[0]:
        raise LengthMismatch(f"track lengths differ: {pa.shape[0]} vs {pb.shape[0]}")
    if pa.shape[0] < cfg.phi:
        raise SignalTooShort(f"tracks have {pa.shape[0]} frames, window needs {cfg.phi}")
    centers = _resolve_centers(pa.shape[0], cfg, centers)
    total = np.zeros(centers.size)
    if centers.size:
        for axis in range(3):
            total = total + _mi_values(_as_samples(pa[:, axis]), _as_samples(pb[:, axis]), centers, cfg)
    return ScalarSeries(centers, total)


def series_derivative(s: ScalarSeries, frame_rate=1.0, smoothing=1) -> ScalarSeries:
    """Time derivative of a window series.

    Central differences on interior points, one-sided differences at the
    ends. With ``frame_rate`` in Hz the result is per second; the default of
    1.0 gives per-frame units. ``smoothing > 1`` applies a boxcar of that width
    first.
    """
    if len(s) < 3:
        raise SeriesTooShort(f"need at least 3 values, got {len(s)}")
    v = s.values
    if smoothing > 1:
        v = uniform_filter1d(v, size=smoothing, mode="nearest")
    t = s.centers / float(frame_rate)
    return ScalarSeries(s.centers, np.gradient(v, t, edge_order=1))


def series_to_csv(s: ScalarSeries) -> str:
    rows = ["center_frame,value"]
    rows += [f"{c},{v!r}" for c, v in s]
    return "\n".join(rows) + "\n"
