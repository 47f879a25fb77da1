"""Analysis parameters shared by the estimators and detectors."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from .errors import InvalidConfig


def _positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise InvalidConfig(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class WindowConfig:
    """Sliding-window estimator settings.

    Parameters
    ----------
    phi : int
        Window length in frames (even, >= 2). The window for center ``t``
        covers frames ``[t - phi/2, t + phi/2)``.
    stride : int
        Frames between consecutive window centers.
    zeta : float
        Histogram bin width in meters; bins are anchored at 0.0.
    epsilon : float
        Positive scale applied to every entropy term. ``1 / ln 2`` gives bits.
    smoothing : int
        Boxcar width applied to series before differentiating (1 = off).
    """

    phi: int = 20
    stride: int = 1
    zeta: float = 0.01
    epsilon: float = 1.0
    smoothing: int = 1

    def __post_init__(self):
        if isinstance(self.phi, bool) or not isinstance(self.phi, int) or self.phi < 2 or self.phi % 2:
            raise InvalidConfig(f"phi must be an even integer >= 2, got {self.phi!r}")
        if isinstance(self.stride, bool) or not isinstance(self.stride, int) or self.stride < 1:
            raise InvalidConfig(f"stride must be an integer >= 1, got {self.stride!r}")
        if isinstance(self.smoothing, bool) or not isinstance(self.smoothing, int) or self.smoothing < 1:
            raise InvalidConfig(f"smoothing must be an integer >= 1, got {self.smoothing!r}")
        _positive("zeta", self.zeta)
        _positive("epsilon", self.epsilon)

    @property
    def half(self) -> int:
        return self.phi // 2

    def centers(self, n_frames):
        """Window centers for a signal of ``n_frames`` samples."""
        import numpy as np

        if n_frames < self.phi:
            return np.zeros(0, dtype=np.int64)
        return np.arange(self.half, n_frames - self.half + 1, self.stride, dtype=np.int64)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Thresholds:
    """Interaction-detection thresholds.

    The defaults separate the coupled and uncoupled regimes of the bundled
    synthetic generator; treat them as tuning knobs for other data.
    """

    alpha_mi: float = 0.05
    gamma_mi: float = 0.15
    r_th_ho: float = 0.10
    r_th_oo: float = 0.05
    min_event_centers: int = 2

    def __post_init__(self):
        for f in ("alpha_mi", "gamma_mi", "r_th_ho", "r_th_oo"):
            _positive(f, getattr(self, f))
        if self.alpha_mi > self.gamma_mi:
            raise InvalidConfig("alpha_mi must not exceed gamma_mi")
        m = self.min_event_centers
        if isinstance(m, bool) or not isinstance(m, int) or m < 1:
            raise InvalidConfig("min_event_centers must be an integer >= 1")

    def to_dict(self):
        return asdict(self)


def from_mapping(cls, data, where):
    """Build a frozen config dataclass, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise InvalidConfig(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InvalidConfig(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise InvalidConfig(f"{where}: {exc}") from None
