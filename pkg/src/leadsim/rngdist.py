"""Seedable random streams, lead-time laws and the standard-normal quantile."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Substitute for an exact 0.0 draw, so uniforms lie in the open interval (0, 1).
_TINY = 2.0 ** -54

# Kernel codes for LeadTimeSpec.kind, shared with the compiled event loop.
EXPONENTIAL = 0
SHIFTED_EXPONENTIAL = 1
UNIFORM = 2
PARETO = 3
DETERMINISTIC = 4

_KIND_CODES = {
    "exponential": EXPONENTIAL,
    "shifted_exponential": SHIFTED_EXPONENTIAL,
    "uniform": UNIFORM,
    "pareto": PARETO,
    "deterministic": DETERMINISTIC,
}


class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Backed by PCG64 seeded through :class:`numpy.random.SeedSequence`, with the
    stream id used as spawn key, so distinct ids give independent streams and
    the same pair gives the same sequence on every platform.
    """

    def __init__(self, seed: int = 0, stream_id: int = 0, *, substream: int | None = None):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = (self.stream_id,) if substream is None else (self.stream_id, int(substream))
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=key)))

    def child(self, index: int) -> "RngStream":
        """Independent sub-stream, e.g. one for demands and one for lead times."""
        return RngStream(self.seed, self.stream_id, substream=index)

    def uniform(self) -> float:
        """One draw from the open interval (0, 1)."""
        u = float(self._gen.random())
        return u if u > 0.0 else _TINY

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` open-interval uniforms; same values as ``n`` calls to :meth:`uniform`."""
        u = self._gen.random(n)
        u[u == 0.0] = _TINY
        return u

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


@dataclass(frozen=True)
class LeadTimeSpec:
    """A lead-time law. Build with the classmethods rather than directly."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown lead-time kind {self.kind!r}")
        p = self.params
        try:
            if self.kind == "exponential":
                _positive(p["mean"], "mean")
            elif self.kind == "shifted_exponential":
                _positive(p["shift"], "shift")
                _positive(p["mean_exp"], "mean_exp")
            elif self.kind == "uniform":
                if not (p["lo"] >= 0 and p["hi"] > p["lo"]):
                    raise ValueError("uniform lead time needs 0 <= lo < hi")
            elif self.kind == "pareto":
                if not p["q"] > 1:
                    raise ValueError("pareto lead time needs q > 1 for a finite mean")
                _positive(p["tau"], "tau")
            else:
                _positive(p["d"], "d")
        except KeyError as exc:
            raise ValueError(f"{self.kind} lead time is missing parameter {exc}") from None

    @classmethod
    def exponential(cls, mean: float) -> "LeadTimeSpec":
        return cls("exponential", {"mean": float(mean)})

    @classmethod
    def shifted_exponential(cls, shift: float, mean_exp: float) -> "LeadTimeSpec":
        return cls("shifted_exponential", {"shift": float(shift), "mean_exp": float(mean_exp)})

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "LeadTimeSpec":
        return cls("uniform", {"lo": float(lo), "hi": float(hi)})

    @classmethod
    def pareto(cls, q: float, tau: float) -> "LeadTimeSpec":
        return cls("pareto", {"q": float(q), "tau": float(tau)})

    @classmethod
    def deterministic(cls, d: float) -> "LeadTimeSpec":
        return cls("deterministic", {"d": float(d)})

    @classmethod
    def from_dict(cls, data: dict) -> "LeadTimeSpec":
        params = {k: float(v) for k, v in data.get("params", {}).items()}
        return cls(data["kind"], params)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @property
    def code(self) -> int:
        return _KIND_CODES[self.kind]

    @property
    def is_exponential(self) -> bool:
        return self.kind == "exponential"

    def mean(self) -> float:
        p = self.params
        if self.kind == "exponential":
            return p["mean"]
        if self.kind == "shifted_exponential":
            return p["shift"] + p["mean_exp"]
        if self.kind == "uniform":
            return 0.5 * (p["lo"] + p["hi"])
        if self.kind == "pareto":
            return 1.0 / (p["tau"] * (p["q"] - 1.0))
        return p["d"]

    def kernel_params(self) -> tuple[int, float, float]:
        """``(code, a, b)`` triple consumed by :func:`quantile_code`."""
        p = self.params
        if self.kind == "exponential":
            return EXPONENTIAL, p["mean"], 0.0
        if self.kind == "shifted_exponential":
            return SHIFTED_EXPONENTIAL, p["shift"], p["mean_exp"]
        if self.kind == "uniform":
            return UNIFORM, p["lo"], p["hi"]
        if self.kind == "pareto":
            return PARETO, p["q"], p["tau"]
        return DETERMINISTIC, p["d"], 0.0

    def quantile(self, u):
        """Inverse CDF; vectorised over ``u`` in (0, 1)."""
        code, a, b = self.kernel_params()
        u = np.asarray(u, dtype=float)
        if code == EXPONENTIAL:
            return -a * np.log1p(-u)
        if code == SHIFTED_EXPONENTIAL:
            return a - b * np.log1p(-u)
        if code == UNIFORM:
            return a + (b - a) * u
        if code == PARETO:
            return ((1.0 - u) ** (-1.0 / a) - 1.0) / b
        return np.full_like(u, a)

    def cdf(self, x):
        code, a, b = self.kernel_params()
        x = np.asarray(x, dtype=float)
        if code == EXPONENTIAL:
            return np.where(x > 0, -np.expm1(-np.maximum(x, 0) / a), 0.0)
        if code == SHIFTED_EXPONENTIAL:
            return np.where(x > a, -np.expm1(-np.maximum(x - a, 0) / b), 0.0)
        if code == UNIFORM:
            return np.clip((x - a) / (b - a), 0.0, 1.0)
        if code == PARETO:
            return np.where(x > 0, 1.0 - (1.0 + b * np.maximum(x, 0)) ** (-a), 0.0)
        return np.where(x >= a, 1.0, 0.0)


def _positive(value, name):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")


def quantile_code(code: int, a: float, b: float, u: float) -> float:
    """Scalar inverse CDF by kernel code; mirrors the compiled event loop."""
    if code == EXPONENTIAL:
        return -a * math.log1p(-u)
    if code == SHIFTED_EXPONENTIAL:
        return a - b * math.log1p(-u)
    if code == UNIFORM:
        return a + (b - a) * u
    if code == PARETO:
        return ((1.0 - u) ** (-1.0 / a) - 1.0) / b
    return a


def sample_leadtime(spec: LeadTimeSpec, rng: RngStream) -> float:
    """Draw one lead time by inversion of a single uniform."""
    code, a, b = spec.kernel_params()
    return quantile_code(code, a, b, rng.uniform())


def exp_interarrival(rate: float, rng: RngStream, size: int | None = None):
    """Exponential gap with mean ``1/rate``; always strictly positive.

    With ``size`` returns an array equal to ``size`` successive scalar draws.
    """
    if not rate > 0:
        raise ValueError("rate must be positive")
    if size is None:
        return -math.log(rng.uniform()) / rate
    return -np.log(rng.uniforms(size)) / rate


# Acklam's rational approximation (relative error ~1e-9 before refinement).
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def inv_norm_cdf(p: float) -> float:
    """Standard normal quantile, accurate to about 1e-15 in the bulk.

    Rational approximation followed by one Halley step on the erfc-based CDF.
    Upper-half arguments are reflected so the refinement works on the small tail.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if p > 0.5:
        return -inv_norm_cdf(1.0 - p)
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    else:
        q = p - 0.5
        s = q * q
        x = (((((_A[0] * s + _A[1]) * s + _A[2]) * s + _A[3]) * s + _A[4]) * s + _A[5]) * q / \
            (((((_B[0] * s + _B[1]) * s + _B[2]) * s + _B[3]) * s + _B[4]) * s + 1.0)
    e = norm_cdf(x) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)
