"""Random instance generation for the real-valued quantized MIMO channel.

A transmission is y = H x + noise followed by elementwise scalar quantization
r = Q(y).  Entries of H are i.i.d. Gaussian with variance 1/N so that the
per-antenna receive signal power is beta * c_x + sigma0^2 with beta = K/N.

Reproducibility: every random object is derived from integer seeds through
``numpy.random.SeedSequence``.  Monte Carlo harnesses derive per-trial
sub-seeds with :func:`subseed` so trials are independent of execution order.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .quantizer import INFINITE_RESOLUTION, InfiniteResolution, QuantizerSpec, quantize


@dataclass(frozen=True)
class Prior:
    """Discrete zero-mean symbol prior over a finite support."""

    support: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        support = tuple(float(s) for s in self.support)
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)
        if len(support) != len(weights) or len(support) < 2:
            raise ValueError("prior needs matching support/weights with >= 2 symbols")
        if any(w <= 0 for w in weights):
            raise ValueError("prior weights must be positive")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError("prior weights must sum to 1")
        if abs(self.mean) > 1e-12:
            raise ValueError(f"prior must have zero mean, got {self.mean}")
        if len(set(support)) != len(support):
            raise ValueError("prior support values must be distinct")

    @property
    def mean(self) -> float:
        return float(np.dot(self.support, self.weights))

    @property
    def c_x(self) -> float:
        """Prior variance (second moment, since the mean is zero)."""
        s = np.asarray(self.support)
        return float(np.dot(s * s, self.weights))

    @property
    def is_bpsk(self) -> bool:
        return set(self.support) == {-1.0, 1.0} and self.weights == (0.5, 0.5)

    @classmethod
    def bpsk(cls) -> "Prior":
        return cls(support=(-1.0, 1.0), weights=(0.5, 0.5))


@dataclass(frozen=True)
class SystemConfig:
    """Antenna counts, noise level, symbol prior and receiver quantizer."""

    K: int
    N: int
    sigma0: float
    prior: Prior
    quantizer: QuantizerSpec | InfiniteResolution

    def __post_init__(self):
        if self.K < 1 or self.N < 1:
            raise ValueError("K and N must be >= 1")
        if self.sigma0 < 0:
            raise ValueError("sigma0 must be >= 0")

    @property
    def beta(self) -> float:
        return self.K / self.N


@dataclass
class ChannelInstance:
    """One realized transmission: matrix, symbols, analog and quantized outputs."""

    H: np.ndarray
    x: np.ndarray
    y: np.ndarray
    r: np.ndarray


def subseed(master_seed: int, *path: int) -> np.random.SeedSequence:
    """Deterministic sub-seed for a trial: entropy (master_seed, *path)."""
    return np.random.SeedSequence([int(master_seed), *map(int, path)])


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(int(seed))


def gen_channel(cfg: SystemConfig, seed) -> np.ndarray:
    """N x K matrix with i.i.d. Gaussian entries of variance 1/N."""
    rng = _rng(seed)
    return rng.normal(0.0, 1.0 / np.sqrt(cfg.N), size=(cfg.N, cfg.K))


def simulate(cfg: SystemConfig, H: np.ndarray, seed) -> ChannelInstance:
    """Draw symbols and noise, push through the channel and the quantizer."""
    if H.shape != (cfg.N, cfg.K):
        raise ValueError(f"H has shape {H.shape}, expected {(cfg.N, cfg.K)}")
    rng = _rng(seed)
    support = np.asarray(cfg.prior.support)
    x = rng.choice(support, size=cfg.K, p=cfg.prior.weights)
    y = H @ x
    if cfg.sigma0 > 0:
        y = y + rng.normal(0.0, cfg.sigma0, size=cfg.N)
    if isinstance(cfg.quantizer, InfiniteResolution):
        r = y.copy()
    else:
        r = quantize(y, cfg.quantizer)
    return ChannelInstance(H=H, x=x, y=y, r=r)


def snr_to_sigma0(snr_db: float) -> float:
    """Noise std for SNR defined as 10*log10(1/sigma0^2)."""
    return 10.0 ** (-snr_db / 20.0)


def sigma0_to_snr(sigma0: float) -> float:
    return -20.0 * np.log10(sigma0)


# ---------------------------------------------------------------------------
# instance dump format: plain CSV blocks, one header row per field, used for
# cross-implementation spot checks
# ---------------------------------------------------------------------------

def instance_to_csv(inst: ChannelInstance) -> str:
    buf = io.StringIO()
    N, K = inst.H.shape
    buf.write(f"H,{N},{K}\n")
    for row in inst.H:
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    for name, vec in (("x", inst.x), ("y", inst.y), ("r", inst.r)):
        buf.write(f"{name},{len(vec)}\n")
        buf.write(",".join(f"{v:.17g}" for v in vec) + "\n")
    return buf.getvalue()


def instance_from_csv(text: str) -> ChannelInstance:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    pos = 0
    fields: dict[str, np.ndarray] = {}
    while pos < len(lines):
        header = lines[pos].split(",")
        name = header[0]
        if name == "H":
            n_rows = int(header[1])
            rows = [
                [float(v) for v in lines[pos + 1 + i].split(",")] for i in range(n_rows)
            ]
            fields["H"] = np.asarray(rows)
            pos += 1 + n_rows
        else:
            fields[name] = np.asarray([float(v) for v in lines[pos + 1].split(",")])
            pos += 2
    missing = {"H", "x", "y", "r"} - set(fields)
    if missing:
        raise ValueError(f"instance dump is missing blocks: {sorted(missing)}")
    return ChannelInstance(H=fields["H"], x=fields["x"], y=fields["y"], r=fields["r"])
