"""Uniform symmetric mid-riser scalar quantizer.

The quantizer maps a real input to one of 2^b reproduction levels spaced by a
step Delta and offset half a step from zero, so zero is a decision threshold
rather than an output level.  The two extreme cells are half-lines (the
quantizer saturates).  Cells are half-open [low, up): an input exactly on a
threshold maps to the upper level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtr


class InfiniteResolution:
    """Marker for the unquantized (infinite bit depth) reference channel."""

    def __repr__(self):
        return "InfiniteResolution()"


#: Shared marker instance; code tests with ``isinstance(q, InfiniteResolution)``.
INFINITE_RESOLUTION = InfiniteResolution()


@dataclass(frozen=True)
class QuantizerSpec:
    """Bit depth, step size and derived output alphabet of a mid-riser quantizer."""

    bits: int
    step: float
    levels: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError(f"bits must be >= 1, got {self.bits}")
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError(f"step must be a positive finite real, got {self.step}")
        n = 2 ** self.bits
        levels = (np.arange(1, n + 1) - n / 2 - 0.5) * self.step
        object.__setattr__(self, "levels", levels)

    @property
    def n_levels(self) -> int:
        return 2 ** self.bits

    def level_index(self, r: float) -> int:
        """Index of r in the output alphabet; raises for values not in it."""
        i = int(round(r / self.step + self.n_levels / 2 - 0.5))
        if not 0 <= i < self.n_levels:
            raise ValueError(f"{r} is not a quantizer output level")
        if abs(self.levels[i] - r) > 1e-9 * self.step:
            raise ValueError(f"{r} is not a quantizer output level")
        return i

    def boundaries(self) -> np.ndarray:
        """All 2^b + 1 cell boundaries including the infinite extremes."""
        inner = (self.levels[:-1] + self.levels[1:]) / 2.0
        return np.concatenate(([-np.inf], inner, [np.inf]))


def quantize(y, spec: QuantizerSpec):
    """Map input(s) to the nearest reproduction level, saturating outside the range.

    Accepts scalars or arrays; a NaN input violates the contract and raises.
    """
    y = np.asarray(y, dtype=float)
    if np.isnan(y).any():
        raise ValueError("quantize received NaN input")
    half = spec.n_levels // 2
    idx = np.clip(np.floor(y / spec.step) + half, 0, spec.n_levels - 1).astype(int)
    out = spec.levels[idx]
    if out.ndim == 0:
        return float(out)
    return out


def cell_bounds(r: float, spec: QuantizerSpec) -> tuple[float, float]:
    """Lower/upper boundary of the cell mapping to level r; extremes are infinite."""
    i = spec.level_index(r)
    low = -np.inf if i == 0 else r - spec.step / 2.0
    up = np.inf if i == spec.n_levels - 1 else r + spec.step / 2.0
    return low, up


def _phi(x):
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def distortion(step: float, bits: int, input_std: float = 1.0) -> float:
    """Mean squared quantization error for a zero-mean Gaussian input.

    Uses the closed-form Gaussian partial moments on each cell, so there is no
    quadrature truncation.
    """
    spec = QuantizerSpec(bits=bits, step=step)
    bnds = spec.boundaries() / input_std
    r = spec.levels / input_std
    a, b = bnds[:-1], bnds[1:]
    pa, pb = _phi(a), _phi(b)
    ca, cb = ndtr(a), ndtr(b)
    # a*phi(a) with a = -inf contributes 0
    apa = np.where(np.isinf(a), 0.0, a) * pa
    bpb = np.where(np.isinf(b), 0.0, b) * pb
    mass = cb - ca
    second = mass + apa - bpb          # E[Y^2 ; cell]
    first = pa - pb                    # E[Y ; cell]
    per_cell = second - 2.0 * r * first + r * r * mass
    return float(np.sum(per_cell)) * input_std ** 2


def optimal_step(bits: int, input_std: float) -> float:
    """Distortion-minimizing step size for a Gaussian input of the given std.

    Scale-equivariant: the result is input_std times the unit-variance optimum.
    """
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    if not input_std > 0:
        raise ValueError(f"input_std must be positive, got {input_std}")
    # bracketing grid, then golden-section refinement
    grid = np.linspace(0.05, 4.0, 100)
    vals = [distortion(d, bits) for d in grid]
    k = int(np.argmin(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    bracket = (lo, grid[k], hi) if lo < grid[k] < hi else (lo, hi)
    res = minimize_scalar(
        lambda d: distortion(d, bits),
        bracket=bracket,
        method="golden",
        options={"xtol": 1e-6},
    )
    if not res.success and not math.isfinite(res.x):
        raise ArithmeticError(f"step-size minimization failed for bits={bits}: {res}")
    return float(res.x) * input_std
