"""Chebyshev-map chaotic reference sequences.

Every DCSK symbol carries one length-L chaotic sequence. Sequences come from
the second-order Chebyshev map ``x -> 1 - 2 x**2`` whose invariant density on
[-1, 1] has mean square 1/2; chips are scaled by sqrt(2) so the long-run chip
power is 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

WARMUP = 64
SCALE = np.sqrt(2.0)

# Starting points whose orbit lands on a fixed point (0.5 or -1) within a step
# or two: the fixed points themselves and their first preimages.
_DEGENERATE_STARTS = np.array([-1.0, -0.5, 0.0, 0.5, 1.0, -np.sqrt(0.5), np.sqrt(0.5)])
_NUDGE = 0.0137


@dataclass(frozen=True)
class ChaoticSequence:
    """A length-L block of chaotic chips with unit mean-square normalization."""

    chips: np.ndarray

    def __post_init__(self):
        chips = np.asarray(self.chips, dtype=float)
        if chips.ndim != 1 or chips.size == 0:
            raise InvalidParameterError("chaotic sequence must be a non-empty 1-D vector")
        chips.setflags(write=False)
        object.__setattr__(self, "chips", chips)

    @property
    def L(self) -> int:
        return self.chips.size

    def __len__(self):
        return self.chips.size

    def __array__(self, dtype=None, copy=None):
        return self.chips if dtype is None else self.chips.astype(dtype)


def _sanitize_starts(x0: np.ndarray) -> np.ndarray:
    x0 = np.array(x0, dtype=float, copy=True)
    bad = np.isclose(x0[..., None], _DEGENERATE_STARTS, rtol=0.0, atol=1e-12).any(-1)
    bad |= ~np.isfinite(x0) | (np.abs(x0) >= 1.0)
    while bad.any():
        x0[bad] = np.clip(x0[bad], -0.99, 0.99) * 0.5 + _NUDGE
        bad = np.isclose(x0[..., None], _DEGENERATE_STARTS, rtol=0.0, atol=1e-12).any(-1)
    return x0


def chebyshev_orbit(x0, length: int, warmup: int = WARMUP) -> np.ndarray:
    """Iterate the Chebyshev map from ``x0`` and return scaled chips.

    ``x0`` may be a scalar or an array of starting points; the result has shape
    ``x0.shape + (length,)``. No sanitizing is done here, so a fixed-point start
    produces a constant orbit.
    """
    if length < 1:
        raise InvalidParameterError(f"sequence length must be >= 1, got {length}")
    x = np.array(x0, dtype=float, copy=True)
    for _ in range(warmup):
        x = 1.0 - 2.0 * x * x
    out = np.empty(x.shape + (length,))
    for k in range(length):
        x = 1.0 - 2.0 * x * x
        out[..., k] = x
    return SCALE * out


def _stuck_rows(chips: np.ndarray) -> np.ndarray:
    if chips.shape[1] < 2:
        return np.zeros(chips.shape[0], dtype=bool)
    return np.all(np.diff(chips, axis=1) == 0.0, axis=1)


def chebyshev_block(rng: np.random.Generator, count: int, L: int) -> np.ndarray:
    """Draw ``count`` independent chaotic sequences as a ``(count, L)`` array."""
    if count < 1:
        raise InvalidParameterError(f"count must be >= 1, got {count}")
    if L < 1:
        raise InvalidParameterError(f"L must be >= 1, got {L}")
    starts = _sanitize_starts(rng.uniform(-1.0, 1.0, size=count))
    chips = chebyshev_orbit(starts, L)
    # float rounding can still drop an orbit onto -1; re-seed those rows
    stuck = _stuck_rows(chips)
    while stuck.any():
        starts[stuck] = _sanitize_starts(starts[stuck] * 0.5 + _NUDGE)
        chips[stuck] = chebyshev_orbit(starts[stuck], L)
        stuck = _stuck_rows(chips)
    return chips


def per_symbol_sequences(count: int, L: int, seed: int) -> list[ChaoticSequence]:
    """Independent sequences for ``count`` consecutive symbols from one seeded stream."""
    rng = np.random.default_rng(seed)
    return [ChaoticSequence(row) for row in chebyshev_block(rng, count, L)]


def generate(L: int, seed: int) -> ChaoticSequence:
    """One chaotic sequence of ``L`` chips, deterministic in ``seed``."""
    if L < 1:
        raise InvalidParameterError(f"L must be >= 1, got {L}")
    return per_symbol_sequences(1, L, seed)[0]
