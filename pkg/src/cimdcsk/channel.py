"""Real-valued baseband channels: AWGN, tapped-delay-line Rayleigh, tag cascade.

Taps are held constant over a symbol and redrawn for the next one. Two delay
models are offered:

``apply``
    Linear tapped delay line over the whole symbol with zeros before chip 0.
    Delayed energy crosses replica boundaries, so wherever neighbouring
    replicas differ in sign a few chips are corrupted.
``apply_cyclic``
    The delay line acts on each replica separately with circular wrap. This is
    the interference-free idealization for delay spreads much shorter than the
    symbol: every replica sees the same multipath-filtered copy of ``x`` and no
    energy leaks between replicas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidParameterError


@dataclass(frozen=True)
class ChannelProfile:
    """Per-tap mean powers ``E[c_i**2]`` and integer chip delays.

    ``path_loss`` is informational: the loss is already folded into
    ``mean_powers`` so that ``sum(mean_powers) == path_loss``.
    """

    mean_powers: tuple[float, ...]
    delays: tuple[int, ...]

    def __post_init__(self):
        powers = tuple(float(p) for p in self.mean_powers)
        delays = tuple(int(d) for d in self.delays)
        if not powers or len(powers) != len(delays):
            raise InvalidParameterError("mean_powers and delays must be non-empty and of equal length")
        if any(p < 0 for p in powers) or sum(powers) <= 0:
            raise InvalidParameterError(f"tap powers must be non-negative with positive sum: {powers}")
        if delays[0] != 0 or any(b < a for a, b in zip(delays, delays[1:])):
            raise InvalidParameterError(f"delays must start at 0 and be nondecreasing: {delays}")
        object.__setattr__(self, "mean_powers", powers)
        object.__setattr__(self, "delays", delays)

    @classmethod
    def equal_gain(cls, delays, total_power: float = 1.0) -> "ChannelProfile":
        n = len(delays)
        return cls(tuple([total_power / n] * n), tuple(delays))

    @property
    def paths(self) -> int:
        return len(self.delays)

    @property
    def path_loss(self) -> float:
        return float(sum(self.mean_powers))

    @property
    def max_delay(self) -> int:
        return self.delays[-1]

    @property
    def is_equal_gain(self) -> bool:
        return bool(np.allclose(self.mean_powers, self.mean_powers[0], rtol=1e-12, atol=0.0))

    def to_text(self) -> str:
        """``power@delay`` pairs separated by commas, the config file format."""
        return ",".join(f"{p!r}@{d}" for p, d in zip(self.mean_powers, self.delays))

    @classmethod
    def from_text(cls, text: str) -> "ChannelProfile":
        try:
            pairs = [item.split("@") for item in text.replace(" ", "").split(",") if item]
            return cls(tuple(float(p) for p, _ in pairs), tuple(int(d) for _, d in pairs))
        except ValueError as exc:
            raise InvalidParameterError(f"bad channel profile {text!r}: expected power@delay,...") from exc


IDENTITY = ChannelProfile((1.0,), (0,))


@dataclass(frozen=True)
class ChannelRealization:
    """Tap gains (last axis) for one or a batch of symbols."""

    coefficients: np.ndarray
    delays: tuple[int, ...]
    fading: bool = True

    @classmethod
    def fixed(cls, coefficients, delays=None) -> "ChannelRealization":
        coefficients = np.atleast_1d(np.asarray(coefficients, dtype=float))
        delays = tuple(range(coefficients.shape[-1])) if delays is None else tuple(delays)
        return cls(coefficients, delays, fading=False)


def draw(profile: ChannelProfile, rng: np.random.Generator, size=None) -> ChannelRealization:
    """Independent Rayleigh tap magnitudes with ``E[c_i**2] = mean_powers[i]``.

    With ``size`` given, coefficients get shape ``size + (paths,)``.
    """
    shape = (() if size is None else tuple(np.atleast_1d(size))) + (profile.paths,)
    g = rng.standard_normal((2,) + shape)
    coef = np.sqrt(np.asarray(profile.mean_powers) * 0.5 * (g[0] ** 2 + g[1] ** 2))
    return ChannelRealization(coef, profile.delays)


def apply(signal, realization: ChannelRealization) -> np.ndarray:
    """Tapped delay line ``out[k] = sum_i c_i * signal[k - d_i]`` with zero fill."""
    signal = np.asarray(signal, dtype=float)
    n = signal.shape[-1]
    if realization.delays[-1] >= n:
        raise InvalidParameterError(f"delay {realization.delays[-1]} >= signal length {n}")
    coef = np.asarray(realization.coefficients, dtype=float)
    out = np.zeros(np.broadcast_shapes(signal.shape, coef.shape[:-1] + (n,)))
    for i, d in enumerate(realization.delays):
        c = coef[..., i, None]
        if d == 0:
            out += c * signal
        else:
            out[..., d:] += c * signal[..., :-d]
    return out


def apply_cyclic(signal, realization: ChannelRealization, period: int) -> np.ndarray:
    """Tapped delay line applied to each ``period``-chip segment with circular wrap."""
    signal = np.asarray(signal, dtype=float)
    n = signal.shape[-1]
    if period < 1 or n % period:
        raise InvalidParameterError(f"signal length {n} is not a multiple of period {period}")
    if realization.delays[-1] >= period:
        raise InvalidParameterError(f"delay {realization.delays[-1]} >= segment length {period}")
    view = signal.reshape(signal.shape[:-1] + (n // period, period))
    coef = np.asarray(realization.coefficients, dtype=float)
    out = 0.0
    for i, d in enumerate(realization.delays):
        out = out + coef[..., i, None, None] * np.roll(view, d, axis=-1)
    return out.reshape(out.shape[:-2] + (n,))


def add_awgn(signal, N0: float, rng: np.random.Generator) -> np.ndarray:
    """Add white Gaussian noise of variance ``N0 / 2`` per chip."""
    if N0 < 0:
        raise InvalidParameterError(f"N0 must be non-negative, got {N0}")
    signal = np.asarray(signal, dtype=float)
    if N0 == 0:
        return signal.copy()
    return signal + rng.normal(0.0, np.sqrt(N0 / 2.0), size=signal.shape)


def backscatter_cascade(
    tx,
    f_real: ChannelRealization,
    g_real: ChannelRealization,
    tag: Callable[[np.ndarray], np.ndarray],
    period: int | None = None,
) -> np.ndarray:
    """Transmitter -> channel f -> tag reflection -> channel g.

    The tag's blockwise sign pattern is applied to the f-distorted waveform on
    the nominal replica boundaries. With ``period`` given both hops use
    :func:`apply_cyclic` on segments of that length; otherwise :func:`apply`,
    where chips smeared across a boundary are reflected with the next
    replica's sign.
    """
    if period is None:
        return apply(tag(apply(tx, f_real)), g_real)
    return apply_cyclic(tag(apply_cyclic(tx, f_real, period)), g_real, period)
