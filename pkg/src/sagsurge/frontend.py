"""Analog conditioning stage and ADC model.

The conditioning stage divides mains voltage by ``attenuation`` and adds a DC
``offset`` so the signal fits the converter input range.  The converter maps
``[0, adc_reference]`` onto codes ``[0, 2**bits - 1]`` with round half away
from zero and clamps anything outside, flagging the sample as saturated.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .waveform import Scenario, synthesize


class HeadroomWarning(UserWarning):
    """The scenario can drive the converter past its input range."""


@dataclass(frozen=True)
class FrontendConfig:
    attenuation: float = 200.0
    offset: float = 3.3
    adc_reference: float = 5.0
    adc_bits: int = 10
    sample_rate: float = 3600.0

    def __post_init__(self):
        if not self.attenuation > 0:
            raise ValueError("attenuation must be > 0")
        if not 0 < self.offset < self.adc_reference:
            raise ValueError("offset must lie in (0, adc_reference)")
        if not 8 <= self.adc_bits <= 16:
            raise ValueError("adc_bits must be in [8, 16]")
        if not self.sample_rate > 2 * 60.0:
            raise ValueError("sample_rate must exceed 120 Hz")

    @property
    def full_scale(self) -> int:
        return (1 << self.adc_bits) - 1

    @property
    def lsb(self) -> float:
        """Volts per code at the converter input."""
        return self.adc_reference / self.full_scale

    @property
    def mains_range(self) -> tuple[float, float]:
        """Mains voltages that map to code 0 and full scale."""
        return (-self.offset * self.attenuation,
                (self.adc_reference - self.offset) * self.attenuation)

    @property
    def max_unsaturated_rms(self) -> float:
        return min(self.adc_reference - self.offset, self.offset) * self.attenuation / math.sqrt(2)


DEFAULT_FRONTEND = FrontendConfig()


@dataclass(frozen=True)
class AdcCode:
    code: int
    index: int
    saturated: bool = False


@dataclass(frozen=True)
class Acquisition:
    """Quantized sample stream; sample ``n`` has index ``start_index + n``."""

    codes: np.ndarray
    saturated: np.ndarray
    sample_rate: float
    start_index: int = 0

    def __len__(self) -> int:
        return len(self.codes)

    def __iter__(self):
        for n, (c, sat) in enumerate(zip(self.codes.tolist(), self.saturated.tolist())):
            yield AdcCode(c, self.start_index + n, sat)

    @property
    def any_saturated(self) -> bool:
        return bool(self.saturated.any())


def condition(v_mains, cfg: FrontendConfig = DEFAULT_FRONTEND):
    return v_mains / cfg.attenuation + cfg.offset


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_array(v_conditioned, cfg: FrontendConfig = DEFAULT_FRONTEND) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`quantize`: returns ``(codes, saturated)`` arrays."""
    raw = _round_half_away(np.asarray(v_conditioned, dtype=np.float64) / cfg.adc_reference * cfg.full_scale)
    saturated = (raw < 0) | (raw > cfg.full_scale)
    codes = np.clip(raw, 0, cfg.full_scale).astype(np.int64)
    return codes, saturated


def quantize(v_conditioned: float, cfg: FrontendConfig = DEFAULT_FRONTEND, index: int = 0) -> AdcCode:
    codes, sat = quantize_array([v_conditioned], cfg)
    return AdcCode(int(codes[0]), index, bool(sat[0]))


def reconstruct(c, cfg: FrontendConfig = DEFAULT_FRONTEND):
    """Mains-scale voltage estimate for a code (an :class:`AdcCode`, int, or array)."""
    if isinstance(c, AdcCode):
        c = c.code
    code = np.asarray(c)
    if code.size and (code.min() < 0 or code.max() > cfg.full_scale):
        raise ValueError("code outside converter range")
    v = (code * cfg.adc_reference / cfg.full_scale - cfg.offset) * cfg.attenuation
    return float(v) if np.ndim(v) == 0 else v


def acquire(s: Scenario, cfg: FrontendConfig = DEFAULT_FRONTEND) -> Acquisition:
    """Sample ``s`` at the configured clock, condition and quantize every sample."""
    lo, hi = cfg.mains_range
    peak = s.peak_bound() + 3.0 * s.noise_rms
    if peak > min(-lo, hi):
        msg = (f"scenario peak {peak:.1f} V exceeds converter headroom "
               f"[{lo:.1f}, {hi:.1f}] V; samples may saturate")
        warnings.warn(msg, HeadroomWarning, stacklevel=2)
    v = synthesize(s, cfg.sample_rate)
    codes, saturated = quantize_array(condition(v, cfg), cfg)
    return Acquisition(codes, saturated, cfg.sample_rate)
