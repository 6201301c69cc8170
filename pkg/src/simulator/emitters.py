# src/simulator/emitters.py
from __future__ import annotations
import math
from typing import Optional, Sequence, TypeVar

import numpy as np

from config.settings import N_FEATURES
from src.pdw.types import AMPLITUDE, AOA, FREQUENCY, PULSE_WIDTH, TOA
from src.simulator.scenario import EmitterSpec, FreqMode, PriMode, Range, ScenarioConfig

T = TypeVar("T")


def _draw(rng: np.random.Generator, bounds: Sequence[float]) -> float:
    lo, hi = bounds
    return float(lo) if lo == hi else float(rng.uniform(lo, hi))


def _draw_int(rng: np.random.Generator, bounds: Sequence[int]) -> int:
    lo, hi = bounds
    return int(lo) if lo == hi else int(rng.integers(lo, hi + 1))


def _choose(rng: np.random.Generator, weights: dict) -> T:
    keys = [k for k in weights]
    p = np.array([weights[k] for k in keys], dtype=np.float64)
    return keys[int(rng.choice(len(keys), p=p / p.sum()))]


def freq_band(config: ScenarioConfig, index: int, count: int) -> Range:
    """Central half of the index-th of `count` equal slices of the centre-frequency range."""
    lo, hi = config.freq_center_range
    width = (hi - lo) / count
    return (lo + (index + 0.25) * width, lo + (index + 0.75) * width)


def sample_emitter(config: ScenarioConfig, rng: np.random.Generator, band: Optional[Range] = None) -> EmitterSpec:
    """Draw one emitter from the configured ranges. Draw order is fixed, so a seeded
    generator always yields the same spec. `band` narrows the centre frequency and hop set."""
    pri_mode = _choose(rng, config.pri_mode_weights)
    freq_mode = _choose(rng, config.freq_mode_weights)

    pri_base = _draw(rng, config.pri_base_range)
    pri_jitter = _draw(rng, config.pri_jitter_frac_range) if pri_mode == PriMode.jittered else 0.0

    stagger: list = []
    if pri_mode == PriMode.staggered:
        levels = _draw_int(rng, config.stagger_levels_range)
        spread = _draw(rng, config.stagger_spread_frac_range)
        stagger = (pri_base * (1.0 + rng.uniform(-spread, spread, size=levels))).tolist()

    slide_frac, slide_steps = 0.0, 1
    if pri_mode == PriMode.sliding:
        slide_frac = _draw(rng, config.pri_slide_frac_range)
        slide_steps = _draw_int(rng, config.pri_slide_steps_range)

    freq_center = _draw(rng, config.freq_center_range if band is None else band)
    hop_set: list = []
    if freq_mode == FreqMode.hopping:
        hops = _draw_int(rng, config.hop_count_range)
        spread = _draw(rng, config.hop_spread_range)
        hop_set = sorted((freq_center + rng.uniform(-spread / 2, spread / 2, size=hops)).tolist())
        if band is not None:
            hop_set = np.clip(hop_set, *band).tolist()

    return EmitterSpec(
        pri_mode=pri_mode,
        pri_base=pri_base,
        pri_jitter_frac=pri_jitter,
        stagger_pattern=stagger,
        pri_slide_frac=slide_frac,
        pri_slide_steps=slide_steps,
        toa_offset=_draw(rng, (0.0, pri_base)),
        freq_mode=freq_mode,
        freq_center=freq_center,
        freq_hop_set=hop_set,
        freq_noise_std=_draw(rng, config.freq_noise_std_range),
        pw=_draw(rng, config.pw_range),
        pw_jitter_frac=_draw(rng, config.pw_jitter_frac_range),
        aoa_mean=_draw(rng, config.aoa_range),
        aoa_std=_draw(rng, config.aoa_std_range),
        amplitude_mean=_draw(rng, config.amplitude_mean_range),
        amplitude_std=_draw(rng, config.amplitude_std_range),
        drop_prob=_draw(rng, config.drop_prob_range),
    )


def _intervals(spec: EmitterSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    if spec.pri_mode == PriMode.jittered:
        j = spec.pri_jitter_frac
        return spec.pri_base * (1.0 + rng.uniform(-j, j, size=count))
    if spec.pri_mode == PriMode.staggered:
        return np.resize(np.asarray(spec.stagger_pattern, dtype=np.float64), count)
    if spec.pri_mode == PriMode.sliding:
        steps = spec.pri_slide_steps
        ramp = (np.arange(count) % steps) / max(steps - 1, 1)
        return spec.pri_base * (1.0 + spec.pri_slide_frac * ramp)
    return np.full(count, spec.pri_base)


def emitter_toas(spec: EmitterSpec, t_end: float, rng: np.random.Generator) -> np.ndarray:
    """ToAs produced by the PRI process on [toa_offset, t_end)."""
    span = t_end - spec.toa_offset
    if span <= 0:
        return np.empty(0)
    count = int(math.ceil(span / spec.min_interval())) + 2
    if spec.pri_mode == PriMode.constant:
        # multiples rather than a running sum keep constant trains exact
        toas = spec.toa_offset + spec.pri_base * np.arange(count)
    else:
        steps = _intervals(spec, count - 1, rng)
        toas = spec.toa_offset + np.concatenate(([0.0], np.cumsum(steps)))
    # t_end itself is excluded, including values that only differ from it by rounding
    return toas[toas < t_end * (1.0 - 1e-12)]


def generate_emitter_pulses(spec: EmitterSpec, t_end: float, rng: np.random.Generator) -> np.ndarray:
    """
    Pulses of one emitter on [0, t_end) as an (m, 5) PDW matrix. Each pulse is
    dropped independently with `drop_prob`; per-pulse features are drawn from the `EmitterSpec`.
    """
    if t_end <= 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    toas = emitter_toas(spec, t_end, rng)
    m = toas.shape[0]

    keep = rng.random(m) >= spec.drop_prob

    if spec.freq_mode == FreqMode.hopping:
        hop_set = np.asarray(spec.freq_hop_set, dtype=np.float64)
        freq = hop_set[rng.integers(0, hop_set.size, size=m)]
    else:
        freq = np.full(m, spec.freq_center)
    freq = freq + rng.normal(0.0, 1.0, size=m) * spec.freq_noise_std
    freq = np.maximum(freq, np.finfo(np.float64).tiny)

    pw = spec.pw * (1.0 + rng.uniform(-spec.pw_jitter_frac, spec.pw_jitter_frac, size=m))

    aoa = np.mod(spec.aoa_mean + rng.normal(0.0, 1.0, size=m) * spec.aoa_std, 360.0)
    aoa = np.where(aoa >= 360.0, 0.0, aoa)

    amplitude = spec.amplitude_mean + rng.normal(0.0, 1.0, size=m) * spec.amplitude_std

    out = np.empty((m, N_FEATURES), dtype=np.float64)
    out[:, TOA] = toas
    out[:, FREQUENCY] = freq
    out[:, PULSE_WIDTH] = pw
    out[:, AOA] = aoa
    out[:, AMPLITUDE] = amplitude
    return out[keep]
