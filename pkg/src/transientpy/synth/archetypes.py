"""Shape families for synthetic light curves, one per generalized class.

The shapes only mimic the qualitative look of each class: a fast-rise/slow-decay
pulse for S-Like, a short spike for Fast, a broad bump for Long, a sinusoid for
Periodic and a slowly wandering bounded random walk for Non-Periodic. Amplitude and
noise ranges are shared by all classes so that brightness alone does not identify a
class; the classes differ in timescale and shape.
"""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.special import log_expit

from transientpy.io.ingest import CLASS_NAMES, ORIGINAL_CLASSES

# signal-to-noise per measurement ranges from 20 to 250
AMPLITUDE_RANGE = (100.0, 500.0)
NOISE_RANGE = (2.0, 5.0)
BAND_RESPONSE_RANGE = (0.85, 1.15)
N_POINTS_RANGE = (30, 300)
SURVEY_DAYS = 1000.0
SEASON_DAYS = 60.0
SEASON_SHARE = 0.5
DETECTION_SIGMA = 3.0
# measurements where the noiseless signal alone clears the detection threshold
MIN_SIGNAL_POINTS = 3

# (t, amplitude, peak, duration, rng) -> noiseless flux
Family = Callable[[np.ndarray, float, float, float, np.random.Generator], np.ndarray]


def bazin(
    t: np.ndarray, t0: float, amplitude: float, rise: float, fall: float
) -> np.ndarray:
    """Fast-rise / exponential-decay pulse, A·exp(-(t-t0)/fall) / (1 + exp(-(t-t0)/rise))."""
    dt = t - t0
    return amplitude * np.exp(log_expit(dt / rise) - dt / fall)


def gaussian_bump(t: np.ndarray, t0: float, amplitude: float, sigma: float) -> np.ndarray:
    return amplitude * np.exp(-0.5 * ((t - t0) / sigma) ** 2)


def sinusoid(t: np.ndarray, amplitude: float, period: float, phase: float) -> np.ndarray:
    return amplitude * np.sin(2.0 * np.pi * t / period + phase)


def bounded_random_walk(
    t: np.ndarray, amplitude: float, step_scale: float, rng: np.random.Generator
) -> np.ndarray:
    """
    Brownian walk sampled at `t` and clipped to [-amplitude, amplitude].

    Step variance grows with the time gap, so the walk looks the same whatever the
    sampling cadence.
    """
    gaps = np.diff(t, prepend=t[0])
    steps = rng.normal(0.0, 1.0, size=t.size) * step_scale * np.sqrt(gaps)
    walk = np.empty_like(t)
    level = rng.uniform(-0.5, 0.5) * amplitude
    for k, step in enumerate(steps):
        level = float(np.clip(level + step, -amplitude, amplitude))
        walk[k] = level
    return walk


def _s_like(t, amplitude, peak, duration, rng):
    fall = duration / 5.0
    return bazin(t, peak, amplitude, rise=fall * rng.uniform(0.08, 0.15), fall=fall)


def _bump(t, amplitude, peak, duration, _rng):
    return gaussian_bump(t, peak, amplitude, sigma=duration / 4.0)


def _non_periodic(t, amplitude, _peak, _duration, rng):
    # drifts about a tenth of the amplitude per month
    return bounded_random_walk(t, amplitude, amplitude * rng.uniform(0.02, 0.04), rng)


def draw_period(rng: np.random.Generator) -> float:
    """Log-uniform period in [0.2, 100] days."""
    return float(np.exp(rng.uniform(np.log(0.2), np.log(100.0))))


@dataclass(frozen=True)
class ArchetypeSpec:
    """
    Generation recipe of one class.

    Attributes:
        class_index (int): Generalized class produced.
        family (str): Shape family name.
        original_ids (tuple[int, ...]): Original class ids the objects are labeled
            with (drawn uniformly).
        duration_days (tuple[float, float] | None): Event duration range. Bumps last
            four standard deviations and pulses five decay times. None for
            non-transients.
    """

    class_index: int
    family: str
    original_ids: tuple[int, ...]
    duration_days: tuple[float, float] | None = None

    @property
    def name(self) -> str:
        return CLASS_NAMES[self.class_index]

    def draw_duration(self, rng: np.random.Generator) -> float:
        """Uniform draw from `duration_days`, NaN for non-transients."""
        if self.duration_days is None:
            return float("nan")
        return float(rng.uniform(*self.duration_days))


def _original_ids(class_index: int) -> tuple[int, ...]:
    return tuple(sorted(k for k, (_, g) in ORIGINAL_CLASSES.items() if g == class_index))


ARCHETYPES: tuple[ArchetypeSpec, ...] = (
    ArchetypeSpec(0, "fred_pulse", _original_ids(0), (100.0, 250.0)),
    ArchetypeSpec(1, "narrow_spike", _original_ids(1), (4.0, 10.0)),
    ArchetypeSpec(2, "broad_bump", _original_ids(2), (160.0, 400.0)),
    ArchetypeSpec(3, "sinusoid", _original_ids(3)),
    ArchetypeSpec(4, "random_walk", _original_ids(4)),
)

_FAMILIES: dict[str, Family] = {
    "fred_pulse": _s_like,
    "narrow_spike": _bump,
    "broad_bump": _bump,
    "random_walk": _non_periodic,
}

def dominant_period(values: np.ndarray, dt: float) -> float:
    """
    Lag of the highest autocorrelation peak of a regularly sampled signal.

    Args:
        values (np.ndarray): Signal sampled every `dt` days.
        dt (float): Sampling step.

    Returns:
        float: Dominant period in days, or NaN when the autocorrelation has no peak.
    """
    x = np.asarray(values, dtype=np.float64) - np.mean(values)
    acf = signal.correlate(x, x, mode="full", method="fft")[x.size - 1 :]
    peaks, _ = signal.find_peaks(acf)
    if peaks.size == 0:
        return float("nan")
    return float(peaks[np.argmax(acf[peaks])] * dt)


def periodic_signal(
    t: np.ndarray, amplitude: float, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """Sinusoid at `t` plus its period, verified against the autocorrelation peak."""
    period = draw_period(rng)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    dt = period / 50.0
    grid = np.arange(0.0, 10.0 * period, dt)
    found = dominant_period(sinusoid(grid, amplitude, period, phase), dt)
    if not abs(found - period) <= 2.0 * dt:
        msg = f"Autocorrelation peak at {found:.4f} days, expected period {period:.4f}."
        raise RuntimeError(msg)
    return sinusoid(t, amplitude, period, phase), period


def draw_signal(
    spec: ArchetypeSpec, t: np.ndarray, amplitude: float, peak: float, rng: np.random.Generator
) -> np.ndarray:
    """Noiseless signal of `spec` at times `t` (days since the survey start)."""
    if spec.family == "sinusoid":
        return periodic_signal(t, amplitude, rng)[0]
    duration = spec.draw_duration(rng)
    return _FAMILIES[spec.family](t, amplitude, peak, duration, rng)
