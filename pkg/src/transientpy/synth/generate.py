import logging

import numpy as np
from tqdm import tqdm

from transientpy.errors import ConfigError
from transientpy.io.ingest import N_CLASSES, N_PASSBANDS, Dataset, LightCurve
from transientpy.synth.archetypes import (
    AMPLITUDE_RANGE,
    ARCHETYPES,
    BAND_RESPONSE_RANGE,
    DETECTION_SIGMA,
    MIN_SIGNAL_POINTS,
    N_POINTS_RANGE,
    NOISE_RANGE,
    SEASON_DAYS,
    SEASON_SHARE,
    SURVEY_DAYS,
    ArchetypeSpec,
    draw_signal,
)

logger = logging.getLogger(__name__)

SURVEY_START_MJD = 59580.0
MAX_ATTEMPTS = 1000


def sample_times(rng: np.random.Generator, n: int) -> tuple[np.ndarray, float]:
    """
    Observation times (days since survey start) and the centre of the dense season.

    A share of the points falls in one densely observed season; the rest is spread
    over the whole survey.
    """
    centre = rng.uniform(0.1 * SURVEY_DAYS, 0.9 * SURVEY_DAYS)
    n_season = round(SEASON_SHARE * n)
    half = SEASON_DAYS / 2.0
    season = rng.uniform(centre - half, centre + half, size=n_season)
    survey = rng.uniform(0.0, SURVEY_DAYS, size=n - n_season)
    return np.sort(np.concatenate([season, survey])), centre


def generate_curve(
    spec: ArchetypeSpec, object_id: int, rng: np.random.Generator
) -> LightCurve:
    """
    Draw one noisy light curve of the given archetype.

    Parameters are redrawn until at least one measurement is detected, i.e. deviates
    from the zero baseline by more than three flux errors, and the noiseless signal
    alone clears that threshold at `MIN_SIGNAL_POINTS` measurements or more, so that
    short events are actually sampled.

    Args:
        spec (ArchetypeSpec): Class recipe.
        object_id (int): Identifier of the new object.
        rng (np.random.Generator): Source of randomness.

    Returns:
        LightCurve: Labeled curve with 30-300 measurements.
    """
    for _ in range(MAX_ATTEMPTS):
        n = int(rng.integers(N_POINTS_RANGE[0], N_POINTS_RANGE[1] + 1))
        t, centre = sample_times(rng, n)
        amplitude = rng.uniform(*AMPLITUDE_RANGE)
        noise = rng.uniform(*NOISE_RANGE)
        peak = rng.uniform(centre - 0.3 * SEASON_DAYS, centre + 0.3 * SEASON_DAYS)
        band_response = rng.uniform(*BAND_RESPONSE_RANGE, size=N_PASSBANDS)

        passband = rng.integers(0, N_PASSBANDS, size=n)
        clean = draw_signal(spec, t, amplitude, peak, rng) * band_response[passband]
        flux_err = noise * band_response[passband] * rng.uniform(0.8, 1.2, size=n)
        flux = clean + rng.normal(0.0, 1.0, size=n) * flux_err
        detected = (np.abs(flux) > DETECTION_SIGMA * flux_err).astype(np.int64)
        visible = np.count_nonzero(np.abs(clean) > DETECTION_SIGMA * flux_err)
        if detected.any() and visible >= MIN_SIGNAL_POINTS:
            break
    else:
        msg = f"No detectable {spec.name} curve after {MAX_ATTEMPTS} attempts."
        raise RuntimeError(msg)

    return LightCurve(
        object_id=object_id,
        time=SURVEY_START_MJD + t,
        flux=flux,
        flux_err=flux_err,
        passband=passband,
        detected=detected,
        original_class=int(rng.choice(spec.original_ids)),
    )


def generate_dataset(
    n_per_class: int, seed: int, first_id: int = 0, progress: bool = False
) -> Dataset:
    """
    Seeded synthetic dataset with `n_per_class` objects of each generalized class.

    Objects cycle through the classes (ids first_id, first_id + 1, ...), and object k
    draws from its own generator seeded with (seed, k), so every object is
    reproducible on its own.

    Args:
        n_per_class (int): Objects per class (>= 1).
        seed (int): Dataset seed (>= 0).
        first_id (int): Object id of the first object.
        progress (bool): Show a progress bar.

    Returns:
        Dataset: 5 * n_per_class labeled objects.

    Example:
        >>> generate_dataset(1, seed=3).class_counts
        {0: 1, 1: 1, 2: 1, 3: 1, 4: 1}
    """
    if n_per_class < 1:
        msg = f"n_per_class must be >= 1, got {n_per_class}."
        raise ConfigError(msg)
    if seed < 0:
        msg = f"seed must be >= 0, got {seed}."
        raise ConfigError(msg)

    curves = []
    for k in tqdm(range(N_CLASSES * n_per_class), disable=not progress, desc="objects"):
        spec = ARCHETYPES[k % N_CLASSES]
        rng = np.random.default_rng([seed, k])
        curves.append(generate_curve(spec, first_id + k, rng))

    dataset = Dataset(tuple(curves))
    logger.info(f"Generated {len(dataset)} synthetic objects (seed={seed}).")
    return dataset
