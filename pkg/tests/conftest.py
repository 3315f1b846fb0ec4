import logging

import numpy as np
import pytest

from transientpy.io.ingest import Dataset, LightCurve
from transientpy.nn.params import initialize_params
from transientpy.preprocess.ops import N_FEATURES, PreprocessedSequence, one_hot
from transientpy.synth.generate import generate_dataset
from transientpy.utils.config import PACKAGE_LOGGER

# rows in the published example layout: interleaved objects, mixed classes
TABLE_ROWS = b"""flux,error,mjd,filter,detection,class,id
-544.810,3.623,59750.4,2,1,92,615
-816.434,5.553,59750.4,1,1,88,713
-471.386,3.802,59750.4,3,1,42,730
-388.985,11.395,59750.4,4,1,90,745
-2.940,1.771,59798.3,3,0,90,116720
-12.810,5.380,59798.4,5,0,92,117016
"""


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def table_bytes():
    return TABLE_ROWS


def make_curve(
    object_id=1,
    times=(0.0, 1.0, 2.0),
    fluxes=(1.0, 5.0, 3.0),
    detected=(0, 1, 0),
    original_class=90,
    errors=None,
    passbands=None,
):
    n = len(times)
    return LightCurve(
        object_id=object_id,
        time=np.asarray(times, dtype=float),
        flux=np.asarray(fluxes, dtype=float),
        flux_err=np.ones(n) if errors is None else np.asarray(errors, dtype=float),
        passband=np.zeros(n, dtype=int) if passbands is None else np.asarray(passbands),
        detected=np.asarray(detected),
        original_class=original_class,
    )


@pytest.fixture
def curve_factory():
    return make_curve


def random_sequence(
    rng, length, target_len, label=None, object_id=0
) -> PreprocessedSequence:
    """A post-padded random sequence with `length` valid rows."""
    features = np.zeros((target_len, N_FEATURES))
    features[:length] = rng.normal(size=(length, N_FEATURES))
    mask = np.zeros(target_len, dtype=bool)
    mask[:length] = True
    return PreprocessedSequence(
        features=features,
        mask=mask,
        label_onehot=None if label is None else one_hot(label),
        object_id=object_id,
    )


@pytest.fixture
def sequence_factory():
    return random_sequence


@pytest.fixture
def small_model():
    return initialize_params(hidden=4, seed=3)


@pytest.fixture(scope="session")
def synthetic_dataset() -> Dataset:
    return generate_dataset(4, seed=11)


@pytest.fixture(autouse=True)
def _reset_package_logging():
    """Drop handlers bound to a captured stream once a test is done with them."""
    yield
    package_logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(package_logger.handlers):
        if getattr(handler, "_transientpy", False):
            package_logger.removeHandler(handler)
            handler.close()
    package_logger.setLevel(logging.NOTSET)
