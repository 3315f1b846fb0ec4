import io
import logging
import math
import pathlib
import re
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from typing import IO, Any, NamedTuple

import fsspec
import numpy as np
import pandas as pd

from transientpy.errors import (
    ConfigError,
    EmptyInput,
    ParseError,
    SchemaError,
    UnknownClass,
)

logger = logging.getLogger(__name__)

CLASS_NAMES: tuple[str, ...] = ("S-Like", "Fast", "Long", "Periodic", "Non-Periodic")
N_CLASSES = len(CLASS_NAMES)
N_PASSBANDS = 6

# original id -> (original class name, generalized class id)
ORIGINAL_CLASSES: dict[int, tuple[str, int]] = {
    6: ("Single micro-lens", 1),
    15: ("TDE", 2),
    16: ("Eclipsing Binary", 3),
    42: ("SNII", 0),
    52: ("SNIax", 0),
    53: ("Mira", 3),
    62: ("SNIbc", 0),
    64: ("Kilonova", 1),
    65: ("M-dwarf", 1),
    67: ("SNIa-91bg", 0),
    88: ("AGN", 4),
    90: ("SNIa", 0),
    92: ("RR Lyrae", 3),
    95: ("SLSN-I", 2),
}

# canonical column -> accepted (lower-case) header names, in order of preference
COLUMN_ALIASES: dict[str, tuple[str, ...]] = {
    "flux": ("flux",),
    "flux_err": ("flux_err", "error"),
    "mjd": ("mjd",),
    "passband": ("passband", "filter"),
    "detected": ("detected", "detection"),
    "target": ("target", "class"),
    "object_id": ("object_id", "id"),
}
REQUIRED_COLUMNS = ("flux", "flux_err", "mjd", "passband", "detected", "object_id")
INTEGER_COLUMNS = ("passband", "detected", "object_id", "target")


def remap_class(original_id: int) -> int:
    """
    Map one of the fourteen original class ids to its generalized class.

    Args:
        original_id (int): Original class id (e.g. 90 for SNIa).

    Returns:
        int: Generalized class id: S-Like=0, Fast=1, Long=2, Periodic=3,
            Non-Periodic=4.

    Raises:
        UnknownClass: If the id is not one of the fourteen known classes.

    Example:
        >>> remap_class(90)
        0
        >>> remap_class(88)
        4
    """
    try:
        return ORIGINAL_CLASSES[int(original_id)][1]
    except (KeyError, TypeError, ValueError) as err:
        raise UnknownClass(original_id) from err


class Measurement(NamedTuple):
    """A single observation of one object."""

    time: float
    flux: float
    flux_err: float
    passband: int
    detected: int


@dataclass(frozen=True, eq=False)
class LightCurve:
    """
    One object's measurements, stored column-wise and sorted by time.

    Attributes:
        object_id (int): Unique object identifier.
        time (np.ndarray): Observation times in days (MJD, or rescaled).
        flux (np.ndarray): Calibrated flux (may be negative).
        flux_err (np.ndarray): Flux uncertainty (>= 0).
        passband (np.ndarray): Integer passband 0-5.
        detected (np.ndarray): Detection flag 0/1.
        original_class (int | None): One of the fourteen original class ids, or None
            for unlabeled data.
    """

    object_id: int
    time: np.ndarray
    flux: np.ndarray
    flux_err: np.ndarray
    passband: np.ndarray
    detected: np.ndarray
    original_class: int | None = None

    def __post_init__(self):
        arrays = {
            "time": np.asarray(self.time, dtype=np.float64),
            "flux": np.asarray(self.flux, dtype=np.float64),
            "flux_err": np.asarray(self.flux_err, dtype=np.float64),
            "passband": np.asarray(self.passband, dtype=np.int64),
            "detected": np.asarray(self.detected, dtype=np.int64),
        }
        sizes = {a.shape for a in arrays.values()}
        if len(sizes) != 1 or arrays["time"].ndim != 1:
            msg = f"Object {self.object_id}: measurement columns differ in length."
            raise ValueError(msg)
        if arrays["time"].size == 0:
            msg = f"Object {self.object_id} has no measurements."
            raise ValueError(msg)
        if np.any(np.diff(arrays["time"]) < 0):
            msg = f"Object {self.object_id}: measurements are not sorted by time."
            raise ValueError(msg)
        if np.any((arrays["passband"] < 0) | (arrays["passband"] >= N_PASSBANDS)):
            msg = f"Object {self.object_id}: passband outside 0-5."
            raise ValueError(msg)
        if np.any((arrays["detected"] != 0) & (arrays["detected"] != 1)):
            msg = f"Object {self.object_id}: detected flag must be 0 or 1."
            raise ValueError(msg)
        if np.any(arrays["flux_err"] < 0):
            msg = f"Object {self.object_id}: negative flux error."
            raise ValueError(msg)
        if self.original_class is not None:
            remap_class(self.original_class)

        for name, arr in arrays.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_measurements(
        cls,
        object_id: int,
        measurements: Iterable[Measurement | Sequence[float]],
        original_class: int | None = None,
    ) -> "LightCurve":
        """Build a curve from measurement tuples, stable-sorted by time."""
        rows = [Measurement(*m) for m in measurements]
        order = sorted(range(len(rows)), key=lambda i: rows[i].time)
        rows = [rows[i] for i in order]
        return cls(
            object_id=object_id,
            time=[r.time for r in rows],
            flux=[r.flux for r in rows],
            flux_err=[r.flux_err for r in rows],
            passband=[r.passband for r in rows],
            detected=[r.detected for r in rows],
            original_class=original_class,
        )

    @property
    def generalized_class(self) -> int | None:
        if self.original_class is None:
            return None
        return remap_class(self.original_class)

    @property
    def measurements(self) -> list[Measurement]:
        return [
            Measurement(float(t), float(f), float(e), int(p), int(d))
            for t, f, e, p, d in zip(
                self.time,
                self.flux,
                self.flux_err,
                self.passband,
                self.detected,
                strict=True,
            )
        ]

    def __len__(self) -> int:
        return int(self.time.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LightCurve):
            return NotImplemented
        return (
            self.object_id == other.object_id
            and self.original_class == other.original_class
            and all(
                np.array_equal(getattr(self, name), getattr(other, name))
                for name in ("time", "flux", "flux_err", "passband", "detected")
            )
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Dataset:
    """
    An immutable collection of light curves with unique object ids.

    Attributes:
        curves (tuple[LightCurve, ...]): The light curves, in the order given.
    """

    curves: tuple[LightCurve, ...] = field(default_factory=tuple)

    def __post_init__(self):
        curves = tuple(self.curves)
        ids = [c.object_id for c in curves]
        if len(set(ids)) != len(ids):
            msg = "Duplicate object ids in dataset."
            raise ValueError(msg)
        object.__setattr__(self, "curves", curves)

    def __len__(self) -> int:
        return len(self.curves)

    def __iter__(self) -> Iterator[LightCurve]:
        return iter(self.curves)

    @property
    def object_ids(self) -> list[int]:
        return [c.object_id for c in self.curves]

    @property
    def is_labeled(self) -> bool:
        return all(c.original_class is not None for c in self.curves)

    @property
    def class_counts(self) -> dict[int, int]:
        """Objects per generalized class (all five classes present as keys)."""
        counts = dict.fromkeys(range(N_CLASSES), 0)
        for curve in self.curves:
            if curve.generalized_class is not None:
                counts[curve.generalized_class] += 1
        return counts

    def subset(self, object_ids: Iterable[int]) -> "Dataset":
        """Select curves by id, keeping this dataset's order."""
        wanted = set(object_ids)
        return Dataset(tuple(c for c in self.curves if c.object_id in wanted))


def _resolve_columns(columns: Iterable[str], has_labels: bool) -> dict[str, str]:
    """Map canonical column names to the header names present in the table."""
    lookup = {str(col).strip().lower(): col for col in columns}
    resolved = {}
    for canonical, aliases in COLUMN_ALIASES.items():
        for alias in aliases:
            if alias in lookup:
                resolved[canonical] = lookup[alias]
                break

    required = [*REQUIRED_COLUMNS, "target"] if has_labels else list(REQUIRED_COLUMNS)
    missing = [col for col in required if col not in resolved]
    if missing:
        accepted = {col: "|".join(COLUMN_ALIASES[col]) for col in missing}
        msg = f"Missing required column(s): {accepted}"
        raise SchemaError(msg)
    if not has_labels:
        resolved.pop("target", None)
    return resolved


def _numeric_column(series: pd.Series, name: str, lines: np.ndarray) -> np.ndarray:
    """Convert a column to float64, reporting the first offending line."""
    values = pd.to_numeric(series, errors="coerce")
    bad = values.isna().to_numpy()
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        row = int(lines[idx])
        msg = f"Non-numeric value {series.iloc[idx]!r} in column '{name}' at line {row}."
        raise ParseError(msg, row=row)
    return values.to_numpy(dtype=np.float64)


def _check_rows(
    ok: np.ndarray, values: np.ndarray, name: str, rule: str, lines: np.ndarray
) -> None:
    if not ok.all():
        idx = int(np.flatnonzero(~ok)[0])
        row = int(lines[idx])
        msg = f"Invalid value {values[idx]!r} in column '{name}' at line {row}: {rule}."
        raise ParseError(msg, row=row)


def _read_text(stream: IO | bytes | str) -> str:
    raw = stream.read() if hasattr(stream, "read") else stream
    if isinstance(raw, str):
        return raw
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError as err:
        msg = f"Input is not valid UTF-8 text (byte {err.start}: {err.reason})."
        raise ParseError(msg) from err


def _read_frame(text: str) -> tuple[pd.DataFrame, np.ndarray]:
    """
    Read CSV text into a frame plus the file line number of every data row.

    Blank lines are kept while reading so that row positions map onto file lines
    (header on line 1), then dropped.
    """
    try:
        df = pd.read_csv(
            io.StringIO(text),
            float_precision="round_trip",
            skipinitialspace=True,
            skip_blank_lines=False,
        )
    except pd.errors.EmptyDataError as err:
        msg = "Input stream is empty."
        raise EmptyInput(msg) from err
    except pd.errors.ParserError as err:
        found = re.search(r"line (\d+)", str(err))
        row = int(found.group(1)) if found else None
        msg = f"Malformed table: {err}".strip()
        raise ParseError(msg, row=row) from err

    lines = np.arange(len(df)) + 2
    blank = df.isna().all(axis=1).to_numpy()
    if blank.any():
        df = df.loc[~blank].reset_index(drop=True)
        lines = lines[~blank]
    return df, lines


def parse_table(stream: IO | bytes | str, has_labels: bool = True) -> Dataset:
    """
    Parse a PLAsTiCC-style light-curve table into a dataset.

    Rows may arrive interleaved across objects and unsorted; they are grouped by
    object id and stable-sorted by mjd within each object.

    Args:
        stream (IO | bytes | str): Readable binary/text stream, or the raw bytes/text
            of a comma-separated table with a header row.
        has_labels (bool): Whether the class column is required and used.

    Returns:
        Dataset: Curves in ascending object id order.

    Raises:
        EmptyInput: If the stream has no data rows.
        SchemaError: If a required column is missing.
        ParseError: If the text is not UTF-8, a row has the wrong number of fields,
            or a cell is non-numeric or violates a measurement invariant. `row`
            holds the file line (header on line 1).
        UnknownClass: If a class id is not one of the fourteen known classes.

    Example:
        >>> raw = b"flux,error,mjd,filter,detection,class,id\\n-544.81,3.623,59750.4,2,1,92,615\\n"
        >>> parse_table(raw).curves[0].generalized_class
        3
    """
    df, lines = _read_frame(_read_text(stream))
    if df.empty:
        msg = "Input table has a header but no data rows."
        raise EmptyInput(msg)

    columns = _resolve_columns(df.columns, has_labels)
    values = {
        name: _numeric_column(df[col], name, lines) for name, col in columns.items()
    }

    for name in INTEGER_COLUMNS:
        if name in values:
            _check_rows(
                np.mod(values[name], 1.0) == 0,
                values[name],
                name,
                "expected an integer",
                lines,
            )
    for name in ("flux", "flux_err", "mjd"):
        _check_rows(np.isfinite(values[name]), values[name], name, "must be finite", lines)

    passband = values["passband"]
    _check_rows(
        (passband >= 0) & (passband < N_PASSBANDS), passband, "passband", "0-5", lines
    )
    detected = values["detected"]
    _check_rows(
        (detected == 0) | (detected == 1), detected, "detected", "0 or 1", lines
    )
    flux_err = values["flux_err"]
    _check_rows(flux_err >= 0, flux_err, "flux_err", "must be >= 0", lines)

    object_id = values["object_id"].astype(np.int64)
    target = values["target"].astype(np.int64) if "target" in values else None
    mjd = values["mjd"]

    # object id first, then mjd, then input order (stable ties)
    order = np.lexsort((np.arange(mjd.size), mjd, object_id))
    ids_sorted = object_id[order]
    boundaries = np.flatnonzero(np.diff(ids_sorted)) + 1
    groups = np.split(order, boundaries)

    curves = []
    for rows in groups:
        oid = int(object_id[rows[0]])
        original = None
        if target is not None:
            classes = np.unique(target[rows])
            if classes.size != 1:
                row = int(lines[rows[np.flatnonzero(target[rows] != target[rows[0]])[0]]])
                msg = f"Object {oid} has conflicting class labels {classes.tolist()}."
                raise ParseError(msg, row=row)
            original = int(classes[0])
            remap_class(original)
        curves.append(
            LightCurve(
                object_id=oid,
                time=mjd[rows],
                flux=values["flux"][rows],
                flux_err=flux_err[rows],
                passband=passband[rows].astype(np.int64),
                detected=detected[rows].astype(np.int64),
                original_class=original,
            )
        )

    dataset = Dataset(tuple(curves))
    logger.info(f"Parsed {len(df)} rows into {len(dataset)} objects.")
    return dataset


def read_table(
    urlpath: str | pathlib.Path,
    has_labels: bool = True,
    storage_options: dict[str, Any] | None = None,
) -> Dataset:
    """Read a light-curve table from a local path or any fsspec URL."""
    if storage_options is None:
        storage_options = {}
    with fsspec.open(str(urlpath), mode="rb", **storage_options) as f:
        return parse_table(f, has_labels=has_labels)


def to_frame(dataset: Dataset) -> pd.DataFrame:
    """Flatten a dataset into the input column layout, one row per measurement."""
    frames = []
    for curve in dataset:
        frame = pd.DataFrame(
            {
                "object_id": np.full(len(curve), curve.object_id, dtype=np.int64),
                "mjd": curve.time,
                "passband": curve.passband,
                "flux": curve.flux,
                "flux_err": curve.flux_err,
                "detected": curve.detected,
            }
        )
        if curve.original_class is not None:
            frame["target"] = np.int64(curve.original_class)
        frames.append(frame)
    if not frames:
        return pd.DataFrame(
            columns=["object_id", "mjd", "passband", "flux", "flux_err", "detected"]
        )
    df = pd.concat(frames, ignore_index=True)
    if "target" in df.columns:
        df["target"] = df["target"].astype("Int64")
    return df


def write_table(
    dataset: Dataset,
    urlpath: str | pathlib.Path | IO,
    storage_options: dict[str, Any] | None = None,
) -> None:
    """
    Write a dataset as an input-layout CSV that `parse_table` reads back exactly.

    Args:
        dataset (Dataset): Dataset to serialize.
        urlpath (str | pathlib.Path | IO): Destination path/URL or an open text stream.
        storage_options (dict[str, Any] | None): Options for the fsspec filesystem.
    """
    df = to_frame(dataset)
    if hasattr(urlpath, "write"):
        df.to_csv(urlpath, index=False)
        return

    if storage_options is None:
        storage_options = {}
    with fsspec.open(str(urlpath), mode="w", **storage_options) as f:
        df.to_csv(f, index=False)
    logger.info(f"Wrote {len(dataset)} objects ({len(df)} rows) to {urlpath}.")


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def split_train_validation(
    d: Dataset, fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """
    Split a dataset into training and validation parts, stratified by class.

    The validation size is round-half-up(fraction * N). Per-class quotas start at
    floor(fraction * N_c) and the remaining slots go to the classes with the largest
    fractional parts (ties to the lower class id), so every class is within one
    object of its proportional share.

    Args:
        d (Dataset): Dataset to split; unlabeled curves form their own stratum.
        fraction (float): Validation fraction, strictly between 0 and 1.
        seed (int): Seed for the per-class sampling.

    Returns:
        tuple[Dataset, Dataset]: (training, validation), both in the input order.

    Raises:
        ConfigError: If fraction is outside (0, 1) or the dataset is empty.
    """
    if not 0.0 < fraction < 1.0:
        msg = f"Validation fraction must be in (0, 1), got {fraction}."
        raise ConfigError(msg)
    if len(d) == 0:
        msg = "Cannot split an empty dataset."
        raise ConfigError(msg)

    strata: dict[int, list[int]] = {}
    for curve in d:
        key = -1 if curve.generalized_class is None else curve.generalized_class
        strata.setdefault(key, []).append(curve.object_id)
    keys = sorted(strata)

    total = _round_half_up(fraction * len(d))
    exact = {k: fraction * len(strata[k]) for k in keys}
    quota = {k: math.floor(exact[k]) for k in keys}
    remaining = total - sum(quota.values())
    by_remainder = sorted(keys, key=lambda k: (-(exact[k] - quota[k]), k))
    for k in by_remainder[:remaining]:
        quota[k] += 1

    rng = np.random.default_rng(seed)
    validation_ids: set[int] = set()
    for k in keys:
        ids = np.array(sorted(strata[k]), dtype=np.int64)
        picked = rng.permutation(ids)[: quota[k]]
        validation_ids.update(int(i) for i in picked)

    train = Dataset(tuple(c for c in d if c.object_id not in validation_ids))
    validation = Dataset(tuple(c for c in d if c.object_id in validation_ids))
    logger.info(
        f"Split {len(d)} objects into {len(train)} training and "
        f"{len(validation)} validation objects (fraction={fraction}, seed={seed})."
    )
    return train, validation


def describe_dataset(d: Dataset, target_len: int = 352) -> dict[str, Any]:
    """
    Summarize class balance and sequence lengths of a dataset.

    Args:
        d (Dataset): Dataset to describe.
        target_len (int): Padded sequence length used to count overlong objects.

    Returns:
        dict[str, Any]: JSON-serializable summary with per original class and per
            generalized class object/measurement counts and length statistics.
    """
    lengths = np.array([len(c) for c in d], dtype=np.int64)

    original = []
    for class_id, (name, generalized) in ORIGINAL_CLASSES.items():
        members = [c for c in d if c.original_class == class_id]
        original.append(
            {
                "id": class_id,
                "name": name,
                "generalized": CLASS_NAMES[generalized],
                "objects": len(members),
                "measurements": int(sum(len(c) for c in members)),
            }
        )

    generalized = []
    for class_id, name in enumerate(CLASS_NAMES):
        members = [c for c in d if c.generalized_class == class_id]
        generalized.append(
            {
                "id": class_id,
                "name": name,
                "objects": len(members),
                "measurements": int(sum(len(c) for c in members)),
            }
        )

    summary: dict[str, Any] = {
        "n_objects": len(d),
        "n_measurements": int(lengths.sum()),
        "labeled": d.is_labeled,
        "original_classes": original,
        "generalized_classes": generalized,
        "target_len": target_len,
    }
    if lengths.size:
        summary["measurements_per_object"] = {
            "min": int(lengths.min()),
            "median": float(np.median(lengths)),
            "mean": float(lengths.mean()),
            "max": int(lengths.max()),
        }
        summary["over_target_len"] = int(np.sum(lengths > target_len))
    return summary
