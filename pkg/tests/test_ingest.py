import io

import numpy as np
import pytest

from transientpy.errors import (
    ConfigError,
    EmptyInput,
    ParseError,
    SchemaError,
    UnknownClass,
)
from transientpy.io.ingest import (
    ORIGINAL_CLASSES,
    Dataset,
    LightCurve,
    Measurement,
    describe_dataset,
    parse_table,
    read_table,
    remap_class,
    split_train_validation,
    write_table,
)

REMAP_TABLE = [
    (6, 1),
    (15, 2),
    (16, 3),
    (42, 0),
    (52, 0),
    (53, 3),
    (62, 0),
    (64, 1),
    (65, 1),
    (67, 0),
    (88, 4),
    (90, 0),
    (92, 3),
    (95, 2),
]

HEADER = "object_id,mjd,passband,flux,flux_err,detected,target\n"


@pytest.mark.parametrize(("original", "generalized"), REMAP_TABLE)
def test_remap_class_table(original, generalized):
    assert remap_class(original) == generalized


def test_remap_covers_exactly_fourteen_ids():
    assert sorted(ORIGINAL_CLASSES) == [o for o, _ in REMAP_TABLE]


@pytest.mark.parametrize("bad", [0, 99, 91, 991, -6])
def test_remap_rejects_unlisted_ids(bad):
    with pytest.raises(UnknownClass) as exc:
        remap_class(bad)
    assert exc.value.class_id == bad
    assert str(bad) in str(exc.value)


def test_parse_table_published_example(table_bytes):
    d = parse_table(table_bytes)
    assert d.object_ids == [615, 713, 730, 745, 116720, 117016]
    lc = d.curves[0]
    assert lc.object_id == 615
    assert lc.generalized_class == 3
    assert lc.measurements == [Measurement(59750.4, -544.81, 3.623, 2, 1)]
    assert d.class_counts == {0: 3, 1: 0, 2: 0, 3: 2, 4: 1}


def test_parse_table_groups_and_sorts_interleaved_rows():
    text = HEADER + (
        "615,59760.0,1,3.0,1.0,1,92\n"
        "713,59700.0,0,9.0,1.0,0,88\n"
        "615,59750.0,2,1.0,1.0,0,92\n"
        "615,59755.0,3,2.0,1.0,1,92\n"
    )
    d = parse_table(text)
    assert len(d) == 2
    lc = d.curves[0]
    assert len(lc) == 3
    np.testing.assert_array_equal(lc.time, [59750.0, 59755.0, 59760.0])
    np.testing.assert_array_equal(lc.flux, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(lc.passband, [2, 3, 1])


def test_parse_table_returns_curves_in_ascending_id_order():
    text = HEADER + (
        "900,59700.0,0,1.0,1.0,1,92\n"
        "17,59701.0,0,1.0,1.0,1,92\n"
        "615,59702.0,0,1.0,1.0,1,92\n"
        "17,59690.0,1,1.0,1.0,0,92\n"
    )
    assert [c.object_id for c in parse_table(text)] == [17, 615, 900]


def test_parse_table_equal_times_keep_input_order():
    text = HEADER + "1,10.0,0,5.0,1.0,0,90\n1,10.0,1,6.0,1.0,0,90\n1,9.0,2,7.0,1.0,1,90\n"
    lc = parse_table(text).curves[0]
    np.testing.assert_array_equal(lc.flux, [7.0, 5.0, 6.0])


def test_parse_table_case_insensitive_headers():
    text = "FLUX,Error,MJD,Filter,Detection,Class,ID\n1.5,0.5,100.0,0,1,88,3\n"
    lc = parse_table(text).curves[0]
    assert lc.object_id == 3
    assert lc.generalized_class == 4


@pytest.mark.parametrize("raw", [b"", b"flux,error,mjd,filter,detection,class,id\n"])
def test_parse_table_empty(raw):
    with pytest.raises(EmptyInput):
        parse_table(raw)


def test_parse_table_missing_column():
    with pytest.raises(SchemaError, match="mjd"):
        parse_table("flux,error,filter,detection,class,id\n1,1,0,1,90,1\n")


def test_parse_table_missing_class_only_when_labeled():
    text = "flux,error,mjd,filter,detection,id\n1,1,10,0,1,1\n"
    with pytest.raises(SchemaError):
        parse_table(text)
    d = parse_table(text, has_labels=False)
    assert not d.is_labeled
    assert d.curves[0].generalized_class is None


def test_parse_table_unlabeled_ignores_class_column(table_bytes):
    d = parse_table(table_bytes, has_labels=False)
    assert all(c.original_class is None for c in d)


def test_parse_table_non_numeric_reports_row():
    text = HEADER + "1,10.0,0,5.0,1.0,0,90\n1,11.0,0,abc,1.0,0,90\n"
    with pytest.raises(ParseError) as exc:
        parse_table(text)
    assert exc.value.row == 3


def test_parse_table_line_numbers_count_blank_lines():
    text = HEADER + "1,10.0,0,5.0,1.0,0,90\n\n\n1,11.0,0,abc,1.0,0,90\n"
    with pytest.raises(ParseError, match="line 5") as exc:
        parse_table(text)
    assert exc.value.row == 5


def test_parse_table_skips_blank_lines():
    text = HEADER + "\n1,10.0,0,5.0,1.0,1,90\n\n1,11.0,0,6.0,1.0,0,90\n\n"
    d = parse_table(text)
    assert len(d) == 1
    assert d.curves[0].flux.tolist() == [5.0, 6.0]


def test_parse_table_ragged_row():
    text = HEADER + "1,10.0,0,5.0,1.0,0,90\n1,11.0,0,5.0,1.0,0,90,7,8\n"
    with pytest.raises(ParseError, match="Malformed") as exc:
        parse_table(text)
    assert exc.value.row == 3


def test_parse_table_rejects_invalid_utf8():
    raw = HEADER.encode() + b"1,10.0,0,\xff\xfe,1.0,0,90\n"
    with pytest.raises(ParseError, match="UTF-8"):
        parse_table(raw)


def test_parse_table_accepts_byte_order_mark(table_bytes):
    assert list(parse_table(b"\xef\xbb\xbf" + table_bytes)) == list(parse_table(table_bytes))


@pytest.mark.parametrize(
    "row",
    [
        "1,10.0,7,5.0,1.0,0,90",  # passband out of range
        "1,10.0,0,5.0,1.0,2,90",  # detected not boolean
        "1,10.0,0,5.0,-1.0,0,90",  # negative error
        "1,10.0,0.5,5.0,1.0,0,90",  # fractional passband
        "1,inf,0,5.0,1.0,0,90",  # non-finite time
    ],
)
def test_parse_table_rejects_invalid_measurements(row):
    with pytest.raises(ParseError):
        parse_table(HEADER + row + "\n")


def test_parse_table_unknown_class():
    with pytest.raises(UnknownClass):
        parse_table(HEADER + "1,10.0,0,5.0,1.0,0,99\n")


def test_parse_table_conflicting_labels():
    text = HEADER + "1,10.0,0,5.0,1.0,0,90\n1,11.0,0,5.0,1.0,0,88\n"
    with pytest.raises(ParseError, match="conflicting"):
        parse_table(text)


def test_write_then_read(tmp_path, synthetic_dataset):
    path = tmp_path / "curves.csv"
    write_table(synthetic_dataset, path)
    loaded = read_table(path)
    assert loaded.object_ids == synthetic_dataset.object_ids
    for a, b in zip(loaded, synthetic_dataset, strict=True):
        assert a == b


def test_write_table_to_stream(table_bytes):
    d = parse_table(table_bytes)
    buffer = io.StringIO()
    write_table(d, buffer)
    again = parse_table(buffer.getvalue())
    assert list(again) == list(d)


def test_from_measurements_sorts_stably():
    lc = LightCurve.from_measurements(
        7, [(2.0, 1.0, 0.1, 0, 0), (1.0, 2.0, 0.1, 1, 1), (2.0, 3.0, 0.1, 2, 0)], 42
    )
    np.testing.assert_array_equal(lc.flux, [2.0, 1.0, 3.0])
    assert lc.generalized_class == 0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"time": [2.0, 1.0]},
        {"passband": [0, 6]},
        {"detected": [0, 3]},
        {"flux_err": [1.0, -0.1]},
        {"time": []},
    ],
)
def test_light_curve_invariants(kwargs):
    fields = {
        "time": [1.0, 2.0],
        "flux": [1.0, 2.0],
        "flux_err": [1.0, 1.0],
        "passband": [0, 1],
        "detected": [0, 1],
    }
    fields.update(kwargs)
    if kwargs.get("time") == []:
        fields = {k: [] for k in fields}
    with pytest.raises(ValueError):
        LightCurve(object_id=1, **fields)


def test_dataset_rejects_duplicate_ids(curve_factory):
    with pytest.raises(ValueError, match="Duplicate"):
        Dataset((curve_factory(1), curve_factory(1)))


def _dataset_of(counts):
    ids = {0: 90, 1: 64, 2: 15, 3: 92, 4: 88}
    curves = []
    oid = 0
    for cls, n in counts.items():
        for _ in range(n):
            curves.append(
                LightCurve(oid, [0.0], [1.0], [1.0], [0], [1], original_class=ids[cls])
            )
            oid += 1
    return Dataset(tuple(curves))


def test_split_published_size():
    d = _dataset_of({0: 4000, 1: 848, 2: 1000, 3: 1500, 4: 500})
    assert len(d) == 7848
    train, val = split_train_validation(d, 0.1, seed=0)
    assert len(val) == 785
    assert len(train) == 7063


def test_split_partition_and_stratification():
    d = _dataset_of({0: 37, 1: 5, 2: 12, 3: 23, 4: 3})
    train, val = split_train_validation(d, 0.25, seed=4)
    assert set(train.object_ids).isdisjoint(val.object_ids)
    assert sorted(train.object_ids + val.object_ids) == d.object_ids
    assert len(val) == 20
    for cls, n in d.class_counts.items():
        assert abs(val.class_counts[cls] - 0.25 * n) <= 1


def test_split_two_objects_half():
    d = _dataset_of({0: 2})
    train, val = split_train_validation(d, 0.5, seed=1)
    assert len(train) == len(val) == 1


def test_split_is_deterministic():
    d = _dataset_of({0: 30, 3: 20})
    first = split_train_validation(d, 0.1, seed=9)
    second = split_train_validation(d, 0.1, seed=9)
    assert first[1].object_ids == second[1].object_ids


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
def test_split_rejects_bad_fraction(fraction):
    with pytest.raises(ConfigError):
        split_train_validation(_dataset_of({0: 4}), fraction, seed=0)


def test_describe_dataset(table_bytes):
    summary = describe_dataset(parse_table(table_bytes), target_len=352)
    assert summary["n_objects"] == 6
    assert summary["n_measurements"] == 6
    by_name = {c["name"]: c["objects"] for c in summary["generalized_classes"]}
    assert by_name == {"S-Like": 3, "Fast": 0, "Long": 0, "Periodic": 2, "Non-Periodic": 1}
    assert summary["measurements_per_object"]["max"] == 1
    assert summary["over_target_len"] == 0
