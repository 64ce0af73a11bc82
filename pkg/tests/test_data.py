import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordinal_shapley.data import (
    DATA_DIR_ENV,
    DataError,
    Dataset,
    DatasetSchema,
    SplitSpec,
    class_partition,
    inject_label_noise,
    load_preset,
    load_tabular,
    split,
)

SCHEMA = {
    "columns": [
        {"name": "size", "kind": "numeric"},
        {"name": "color", "kind": "categorical"},
        {"name": "label", "kind": "target"},
    ],
    "target": "label",
    "missing_token": "?",
}

ROWS = """1.5, red, yes
2.0, blue, no
?, red, yes
3.5, green, no
oops, red, no
4.0, red
0.5, blue, yes
"""


@pytest.fixture
def small_file(tmp_path):
    path = tmp_path / "small.csv"
    path.write_text(ROWS)
    return path


def test_load_tabular_encodes_and_rejects(small_file):
    ds = load_tabular(small_file, DatasetSchema.from_json(SCHEMA))
    assert ds.feature_names == ["size", "color=red", "color=blue", "color=green"]
    np.testing.assert_array_equal(ds.X, [[1.5, 1, 0, 0], [2.0, 0, 1, 0], [3.5, 0, 0, 1],
                                         [0.5, 0, 1, 0]])
    assert ds.class_names == ["no", "yes"]
    np.testing.assert_array_equal(ds.y, [1, 0, 0, 1])
    assert [line for line, _ in ds.rejected] == [3, 5, 6]
    assert "missing" in ds.rejected[0][1]


def test_schema_needs_one_target():
    bad = dict(SCHEMA, columns=SCHEMA["columns"][:2])
    with pytest.raises(DataError):
        DatasetSchema.from_json(bad)
    with pytest.raises(DataError):
        DatasetSchema.from_json(dict(SCHEMA, columns=[{"name": "a", "kind": "weird"}]))


def test_schema_from_file(tmp_path, small_file):
    path = tmp_path / "schema.json"
    path.write_text(json.dumps(SCHEMA))
    assert len(load_tabular(small_file, DatasetSchema.from_json(path))) == 4


def test_empty_file_is_an_error(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("?, red, yes\n")
    with pytest.raises(DataError):
        load_tabular(path, DatasetSchema.from_json(SCHEMA))


def blob_dataset(m=60, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m, 3)) * [1.0, 5.0, 0.1] + [0.0, 10.0, -3.0]
    y = rng.integers(0, 3, size=m)
    return Dataset(X, y, ["a", "b", "c"], ["0", "1", "2"])


def test_split_sizes_and_disjointness():
    ds = blob_dataset()
    parts = split(ds, SplitSpec(20, 15, 10, seed=1))
    assert (len(parts.valued), len(parts.assessment), len(parts.heldout)) == (20, 15, 10)
    rows = np.vstack([parts.valued.X, parts.assessment.X, parts.heldout.X])
    assert len(np.unique(rows.round(12), axis=0)) == 45


def test_split_standardizes_with_valued_and_assessment_only():
    ds = blob_dataset()
    parts = split(ds, SplitSpec(20, 15, None, seed=2))
    fit = np.vstack([parts.valued.X, parts.assessment.X])
    np.testing.assert_allclose(fit.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(fit.std(axis=0), 1.0, atol=1e-12)
    assert len(parts.heldout) == 25
    raw = split(ds, SplitSpec(20, 15, None, seed=2), standardize=False)
    np.testing.assert_allclose(parts.heldout.X * parts.scale + parts.mean, raw.heldout.X)


def test_split_ignores_input_row_order():
    ds = blob_dataset()
    perm = np.random.default_rng(9).permutation(len(ds))
    a = split(ds, SplitSpec(20, 15, 10, seed=4))
    b = split(ds.subset(perm), SplitSpec(20, 15, 10, seed=4))
    np.testing.assert_array_equal(a.valued.X, b.valued.X)
    np.testing.assert_array_equal(a.heldout.y, b.heldout.y)


def test_split_rejects_oversized_requests():
    with pytest.raises(DataError):
        split(blob_dataset(), SplitSpec(50, 15, 10))
    with pytest.raises(DataError):
        split(blob_dataset(), SplitSpec(0, 15, 10))


@settings(max_examples=1000)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=200), st.floats(0.0, 0.99),
       st.integers(0, 2**32 - 1))
def test_noise_mask_properties(labels, fraction, seed):
    y = np.array(labels)
    noisy, mask = inject_label_noise(y, fraction, seed, n_classes=4)
    assert mask.count == int(np.floor(round(fraction * len(y), 9)))
    np.testing.assert_array_equal(noisy != y, mask.flipped)
    np.testing.assert_array_equal(noisy[~mask.flipped], y[~mask.flipped])
    assert noisy.min() >= 0 and noisy.max() < 4
    np.testing.assert_array_equal(mask.original, y)
    again, _ = inject_label_noise(y, fraction, seed, n_classes=4)
    np.testing.assert_array_equal(again, noisy)


def test_noise_rejects_bad_input():
    with pytest.raises(ValueError):
        inject_label_noise(np.array([0, 1]), 1.0, 0)
    with pytest.raises(ValueError):
        inject_label_noise(np.array([0, 0]), 0.5, 0, n_classes=1)


def test_class_partition_groups_by_label():
    part = class_partition([2, 0, 2, 1, 0])
    assert part.unions == ((1, 4), (3,), (0, 2))


def test_wine_preset_loads_without_a_file(monkeypatch):
    monkeypatch.delenv(DATA_DIR_ENV, raising=False)
    ds = load_preset("wine")
    assert ds.X.shape == (178, 13)
    assert np.bincount(ds.y).tolist() == [59, 71, 48]
    parts = split(ds, SplitSpec.for_preset("wine"))
    assert (len(parts.valued), len(parts.assessment), len(parts.heldout)) == (89, 49, 40)


def test_file_presets_need_a_file(monkeypatch, tmp_path):
    monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path))
    with pytest.raises(FileNotFoundError, match=DATA_DIR_ENV):
        load_preset("cancer")


def test_preset_is_read_from_data_dir(monkeypatch, tmp_path):
    (tmp_path / "breast-cancer.data").write_text(
        "no-recurrence-events,30-39,premeno,30-34,0-2,no,3,left,left_low,no\n"
        "recurrence-events,40-49,premeno,20-24,0-2,?,2,right,right_up,no\n"
        "recurrence-events,50-59,ge40,25-29,3-5,yes,2,left,left_up,yes\n")
    monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path))
    ds = load_preset("cancer")
    assert len(ds) == 2 and len(ds.rejected) == 1
    assert ds.class_names == ["no-recurrence-events", "recurrence-events"]


def test_unknown_preset():
    with pytest.raises(DataError):
        load_preset("iris")
