import json

import pytest
from hypothesis import given, settings, strategies as st

from agegaze.data import (AgeGroup, FixationParseError, FixationRecord, FixationValidationError,
                          GazeDataset, ImageInfo, StimulusCategory, UnknownReferenceError,
                          load_manifest, parse_fixation_csv, partition_by_group, save_manifest,
                          split_train_test, write_fixation_csv)
from conftest import fix, make_dataset

HEADER = "observer_id,group,image_id,index,x,y,duration_ms\n"


def big_image_dataset():
    return GazeDataset(images=[ImageInfo("big", StimulusCategory.MANMADE, 1280, 960)],
                       observers=[("a1", AgeGroup.ADULTS)])


def test_enum_parsing():
    assert AgeGroup.parse("Children") is AgeGroup.CHILDREN
    assert StimulusCategory.parse("man-made") is StimulusCategory.MANMADE
    assert StimulusCategory.parse("Man_Made") is StimulusCategory.MANMADE
    with pytest.raises(ValueError):
        AgeGroup.parse("teens")


def test_header_only_adds_nothing(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text(HEADER)
    ds = big_image_dataset()
    out = parse_fixation_csv(p, ds)
    assert out.fixations == ()


def test_three_rows_roundtrip(tmp_path):
    ds = big_image_dataset()
    recs = [FixationRecord("a1", AgeGroup.ADULTS, "big", 10 * k, 5 * k, k, 120.5 + k) for k in range(3)]
    p = tmp_path / "f.csv"
    write_fixation_csv(p, recs)
    out = parse_fixation_csv(p, ds)
    assert list(out.fixations) == recs
    # writing the parsed records back reproduces the file
    q = tmp_path / "g.csv"
    write_fixation_csv(q, out.fixations)
    assert q.read_bytes() == p.read_bytes()


def test_x_bound_is_exclusive(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text(HEADER + "a1,adults,big,0,1280,10,100\n")
    with pytest.raises(FixationValidationError, match="line 2"):
        parse_fixation_csv(p, big_image_dataset())
    p.write_text(HEADER + "a1,adults,big,0,1279,959,100\n")
    assert len(parse_fixation_csv(p, big_image_dataset()).fixations) == 1


def test_malformed_row_reports_line(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text(HEADER + "a1,adults,big,0,1,1,10\na1,adults,big,1,notanumber,1,10\n")
    with pytest.raises(FixationParseError) as exc:
        parse_fixation_csv(p, big_image_dataset())
    assert exc.value.line == 3


def test_bad_header_rejected(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("observer,group,image,index,x,y,duration\n")
    with pytest.raises(FixationParseError):
        parse_fixation_csv(p, big_image_dataset())


def test_unknown_image_is_reference_error(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text(HEADER + "a1,adults,nope,0,1,1,10\n")
    with pytest.raises(UnknownReferenceError):
        parse_fixation_csv(p, big_image_dataset())


def test_negative_duration_rejected():
    ds = make_dataset()
    with pytest.raises(FixationValidationError):
        ds.with_fixations([fix("c0", AgeGroup.CHILDREN, "im0", 1, 1, 0, -5.0)])


def test_duplicate_triple_rejected():
    ds = make_dataset()
    rec = fix("c0", AgeGroup.CHILDREN, "im0", 1, 1, 0)
    with pytest.raises(FixationValidationError):
        ds.with_fixations([rec, fix("c0", AgeGroup.CHILDREN, "im0", 2, 2, 0)])


def test_partition_only_adults():
    ds = make_dataset(fixations=[fix("a0", AgeGroup.ADULTS, "im0", k, k, k) for k in range(4)])
    parts = partition_by_group(ds, "im0")
    assert parts[AgeGroup.CHILDREN] == [] and parts[AgeGroup.ELDERLY] == []
    assert len(parts[AgeGroup.ADULTS]) == 4


def test_partition_two_per_group():
    recs = []
    for obs, g in (("c0", AgeGroup.CHILDREN), ("a0", AgeGroup.ADULTS), ("e0", AgeGroup.ELDERLY)):
        recs += [fix(obs, g, "im1", 3, 4, 0), fix(obs, g, "im1", 5, 6, 1)]
    parts = partition_by_group(make_dataset(fixations=recs), "im1")
    assert [len(parts[g]) for g in AgeGroup] == [2, 2, 2]


def test_partition_empty_and_unknown():
    ds = make_dataset()
    assert all(v == [] for v in partition_by_group(ds, "im0").values())
    with pytest.raises(UnknownReferenceError):
        partition_by_group(ds, "missing")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 31), st.integers(0, 23)), max_size=40))
def test_partition_is_disjoint_union(entries):
    obs = [("c0", AgeGroup.CHILDREN), ("a0", AgeGroup.ADULTS), ("e0", AgeGroup.ELDERLY)]
    recs = [fix(obs[o][0], obs[o][1], "im0", x, y, k) for k, (o, x, y) in enumerate(entries)]
    ds = make_dataset(fixations=recs)
    parts = partition_by_group(ds, "im0")
    flat = [r for g in AgeGroup for r in parts[g]]
    assert sorted(flat, key=lambda r: r.index) == recs
    assert all(r.group == g for g in AgeGroup for r in parts[g])


def test_split_default_sizes():
    ds = make_dataset(n_images=192)
    train, test = split_train_test(ds, 120, seed=3)
    assert len(train.images) == 120 and len(test.images) == 72
    assert not set(train.image_ids) & set(test.image_ids)
    for cat in StimulusCategory:
        assert abs(len(train.by_category(cat)) - 40) <= 1


def test_split_deterministic_and_stratified():
    ds = make_dataset(n_images=9)
    a = split_train_test(ds, 6, seed=7)
    b = split_train_test(ds, 6, seed=7)
    assert a[0].image_ids == b[0].image_ids
    for cat in StimulusCategory:
        assert len(a[0].by_category(cat)) == 2


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(0, 1000), st.data())
def test_split_disjoint_exhaustive(n, seed, data):
    n_train = data.draw(st.integers(1, n - 1))
    ds = make_dataset(n_images=n)
    train, test = split_train_test(ds, n_train, seed)
    assert len(train.images) == n_train
    assert sorted(train.image_ids + test.image_ids) == sorted(ds.image_ids)


def test_split_rejects_bad_sizes():
    ds = make_dataset(n_images=5)
    with pytest.raises(ValueError):
        split_train_test(ds, 5, 0)
    with pytest.raises(ValueError):
        split_train_test(ds, 0, 0)


def test_manifest_roundtrip(tmp_path):
    recs = [fix("c0", AgeGroup.CHILDREN, "im0", 1, 2, 0, 80.0), fix("e0", AgeGroup.ELDERLY, "im2", 3, 4, 0)]
    ds = make_dataset(fixations=recs)
    save_manifest(tmp_path / "manifest.json", ds)
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert {i["id"] for i in doc["images"]} == {"im0", "im1", "im2"}
    back = load_manifest(tmp_path / "manifest.json")
    assert back.fixations == ds.fixations
    assert back.observers == ds.observers
    assert [(i.image_id, i.category, i.width) for i in back.images] == \
        [(i.image_id, i.category, i.width) for i in ds.images]


def test_fixations_for_drop_first():
    recs = [fix("c0", AgeGroup.CHILDREN, "im0", k, k, k) for k in range(3)]
    ds = make_dataset(fixations=recs)
    assert len(ds.fixations_for("im0", drop_first=True)) == 2
    assert ds.fixations_for("im0", AgeGroup.ADULTS) == []
