import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from likert_responsiveness.ratings_model import (
    BinaryRecord,
    DataWarning,
    GroupKey,
    InputError,
    ItemMeta,
    LikertScale,
    RaterAttributes,
    RatingRecord,
    RatingTable,
    export_attributes,
    export_binary,
    export_items,
    export_ratings,
    load_attributes,
    load_binary,
    load_items,
    load_ratings,
    load_ratings_jsonl,
    select_raters,
    trisection_keys,
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLikertScale:
    def test_values(self):
        s = LikertScale(4)
        assert list(s.values) == [0, 1, 2, 3, 4]
        assert s.n_points == 5
        assert 4 in s and 5 not in s and -1 not in s

    @pytest.mark.parametrize("bad", [0, -3, 2.5])
    def test_rejects_bad_k(self, bad):
        with pytest.raises(ValueError):
            LikertScale(bad)


class TestLoadRatings:
    def test_valid_file(self, tmp_path, scale4):
        p = write(tmp_path / "r.csv", "item_id,rater_id,score\ni1,r1,0\ni1,r2,4\ni2,r1,2\n")
        t = load_ratings(p, scale4)
        assert t.summary() == {"records": 3, "items": 2, "raters": 2}
        assert t.dense.tolist() == [[0, 4], [2, -1]]

    def test_out_of_range_names_line(self, tmp_path, scale4):
        p = write(tmp_path / "r.csv", "item_id,rater_id,score\ni1,r1,0\ni2,r1,7\n")
        with pytest.raises(InputError, match="out of range") as exc:
            load_ratings(p, scale4)
        assert exc.value.line == 3

    def test_duplicate_pair(self, tmp_path, scale4):
        p = write(tmp_path / "r.csv", "item_id,rater_id,score\ni1,r1,0\ni1,r1,3\n")
        with pytest.raises(InputError, match="duplicate") as exc:
            load_ratings(p, scale4)
        assert exc.value.line == 3

    def test_malformed_row(self, tmp_path, scale4):
        p = write(tmp_path / "r.csv", "item_id,rater_id,score\ni1,r1,x\n")
        with pytest.raises(InputError, match="malformed") as exc:
            load_ratings(p, scale4)
        assert exc.value.line == 2

    def test_missing_column(self, tmp_path, scale4):
        p = write(tmp_path / "r.csv", "item_id,score\ni1,1\n")
        with pytest.raises(InputError, match="missing header"):
            load_ratings(p, scale4)

    def test_jsonl_mirror(self, tmp_path, scale4):
        csv_t = load_ratings(write(tmp_path / "r.csv", "item_id,rater_id,score\ni2,r1,1\ni1,r2,3\n"), scale4)
        jsonl = write(
            tmp_path / "r.jsonl",
            '{"item_id": "i1", "rater_id": "r2", "score": 3}\n{"item_id": "i2", "rater_id": "r1", "score": 1}\n',
        )
        assert load_ratings_jsonl(jsonl, scale4) == csv_t

    def test_sparse_table_allowed(self, scale4):
        t = RatingTable([RatingRecord("a", "r1", 1), RatingRecord("b", "r2", 2)], scale4)
        assert (t.dense == -1).sum() == 2


class TestLoadBinary:
    def test_label_must_be_binary(self, tmp_path):
        p = write(tmp_path / "b.csv", "item_id,rater_id,label\ni1,t1,2\n")
        with pytest.raises(InputError, match="0 or 1"):
            load_binary(p)

    def test_header_only_warns(self, tmp_path):
        p = write(tmp_path / "b.csv", "item_id,rater_id,label\n")
        with pytest.warns(DataWarning):
            assert load_binary(p) == []

    def test_record_validation(self):
        with pytest.raises(ValueError):
            BinaryRecord("i", "t", 3)


class TestAttributes:
    def test_missing_value_is_unknown(self, tmp_path):
        p = write(tmp_path / "a.csv", "rater_id,gender,age\nr1,woman,\nr2,man,55+\n")
        attrs = load_attributes(p)
        assert attrs[0].attributes == {"gender": "woman"}
        assert select_raters(attrs, GroupKey.parse("gender=woman")) == {"r1"}
        assert select_raters(attrs, GroupKey.parse("age=55+")) == {"r2"}

    def test_empty_key_selects_all(self):
        attrs = [RaterAttributes("r1", {"g": "a"}), RaterAttributes("r2", {"g": "b"})]
        assert select_raters(attrs, GroupKey.parse("all")) == {"r1", "r2"}

    def test_unknown_axis(self):
        with pytest.raises(KeyError, match="unknown attribute axis"):
            select_raters([RaterAttributes("r1", {"g": "a"})], GroupKey.parse("height=tall"))

    def test_trisections(self):
        attrs = [
            RaterAttributes("r1", {"a": "1", "b": "x", "c": "p"}),
            RaterAttributes("r2", {"a": "1", "b": "x", "c": "p"}),
            RaterAttributes("r3", {"a": "2", "b": "y", "c": "q"}),
            RaterAttributes("r4", {"a": "2", "b": "y"}),
        ]
        keys = trisection_keys(attrs, ["a", "b", "c"])
        assert [k.label for k in keys] == ["a=1,b=x,c=p", "a=2,b=y,c=q"]


class TestGroupKey:
    def test_order_insensitive(self):
        assert GroupKey.parse("b=2,a=1") == GroupKey.parse("a=1,b=2")
        assert GroupKey.parse("b=2,a=1").label == "a=1,b=2"

    def test_duplicate_axis(self):
        with pytest.raises(ValueError):
            GroupKey.parse("a=1,a=2")

    def test_malformed(self):
        with pytest.raises(ValueError):
            GroupKey.parse("a")


records = st.lists(
    st.tuples(st.sampled_from("abcdef"), st.sampled_from(["r1", "r2", "r3"]), st.integers(0, 4)),
    min_size=1,
    max_size=18,
    unique_by=lambda r: (r[0], r[1]),
)


class TestRoundTrip:
    @settings(max_examples=40, deadline=None)
    @given(records)
    def test_ratings_roundtrip(self, tmp_path_factory, rows):
        path = tmp_path_factory.mktemp("rt") / "r.csv"
        scale = LikertScale(4)
        t = RatingTable([RatingRecord(*r) for r in rows], scale)
        export_ratings(t, path)
        assert load_ratings(path, scale) == t

    @settings(max_examples=20, deadline=None)
    @given(records)
    def test_canonical_order_independent_of_input_order(self, rows):
        scale = LikertScale(4)
        a = RatingTable([RatingRecord(*r) for r in rows], scale)
        b = RatingTable([RatingRecord(*r) for r in reversed(rows)], scale)
        assert a == b
        assert list(a) == sorted(a, key=lambda r: (r.item_id, r.rater_id))

    def test_other_exports_roundtrip(self, tmp_path):
        binary = [BinaryRecord("i2", "t1", 1), BinaryRecord("i1", "t1", 0)]
        export_binary(binary, tmp_path / "b.csv")
        assert sorted(load_binary(tmp_path / "b.csv"), key=lambda r: r.item_id) == sorted(binary, key=lambda r: r.item_id)
        attrs = [RaterAttributes("r1", {"g": "a"}), RaterAttributes("r2", {"g": "b", "age": "x"})]
        export_attributes(attrs, tmp_path / "a.csv")
        assert load_attributes(tmp_path / "a.csv") == attrs
        items = [ItemMeta("i1", {"violation_type": "sexual"})]
        export_items(items, tmp_path / "m.csv")
        assert load_items(tmp_path / "m.csv") == items

    def test_dense_roundtrip(self):
        m = np.array([[0, -1, 3], [4, 2, -1]])
        t = RatingTable.from_dense(m, ["i1", "i2"], ["a", "b", "c"], LikertScale(4))
        assert np.array_equal(t.dense, m)

    def test_no_warnings_on_valid_fixture(self, fixture_dir):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            t = load_ratings(fixture_dir / "ratings.csv", LikertScale(4))
            load_binary(fixture_dir / "binary.csv")
        assert len(t.rater_ids) == 12
