import pytest
from hypothesis import given, settings, strategies as st

from edgeslm import datapipe
from edgeslm.datapipe import (
    EncodingError,
    ParseError,
    SchemaError,
    fit_label_codec,
    few_shot_subsample,
    kfold_plan,
    load_table,
    parse_features,
    prepare,
    serialize_features,
    split,
    synth_generate,
)
from edgeslm.registry import DatasetDescriptor


def descriptor(**kw):
    defaults = dict(name="mini", path="mini.csv", size_gb=0.0, record_count=3,
                    n_features=2, label_columns=("label",), benign_label_value="Normal")
    defaults.update(kw)
    return DatasetDescriptor(**defaults)


@pytest.fixture
def csv_file(tmp_path):
    p = tmp_path / "mini.csv"
    p.write_text("proto,bytes,label\ntcp,42,Normal\nudp,7,DDoS\ntcp,9,Normal\n")
    return p


def test_load_table_counts(csv_file):
    table = load_table(csv_file, descriptor())
    assert len(table.rows) == 3
    assert table.column_names == ("proto", "bytes", "label")


def test_load_table_missing_label_column(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError, match="label"):
        load_table(p, descriptor())


def test_load_table_ragged_row_names_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,label\n1,2,Normal\n1,2\n")
    with pytest.raises(ParseError, match="row 3"):
        load_table(p, descriptor())


def test_codec_lexicographic(csv_file):
    table = load_table(csv_file, descriptor())
    codec = fit_label_codec(table, "label")
    assert codec.classes == ("DDoS", "Normal")
    assert codec.code("DDoS") == 0
    assert codec.code("Normal") == 1


def test_codec_single_class():
    table = datapipe.RawTable(("label",), (("x",), ("x",)))
    codec = fit_label_codec(table, "label")
    assert codec.classes == ("x",)


def test_codec_distinct_count():
    values = [f"attack{i:02d}" for i in range(14)] * 3
    table = datapipe.RawTable(("label",), tuple((v,) for v in values))
    codec = fit_label_codec(table, "label")
    assert len(codec) == len(set(values)) == 14


def test_prepare_serialization_and_binary_label(csv_file):
    table = load_table(csv_file, descriptor())
    codec = fit_label_codec(table, "label")
    records = prepare(table, descriptor(), codec)
    assert records[0].text == "proto=tcp bytes=42"
    assert records[0].binary_label == 0
    assert records[1].binary_label == 1
    assert records[1].class_label == codec.code("DDoS")


def test_prepare_unseen_label_value(csv_file):
    table = load_table(csv_file, descriptor())
    codec = datapipe.LabelCodec(classes=("Normal",))
    with pytest.raises(EncodingError, match="DDoS"):
        prepare(table, descriptor(), codec)


def test_prepare_missing_cell_token():
    table = datapipe.RawTable(("f", "label"), (("", "Normal"),))
    codec = fit_label_codec(table, "label")
    records = prepare(table, descriptor(), codec)
    assert records[0].text == "f=__missing__"


def test_serialization_escapes_round_trip():
    names = ["a b", "c=d", "plain"]
    values = ["x y", "k=v", "3"]
    text = serialize_features(names, values)
    assert parse_features(text) == list(zip(names, values))


@given(st.lists(st.tuples(
    st.text(alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\n\t"),
            min_size=1, max_size=8),
    st.text(alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\n\t"),
            min_size=0, max_size=8).filter(lambda s: s != "")),
    min_size=1, max_size=5))
@settings(max_examples=60)
def test_feature_round_trip_property(pairs):
    names = [p[0] for p in pairs]
    values = [p[1] for p in pairs]
    text = serialize_features(names, values)
    assert parse_features(text) == list(zip(names, values))


def test_split_60_40():
    plan = split(list(range(10)), ratio=0.6, seed=1)
    assert len(plan.train_indices) == 6
    assert len(plan.test_indices) == 4
    assert set(plan.train_indices) | set(plan.test_indices) == set(range(10))
    assert set(plan.train_indices) & set(plan.test_indices) == set()


def test_split_deterministic_and_seed_sensitive():
    records = list(range(1000))
    assert split(records, seed=3) == split(records, seed=3)
    assert split(records, seed=3) != split(records, seed=4)


@given(n=st.integers(2, 10_000), seed=st.integers(0, 2**31))
@settings(max_examples=50)
def test_split_properties(n, seed):
    plan = split(list(range(n)), ratio=0.6, seed=seed)
    assert len(plan.train_indices) == int(round(0.6 * n))
    assert sorted(plan.train_indices + plan.test_indices) == list(range(n))


def test_few_shot_identity_below_limit():
    records = list(range(100))
    assert few_shot_subsample(records, limit=30000, seed=0) == records


def test_few_shot_caps_at_limit():
    records = list(range(50_000))
    sampled = few_shot_subsample(records, limit=30000, seed=0)
    assert len(sampled) == 30000
    assert len(set(sampled)) == 30000
    assert few_shot_subsample(records, limit=30000, seed=0) == sampled


def test_kfold_even_folds():
    plan = kfold_plan(list(range(100)), k=5, seed=0)
    assert [len(f) for f in plan.folds] == [20] * 5


def test_kfold_remainder():
    plan = kfold_plan(list(range(101)), k=5, seed=0)
    assert sorted(len(f) for f in plan.folds) == [20, 20, 20, 20, 21]


@given(n=st.integers(5, 10_000), seed=st.integers(0, 2**31))
@settings(max_examples=50)
def test_kfold_properties(n, seed):
    plan = kfold_plan(list(range(n)), k=5, seed=seed)
    all_idx = [i for fold in plan.folds for i in fold]
    assert sorted(all_idx) == list(range(n))
    sizes = [len(f) for f in plan.folds]
    assert max(sizes) - min(sizes) <= 1
    assert plan == kfold_plan(list(range(n)), k=5, seed=seed)


def test_synth_counts_and_ground_truth():
    records, informative = synth_generate(1000, 10, 3, 0.5, seed=7)
    assert len(records) == 1000
    assert len(informative) == 3


def test_synth_attack_fraction_zero():
    records, _ = synth_generate(200, 5, 2, 0.0, seed=1)
    assert all(r.binary_label == 0 for r in records)


def test_synth_deterministic():
    a, _ = synth_generate(300, 8, 3, 0.4, seed=11)
    b, _ = synth_generate(300, 8, 3, 0.4, seed=11)
    assert a == b


def test_records_to_matrix_round_trip():
    records, _ = synth_generate(50, 4, 2, 0.5, seed=3)
    names, X, y = datapipe.records_to_matrix(records)
    assert names == ["f0", "f1", "f2", "f3"]
    assert X.shape == (50, 4)
    assert list(y) == [r.binary_label for r in records]


def test_prepared_file_round_trip(tmp_path):
    records, _ = synth_generate(40, 3, 2, 0.5, seed=5)
    path = tmp_path / "out.prep"
    datapipe.write_prepared(records, path)
    loaded = datapipe.read_prepared(path)
    assert [(r.id, r.text, r.binary_label, r.class_label) for r in loaded] == [
        (r.id, r.text, r.binary_label, r.class_label) for r in records]


def test_prepared_file_bad_header(tmp_path):
    path = tmp_path / "bad.prep"
    path.write_text("nope\n1\t0\t0\tx=1\n")
    with pytest.raises(ParseError, match="header"):
        datapipe.read_prepared(path)


def test_prepare_deterministic(csv_file):
    table = load_table(csv_file, descriptor())
    codec = fit_label_codec(table, "label")
    assert prepare(table, descriptor(), codec) == prepare(table, descriptor(), codec)
