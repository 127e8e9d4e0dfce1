import pytest
from hypothesis import given
from hypothesis import strategies as st

from porcelain_mtl import build_taxonomy, decode_label, encode_label, label_histogram
from porcelain_mtl.errors import IndexOutOfRange, UnknownCategory, UnknownTask
from porcelain_mtl.taxonomy import TaskTaxonomy

TAX = build_taxonomy()


def test_shape_of_canonical_taxonomy():
    assert TAX.task_names == ("dynasty", "ware", "glaze", "type")
    assert TAX.cardinalities == (2, 10, 8, 12)
    for t in TAX.tasks:
        assert sum(t.reference_counts) == 5993


def test_reference_counts_match_published_table():
    assert TAX.task("dynasty").reference_counts == (5288, 705)
    assert TAX.task("glaze").reference_counts == (2668, 113, 2379, 577, 54, 4, 64, 134)
    assert TAX.task("ware").categories[-1] == "Peng"
    assert TAX.task("type").categories[4] == "Teabowlstand"


def test_build_is_deterministic():
    assert build_taxonomy() == build_taxonomy()
    assert build_taxonomy().fingerprint() == TAX.fingerprint()


@pytest.mark.parametrize(
    "task,name,index",
    [("ware", "Ding", 0), ("glaze", "blue", 7), ("glaze", "  Celadon ", 2), ("type", "CUP", 11)],
)
def test_encode(task, name, index):
    assert encode_label(TAX, task, name) == index


def test_encode_unknown_category_lists_valid_names():
    with pytest.raises(UnknownCategory) as exc:
        encode_label(TAX, "type", "Teapot")
    assert "Washer" in str(exc.value) and "Cup" in str(exc.value)


def test_encode_unknown_task():
    with pytest.raises(UnknownTask):
        encode_label(TAX, "colour", "Blue")


def test_decode():
    assert decode_label(TAX, "dynasty", 0) == "Song"
    assert decode_label(TAX, "type", 11) == "Cup"
    with pytest.raises(IndexOutOfRange):
        decode_label(TAX, "glaze", 8)
    with pytest.raises(IndexOutOfRange):
        decode_label(TAX, "glaze", -1)


@given(st.sampled_from(TAX.tasks).flatmap(lambda t: st.tuples(st.just(t), st.integers(0, t.num_categories - 1))))
def test_encode_decode_roundtrip(pair):
    task, idx = pair
    name = decode_label(TAX, task.name, idx)
    assert encode_label(TAX, task.name, name) == idx
    assert decode_label(TAX, task.name, encode_label(TAX, task.name, f" {name.upper()} ")) == name


def test_histogram_small_cases():
    empty = label_histogram(TAX, [])
    assert all(v.sum() == 0 and len(v) == k for v, k in zip(empty.values(), TAX.cardinalities))
    recs = [dict(dynasty="Song", ware="Ding", glaze="White", type="Bowl")] * 3
    h = label_histogram(TAX, recs)
    assert h["dynasty"].tolist() == [3, 0]
    assert h["type"][2] == 3


def test_histogram_of_published_distribution_reproduces_counts():
    # a manifest whose per-task marginals are the published ones
    rows = []
    cols = {t.name: [c for c, n in zip(t.categories, t.reference_counts) for _ in range(n)] for t in TAX.tasks}
    for i in range(5993):
        rows.append({name: cols[name][i] for name in TAX.task_names})
    h = label_histogram(TAX, rows)
    assert tuple(h["glaze"]) == (2668, 113, 2379, 577, 54, 4, 64, 134)
    assert tuple(h["dynasty"]) == (5288, 705)


def test_histogram_names_offending_record():
    with pytest.raises(UnknownCategory) as exc:
        label_histogram(TAX, [dict(dynasty="Song", ware="Ding", glaze="Turquoise", type="Bowl")])
    assert exc.value.row == 0


@given(st.lists(st.tuples(*(st.sampled_from(t.categories) for t in TAX.tasks)), max_size=40))
def test_histogram_sums_to_record_count(rows):
    recs = [dict(zip(TAX.task_names, r)) for r in rows]
    h = label_histogram(TAX, recs)
    assert all(int(v.sum()) == len(recs) for v in h.values())


def test_text_export_roundtrip():
    text = TAX.to_text()
    assert "0\tSong" in text and "11\tCup" in text
    back = TaskTaxonomy.from_text(text)
    assert back.task_names == TAX.task_names
    assert [t.categories for t in back.tasks] == [t.categories for t in TAX.tasks]
    assert back.fingerprint() == TAX.fingerprint()
