import numpy as np
import pytest

from conduel.errors import DataFormatError, StructuralError
from conduel.hetrec import IngestConfig, build_environment, parse_hetrec


def write_tags(tmp_path, rows, header="userID\titemID\ttagID\tday", sep="\t"):
    path = tmp_path / "tags.dat"
    lines = [header] + [sep.join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_parse_small_file(tmp_path):
    path = write_tags(tmp_path, [(2, 52, 13, 1), (2, 52, 25, 1)])
    raw = parse_hetrec(path)
    assert len(raw) == 2
    assert raw.n_raw == 2
    assert raw.n_users == 1 and raw.n_items == 1 and raw.n_tags == 2
    # dense re-indexing maps sorted original ids
    np.testing.assert_array_equal(raw.tag_ids, [13, 25])


def test_parse_collapses_duplicates(tmp_path):
    path = write_tags(tmp_path, [(1, 2, 3, 9), (1, 2, 3, 11), (1, 2, 4, 9)])
    raw = parse_hetrec(path)
    assert raw.n_raw == 3
    assert len(raw) == 2


def test_parse_comma_delimited(tmp_path):
    path = write_tags(tmp_path, [(1, 2, 3), (4, 5, 6)], header="u,i,t", sep=",")
    raw = parse_hetrec(path)
    assert len(raw) == 2


def test_parse_errors(tmp_path):
    with pytest.raises(DataFormatError, match="not found"):
        parse_hetrec(tmp_path / "missing.dat")
    short = tmp_path / "short.dat"
    short.write_text("userID\titemID\ttagID\n1\t2\n")
    with pytest.raises(DataFormatError, match=":2"):
        parse_hetrec(short)
    bad = tmp_path / "bad.dat"
    bad.write_text("userID\titemID\ttagID\n1\t2\tx\n")
    with pytest.raises(DataFormatError, match=":2"):
        parse_hetrec(bad)
    empty = tmp_path / "empty.dat"
    empty.write_text("userID\titemID\ttagID\n")
    with pytest.raises(DataFormatError, match="no data rows"):
        parse_hetrec(empty)
    headerless = tmp_path / "nodelim.dat"
    headerless.write_text("justoneword\n")
    with pytest.raises(DataFormatError, match="delimiter"):
        parse_hetrec(headerless)


def block_dataset(tmp_path):
    """Two disjoint user/item blocks of rank-1 feedback each, plus tags."""
    rows = []
    # users 0..2 tag items 0..3 with tags 100/101; users 3..4 tag items 4..7
    for u in range(3):
        for it in range(4):
            rows.append((u, it, 100 + (it % 2)))
    for u in range(3, 5):
        for it in range(4, 8):
            rows.append((u, it, 200 + (it % 3)))
    return write_tags(tmp_path, rows)


def test_build_environment_selection_counts(tmp_path):
    raw = parse_hetrec(block_dataset(tmp_path))
    cfg = IngestConfig(n_items=8, n_users=5, tags_per_item=2, dim=2)
    es = build_environment(raw, cfg)
    assert es.n_arms == 8
    assert es.n_users == 5
    assert es.dim == 2
    np.testing.assert_allclose(es.graph.row_sums(), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(es.arms, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(es.theta_stars, axis=1), 1.0, atol=1e-12)
    prov = es.provenance
    assert prov["source"] == "hetrec"
    assert prov["n_keyterms"] == es.n_keyterms
    assert len(prov["kept_item_ids"]) == 8
    # per-arm key-term cap respected
    counts = np.bincount(es.graph.arm_idx, minlength=8)
    assert counts.max() <= 2


def test_build_environment_requires_enough_data(tmp_path):
    raw = parse_hetrec(block_dataset(tmp_path))
    with pytest.raises(StructuralError, match="lower n_items"):
        build_environment(raw, IngestConfig(n_items=2000, n_users=100))


def test_rank_two_matrix_recovers_preference_order(tmp_path):
    # two disjoint blocks: the feedback matrix has rank 2 and d=2 recovers it
    raw = parse_hetrec(block_dataset(tmp_path))
    cfg = IngestConfig(n_items=8, n_users=5, tags_per_item=2, dim=2)
    es = build_environment(raw, cfg)
    prov = es.provenance
    item_order = {orig: i for i, orig in enumerate(prov["kept_item_ids"])}
    user_order = {orig: i for i, orig in enumerate(prov["kept_user_ids"])}
    feedback = np.zeros((5, 8))
    for u in range(3):
        for it in range(4):
            feedback[user_order[u], item_order[it]] = 1.0
    for u in range(3, 5):
        for it in range(4, 8):
            feedback[user_order[u], item_order[it]] = 1.0
    utilities = es.theta_stars @ es.arms.T
    for u in range(5):
        liked = utilities[u][feedback[u] == 1.0]
        disliked = utilities[u][feedback[u] == 0.0]
        # exact rank-2 recovery keeps every tagged item above every untagged one
        assert liked.min() > disliked.max() + 1e-9


def test_ties_break_by_ascending_id(tmp_path):
    # items 0 and 1 have equal counts; cap keeps the lower id
    rows = [(0, 0, 9), (1, 1, 9), (0, 2, 9), (1, 2, 9)]
    path = write_tags(tmp_path, rows)
    raw = parse_hetrec(path)
    cfg = IngestConfig(n_items=2, n_users=2, tags_per_item=1, dim=1)
    es = build_environment(raw, cfg)
    assert es.provenance["kept_item_ids"][0] == 0
    assert 2 in es.provenance["kept_item_ids"]  # the two-tagger item wins a slot
