import hashlib
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from envcover.assets import (
    EMBEDDING_DIM,
    AssetCatalog,
    build_catalog,
    cosine_similarity,
    decode_vector,
    embed_text,
    encode_vector,
    load_catalog,
    retrieve_asset,
    save_catalog,
)
from envcover.errors import EmptyCatalog, SchemaViolation


def oracle_cosine(a, b):
    """Reference cosine, written without the library helpers."""
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


# ---------------------------------------------------------------------------
# embedding
# ---------------------------------------------------------------------------


def test_embedding_is_deterministic_and_unit_length():
    a = embed_text("a brown fabric sofa")
    b = embed_text("a brown fabric sofa")
    assert a == b
    assert len(a) == EMBEDDING_DIM
    assert math.isclose(sum(v * v for v in a), 1.0, abs_tol=1e-12)


def test_empty_text_embeds_to_zero_vector():
    assert embed_text("") == [0.0] * EMBEDDING_DIM
    assert embed_text("  !!  ") == [0.0] * EMBEDDING_DIM


def test_token_lands_in_its_hash_bucket():
    # int.from_bytes(sha256(b"sofa").digest()[:8], "big") % 256 == 44,
    # computed with hashlib alone
    vec = embed_text("sofa")
    assert vec[44] == 1.0
    assert (
        int.from_bytes(hashlib.sha256(b"sofa").digest()[:8], "big") % EMBEDDING_DIM
        == 44
    )


def test_casing_and_punctuation_do_not_change_the_vector():
    assert embed_text("Sofa, brown!") == embed_text("sofa brown")


def test_cosine_matches_reference_values():
    q = embed_text("a brown two seater sofa")
    d1 = embed_text("a brown fabric two seater sofa")
    d2 = embed_text("a gray upholstered armchair")
    # 5 shared tokens of 5 and 6: 5 / sqrt(5 * 6)
    assert math.isclose(cosine_similarity(q, d1), 0.912870929175277, abs_tol=1e-12)
    assert math.isclose(cosine_similarity(q, d2), 0.223606797749979, abs_tol=1e-12)


def test_cosine_agrees_with_independent_implementation():
    texts = ["red wooden chair", "red chair", "potted plant", "chair red wooden"]
    for ta in texts:
        for tb in texts:
            a, b = embed_text(ta), embed_text(tb)
            assert math.isclose(
                cosine_similarity(a, b), oracle_cosine(a, b), abs_tol=1e-12
            )


def test_cosine_dimension_mismatch_raises():
    with pytest.raises(SchemaViolation):
        cosine_similarity([1.0, 0.0], [1.0, 0.0, 0.0])


def test_cosine_zero_vector_scores_zero():
    assert cosine_similarity([0.0] * 4, [1.0, 0.0, 0.0, 0.0]) == 0.0


@given(st.lists(st.sampled_from("cup mug bowl plate red blue".split()), max_size=8))
def test_embedding_norm_is_one_or_zero(words):
    vec = embed_text(" ".join(words))
    norm = sum(v * v for v in vec)
    if words:
        assert math.isclose(norm, 1.0, abs_tol=1e-9)
        assert math.isclose(cosine_similarity(vec, vec), 1.0, abs_tol=1e-9)
    else:
        assert norm == 0.0


# ---------------------------------------------------------------------------
# vector codec
# ---------------------------------------------------------------------------


def test_codec_round_trip_within_float32_precision():
    vec = embed_text("a tall green bottle")
    back = decode_vector(encode_vector(vec), EMBEDDING_DIM)
    assert max(abs(x - y) for x, y in zip(vec, back)) < 1e-6


def test_decode_rejects_bad_base64():
    with pytest.raises(SchemaViolation):
        decode_vector("&&&not base64&&&", 4)


def test_decode_rejects_wrong_length():
    blob = encode_vector([1.0, 2.0, 3.0])
    with pytest.raises(SchemaViolation):
        decode_vector(blob, 4)


# ---------------------------------------------------------------------------
# catalog and retrieval
# ---------------------------------------------------------------------------


def small_catalog():
    return build_catalog(
        [
            ("chair_red", "a red wooden chair", (0.5, 0.9, 0.5)),
            ("sofa_fabric", "a brown fabric two seater sofa", (2.0, 0.8, 0.9)),
            ("plant_potted", "a potted green plant", (0.4, 1.1, 0.4)),
        ]
    )


def test_retrieval_picks_best_cosine_match():
    hit = retrieve_asset(small_catalog(), "a brown two seater sofa")
    assert hit.id == "sofa_fabric"


def test_retrieval_ties_break_to_smallest_id():
    catalog = build_catalog(
        [
            ("cup_b", "a red cup", (0.1, 0.1, 0.1)),
            ("cup_a", "a red cup", (0.1, 0.1, 0.1)),
        ]
    )
    assert retrieve_asset(catalog, "red cup").id == "cup_a"


def test_retrieval_from_empty_catalog_raises():
    with pytest.raises(EmptyCatalog):
        retrieve_asset(AssetCatalog(), "anything")


def test_catalog_save_load_round_trip(tmp_path):
    catalog = small_catalog()
    path = tmp_path / "catalog.json"
    save_catalog(catalog, str(path))
    loaded = load_catalog(str(path))
    assert [a.id for a in loaded.assets] == [a.id for a in catalog.assets]
    for a, b in zip(catalog.assets, loaded.assets):
        assert a.size == pytest.approx(b.size)
        assert max(abs(x - y) for x, y in zip(a.embedding, b.embedding)) < 1e-6
    assert retrieve_asset(loaded, "a brown two seater sofa").id == "sofa_fabric"


def test_load_rejects_duplicate_ids(tmp_path):
    catalog = build_catalog([("x", "a thing", (1, 1, 1))])
    path = tmp_path / "catalog.json"
    save_catalog(catalog, str(path))
    doc = path.read_text().replace('"assets": [', '"assets": [', 1)
    import json

    parsed = json.loads(doc)
    parsed["assets"].append(dict(parsed["assets"][0]))
    path.write_text(json.dumps(parsed))
    with pytest.raises(SchemaViolation):
        load_catalog(str(path))


def test_load_rejects_nonpositive_size(tmp_path):
    import json

    catalog = build_catalog([("x", "a thing", (1, 1, 1))])
    path = tmp_path / "catalog.json"
    save_catalog(catalog, str(path))
    parsed = json.loads(path.read_text())
    parsed["assets"][0]["size"] = [1.0, 0.0, 1.0]
    path.write_text(json.dumps(parsed))
    with pytest.raises(SchemaViolation):
        load_catalog(str(path))


def test_fixture_catalog_resolves_bundle_descriptions(catalog):
    hit = retrieve_asset(catalog, "a brown fabric two seater sofa")
    assert hit.id == "sofa_fabric"
    assert hit.size == pytest.approx((2.0, 0.8, 0.9))
