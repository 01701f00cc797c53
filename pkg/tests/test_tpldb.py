import math
from fractions import Fraction

import pytest

from conftest import graph_of
from modx.features import ModuleSignature
from modx.graph import GraphFormatError
from modx.tpldb import (
    LibraryMeta,
    LibrarySignature,
    assemble_database,
    build_library_signature,
    dump_library_signature,
    importance_map,
    load_db,
    load_library_signature,
    matching_confidence,
    module_importance,
    save_db,
)


def stub_module(module_id: int, size: int) -> ModuleSignature:
    vectors = {f"m{module_id}_f{i}": (1.0,) + (0.0,) * 7 for i in range(size)}
    return ModuleSignature(
        module_id=module_id,
        function_count=size,
        string_set=frozenset({f"string_of_{module_id}"}),
        constant_bag={module_id * 1000 + 7: 1},
        kernel_histograms=({(0,) * 8: size},),
        edge_vectors=(),
        function_vectors=vectors,
        function_volumes={fid: 1 for fid in vectors},
        anchor_groups=(),
    )


def stub_library(name: str, module_sizes: list[int], nu: int = 1) -> LibrarySignature:
    return LibrarySignature(
        library_name=name,
        version="1",
        modules=tuple(stub_module(i, s) for i, s in enumerate(module_sizes)),
        ref_frequency=nu,
    )


def test_li_small_library_beats_large():
    small = stub_library("small", [16] * 5, nu=1)
    large = stub_library("large", [16] * 186, nu=1)
    assert small.li == pytest.approx(math.log(2) / 5, abs=1e-12)
    assert large.li == pytest.approx(math.log(2) / 186, abs=1e-12)
    assert small.li > large.li


def test_li_zero_when_never_referenced():
    assert stub_library("x", [4, 4], nu=0).li == 0.0


def test_li_monotone_in_nu_and_module_count():
    base = stub_library("b", [4] * 8, nu=1).li
    assert stub_library("b", [4] * 8, nu=5).li > base
    assert stub_library("b", [4] * 9, nu=1).li < base


def test_module_importance_examples():
    db = assemble_database([stub_library("lib", [10, 10, 10])])
    for mid in range(3):
        assert module_importance(db, "lib", mid) == pytest.approx(1.0)
    # module of size 20 against a database mean of 10
    db2 = assemble_database([stub_library("lib", [20, 8, 6, 6])])
    assert module_importance(db2, "lib", 0) == pytest.approx(2.0)


def test_module_importance_sums_to_module_count():
    db = assemble_database(
        [stub_library("a", [3, 5, 7]), stub_library("b", [2, 11])]
    )
    imap = importance_map(db)
    n = db.n_modules
    # the identity holds exactly over the rationals backing the floats
    sizes = [sig.function_count for _, sig in db.iter_modules()]
    exact = sum(Fraction(s * n, sum(sizes)) for s in sizes)
    assert exact == n
    assert math.fsum(imap.values()) == pytest.approx(n, abs=1e-12)


def test_matching_confidence_product():
    lib = stub_library("lib", [10, 10, 10, 10, 10], nu=1)
    db = assemble_database([lib])
    mc = matching_confidence(db, "lib", 0)
    assert mc == pytest.approx(1.0 * math.log(2) / 5)
    zero = stub_library("z", [10], nu=0)
    db0 = assemble_database([zero])
    assert matching_confidence(db0, "z", 0) == 0.0


def test_mc_ordering_small_library_wins_for_equal_mi():
    db = assemble_database(
        [stub_library("tiny", [16] * 5, nu=1), stub_library("huge", [16] * 186, nu=1)]
    )
    # equal module sizes -> equal MI; ordering is decided by LI alone
    assert matching_confidence(db, "tiny", 0) > matching_confidence(db, "huge", 0)


def test_build_library_signature_pipeline():
    g = graph_of(
        {"a": 4, "b": 2, "c": 9},
        [("a", "b"), ("b", "c")],
        attrs={"a": {"strings": frozenset({"hello_world_string"})}},
    )
    lib = build_library_signature(g, LibraryMeta("demo", "2.0", 3))
    assert lib.library_name == "demo"
    assert lib.module_count >= 1
    assert sum(s.function_count for s in lib.modules) == 3
    assert lib.li == pytest.approx(math.log(4) / lib.module_count)


def test_corpus_stats_count_modules_not_occurrences():
    a = stub_library("a", [2, 2])
    db = assemble_database([a])
    # each stub module contributes one distinct constant
    assert db.corpus_stats.n_modules == 2
    assert all(v == 1 for v in db.corpus_stats.df.values())


# -- persistence ----------------------------------------------------------------


def test_save_load_round_trip(tmp_path):
    db = assemble_database(
        [stub_library("alpha", [3, 4]), stub_library("beta", [5])],
        build_params={"propagation": {"c": 1.0}},
    )
    save_db(db, tmp_path / "db")
    loaded = load_db(tmp_path / "db")
    assert loaded.libraries == db.libraries
    assert loaded.corpus_stats == db.corpus_stats
    assert loaded.build_params == db.build_params


def test_save_is_byte_stable(tmp_path):
    db = assemble_database([stub_library("alpha", [3, 4])])
    save_db(db, tmp_path / "one")
    save_db(db, tmp_path / "two")
    a = (tmp_path / "one" / "corpus.json").read_bytes()
    b = (tmp_path / "two" / "corpus.json").read_bytes()
    assert a == b
    sa = (tmp_path / "one" / "alpha" / "signature.json").read_bytes()
    sb = (tmp_path / "two" / "alpha" / "signature.json").read_bytes()
    assert sa == sb


def test_load_rejects_unknown_version(tmp_path):
    db = assemble_database([stub_library("alpha", [3])])
    save_db(db, tmp_path / "db")
    corpus = tmp_path / "db" / "corpus.json"
    corpus.write_text(corpus.read_text().replace("mdb-1", "mdb-9"))
    with pytest.raises(GraphFormatError, match="version"):
        load_db(tmp_path / "db")


def test_signature_document_round_trip():
    lib = stub_library("gamma", [2, 6], nu=4)
    text = dump_library_signature(lib)
    assert load_library_signature(text) == lib


def test_signature_document_rejects_unknown_version():
    lib = stub_library("gamma", [2])
    text = dump_library_signature(lib).replace("msig-1", "msig-0")
    with pytest.raises(GraphFormatError, match="version"):
        load_library_signature(text)


def test_empty_db_round_trips(tmp_path):
    db = assemble_database([])
    save_db(db, tmp_path / "empty")
    loaded = load_db(tmp_path / "empty")
    assert loaded.libraries == ()
    assert loaded.corpus_stats.n_modules == 0


def test_rebuild_is_deterministic():
    g = graph_of({"a": 4, "b": 2, "c": 9, "d": 1},
                 [("a", "b"), ("b", "c"), ("c", "d")])
    one = build_library_signature(g, LibraryMeta("demo"))
    two = build_library_signature(g, LibraryMeta("demo"))
    assert one == two
    assert dump_library_signature(one) == dump_library_signature(two)
