import pytest

import comet

CS2 = "mov ecx, edx\nxor edx, edx\nlea rax, [rcx + rax - 1]\ndiv rcx\nmov rdx, rcx\nimul rax, rcx\n"


@pytest.fixture(scope="module")
def kb():
    return comet.load_kb(str(comet.data_dir() / "isa_core.json"))


@pytest.fixture(scope="module")
def table():
    return comet.load_table(str(comet.data_dir() / "costs_hsw.csv"), "hsw")


def test_graph_has_raw_through_rax(kb):
    features = {e["feature"] for e in comet.graph(CS2, kb)["edges"]}
    assert "dep:3-6:raw:rax" in features


def test_canonical_and_errors(kb):
    assert comet.canonical("MOV RAX,RBX", kb) == "mov rax, rbx\n"
    with pytest.raises(comet.ParseError):
        comet.canonical("frobnicate rax", kb)
    with pytest.raises(comet.CometError):
        comet.space_size(CS2, kb, ["dep:1-2:raw:rbx"])


def test_perturb_is_seeded(kb):
    a = comet.perturb(CS2, kb, ["inst:4"], n=5, seed=3)
    assert a == comet.perturb(CS2, kb, ["inst:4"], n=5, seed=3)
    assert all("div " in b for b in a)
    assert comet.space_size(CS2, kb, ["inst:4"]) < comet.space_size(CS2, kb)


def test_explain_crude(kb, table):
    assert comet.crude_predict(CS2, kb, table) > 0
    e = comet.explain(CS2, kb, table, {"beam_width": 4}, seed=2)
    assert e["features"]
    assert e["seed"] == 2
    assert comet.ground_truth(CS2, kb, table)
