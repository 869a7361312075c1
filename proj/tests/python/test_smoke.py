import json
import math
import os

import pytest

import scitikz

A = "\\begin{tikzpicture}\n\\draw (1,1) -- (7,7);\n\\draw (4,4) circle (2);\n\\end{tikzpicture}\n"
B = "\\begin{tikzpicture}\n\\draw (0,7) -- (7,0);\n\\end{tikzpicture}\n"
BROKEN = "\\begin{tikzpicture}\n\\draw (1,1) -- ;\n\\end{tikzpicture}\n"


def test_default_config_round_trip():
    cfg = scitikz.default_config()
    assert cfg["schema"] == "scitikz-config/1"
    assert cfg["reward"]["stage1"]["alpha_minus"] == -0.6
    assert scitikz.config_hash(json.dumps(cfg)) == scitikz.config_hash()


def test_bad_config_raises():
    with pytest.raises(scitikz.ConfigError):
        scitikz.stage2_total(True, config={"reward": {"stage9": {}}})


def test_lexer_and_code_metrics():
    kinds = dict(scitikz.lex("\\draw (0,0);"))
    assert kinds["command"] == "\\draw"
    assert scitikz.eed(A, A) == 0.0
    assert scitikz.ted_similarity(A, A) == 1.0
    assert scitikz.crystal_bleu(A, A) == pytest.approx(1.0)
    assert scitikz.eed("a x c y e", "a b c d e", levenshtein=True) == pytest.approx(0.4)


def test_reward_math():
    assert scitikz.hinge_semantic(0.9, 0.8) == pytest.approx(0.5, abs=1e-12)
    assert scitikz.struct_from_distance(0.5, 0.5) == pytest.approx(math.exp(-1), abs=1e-12)
    adv = scitikz.group_advantages([1.0, 0.5, 0.0])
    assert adv == pytest.approx([1.2247, 0.0, -1.2247], abs=1e-4)
    assert scitikz.clipped_surrogate(2.0, 1.0, 0.2) == pytest.approx(1.2)
    closed = scitikz.stage2_total(True, 0.6, 0.6, s_code=1.0)
    opened = scitikz.stage2_total(True, 0.61, 0.61, s_code=1.0)
    assert not closed["gate_open"] and opened["gate_open"]
    assert scitikz.stage2_total(False)["total"] == -0.5


def test_judge_schema():
    ok = '{"correctness":5,"layout_precision":4,"readability":4,"scientific_plausibility":4,"visual_complexity":3,"total_score":20}'
    assert scitikz.parse_judge_reply("fine.\n" + ok)["total_score"] == 20
    with pytest.raises(scitikz.SchemaViolation):
        scitikz.parse_judge_reply(ok.replace("20", "19"))


def test_evaluate_with_toy_renderer():
    rep = scitikz.evaluate({"a": A, "b": BROKEN}, {"a": A, "b": B})
    assert rep["schema"] == "scitikz-eval/1"
    assert rep["aggregates"]["ALL"]["ssim"] == pytest.approx(rep["aggregates"]["SUCCESS"]["ssim"] / 2)


def test_dsc_sim_deterministic():
    a = scitikz.dsc_sim(seed=3, images=2, fault_rate=0.0)
    assert a["report"]["compile_rate"] == 1.0
    assert a == scitikz.dsc_sim(seed=3, images=2, fault_rate=0.0)


def test_cli_entry():
    rc, out, _ = scitikz.run_cli(["--help"])
    assert rc == 0 and "eval" in out
    rc, _, _ = scitikz.run_cli(["frobnicate"])
    assert rc == 2


@pytest.mark.skipif(not os.environ.get("SCITIKZ_TEST_CONFIG"), reason="no test toolchain config")
def test_compile_with_test_toolchain():
    with open(os.environ["SCITIKZ_TEST_CONFIG"]) as f:
        cfg = json.load(f)
    if "no-engine" in cfg["sandbox"]["engine_command"][0]:
        pytest.skip("no LaTeX toolchain")
    assert scitikz.compile(A, cfg)["status"] == "success"
    assert scitikz.compile(BROKEN, cfg)["status"] == "compile-error"
