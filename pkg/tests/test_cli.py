import json

import numpy as np
import pytest
from click.testing import CliRunner

import optembed as oe
from optembed.cli import main

from helpers import TRUTH_TREE, section3_network
from lp_grammar import parse_lp

runner = CliRunner()


@pytest.fixture(scope="module")
def net_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "net.json"
    path.write_text(oe.dump_predictor(section3_network(np.random.default_rng(100))))
    return str(path)


@pytest.fixture(scope="module")
def tree_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "tree.json"
    path.write_text(oe.dump_predictor(TRUTH_TREE))
    return str(path)


def test_embed_summary_line(net_file, tmp_path):
    out = tmp_path / "model.json"
    res = runner.invoke(
        main, ["embed", "--predictor", net_file, "--inputs", "10", "--out", str(out)]
    )
    assert res.exit_code == 0, res.output
    assert res.output.strip() == "vars=44 cons=34 outputs=2"
    assert out.read_text().startswith("{")


def test_embed_tree_lp_has_path_sum_row(tree_file, tmp_path):
    out = tmp_path / "tree.lp"
    res = runner.invoke(
        main,
        ["embed", "--predictor", tree_file, "--inputs", "2", "--out", str(out), "--format", "lp"],
    )
    assert res.exit_code == 0, res.output
    parsed = parse_lp(out.read_text())
    assert any(
        sense == "=" and rhs == 1.0 and set(terms.values()) == {1.0} and len(terms) == 3
        for _, terms, sense, rhs in parsed.rows
    )


def test_embed_bigm_unbounded_exits_1(net_file, tmp_path):
    bounds_file = tmp_path / "box.json"
    bounds_file.write_text(json.dumps([["-inf", "inf"]] * 10))
    res = runner.invoke(
        main,
        [
            "embed", "--predictor", net_file, "--inputs", str(bounds_file),
            "--relu", "bigm", "--out", str(tmp_path / "m.lp"), "--format", "lp",
        ],
    )
    assert res.exit_code == 1
    assert "UnboundedInput" in res.output


def test_check_ok_and_deterministic(net_file):
    args = [
        "check", "--predictor", net_file, "--inputs", "10",
        "--samples", "30", "--tol", "1e-8", "--seed", "11",
    ]
    a = runner.invoke(main, args)
    b = runner.invoke(main, args)
    assert a.exit_code == 0, a.output
    assert a.output == b.output
    assert a.output.startswith("max_violation=")


def test_check_corrupted_predictor_exits_1(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{this is not json")
    res = runner.invoke(main, ["check", "--predictor", str(bad), "--inputs", "2"])
    assert res.exit_code == 1
    assert "ParseError" in res.output


def test_bounds_output(tree_file, tmp_path):
    res = runner.invoke(main, ["bounds", "--predictor", tree_file, "--inputs", "2"])
    assert res.exit_code == 0
    assert res.output.strip() == "[-2, 4]"
    relu = tmp_path / "relu.json"
    relu.write_text('{"type":"relu"}')
    box = tmp_path / "box.json"
    box.write_text("[[-1.0, 1.0]]")
    res = runner.invoke(main, ["bounds", "--predictor", str(relu), "--inputs", str(box)])
    assert res.output.strip() == "[0, 1]"


def test_oracle_eval_sigmoid(tmp_path):
    sig = tmp_path / "sig.json"
    sig.write_text('{"type":"sigmoid"}')
    res = runner.invoke(main, ["oracle", "--predictor", str(sig), "--x", "0", "--eval"])
    assert res.exit_code == 0
    assert res.output.strip() == "0.5"


def test_oracle_jac_affine_rows(tmp_path):
    aff = tmp_path / "aff.json"
    aff.write_text('{"type":"affine","A":[[1.0,2.0],[3.0,4.0]],"b":[0.0,0.0]}')
    res = runner.invoke(main, ["oracle", "--predictor", str(aff), "--x", "0,0", "--jac"])
    assert res.output.splitlines() == ["1 2", "3 4"]


def test_oracle_hess_affine_zero(tmp_path):
    aff = tmp_path / "aff.json"
    aff.write_text('{"type":"affine","A":[[1.0,2.0]],"b":[0.0]}')
    res = runner.invoke(
        main,
        ["oracle", "--predictor", str(aff), "--x", "0,0", "--hess", "--lambda", "5"],
    )
    assert res.output.splitlines() == ["0 0", "0 0"]


def test_oracle_tree_exits_1(tree_file):
    res = runner.invoke(main, ["oracle", "--predictor", tree_file, "--x", "0.5,0.5", "--eval"])
    assert res.exit_code == 1
    assert "NonDifferentiablePredictor" in res.output


class TestExitCodeTaxonomy:
    def test_usage_bad_choice_is_2(self, net_file, tmp_path):
        res = runner.invoke(
            main,
            [
                "embed", "--predictor", net_file, "--inputs", "10",
                "--formulation", "sideways", "--out", str(tmp_path / "x"),
            ],
        )
        assert res.exit_code == 2

    def test_usage_missing_flag_is_2(self):
        res = runner.invoke(main, ["embed"])
        assert res.exit_code == 2

    def test_usage_hess_without_lambda_is_2(self, net_file):
        res = runner.invoke(main, ["oracle", "--predictor", net_file, "--x", "0", "--hess"])
        assert res.exit_code == 2

    def test_usage_missing_predictor_file_is_2(self, tmp_path):
        res = runner.invoke(
            main, ["bounds", "--predictor", str(tmp_path / "nope.json"), "--inputs", "2"]
        )
        assert res.exit_code == 2

    def test_domain_dimension_error_is_1(self, tree_file):
        res = runner.invoke(main, ["bounds", "--predictor", tree_file, "--inputs", "5"])
        assert res.exit_code == 1
        assert "DimensionError" in res.output

    def test_success_is_0(self, tree_file):
        res = runner.invoke(main, ["bounds", "--predictor", tree_file, "--inputs", "2"])
        assert res.exit_code == 0
