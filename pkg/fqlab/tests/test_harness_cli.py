"""
Tests for the experiment runners, report rendering and the command line.
"""

import json

import numpy as np
import pytest

from fqlab.cli import EXIT_BUDGET, EXIT_FAILURE, EXIT_OK, main
from fqlab.engine.errors import BadParams, InvariantViolation
from fqlab.engine.tensor import FqTensor, family, zero
from fqlab.harness import experiments
from fqlab.harness.experiments import (
    check_le,
    run_chain,
    run_covering,
    run_direct_sum,
    run_extension_stability,
    run_kron_growth,
    run_survey,
    settled_geometric_rank,
    survey_seeds,
)
from fqlab.harness.reports import envelope, generate_checksum, records_frame, render
from fqlab.models.schema import ExperimentConfig


@pytest.fixture
def cfg():
    return ExperimentConfig(K=3)


class TestChain:
    """The full invariant chain for one tensor."""

    def test_w(self, w_tensor, cfg):
        record = run_chain(w_tensor, cfg, name="W", covering=True).record
        assert (record.q_exact, record.gr, record.sr) == (1, 2, 2)
        assert record.gr_certain is True
        assert (record.ar_z, record.ar_e, record.ar) == ("8", 4, 1.0)
        assert record.bias == "1/2"
        assert record.gr_bound_infinite == 5
        assert record.gr_le_inf_bound == "diagnostic: holds"
        assert (record.q_le_gr, record.gr_le_sr) == ("pass", "pass")
        assert record.covering_m == 3
        assert record.errors == ""

    def test_identity(self, gf2, cfg):
        record = run_chain(family("identity", gf2, r=3), cfg).record
        assert (record.q_exact, record.gr, record.sr, record.pr_upper) == (3, 3, 3, 3)
        assert record.ar_z == "27"

    def test_zero(self, gf2, cfg):
        record = run_chain(zero(gf2, [2, 2, 2]), cfg).record
        assert (record.q_exact, record.gr, record.sr) == (0, 0, 0)
        assert record.ar == 0.0

    def test_budget_becomes_unknown(self, gf2):
        tight = ExperimentConfig(K=3, strata_budget=2)
        record = run_chain(family("identity", gf2, r=2), tight).record
        assert record.gr is None
        assert record.q_le_gr == "unknown"
        assert "geometric_rank" in record.errors

    def test_check_le(self):
        assert check_le("x", 1, 2) == "pass"
        assert check_le("x", None, 2) == "unknown"
        with pytest.raises(InvariantViolation):
            check_le("x", 3, 2)


class TestExperiments:
    """Direct sums, Kronecker powers, extensions, surveys and covering."""

    def test_direct_sum_of_scalars(self, gf2, cfg):
        I1 = family("identity", gf2, r=1)
        body = run_direct_sum(I1, I1, cfg)
        assert body["parts"]["S+T"]["q_exact"] == 2
        assert body["gap"] == 0
        assert body["gr_additivity"] == "pass"
        assert body["parts"]["S+T"]["K"] == 3

    def test_settled_geometric_rank_raises_k(self, gf2):
        # slices [[u1, u3], [0, u2]]: over GF(2) the generic rank 2 is not yet certain
        data = np.zeros((2, 2, 3), dtype=np.int64)
        data[0, 0, 0] = data[1, 1, 1] = data[0, 1, 2] = 1
        T = FqTensor(gf2, data)
        gr, K = settled_geometric_rank(T, 1, 1)
        assert (gr.certain, K) == (False, 1)
        gr, K = settled_geometric_rank(T, 1, 5)
        assert (gr.value, gr.certain, K) == (2, True, 2)

    def test_direct_sum_with_zero(self, gf2, w_tensor, cfg):
        body = run_direct_sum(zero(gf2, [1, 1, 1]), w_tensor, cfg)
        assert body["parts"]["S+T"]["q_exact"] == body["parts"]["T"]["q_exact"] == 1
        assert body["gap"] == 0
        assert body["parts"]["S+T"]["gr"] == 2

    def test_kron_identity(self, gf2):
        body = run_kron_growth(family("identity", gf2, r=2), ExperimentConfig(K=2), kmax=2)
        rows = body["rows"]
        assert [r["lower"] for r in rows] == [2, 4]
        assert [r["upper"] for r in rows] == [2, 4]
        assert rows[1]["growth"] == 2.0

    def test_kron_w(self, w_tensor):
        rows = run_kron_growth(w_tensor, ExperimentConfig(K=2), kmax=2)["rows"]
        assert rows[0]["lower"] == 1
        assert 1 <= rows[1]["lower"] <= rows[1]["upper"]
        assert rows[1]["dims"] == "4x4x4"

    def test_kron_bad_kmax(self, w_tensor, cfg):
        with pytest.raises(BadParams):
            run_kron_growth(w_tensor, cfg, kmax=0)

    def test_extension_identity(self, gf2):
        body = run_extension_stability(family("identity", gf2, r=2), ExperimentConfig(K=2), klist=[2, 1])
        assert [r["k"] for r in body["rows"]] == [1, 2]
        assert [r["lower"] for r in body["rows"]] == [2, 2]
        assert not any(r["anomaly"] for r in body["rows"])

    def test_survey_is_deterministic(self):
        cfg = ExperimentConfig(field="2", seed=7, K=3)
        records, body = run_survey(cfg, samples=3, dims=[2, 2, 2])
        _, again = run_survey(cfg, samples=3, dims=[2, 2, 2])
        assert len(records) == 3
        assert generate_checksum(body) == generate_checksum(again)
        assert survey_seeds(7, 3) == survey_seeds(7, 3)
        assert all(r.gr is not None and r.gr <= 2 for r in records)

    def test_covering(self, w_tensor, cfg):
        body = run_covering(w_tensor, cfg)
        assert body["q_exact"] == 1
        assert body["covering"]["covers"] is True
        assert body["gr_upper_via_counting"] is not None


class TestReports:
    """Envelopes, checksums and formats."""

    def test_checksum_ignores_timestamp(self):
        body = {"a": 1, "b": [1, 2]}
        assert generate_checksum(body) == generate_checksum({**body, "timestamp": "now"})
        assert generate_checksum(body) != generate_checksum({"a": 2, "b": [1, 2]})

    def test_envelope(self):
        env = envelope("gr", {"value": 2})
        assert env["command"] == "gr"
        assert env["version"] == "fqlab-1.0"
        assert env["checksum"] == generate_checksum({"value": 2})

    def test_csv_keeps_optional_ints(self, w_tensor, cfg):
        record = run_chain(w_tensor, cfg).record
        text = render("ranks", {"rows": 1}, "csv", rows=records_frame([record]))
        header, columns, row = text.splitlines()[:3]
        assert header.startswith("# fqlab-csv schema=1 command=ranks checksum=")
        assert columns.split(",")[0] == "name"
        assert ",1,1,1,2," in row

    def test_unknown_format(self):
        with pytest.raises(BadParams):
            render("gr", {}, "xml")


class TestCommandLine:
    """main() output and exit codes."""

    def test_field(self, capsys):
        assert main(["field", "--field", "2^2"]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["body"]["modulus"] == [1, 1, 1]
        assert out["body"]["generator"] == 2

    def test_ranks_structured_is_deterministic(self, capsys):
        assert main(["ranks", "--family", "W"]) == EXIT_OK
        first = capsys.readouterr().out
        assert main(["ranks", "--family", "W"]) == EXIT_OK
        second = capsys.readouterr().out
        assert first == second
        record = json.loads(first)["body"]["record"]
        assert (record["q_exact"], record["gr"], record["sr"]) == (1, 2, 2)

    def test_ranks_csv(self, capsys):
        assert main(["ranks", "--family", "W", "--format", "csv"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("# fqlab-csv schema=1 command=ranks checksum=")

    def test_budget_exit_code(self, capsys):
        code = main(["gr", "--family", "identity", "--params", '{"r": 3}', "--budget", "1"])
        assert code == EXIT_BUDGET
        assert "budget exceeded" in capsys.readouterr().err

    def test_bad_input_exit_code(self, capsys):
        assert main(["gr", "--family", "spiral"]) == EXIT_FAILURE
        assert main(["gr", "--params", "[1, 2]"]) == EXIT_FAILURE

    def test_dims_rejected_for_fixed_shape_family(self, capsys):
        assert main(["gr", "--family", "W", "--dims", "3,3,3"]) == EXIT_FAILURE
        assert "--dims applies to the random and zero families" in capsys.readouterr().err

    def test_finite_field_constants_from_flags(self, capsys):
        assert main(["ranks", "--family", "W"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["body"]["record"]["gr_bound_finite"] == "6"
        assert main(["ranks", "--family", "W", "--c1", "2", "--c2", "1"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["body"]["record"]["gr_bound_finite"] == "9/2"

    def test_invariant_violation_exit_code(self, capsys, monkeypatch):
        def broken(*args, **kwargs):
            raise InvariantViolation("Q <= GR failed: 3 > 2")

        monkeypatch.setattr(experiments, "run_chain", broken)
        assert main(["ranks", "--family", "W"]) == EXIT_FAILURE
        assert "INVARIANT VIOLATION" in capsys.readouterr().err

    def test_tensor_make_and_show(self, tmp_path, capsys):
        path = tmp_path / "w.json"
        assert main(["tensor", "make", "--family", "W", "--out", str(path)]) == EXIT_OK
        assert path.exists()
        capsys.readouterr()
        assert main(["tensor", "show", str(path), "--format", "table"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("slice 1:\n0 1\n1 0\n")

    def test_certificate_check(self, tmp_path, capsys):
        tensor = tmp_path / "i3.json"
        cert = tmp_path / "cert.json"
        main(["tensor", "make", "--params", '{"r": 3}', "--out", str(tensor)])
        assert main(["subrank", str(tensor), "--certify", str(cert)]) == EXIT_OK
        capsys.readouterr()
        assert main(["subrank", str(tensor), "--check", str(cert)]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["body"]["valid"] is True

        data = json.loads(cert.read_text())
        data["coeff"][0] = [0, 0, 0]
        cert.write_text(json.dumps(data))
        assert main(["subrank", str(tensor), "--check", str(cert)]) == EXIT_FAILURE

    def test_gaussian(self, capsys):
        assert main(["gaussian", "--c", "2", "--n", "4"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["body"]["value"] == "35"

    def test_out_file(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        assert main(["bias", "--family", "W", "--out", str(out)]) == EXIT_OK
        assert capsys.readouterr().out == ""
        assert json.loads(out.read_text())["body"]["Z"] == "8"


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
