"""
Tests for tensor, certificate and decomposition files and the config model.
"""

import json

import pytest
from pydantic import ValidationError

from fqlab.config.settings import Settings
from fqlab.engine.constants import LAB
from fqlab.engine.errors import BadParams
from fqlab.engine.slicerank import slice_rank_exact
from fqlab.engine.subrank import check_certificate, greedy_diagonalize
from fqlab.engine.tensor import family
from fqlab.models.io import (
    canonical_json,
    parse_compact,
    parse_tensor_text,
    read_certificate,
    read_decomposition,
    read_tensor,
    tensor_to_compact,
    write_certificate,
    write_decomposition,
    write_tensor,
)
from fqlab.models.schema import ExperimentConfig, TensorFile


class TestTensorFiles:
    """JSON and compact tensor files."""

    def test_json_file(self, tmp_path, gf4):
        T = family("random", gf4, dims=[2, 3, 2], seed=8)
        path = tmp_path / "t.json"
        write_tensor(T, path)
        assert read_tensor(path) == T
        payload = json.loads(path.read_text())
        assert payload["field"] == "2^2"
        assert payload["dims"] == [2, 3, 2]

    def test_compact_line(self, w_tensor):
        line = tensor_to_compact(w_tensor)
        assert line == "2|2,2,2|0 1 1 0 1 0 0 0"
        assert parse_compact(line) == w_tensor
        assert parse_tensor_text("  " + line + "\n") == w_tensor

    def test_compact_file(self, tmp_path, w_tensor):
        path = tmp_path / "w.txt"
        write_tensor(w_tensor, path, compact=True)
        assert read_tensor(path) == w_tensor

    def test_rejects_bad_input(self):
        with pytest.raises(BadParams):
            parse_compact("2|2,2|0 1 1")
        with pytest.raises(BadParams):
            parse_compact("2|2,2|0 1 1 2")
        with pytest.raises(BadParams):
            parse_compact("2|2,2")
        with pytest.raises(BadParams):
            parse_tensor_text('{"field": "4", "dims": [1], "entries": [0]}')
        with pytest.raises(BadParams):
            parse_tensor_text("{not json")

    def test_tensor_file_model(self):
        with pytest.raises(ValidationError):
            TensorFile(field="2", dims=[0, 2], entries=[])


class TestCertificateAndDecompositionFiles:
    """Certificates and decompositions survive a write and read."""

    def test_certificate(self, tmp_path, gf2):
        I3 = family("identity", gf2, r=3)
        cert = greedy_diagonalize(I3, 3)
        path = tmp_path / "cert.json"
        write_certificate(I3, cert, path)
        stored = read_certificate(path)
        assert stored.dims == [3, 3, 3]
        assert check_certificate(I3, stored.to_certificate())

    def test_certificate_shape_checked(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"field": "2", "dims": [2, 2, 2], "c": 2, "u": [[[1, 0]], [[1, 0]]], "coeff": [[1, 0]]}))
        with pytest.raises(BadParams):
            read_certificate(path)

    def test_decomposition(self, tmp_path, w_tensor):
        dec = slice_rank_exact(w_tensor).decomposition
        path = tmp_path / "dec.json"
        write_decomposition(dec, path)
        loaded = read_decomposition(path)
        assert loaded.size == 2
        assert loaded.verify(w_tensor)


class TestExperimentConfig:
    """Validation of command options."""

    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.field == "2"
        assert cfg.K == 3
        assert cfg.family_params() == {}

    def test_field_normalized(self):
        assert ExperimentConfig(field="2^1").field == "2"

    def test_random_needs_seed(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(family="random", dims=[2, 2, 2])
        cfg = ExperimentConfig(family="random", dims=[2, 2, 2], seed=3)
        assert cfg.family_params() == {"dims": [2, 2, 2], "seed": 3}

    def test_dims_only_for_shaped_families(self):
        assert ExperimentConfig(family="zero", dims=[2, 3]).family_params() == {"dims": [2, 3]}
        with pytest.raises(BadParams):
            ExperimentConfig(family="W", dims=[3, 3, 3]).family_params()
        with pytest.raises(BadParams):
            ExperimentConfig(family="identity", dims=[2, 2, 2], params={"r": 2}).family_params()

    def test_rejects_unknown_family_and_budgets(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(family="spiral")
        with pytest.raises(ValidationError):
            ExperimentConfig(strata_budget=0)
        with pytest.raises(ValidationError):
            ExperimentConfig(C1=0.0)
        with pytest.raises(ValidationError):
            ExperimentConfig(K=0)

    def test_canonical_json_sorts_keys(self):
        assert canonical_json({"b": 1, "a": 2}).index('"a"') < canonical_json({"b": 1, "a": 2}).index('"b"')


class TestSettings:
    """Environment overrides on top of the engine constants."""

    def test_defaults(self):
        assert Settings().SECTION_EXTENSION == LAB.SECTION_EXTENSION

    def test_prefixed_environment(self, monkeypatch):
        monkeypatch.setenv("FQLAB_SECTION_TRIES", "3")
        monkeypatch.setenv("SECTION_CANDIDATES", "7")
        settings = Settings()
        assert settings.SECTION_TRIES == 3
        assert settings.SECTION_CANDIDATES == LAB.SECTION_CANDIDATES
        assert Settings.model_config["env_prefix"] == "FQLAB_"


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
