"""Strict JSON-to-dataclass coercion."""

import json

import pytest

from offbeat.config import ConfigError, build_config, coerce_fields, load_json_config
from offbeat.evaluation import MethodSpec
from offbeat.experiments import SweepConfig
from offbeat.synth import GenConfig


class TestLoadJson:
    def test_reads_object(self, tmp_path):
        target = tmp_path / "c.json"
        target.write_text('{"a": 1}')
        assert load_json_config(target) == {"a": 1}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_json_config(tmp_path / "nope.json")

    def test_syntax_error_names_line(self, tmp_path):
        target = tmp_path / "c.json"
        target.write_text('{\n  "a": 1,\n}')
        with pytest.raises(ConfigError, match=r"c\.json:3"):
            load_json_config(target)

    def test_top_level_must_be_object(self, tmp_path):
        target = tmp_path / "c.json"
        target.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="JSON object"):
            load_json_config(target)


class TestBuildConfig:
    def test_defaults_apply(self):
        cfg = build_config(GenConfig, {})
        assert cfg == GenConfig()

    def test_full_payload(self):
        cfg = build_config(
            GenConfig,
            {"sessions": 3, "instances_per_session": [10, 20], "positive_rate": 0.2,
             "spacing": "exponential", "seed": 7},
        )
        assert cfg.sessions == 3
        assert cfg.instances_per_session == (10, 20)
        assert cfg.spacing == "exponential"

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match=r"unknown keys \['sessionz'\]"):
            build_config(GenConfig, {"sessionz": 3})

    def test_nested_unknown_key_names_path(self):
        with pytest.raises(ConfigError, match=r"sweep\.gen: unknown keys"):
            build_config(SweepConfig, {"gen": {"bogus": 1}}, "sweep")

    def test_int_promotes_to_float(self):
        cfg = build_config(GenConfig, {"class_separation": 4})
        assert cfg.class_separation == 4.0
        assert isinstance(cfg.class_separation, float)

    def test_bool_rejected_for_numbers(self):
        with pytest.raises(ConfigError, match="expected a number"):
            build_config(GenConfig, {"class_separation": True})
        with pytest.raises(ConfigError, match="expected an integer"):
            build_config(GenConfig, {"sessions": True})

    def test_string_type_checked(self):
        with pytest.raises(ConfigError, match="expected a string"):
            build_config(GenConfig, {"spacing": 3})

    def test_fixed_length_tuple_checked(self):
        with pytest.raises(ConfigError, match="expected 2 entries"):
            build_config(GenConfig, {"instances_per_session": [1, 2, 3]})

    def test_variadic_tuple_elements_coerced(self):
        cfg = build_config(SweepConfig, {"sigmas": [1, 2.5], "seeds": [0, 1, 2]})
        assert cfg.sigmas == (1.0, 2.5)
        assert cfg.seeds == (0, 1, 2)

    def test_tuple_wants_list(self):
        with pytest.raises(ConfigError, match="expected a list"):
            build_config(SweepConfig, {"sigmas": 2.0})

    def test_nested_dataclass_built(self):
        cfg = build_config(
            SweepConfig,
            {"gen": {"sessions": 2}, "methods": [{"name": "lrn"}, {"name": "mi", "bag_size": 3}]},
        )
        assert cfg.gen.sessions == 2
        assert [m.name for m in cfg.methods] == ["lrn", "mi"]
        assert cfg.methods[1].bag_size == 3

    def test_nested_fit_config(self):
        spec = build_config(MethodSpec, {"name": "lrm", "fit": {"max_iterations": 7}})
        assert spec.fit.max_iterations == 7

    def test_constructor_errors_become_config_errors(self):
        with pytest.raises(ConfigError, match="positive_rate"):
            build_config(GenConfig, {"positive_rate": 2.0})

    def test_error_context_names_element(self):
        with pytest.raises(ConfigError, match=r"config\.sigmas\[1\]"):
            build_config(SweepConfig, {"sigmas": [1.0, "x"]})


class TestCoerceFields:
    def test_partial_payload_for_replace(self):
        kwargs = coerce_fields(SweepConfig, {"folds": 5, "pis": [0.5]})
        assert kwargs == {"folds": 5, "pis": (0.5,)}

    def test_non_dataclass_rejected(self):
        with pytest.raises(TypeError):
            coerce_fields(dict, {})

    def test_round_trips_through_json(self):
        payload = json.loads(json.dumps({"sessions": 4, "burst_length": 2.5}))
        cfg = build_config(GenConfig, payload)
        assert cfg.sessions == 4 and cfg.burst_length == 2.5
