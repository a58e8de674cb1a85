import numpy as np
import pytest

from otflow.errors import ConfigError, MetricError
from otflow.schemas import MetricSpec, OTParamsSpec, RunConfig, parse_model, parse_params, read_json

OT = {"r": 1, "s": 1, "b": [[-1]], "c": [[0.5]]}


def test_read_json_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        read_json(tmp_path / "nope.json")


def test_params_shape_checked():
    with pytest.raises(ConfigError, match="b must be"):
        parse_params({"r": 2, "s": 1, "b": [[-1]], "c": [[0], [0]]})


def test_semidirect_params_detected():
    spec = parse_params({"semidirect": {"lambda": [[{"re": 0.1, "im": -0.2}]]}})
    p = spec.to_params()
    assert p.lam[0, 0] == pytest.approx(0.1 - 0.2j)
    assert p.lam_prime is None


def test_metric_needs_exactly_one_form():
    with pytest.raises(ConfigError):
        parse_model(MetricSpec, {"A": [1.0]})
    with pytest.raises(ConfigError):
        parse_model(MetricSpec, {"A": [1.0], "B": [1.0], "g": [[{"re": 1.0}]]})


def test_metric_indices_are_one_based():
    spec = MetricSpec(A=[1.0, 1.0], B=[1.0, 1.0], C=[{"index": 2, "re": 0.1}])
    g = np.asarray(spec.to_metric(2).g)
    assert g[1, 3] == pytest.approx(0.1)


def test_metric_size_mismatch():
    with pytest.raises(MetricError):
        MetricSpec(A=[1.0], B=[1.0]).to_metric(2)


def test_from_matrix_prefers_normal_form():
    spec = MetricSpec(A=[2.0], B=[1.0], C=[{"index": 1, "re": 0.3, "im": 0.1}])
    again = MetricSpec.from_matrix(np.asarray(spec.to_metric(1).g), 1)
    assert again.A == [2.0] and again.C[0].index == 1
    full = np.array([[2.0, 0.0, 0.1], [0.0, 1.0, 0.0], [0.1, 0.0, 1.0]], dtype=complex)
    assert MetricSpec.from_matrix(full, 1).g is not None


@pytest.mark.parametrize(
    "data, message",
    [
        ({"command": "curvature", "params": OT}, "needs a metric"),
        ({"command": "soliton", "params": OT, "metric": {"A": [1], "B": [1]}, "flow": {"flow": "generalized"}},
         "soliton accepts"),
        ({"command": "classify-pluriclosed", "params": {"semidirect": {"lambda": [[{"re": 0}]]}},
          "metric": {"A": [1], "B": [1]}}, "needs OT params"),
    ],
)
def test_run_config_command_rules(data, message):
    with pytest.raises(ConfigError, match=message):
        parse_model(RunConfig, data)


def test_flow_spec_controls():
    cfg = RunConfig.model_validate({"command": "flow", "params": OT, "metric": {"A": [1], "B": [1]},
                                    "flow": {"rtol": 1e-6, "growth": 2.0}})
    controls = cfg.flow.controls()
    assert controls.rtol == 1e-6 and controls.growth == 2.0
    assert isinstance(cfg.params, OTParamsSpec)
