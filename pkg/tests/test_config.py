import json

import numpy as np
import pytest

from priorsafe.config import (
    ConfigError,
    build_disturbance,
    build_prior,
    build_safe_set,
    czono_from_dict,
    demo_config,
    load_config,
    validate_config,
)
from priorsafe.setops import Polytope, point_membership


def broken(path, value):
    cfg = demo_config()
    node = cfg
    for key in path[:-1]:
        node = node[key]
    node[path[-1]] = value
    return cfg


def test_demo_config_is_valid():
    cfg = validate_config(demo_config())
    assert isinstance(build_safe_set(cfg), Polytope)
    prior = build_prior(cfg)
    assert prior.M_prior is not None and prior.Zw.dim == 2
    assert build_disturbance(cfg, 0.1).G.max() == pytest.approx(0.1)


@pytest.mark.parametrize(
    "path, value, field",
    [
        (("synthesis", "lam"), 1.5, "config.synthesis.lam"),
        (("data", "T"), 2, "config.data.T"),
        (("system", "x0"), [0.0], "config.system.x0"),
        (("system", "B_true"), [[1.0]], "config.system.B_true"),
        (("prior", "lower"), [[0.0, 0.0]], "config.prior.lower"),
        (("safe_set", "h"), [1.0], "config.safe_set.h"),
        (("synthesis", "method"), "czono", "config.synthesis.method"),
        (("synthesis", "bound_mode"), "loose", "config.synthesis.bound_mode"),
    ],
)
def test_errors_name_the_field(path, value, field):
    with pytest.raises(ConfigError) as err:
        validate_config(broken(path, value))
    assert err.value.field == field
    assert str(err.value).startswith(field)


def test_prior_bounds_ordered():
    cfg = demo_config()
    cfg["prior"]["lower"][0][0] = 2.0
    with pytest.raises(ConfigError, match="config.prior.lower"):
        validate_config(cfg)


def test_no_prior_and_czonotope_sets():
    cfg = demo_config()
    cfg["prior"] = "none"
    cfg["safe_set"] = {"type": "czonotope", "set": {"G": [[2.0, 0.0], [-1.6, 1.0]], "c": [0.0, 0.0]}}
    cfg["synthesis"]["method"] = "czono"
    cfg["disturbance"] = {"family": "czonotope", "set": {"G": [[0.01], [0.02]], "c": [0.0, 0.0], "A": [[1.0]], "b": [0.5]}}
    cfg = validate_config(cfg)
    assert build_prior(cfg).M_prior is None
    Zw = build_disturbance(cfg)
    assert Zw.n_cons == 1 and point_membership([0.005, 0.01], Zw).member


def test_czono_from_dict_without_generators():
    S = czono_from_dict({"G": [], "c": [1.0, 2.0]})
    assert S.n_gens == 0
    np.testing.assert_array_equal(S.c, [1.0, 2.0])


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps(demo_config()))
    assert load_config(good) == demo_config()
