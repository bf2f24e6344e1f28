import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from cartanlab.checks import CHECKS
from cartanlab.report import SCHEMA, emit_report, run_checks
from cartanlab.scenario import ScenarioError, load_scenario, parse_scenario

ROOT = Path(__file__).resolve().parents[1]
REPORT_SCHEMA = json.loads((ROOT / "docs" / "report_schema.json").read_text())

EUCLID = """
[metric]
family = "euclidean"
dim = 2
"""

SPHERE = """
[metric]
family = "riemannian"
dim = 2
a = [["1", "0"], ["0", "sin(x1)^2"]]

[samples]
count = 40
x_box = [0.3, 1.3]
"""

RANDERS = """
checks = ["two_path_equality", "metric_compat", "DJ_parallel"]

[metric]
family = "randers"
dim = 2
a = [["1 + x1^2", "0"], ["0", "1"]]
b = ["0.2*x2", "0.1"]

[torsion]
S = { random = 0.5, seed = 1 }
T = { random = 0.5, seed = 2 }

[samples]
count = 40
x_box = [-0.5, 0.5]
"""


def test_minimal_config_defaults():
    s = parse_scenario(EUCLID)
    assert s.connection.kind == "canonical"
    assert s.S.is_zero and s.T.is_zero
    assert s.samples.count == 200 and s.samples.fiber_radius == (0.1, 10.0)
    assert (s.atol, s.rtol) == (1e-12, 1e-8)
    assert s.checks == tuple(CHECKS) and s.warnings == ()


def test_non_skew_S_is_rejected_at_load():
    text = EUCLID + "[torsion]\nS = [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]\n"
    with pytest.raises(ScenarioError, match=r"S violates skew-symmetry at \(k,i,j\)=\(1,1,1\)") as e:
        parse_scenario(text)
    assert e.value.field == "torsion.S"


def test_homogeneous_expression_loads_cleanly():
    s = parse_scenario('[metric]\nfamily = "expression"\ndim = 2\nexpr = "y1^2+y2^2+x1*y1*y2"\n')
    assert s.warnings == ()
    r = run_checks(s.with_overrides(count=20, only=["homogeneity"]))
    assert r.passed


def test_non_homogeneous_expression_is_flagged_at_load():
    s = parse_scenario('[metric]\nfamily = "expression"\ndim = 2\nexpr = "y1^3 + y2^2"\n')
    assert len(s.warnings) == 1 and "homogeneous" in s.warnings[0]


@pytest.mark.parametrize("text,field", [
    ('[metric]\nfamily = "nope"\ndim = 2\n', "metric"),
    ('[metric]\nfamily = "expression"\ndim = 2\nexpr = "x1*(y1^2"\n', "metric"),
    (EUCLID + "[samples]\ncount = 0\n", "samples.count"),
    (EUCLID + "[samples]\nfiber_radius = [0, 1]\n", "samples.fiber_radius"),
    (EUCLID + "[samples]\nbogus = 1\n", "samples.bogus"),
    (EUCLID + "[tolerances]\natol = -1\n", "tolerances.atol"),
    ('checks = ["no_such_check"]\n' + EUCLID, "checks"),
    ("extra = 1\n" + EUCLID, "extra"),
    (EUCLID + '[connection]\nsource = "expression"\n', "connection"),
    (EUCLID + "[torsion]\nS = [[0, 0], [0, 0]]\n", "torsion.S"),
    ("dim = 2\n", "dim"),
])
def test_validation_errors_name_the_field(text, field):
    with pytest.raises(ScenarioError) as e:
        parse_scenario(text)
    assert e.value.field == field


def test_expression_error_position_reaches_the_message():
    with pytest.raises(ScenarioError, match="column 9"):
        parse_scenario('[metric]\nfamily = "expression"\ndim = 2\nexpr = "x1*(y1^2"\n')


def test_toml_syntax_error_has_location():
    with pytest.raises(ScenarioError, match=r"line 1, column \d+"):
        parse_scenario("[metric\n")


def test_load_from_path_and_inline(tmp_path):
    path = tmp_path / "s.toml"
    path.write_text(EUCLID)
    assert load_scenario(path).metric.dim == load_scenario(EUCLID).metric.dim == 2
    assert load_scenario(str(path)).metric.family == "euclidean"
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "missing.toml")


def test_sampling_plan_respects_bounds():
    s = parse_scenario(EUCLID + "[samples]\ncount = 500\nx_box = [2, 3]\nfiber_radius = [0.5, 4]\n")
    pts = s.samples.points(2)
    xs = np.array([p.x for p in pts])
    rs = np.array([np.linalg.norm(p.y) for p in pts])
    assert xs.min() >= 2 and xs.max() <= 3
    assert rs.min() >= 0.5 - 1e-12 and rs.max() <= 4 + 1e-12
    # log-uniform radii: about half fall below the geometric mean
    assert 0.43 < np.mean(rs < np.sqrt(2.0)) < 0.57


def test_euclidean_scenario_passes_everything():
    r = run_checks(parse_scenario(EUCLID).with_overrides(count=50))
    assert r.passed and not r.errors
    assert all(c.points_evaluated == 50 and c.max_residual < 1e-10 for c in r.results)


def test_sphere_scenario_failure_set():
    r = run_checks(parse_scenario(SPHERE))
    failed = {c.name for c in r.results if not c.passed()}
    # horizontal curvature is nonzero: J is not integrable and D has torsion
    assert failed == {"torsion_free", "nijenhuis", "N_symmetry"}
    assert r.result("metric_compat").passed()
    # the 2-form stays closed; in dimension 2 the cyclic curvature sum vanishes identically
    assert r.result("kahler_cyclic").max_residual < 1e-12


def test_randers_scenario_with_torsion():
    r = run_checks(parse_scenario(RANDERS))
    assert [c.name for c in r.results] == ["two_path_equality", "metric_compat", "DJ_parallel"]
    assert r.passed


def test_point_errors_are_isolated():
    s = parse_scenario('[metric]\nfamily = "expression"\ndim = 2\n'
                       'expr = "y1^2 + y2^2 + 0*log(x1)"\n[samples]\ncount = 30\n')
    r = run_checks(s.with_overrides(only=["metric_compat"]))
    bad = {e.index for e in r.errors}
    assert bad and all(r.points[i].x[0] <= 0 for i in bad)
    assert all(e.check is None and "log" in e.message for e in r.errors)
    assert r.result("metric_compat").points_evaluated == 30 - len(bad)
    assert r.passed


def test_report_is_deterministic_and_parallel_safe():
    s = parse_scenario(RANDERS)
    a = emit_report(run_checks(s), "json")
    b = emit_report(run_checks(parse_scenario(RANDERS)), "json")
    c = emit_report(run_checks(s, workers=4), "json")
    assert a == b == c
    assert emit_report(run_checks(s.with_overrides(seed=1)), "json") != a


def test_json_report_matches_schema():
    r = run_checks(parse_scenario(SPHERE).with_overrides(count=10))
    doc = json.loads(emit_report(r, "json"))
    jsonschema.validate(doc, REPORT_SCHEMA)
    assert doc["schema"] == SCHEMA
    assert doc["environment"]["dimension"] == 2 and doc["environment"]["seed"] == 0
    for c in doc["checks"]:
        assert c["passed"] == (c["max_excess"] <= 1.0)
        wp = c["worst_point"]
        assert wp["x"] == list(r.points[wp["index"]].x)


def test_text_report_has_one_line_per_check():
    r = run_checks(parse_scenario(SPHERE).with_overrides(count=5))
    lines = emit_report(r, "text").decode().splitlines()
    for c in r.results:
        (line,) = [ln for ln in lines if ln.startswith(c.name + " ")]
        assert line.endswith("PASS" if c.passed() else "FAIL")
    assert lines[-1].startswith("overall: FAIL")


def test_unknown_format():
    with pytest.raises(ValueError):
        emit_report(run_checks(parse_scenario(EUCLID).with_overrides(count=1)), "xml")
