import json

import pytest
import yaml

from almostaction import cli, scenario
from almostaction.errors import ConfigError


def solve_doc(**changes):
    doc = scenario.preset("solve")
    doc.update(changes)
    return doc


def test_zero_perturbation_solves_exactly():
    sched = [dict(s, c=0) for s in scenario.preset("solve")["schedule"]]
    rep = scenario.run(solve_doc(schedule=sched))
    assert rep.verdict == "solved"
    assert all(r["distance"] == 0 for r in rep.tables["solutions"])


@pytest.mark.parametrize("name", scenario.PIPELINES)
def test_presets_run_and_verify(name):
    rep = scenario.run(scenario.preset(name))
    assert rep.verdict == "solved" and rep.exit_code == 0
    bundle = json.loads(scenario.dumps(rep.bundle()))
    assert scenario.verify(bundle) == []


def test_reruns_are_byte_identical_and_ignore_jobs():
    doc = scenario.preset("solve")
    a = scenario.dumps(scenario.run(doc).bundle())
    b = scenario.dumps(scenario.run(doc).bundle())
    c = scenario.dumps(scenario.run(doc, jobs=4).bundle())
    assert a == b == c
    d = scenario.dumps(scenario.run(doc, seed=7).bundle())
    assert d != a


def test_verify_flags_an_edited_entry():
    bundle = json.loads(scenario.dumps(scenario.run(scenario.preset("solve")).bundle()))
    bundle["tables"]["solutions"][1]["distance"] = 0.5
    bad = scenario.verify(bundle)
    assert [m.path for m in bad] == ["tables.solutions[1].distance"]
    bundle = json.loads(scenario.dumps(scenario.run(scenario.preset("solve")).bundle()))
    p = bundle["intermediates"]["alpha"]["stages"][0]["assignment"]["a:1"]
    p[0], p[1] = p[1], p[0]
    assert any(m.path.startswith("intermediates.alpha") for m in scenario.verify(bundle))


def test_config_errors_name_the_field():
    with pytest.raises(ConfigError, match="group"):
        scenario.run(solve_doc(group="nope"))
    with pytest.raises(ConfigError, match=r"schedule\[0\]"):
        scenario.run(solve_doc(schedule=[{"n": 0, "m": 5}]))
    with pytest.raises(ConfigError, match="pipeline"):
        scenario.run(solve_doc(pipeline="dance"))


def test_obstruction_becomes_the_verdict():
    rep = scenario.run(solve_doc(schedule=[{"n": 0, "m": 5, "k": 4, "c": 2}]))
    assert rep.verdict == "gap_violation" and rep.exit_code == 3


def test_yaml_config_and_written_report(tmp_path):
    cfg = tmp_path / "witness.yaml"
    cfg.write_text(yaml.safe_dump(scenario.preset("witness")))
    rep = scenario.run(scenario.load_config(cfg))
    path = rep.write(tmp_path / "out")
    assert (tmp_path / "out" / "timing.json").exists()
    assert "timing" not in json.loads(path.read_text())
    assert scenario.verify(scenario.load_bundle(tmp_path / "out")) == []


def test_cli_exit_codes(tmp_path, capsys):
    out = tmp_path / "w"
    assert cli.main(["witness", "--out", str(out)]) == 0
    assert cli.main(["verify", str(out)]) == 0
    bundle = json.loads((out / "report.json").read_text())
    bundle["tables"]["certificate"][1]["value"] = 0.5
    (out / "report.json").write_text(json.dumps(bundle))
    assert cli.main(["verify", str(out)]) == 8

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(solve_doc(group="nope")))
    assert cli.main(["run", str(bad)]) == 2
    assert "group: unknown group reference 'nope'" in capsys.readouterr().err

    gap = tmp_path / "gap.json"
    gap.write_text(json.dumps(solve_doc(schedule=[{"n": 0, "m": 5, "k": 4, "c": 2}])))
    assert cli.main(["solve", str(gap)]) == 3
    assert cli.main(["verify", str(tmp_path / "missing")]) == 2


def test_exit_code_table():
    assert scenario.exit_code("ok") == 0
    assert scenario.exit_code("labelling_obstruction") == 4
    assert scenario.exit_code("insufficient_data") == 6
    assert scenario.exit_code("not_equicontinuous") == 9
    assert scenario.exit_code("something_else") == 1


def test_verify_reports_unparseable_intermediates():
    bundle = json.loads(scenario.dumps(scenario.run(scenario.preset("solve")).bundle()))
    bundle["intermediates"]["alpha"]["stages"][0]["assignment"]["a:1"][0] = -1
    bad = scenario.verify(bundle)
    assert bad and bad[-1].path == "intermediates"
