import json

import numpy as np
import pytest

from weighted_willmore.cli import main
from weighted_willmore.errors import ConfigurationError
from weighted_willmore.scene import build_setup, load_scene, scene_from_dict, shipped_scenes

BASE = {
    "schema_version": 1, "name": "probe",
    "ambient": {"model": "flat", "n": 3},
    "hypersurface": {"kind": "sphere", "radius": 1.0},
}


def with_changes(**parts):
    data = json.loads(json.dumps(BASE))
    for key, value in parts.items():
        data[key] = {**data.get(key, {}), **value} if isinstance(value, dict) else value
    return data


def test_shipped_scenes_all_load():
    names = shipped_scenes()
    assert "flat-unit-ball" in names and "nonconvex-lobe" in names
    for name in names:
        scene = load_scene(name)
        setup = build_setup(scene)
        assert setup.n == scene.ambient.n


@pytest.mark.parametrize("change,fragment", [
    ({"ambient": {"n": 9}}, "ambient.n"),
    ({"ambient": {"weight": {"id": "nope"}}}, "unknown weight id"),
    ({"ambient": {"m": 2.0}}, "m must be >= n"),
    ({"ambient": {"m": 3.0, "weight": {"id": "gaussian"}}}, "constant weight"),
    ({"hypersurface": {"kind": "ellipsoid"}}, "needs field 'axes'"),
    ({"hypersurface": {"center": [0, 0]}}, "length n = 3"),
    ({"theorems": ["thm13"]}, "require ambient.m"),
    ({"schema_version": 2}, "schema_version"),
    ({"surprise": 1}, "surprise"),
])
def test_invalid_scenes_name_the_field(change, fragment):
    with pytest.raises(ConfigurationError, match=fragment):
        scene_from_dict(with_changes(**change))


def test_resolved_fills_defaults():
    resolved = scene_from_dict(BASE).resolved()
    assert resolved["numerics"]["resolution"] == 24
    assert resolved["numerics"]["seed"] == 42
    assert resolved["ambient"]["weight"]["id"] == "zero"


def test_missing_scene_file():
    with pytest.raises(ConfigurationError, match="not found"):
        load_scene("/nonexistent/scene.json")


def test_cli_scene_list(capsys):
    assert main(["scene", "list"]) == 0
    assert "ellipsoid-211" in capsys.readouterr().out.split()


def test_cli_scene_validate(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(BASE))
    assert main(["scene", "validate", str(good)]) == 0
    assert json.loads(capsys.readouterr().out)["valid"] is True
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(with_changes(ambient={"n": 1})))
    assert main(["scene", "validate", str(bad)]) == 2
    assert "ambient.n" in capsys.readouterr().err


def test_cli_verify_writes_report_and_csv(tmp_path):
    out = tmp_path / "report.json"
    code = main(["verify", "thm12a", "--scene", "flat-unit-ball", "--out", str(out),
                 "--csv-dir", str(tmp_path / "csv"), "--threads", "1"])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["reports"][0]["verdict"] == "equality"
    assert report["scene"]["name"] == "flat-unit-ball"
    assert (tmp_path / "csv" / "flat-unit-ball-boundary.csv").exists()
    assert (tmp_path / "csv" / "flat-unit-ball-thm12a-volume.csv").exists()


def test_cli_verify_requires_m_for_thm13(capsys):
    assert main(["verify", "thm13", "--scene", "ellipsoid-211"]) == 2
    assert "require ambient.m" in capsys.readouterr().err


def test_cli_tube_volume_with_monte_carlo(tmp_path):
    out = tmp_path / "tube.json"
    code = main(["tube-volume", "--scene", "flat-unit-ball", "--radius", "0.5", "1.0",
                 "--out", str(out), "--threads", "2"])
    assert code == 0
    report = json.loads(out.read_text())
    vols = [s["volume"] for s in report["samples"]]
    assert np.allclose(vols, [4 * np.pi / 3 * 1.5 ** 3, 4 * np.pi / 3 * 8], rtol=1e-12)
    assert all(mc["within_4_sigma"] for mc in report["monte_carlo"])


def test_cli_comparison_and_reilly(tmp_path):
    out = tmp_path / "cmp.json"
    assert main(["comparison", "--scene", "gaussian-sphere-r1", "--stride", "16",
                 "--out", str(out), "--csv-dir", str(tmp_path)]) == 0
    report = json.loads(out.read_text())
    assert "variants" in report and "shrinker" in report
    assert list(tmp_path.glob("*.csv"))
    out = tmp_path / "reilly.json"
    assert main(["reilly", "--scene", "flat-unit-ball", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["chain"]["all_hold"]


def test_cli_reilly_rejects_off_center_sphere(capsys):
    assert main(["reilly", "--scene", "gaussian-offcenter"]) == 2
    assert "centered at the origin" in capsys.readouterr().err
