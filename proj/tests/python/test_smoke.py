import json
import math
import os
import pathlib

import pytest

import fform

SCENES = pathlib.Path(os.environ.get("FFORM_SCENES_DIR", pathlib.Path(__file__).resolve().parents[2] / "scenes"))


def test_geometry():
    wrapped = fform.circular_mean([math.radians(350), math.radians(10)])
    assert fform.angular_difference(wrapped, 0.0) < 1e-12
    assert fform.circular_mean([0.0, math.pi / 2]) == pytest.approx(math.pi / 4)
    assert fform.angular_difference(math.radians(350), math.radians(10)) == pytest.approx(math.radians(20))
    x, y = fform.center_of_attention((100, 100), math.pi / 4, 100)
    assert (x, y) == (pytest.approx(170.7107, abs=1e-4), pytest.approx(170.7107, abs=1e-4))
    w = fform.time_weighted_angle([math.pi / 2] * 5, [0.0] * 5, 4)
    assert w["head_weight"] == 1.0
    assert w["theta"] == pytest.approx(math.pi / 2)


def test_errors_map_to_python_exceptions():
    with pytest.raises(fform.ComputationError):
        fform.circular_mean([0.0, math.pi])
    with pytest.raises(fform.ValidationError):
        fform.kmeans([(0, 0)], 2)
    with pytest.raises(ValueError):
        fform.pearson([1, 2], [1])


def test_clustering():
    pts = [(0, 0), (0, 1), (10, 0), (10, 1)]
    r = fform.kmeans(pts, 2)
    assert r["assignment"][0] == r["assignment"][1] != r["assignment"][2]
    assert r["wcss"] == pytest.approx(1.0)
    assert fform.silhouette(pts, [0, 0, 1, 1]) == pytest.approx(0.9002, abs=1e-4)
    assert fform.select_group_count(pts, 2, 3)["k"] == 2


def test_engagement_and_pearson():
    assert fform.engagement_from_membership([True] * 5 + [False] + [True] * 2) == [0.5, 0.8, 1, 1, 1, 0.5, 1, 1]
    assert fform.reciprocal_angle((0, 0), 0.0, (10, 0), math.pi) == pytest.approx(0.0)
    assert fform.pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)


def test_scene_and_subcommands(tmp_path):
    cfg = {"seed": 3, "participant_count": 4, "duration": 30, "formations": [[0, 1], [2, 3]]}
    tables = fform.generate_scene(json.dumps(cfg))
    assert tables["frames"].startswith("person_id,frame,x,y,head_angle,torso_angle\n")
    assert tables == fform.generate_scene(json.dumps(cfg))

    scene = str(SCENES / "three_groups.json")
    det = fform.run_detect(scene=scene, out_dir=str(tmp_path / "detect"))
    assert det["tp_rate"] >= 0.95
    assert max(det["candidates_evaluated"][1:]) <= 4
    assert (tmp_path / "detect" / "groups.csv").exists()

    dyad = fform.run_dyad(0, 1, scene=scene)
    assert len(dyad["rows"]) == 400

    cfg = {"seed": 4, "participant_count": 2, "duration": 400, "formations": [[0, 1]],
           "turn_taking": {"dyad": [0, 1]}}
    path = tmp_path / "turns.json"
    path.write_text(json.dumps(cfg))
    metrics = fform.run_predict(scene=str(path), epochs=2)
    assert metrics["features"]
    assert 0.0 <= metrics["test"]["accuracy"] <= 1.0
