import json
import math
import os
import subprocess
import sys

import pytest

from smock.cli import dumps, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_constants_woven(capsys):
    code, out, _ = run(capsys, "constants", "builtin:woven")
    data = json.loads(out)
    assert code == 0
    assert data["delta"] == 1 and data["l_max"] == 2
    assert 1 - 1e-6 <= data["depth_lo"] <= 1 <= data["depth_hi"] <= 1 + 1e-6


def test_constants_checkered(capsys):
    data = json.loads(run(capsys, "constants", "builtin:checkered")[1])
    assert data["delta"] == pytest.approx(math.sqrt(2), abs=1e-11)
    assert data["depth_lo"] <= 1.5 <= data["depth_hi"]


def test_missing_file_exits_two(capsys, tmp_path):
    code, _, err = run(capsys, "constants", str(tmp_path / "nope.smock"))
    assert code == 2 and "nope.smock" in err


def test_validation_error_exits_three(capsys, tmp_path):
    f = tmp_path / "overlap.smock"
    f.write_text("smockpattern 1\nbasis 1 0 0 1\nstitch 0 seg 0 0 2 0\n")
    code, _, err = run(capsys, "constants", str(f))
    assert code == 3 and err.startswith("smock: error:")


@pytest.mark.parametrize("src, dst, want", [
    ("stitch:0,0", "stitch:3,0", 1.0),
    ("1.5,1.5", "1.5,1.5", 0.0),
])
def test_dist_plus(capsys, src, dst, want):
    code, out, _ = run(capsys, "dist", "builtin:plus", "--from", src, "--to", dst)
    assert code == 0 and json.loads(out)["distance"] == want


def test_dist_bumpy_with_witness(capsys):
    code, out, _ = run(capsys, "dist", "builtin:bumpy", "--from", "stitch:0,0",
                       "--to", "stitch:3,6", "--witness")
    data = json.loads(out)
    assert data["distance"] == pytest.approx(math.sqrt(8) + 2, abs=1e-11)
    hops = [h["len"] for h in data["hops"]]
    assert math.fsum(hops) == pytest.approx(data["distance"], abs=1e-11)
    assert len(data["nodes"]) == len(hops) + 1


def test_dist_off_lattice_exits_four(capsys):
    code, _, _ = run(capsys, "dist", "builtin:plus", "--from", "stitch:1,0", "--to", "0,0")
    assert code == 4


def test_radius_zero_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["ball", "builtin:woven", "--stitch", "0,0", "--radius", "0",
              "--out", str(tmp_path / "b.svg")])
    assert exc.value.code == 2


def test_ball_svg_and_pgm(capsys, tmp_path):
    svg = tmp_path / "t.svg"
    code, out, _ = run(capsys, "ball", "builtin:woven", "--stitch", "0,0", "--radius", "3",
                       "--series", "1,2", "--out", str(svg))
    info = json.loads(out)
    assert code == 0 and len(info["cells"]) == 3
    assert info["cells"] == sorted(info["cells"])
    text = svg.read_text()
    assert text.startswith("<!-- smock") and text.count("fill-opacity") == 3
    pgm = tmp_path / "t.pgm"
    run(capsys, "ball", "builtin:woven", "--point", "0.5,0.5", "--radius", "1",
        "--spacing", "0.05", "--out", str(pgm))
    assert pgm.read_bytes().startswith(b"P5\n")


def test_frontier_plus(capsys):
    data = json.loads(run(capsys, "frontier", "builtin:plus", "--stitch", "0,0", "--radius", "1")[1])
    assert sorted(tuple(s["index"]) for s in data["stitches"]) == [(-3, 0), (0, -3), (0, 3), (3, 0)]


def test_tangent_check(capsys):
    code, out, _ = run(capsys, "tangent-check", "builtin:woven", "--norm", "woven",
                       "--samples", "50", "--window", "10")
    data = json.loads(out)
    assert code == 0 and set(data) == {"max_dev", "bound_K", "exceeded", "worst_pair"}
    assert data["exceeded"] is False and data["bound_K"] == pytest.approx(8, abs=1e-5)


def test_gh_rescale_plus(capsys):
    code, out, _ = run(capsys, "gh-rescale", "builtin:plus", "--norm", "plus",
                       "--scales", "8,16,32", "--grid", "0.1")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "R,epsilon,epsilon_times_R" and len(lines) == 4
    eps = [float(l.split(",")[1]) for l in lines[1:]]
    assert eps[0] > eps[1] > eps[2]


def test_render(capsys, tmp_path):
    out = tmp_path / "r.svg"
    code, _, _ = run(capsys, "render", "builtin:diamond", "--stitch", "0,0",
                     "--radii", "1,2", "--out", str(out))
    assert code == 0 and 'stroke="black"' in out.read_text()


def test_check_passes_on_builtin(capsys):
    code, out, _ = run(capsys, "check", "builtin:woven", "--samples", "40",
                       "--closed-form-radius", "6")
    data = json.loads(out)
    assert code == 0 and data["ok"] and data["closed-form"]["ok"]


def test_json_is_byte_identical(capsys):
    args = ("tangent-check", "builtin:plus", "--norm", "plus", "--samples", "30",
            "--seed", "9", "--window", "12")
    assert run(capsys, *args)[1] == run(capsys, *args)[1]


def test_svg_is_identical_across_runs(capsys, tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    for f in (a, b):
        run(capsys, "ball", "builtin:plus", "--stitch", "0,0", "--radius", "2", "--out", str(f))
    assert a.read_bytes() == b.read_bytes()


def test_output_overwrite_leaves_no_temporaries(capsys, tmp_path):
    out = tmp_path / "c.json"
    out.write_text("old")
    run(capsys, "constants", "builtin:diamond", "--out", str(out))
    assert json.loads(out.read_text())["delta"] == 1
    assert os.listdir(tmp_path) == ["c.json"]


def test_dumps_rounding():
    assert dumps({"a": 1 / 3, "b": math.inf}) == '{\n  "a": 0.333333333333,\n  "b": null\n}\n'


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "smock.cli", "dist", "builtin:woven",
                          "--from", "stitch:0,0", "--to", "stitch:0,4"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["distance"] == 2
