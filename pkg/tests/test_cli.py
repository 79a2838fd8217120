import csv
import json
import math
import shutil
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from jjdrive.cli import ConfigError, load_config, main, quantity

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def make_config(tmp_path, name="cfg.yaml", **changes):
    data = yaml.safe_load((CONFIGS / "purcell_transmon.yaml").read_text())
    data["netlist"] = str(CONFIGS / "purcell_transmon.net")
    data["output"] = str(tmp_path / name.replace(".yaml", "_out"))
    for key, value in changes.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data, sort_keys=False))
    return path, Path(data["output"])


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def read_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_quantities_need_units():
    assert quantity("1.25 GHz", "rad/s") == pytest.approx(2 * math.pi * 1.25e9)
    assert quantity("15 nH", "H") == pytest.approx(15e-9)
    assert quantity("-30 dBm", "W") == pytest.approx(1e-6)
    with pytest.raises(ConfigError, match="missing unit"):
        quantity(4.2, "rad/s")
    with pytest.raises(ConfigError, match="missing unit"):
        quantity("4.2", "rad/s")


def test_missing_unit_in_config_is_rejected(tmp_path):
    path, _ = make_config(tmp_path, drive={"power": -80})
    result = invoke("run", path)
    assert result.exit_code != 0
    assert "missing unit" in str(result.output) + str(result.exception)


def test_unknown_method_is_rejected(tmp_path):
    path, _ = make_config(tmp_path, methods=["df", "magic"])
    with pytest.raises(ConfigError, match="unknown method"):
        load_config(path)
    result = invoke("run", path)
    assert result.exit_code == 2 and "unknown method" in result.output


def test_reruns_are_byte_identical(tmp_path):
    path, out = make_config(tmp_path)
    assert invoke("run", path).exit_code == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    shutil.rmtree(out)
    assert invoke("run", path).exit_code == 0
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second
    manifest = json.loads(first["manifest.json"])
    assert set(manifest["files"]) == set(first) - {"manifest.json"}


def test_empty_task_list_writes_only_the_manifest(tmp_path):
    path, out = make_config(tmp_path, tasks=[])
    assert invoke("run", path).exit_code == 0
    assert [p.name for p in out.iterdir()] == ["manifest.json"]
    assert json.loads((out / "manifest.json").read_text())["files"] == {}


def test_compare_self_and_changed_bundles(tmp_path):
    path_a, out_a = make_config(tmp_path, "a.yaml", tasks=["extract", "modes"])
    path_b, out_b = make_config(tmp_path, "b.yaml", tasks=["extract", "modes"], drive={"power": "-74 dBm"})
    assert invoke("run", path_a).exit_code == 0
    assert invoke("run", path_b).exit_code == 0
    same = invoke("compare", out_a, out_a)
    assert same.exit_code == 0
    assert "FAIL" not in same.output and "max_rel=0 " in same.output
    differ = invoke("compare", out_a, out_b)
    assert differ.exit_code == 1
    assert "FAIL extract.csv:magnitude" in differ.output
    # amplitude doubles with +6 dB; a loose per-column tolerance accepts that
    loose = invoke("compare", out_a, out_b, "--column-tol", "magnitude=0.6")
    assert loose.exit_code == 0


def test_compare_reports_schema_mismatch(tmp_path):
    path_a, out_a = make_config(tmp_path, "a.yaml", tasks=["modes"])
    path_b, out_b = make_config(tmp_path, "b.yaml", tasks=["modes", "rates"])
    invoke("run", path_a)
    invoke("run", path_b)
    result = invoke("compare", out_a, out_b)
    assert result.exit_code == 2 and "schema mismatch" in result.output


def test_irrotational_routes_agree_off_resonance(tmp_path):
    path, out = make_config(tmp_path, tasks=["extract", "modes"])
    invoke("run", path)
    modes = read_rows(out / "modes.csv")
    omegas = [float(m["omega_rad_s"]) for m in modes]
    kappas = [float(m["kappa_1_s"]) for m in modes]
    rows = read_rows(out / "extract.csv")
    by = {(r["omega_rad_s"], r["method"]): complex(float(r["magnitude"]) * math.cos(float(r["phase_rad"])),
                                                    float(r["magnitude"]) * math.sin(float(r["phase_rad"])))
          for r in rows}
    checked = 0
    for (w, method), v in by.items():
        if method != "ig-open":
            continue
        if min(abs(float(w) - o) / k for o, k in zip(omegas, kappas)) < 5:
            continue
        assert abs(by[(w, "ig-closed")] - v) <= 1e-3 * abs(v)
        assert abs(by[(w, "overlap")] - by[(w, "df")]) <= 1e-6 * abs(by[(w, "df")])
        checked += 1
    assert checked >= 3


def test_rates_task_three_routes(tmp_path):
    path, out = make_config(tmp_path, tasks=["rates"])
    invoke("run", path)
    rows = {r["method"]: float(r["rate_1_s"]) for r in read_rows(out / "rates.csv")}
    assert rows["admittance"] == pytest.approx(rows["eigenmode"], rel=1e-4)
    assert rows["port-noise"] == pytest.approx(rows["eigenmode"], rel=0.05)


def test_single_task_commands_and_netlist_tools(tmp_path):
    path, out = make_config(tmp_path)
    result = invoke("lindblad", path)
    assert result.exit_code == 0
    assert json.loads((out / "lindblad_fit.json").read_text())["f_obj"] < 1e-5
    assert invoke("validate", CONFIGS / "purcell_transmon.net").output.startswith("ok:")
    bad = tmp_path / "bad.net"
    bad.write_text("ground 0\nnode a\ncapacitor C a 0 1e-12\n")
    assert invoke("validate", bad).exit_code == 2
    csv_out = tmp_path / "z.csv"
    result = invoke("impedance", CONFIGS / "purcell_transmon.net", "--terminals", "J,P", "--start", "4 GHz",
                    "--stop", "5 GHz", "--points", 3, "-o", csv_out)
    assert result.exit_code == 0 and csv_out.exists()
    modes = json.loads(invoke("modes", CONFIGS / "purcell_transmon.net").output)
    assert [m["mode"] for m in modes["modes"]] == [0, 1]
