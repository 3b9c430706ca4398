"""Config-file parsing diagnostics and the command-line front end."""

import json
from textwrap import dedent

import numpy as np
import pytest

from oseledets_lab import cli
from oseledets_lab.config import (
    Horizons,
    RunConfig,
    bundled_config_path,
    parse_config,
    parse_config_text,
)
from oseledets_lab.errors import InputError

CAT2_LOG = np.log((3.0 + np.sqrt(5.0)) / 2.0)

MINIMAL = """\
[system]
kind = toral_automorphism
matrix = 2 1; 1 1
"""

MINI_VERIFY = """\
[system]
kind = toral_automorphism
matrix = 2 1; 1 1

[horizons]
orbit = 500
splitting = 40
stats = 40

[search]
max_period = 3
seed_orbit_length = 500
return_radius = 0.05

[run]
epsilon = 1e-6
eta = 1e-6
seed = 11
"""


def write_config(tmp_path, text, name="run.conf"):
    path = tmp_path / name
    path.write_text(dedent(text))
    return str(path)


# ---------------------------------------------------------------------------
# parsing


def test_minimal_config_gets_defaults():
    cfg = parse_config_text(MINIMAL)
    assert cfg.system.ambient_dim == 2
    assert (cfg.horizons.orbit, cfg.horizons.splitting, cfg.horizons.stats) == (
        10000,
        50,
        200,
    )
    assert cfg.search.max_period == 12
    assert cfg.search.seed_orbit_length == 2000
    assert cfg.epsilon == 0.05
    assert cfg.eta == 0.1
    assert cfg.seed == 0
    assert cfg.threads == 1
    assert cfg.output is None
    assert cfg.format == "json"


def test_full_config_round_trip(tmp_path):
    path = write_config(
        tmp_path,
        """\
        # comment lines and blanks are ignored
        [system]
        kind = perturbed_toral
        matrix = 2 1; 1 1
        delta = 0.05

        [horizons]
        orbit = 1234
        splitting = 21
        stats = 55

        [pesin]
        alpha = 0.6
        beta = 0.7
        epsilon = 0.05
        k = 5
        m_range = 2
        n_range = 8

        [search]
        max_period = 7
        seed_orbit_length = 900
        return_radius = 0.04
        newton_max_iters = 30
        newton_tol = 1e-12
        dedup_tol = 1e-7

        [run]
        epsilon = 0.01
        eta = 0.2
        seed = 99
        threads = 2
        format = csv
        """,
    )
    cfg = parse_config(path)
    assert cfg.horizons.orbit == 1234
    assert cfg.pesin.alpha == 0.6
    assert cfg.pesin.k == 5
    assert cfg.search.max_period == 7
    assert cfg.search.newton_max_iters == 30
    assert cfg.search.dedup_tol == 1e-7
    assert cfg.epsilon == 0.01
    assert cfg.seed == 99
    assert cfg.threads == 2
    assert cfg.format == "csv"


def test_henon_parameter_defaults():
    cfg = parse_config_text("[system]\nkind = henon\n")
    assert cfg.system.henon_a == 1.4
    assert cfg.system.henon_b == 0.3


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("[orbit]\nn = 5\n", ":1: unknown block"),
        (MINIMAL + "[system]\nkind = henon\n", ":4: duplicate block"),
        ("[system]\nkind toral_automorphism\n", ":2: expected 'key = value'"),
        ("orbit = 5\n", ":1: key outside any block"),
        (MINIMAL + "[horizons]\norbits = 5\n", ":5: unknown key 'orbits'"),
        (MINIMAL + "[horizons]\norbit = 5\norbit = 6\n", ":6: duplicate key 'orbit'"),
        (MINIMAL + "[horizons]\norbit =\n", ":5: empty value"),
        (MINIMAL + "[horizons]\norbit = ten\n", "invalid value 'ten' for orbit"),
        ("[system]\nkind = toral_automorphism\nmatrix = 2 1; 1\n", "unequal lengths"),
        ("[system]\nkind = toral_automorphism\nmatrix = 2.5 1; 1 1\n", "integers"),
        ("[system]\nkind = solenoid\n", ":2: unknown system kind 'solenoid'"),
        ("[system]\nkind = henon\nmatrix = 2 1; 1 1\n", "not used by 'henon'"),
        ("[horizons]\norbit = 5\n", "missing required [system] block"),
        ("[system]\nkind = toral_automorphism\n", "must set 'matrix'"),
        ("[system]\nmatrix = 2 1; 1 1\n", "must set 'kind'"),
    ],
)
def test_parse_diagnostics_carry_line_numbers(text, fragment):
    with pytest.raises(InputError) as err:
        parse_config_text(text)
    assert fragment in str(err.value)


@pytest.mark.parametrize(
    "extra, fragment",
    [
        ("[run]\nepsilon = 0\n", "positive"),
        ("[run]\nthreads = 0\n", "threads"),
        ("[run]\nformat = xml\n", "json or csv"),
        ("[run]\nseed = -1\n", "64 bits"),
        ("[horizons]\norbit = 0\n", ">= 1"),
    ],
)
def test_semantic_validation_after_parse(extra, fragment):
    with pytest.raises(InputError, match=fragment):
        parse_config_text(MINIMAL + extra)


def test_parse_config_missing_file(tmp_path):
    with pytest.raises(InputError, match="cannot read config"):
        parse_config(tmp_path / "nope.conf")


def test_bundled_configs_parse():
    for name in ("cat2_verify", "perturbed_cat2_verify", "henon_exponents"):
        path = bundled_config_path(name)
        cfg = parse_config(path)
        assert isinstance(cfg, RunConfig)
        assert cfg.system.ambient_dim == 2
    with pytest.raises(InputError, match="cat2_verify"):
        bundled_config_path("missing_name")


# ---------------------------------------------------------------------------
# CLI: exit codes and output documents


def run_cli(args):
    return cli.main(args)


def test_exponents_command_json(tmp_path):
    cfg = write_config(tmp_path, MINIMAL + "[horizons]\norbit = 400\n")
    out = tmp_path / "out.json"
    rc = run_cli(["exponents", "--config", cfg, "--output", str(out)])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert payload["schema"] == "oseledets-lab/1"
    assert payload["command"] == "exponents"
    values = payload["result"]["values"]
    assert values == pytest.approx([-CAT2_LOG, CAT2_LOG], abs=1e-8)
    assert payload["result"]["horizon"] == 400


def test_output_is_canonical_json(tmp_path):
    cfg = write_config(tmp_path, MINIMAL + "[horizons]\norbit = 400\n")
    out = tmp_path / "out.json"
    run_cli(["exponents", "--config", cfg, "--output", str(out)])
    text = out.read_text()
    canonical = json.dumps(json.loads(text), sort_keys=True, indent=2) + "\n"
    assert text == canonical


def test_exponents_to_stdout(tmp_path, capsys):
    cfg = write_config(tmp_path, MINIMAL + "[horizons]\norbit = 400\n")
    rc = run_cli(["exponents", "--config", cfg])
    assert rc == 0
    captured = capsys.readouterr()
    payload = json.loads(captured.out)
    assert payload["command"] == "exponents"


def test_splitting_command(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    out = tmp_path / "out.json"
    rc = run_cli(["splitting", "--config", cfg, "--point", "0.2,0.4", "--output", str(out)])
    assert rc == 0
    result = json.loads(out.read_text())["result"]
    assert sorted(result) == ["base", "block_dims", "blocks", "exponent_estimates"]
    assert result["base"] == [0.2, 0.4]
    assert result["block_dims"] == [1, 1]
    assert result["exponent_estimates"] == pytest.approx([-CAT2_LOG, CAT2_LOG], abs=1e-6)


def test_periodic_command_json_and_exit_codes(tmp_path):
    found = write_config(
        tmp_path,
        MINIMAL + "[search]\nmax_period = 2\nseed_orbit_length = 800\n",
        name="found.conf",
    )
    out = tmp_path / "found.json"
    rc = run_cli(["periodic", "--config", found, "--seed", "2", "--output", str(out)])
    assert rc == 0
    result = json.loads(out.read_text())["result"]
    assert sorted(result) == ["n_candidates", "n_failed", "orbits"]
    assert [po["period"] for po in result["orbits"]] == [1, 2, 2]

    empty = write_config(
        tmp_path, MINIMAL + "[search]\nmax_period = 0\n", name="empty.conf"
    )
    out2 = tmp_path / "empty.json"
    rc = run_cli(["periodic", "--config", empty, "--output", str(out2)])
    assert rc == 2
    # the document is still written on a not-found exit
    assert json.loads(out2.read_text())["result"]["orbits"] == []


def test_pesin_command_pass_and_fail(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    out = tmp_path / "pesin.json"
    rc = run_cli(["pesin", "--config", cfg, "--point", "0.2 0.4", "--output", str(out)])
    assert rc == 0
    result = json.loads(out.read_text())["result"]
    assert sorted(result) == ["params", "passed", "worst_margins"]
    assert result["passed"] is True

    hard = write_config(
        tmp_path,
        MINIMAL
        + "[pesin]\nalpha = 1.0\nbeta = 1.0\nepsilon = 0.01\nk = 1\nm_range = 1\nn_range = 10\n",
        name="hard.conf",
    )
    out2 = tmp_path / "hard.json"
    rc = run_cli(["pesin", "--config", hard, "--point", "0.2 0.4", "--output", str(out2)])
    assert rc == 3
    assert json.loads(out2.read_text())["result"]["passed"] is False


def test_verify_command_pass(tmp_path):
    cfg = write_config(tmp_path, MINI_VERIFY)
    out = tmp_path / "verify.json"
    rc = run_cli(["verify", "--config", cfg, "--output", str(out)])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert payload["command"] == "verify"
    assert set(payload["result"]["verdicts"].values()) == {"pass"}


def test_verify_exit_codes_not_found_and_fail(tmp_path):
    empty = write_config(
        tmp_path, MINIMAL + "[search]\nmax_period = 0\n", name="nf.conf"
    )
    assert run_cli(["verify", "--config", empty, "--output", str(tmp_path / "a.json")]) == 2

    failing = write_config(
        tmp_path,
        """\
        [system]
        kind = perturbed_toral
        matrix = 2 1; 1 1
        delta = 0.05

        [horizons]
        orbit = 1000
        splitting = 30
        stats = 50

        [search]
        max_period = 2
        seed_orbit_length = 1500
        return_radius = 0.05

        [run]
        epsilon = 1e-9
        eta = 0.1
        seed = 11
        """,
        name="fail.conf",
    )
    out = tmp_path / "fail.json"
    assert run_cli(["verify", "--config", failing, "--output", str(out)]) == 3
    verdicts = json.loads(out.read_text())["result"]["verdicts"]
    assert verdicts["exponents"] == "fail"


def test_verify_output_reproducible_and_thread_invariant(tmp_path):
    cfg = write_config(tmp_path, MINI_VERIFY)
    outputs = []
    for name, threads in (("a.json", "1"), ("b.json", "1"), ("c.json", "4")):
        out = tmp_path / name
        rc = run_cli(
            ["verify", "--config", cfg, "--threads", threads, "--output", str(out)]
        )
        assert rc == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    assert outputs[0] == outputs[2]


def test_seed_override_changes_result(tmp_path):
    cfg = write_config(
        tmp_path, "[system]\nkind = henon\n\n[horizons]\norbit = 2000\n"
    )
    texts = {}
    for seed in ("0", "1", "0"):
        out = tmp_path / f"s{seed}-{len(texts)}.json"
        rc = run_cli(["exponents", "--config", cfg, "--seed", seed, "--output", str(out)])
        assert rc == 0
        texts.setdefault(seed, []).append(out.read_text())
    assert texts["0"][0] == texts["0"][1]
    assert texts["0"][0] != texts["1"][0]


# ---------------------------------------------------------------------------
# CLI: CSV formats


def test_exponents_csv(tmp_path):
    cfg = write_config(tmp_path, MINIMAL + "[horizons]\norbit = 400\n")
    out = tmp_path / "exp.csv"
    rc = run_cli(["exponents", "--config", cfg, "--format", "csv", "--output", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "index,exponent"
    assert len(lines) == 3
    assert float(lines[1].split(",")[1]) == pytest.approx(-CAT2_LOG, abs=1e-8)


def test_periodic_csv(tmp_path):
    cfg = write_config(
        tmp_path, MINIMAL + "[search]\nmax_period = 2\nseed_orbit_length = 800\n"
    )
    out = tmp_path / "per.csv"
    rc = run_cli(
        ["periodic", "--config", cfg, "--seed", "2", "--format", "csv", "--output", str(out)]
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "period,residual,hyperbolic,exponent0,exponent1"
    assert len(lines) == 4
    for line in lines[1:]:
        period, residual, hyperbolic, lo, hi = line.split(",")
        assert int(period) in (1, 2)
        assert float(residual) < 1e-10
        assert hyperbolic == "1"
        assert float(lo) < 0 < float(hi)


def test_splitting_csv(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    out = tmp_path / "split.csv"
    rc = run_cli(
        [
            "splitting",
            "--config",
            cfg,
            "--point",
            "0.2,0.4",
            "--format",
            "csv",
            "--output",
            str(out),
        ]
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "block,v0,v1"
    assert [line.split(",")[0] for line in lines[1:]] == ["0", "1"]
    vec = np.array([float(v) for v in lines[1].split(",")[1:]])
    assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)


def test_pesin_csv_requires_audit(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    rc = run_cli(
        ["pesin", "--config", cfg, "--point", "0.2 0.4", "--format", "csv"]
    )
    assert rc == 1

    out = tmp_path / "pesin.csv"
    rc = run_cli(
        [
            "pesin",
            "--config",
            cfg,
            "--point",
            "0.2 0.4",
            "--audit",
            "--format",
            "csv",
            "--output",
            str(out),
        ]
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "condition,m,n,margin"
    conditions = [line.split(",")[0] for line in lines[1:]]
    # default m_range=3 gives 7 m-values; each carries one c row and
    # n_range=10 rows for the a and b conditions
    assert conditions.count("c") == 7
    assert conditions.count("a") == 70
    assert conditions.count("b") == 70
    c_row = next(line for line in lines[1:] if line.startswith("c,"))
    assert c_row.split(",")[2] == ""


def test_verify_csv_is_coverage_table(tmp_path):
    cfg = write_config(tmp_path, MINI_VERIFY)
    out = tmp_path / "verify.csv"
    rc = run_cli(["verify", "--config", cfg, "--format", "csv", "--output", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x0,x1,base_distance,fiber_distance,nearest_cycle_index,covered"
    assert len(lines) == 41  # one row per splitting sample at the stats horizon
    assert all(line.endswith(",1") for line in lines[1:])


# ---------------------------------------------------------------------------
# CLI: argument and input errors


def test_cli_argument_errors(tmp_path, capsys):
    assert run_cli([]) == 1
    assert run_cli(["exponents"]) == 1
    assert run_cli(["--help"]) == 0
    cfg = write_config(tmp_path, MINIMAL)
    assert run_cli(["exponents", "--config", cfg, "--format", "xml"]) == 1
    capsys.readouterr()


def test_cli_input_errors(tmp_path, capsys):
    assert run_cli(["exponents", "--config", str(tmp_path / "nope.conf")]) == 1
    assert "error:" in capsys.readouterr().err

    bad = write_config(tmp_path, MINIMAL + "[horizons]\norbits = 5\n", name="bad.conf")
    assert run_cli(["exponents", "--config", bad]) == 1
    assert "unknown key" in capsys.readouterr().err

    cfg = write_config(tmp_path, MINIMAL)
    assert run_cli(["splitting", "--config", cfg, "--point", "0.1"]) == 1
    assert "coordinates" in capsys.readouterr().err
