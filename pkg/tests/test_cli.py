"""Command-line front end: reports, sweeps, plots and the verify suite."""
import csv
import json
import math
import re
from fractions import Fraction

import pytest

from statgames.cli import FIELDS, fmt, main, strategy_svg
from statgames.dist import GameSpec
from statgames.limits import bayes_prior_approx, fisher_policy_limit

from test_fisher import TABLE_RATES
from test_limits import POLICY_TABLE, PRIOR_TABLE, cells


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestFormatting:
    def test_significant_digits(self):
        assert fmt(1 / 3) == 0.333333333333
        assert fmt(Fraction(2, 3)) == 0.666666666667
        assert fmt(123456789.123456789) == 123456789.123

    def test_undefined(self):
        assert fmt(None) is None
        assert fmt(math.inf) is None and fmt(math.nan) is None

    def test_nested(self):
        assert fmt({0: 1 / 3, "a": [None, 2]}) == {"0": 0.333333333333, "a": [None, 2]}


class TestSolve:
    def test_golden_ratio(self, capsys):
        code, out, _ = run(capsys, "solve", "--game", "bayes", "--N", "1", "--KA", "0",
                           "--KB", "1", "--M", "2")
        doc = json.loads(out)
        assert code == 0
        assert doc["P_star"] == pytest.approx(0.447214, abs=1e-6)
        assert doc["class"] == "Nontrivial"

    def test_blind(self, capsys):
        code, out, _ = run(capsys, "solve", "--game", "fisher", "--N", "1", "--KA", "1",
                           "--KB", "1", "--M", "2")
        doc = json.loads(out)
        assert code == 0 and doc["class"] == "BlindGuessing" and doc["v_star"] == 0.5
        assert doc["k_star"] is None

    def test_iso_verified(self, capsys):
        code, out, _ = run(capsys, "solve", "--game", "iso", "--gamma", "2", "--N", "1",
                           "--KA", "0", "--KB", "1", "--M", "2", "--verify")
        doc = json.loads(out)
        assert code == 0
        assert doc["P_star"] == 0.5
        assert doc["certificate"]["nash_ok"] is True

    def test_fisher_verified_exact(self, capsys):
        code, out, _ = run(capsys, "solve", "--game", "fisher", "--N", "1", "--KA", "0",
                           "--KB", "1", "--M", "2", "--verify")
        doc = json.loads(out)
        assert code == 0
        assert doc["exact"] == {"nu_star": "2/3", "P_star": "1/3", "v_star": "2/3", "s_star": "1/3"}
        assert doc["certificate"]["value"] == "2/3"

    @pytest.mark.parametrize("method", ["bisection", "newton", "restricted"])
    def test_methods(self, capsys, method):
        code, out, _ = run(capsys, "solve", "--game", "bayes", "--N", "1", "--KA", "0",
                           "--KB", "1", "--M", "2", "--method", method)
        assert code == 0
        assert json.loads(out)["P_star"] == pytest.approx(1 / math.sqrt(5), abs=1e-10)

    def test_usage_errors(self, capsys):
        code, _, err = run(capsys, "solve", "--game", "fisher", "--N", "1", "--KA", "0", "--M", "2")
        assert code == 1 and "KB" in err
        code, _, err = run(capsys, "solve", "--game", "fisher", "--N", "3", "--KA", "0",
                           "--KB", "1", "--M", "2")
        assert code == 1 and err
        code, _, err = run(capsys, "solve", "--game", "iso", "--N", "1", "--KA", "0",
                           "--KB", "1", "--M", "2")
        assert code == 1 and "gamma" in err

    def test_byte_identical(self, capsys):
        args = ("solve", "--game", "bayes", "--N", "3", "--KA", "2", "--KB", "4", "--M", "8")
        assert run(capsys, *args)[1] == run(capsys, *args)[1]


class TestSweep:
    def test_fisher_grid_csv(self, capsys, tmp_path):
        out = tmp_path / "grid.csv"
        code, _, _ = run(capsys, "sweep", "--game", "fisher", "--N", "4", "--M", "10", "--out", str(out))
        assert code == 0
        rows = list(csv.reader(out.open()))
        assert rows[0] == FIELDS
        assert len(rows) == 1 + 121
        recs = [dict(zip(rows[0], r)) for r in rows[1:]]
        blind = [r for r in recs if r["class"] == "BlindGuessing"]
        assert blind and all(r["k_star"] == "" and r["degenerate"] == "true" for r in blind)
        assert (tmp_path / "grid.csv.schema.json").exists()

    def test_schema_covers_fields(self, capsys, tmp_path):
        out = tmp_path / "g.json"
        run(capsys, "sweep", "--N", "1", "--M", "2", "--out", str(out))
        schema = json.loads((tmp_path / "g.json.schema.json").read_text())
        assert set(schema["fields"]) == set(FIELDS)

    def test_parallel_matches_serial(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run(capsys, "sweep", "--game", "bayes", "--N", "2", "--M", "5", "--out", str(a))
        run(capsys, "sweep", "--game", "bayes", "--N", "2", "--M", "5", "--out", str(b), "--jobs", "2")
        assert a.read_bytes() == b.read_bytes()

    def test_binomial_bayes_symmetry(self, capsys, tmp_path):
        out = tmp_path / "b.json"
        code, _, _ = run(capsys, "sweep", "--game", "bayes", "--N", "2", "--x-step", "0.05",
                         "--out", str(out))
        assert code == 0
        recs = json.loads(out.read_text())
        assert len(recs) == 19 * 19
        P = {(r["x_A"], r["x_B"]): r["P_star"] for r in recs}
        for (xa, xb), p in P.items():
            mirror = (round(1 - xb, 12), round(1 - xa, 12))
            # reflecting k -> N-k swaps the roles of the scenarios
            assert p == pytest.approx(1 - P[mirror], abs=1e-9)

    def test_iso_binomial(self, capsys, tmp_path):
        out = tmp_path / "i.json"
        code, _, _ = run(capsys, "sweep", "--game", "iso", "--gamma", "2", "--N", "3",
                         "--x-step", "0.25", "--out", str(out))
        assert code == 0
        recs = json.loads(out.read_text())
        assert all(r["gamma"] == 2 for r in recs)

    @pytest.mark.parametrize("table,field,expected", [
        ("fisher-policy", "s_star", POLICY_TABLE), ("bayes-prior", "P_star", PRIOR_TABLE)])
    def test_tables(self, capsys, tmp_path, table, field, expected):
        out = tmp_path / "t.json"
        code, _, _ = run(capsys, "sweep", "--table", table, "--out", str(out))
        assert code == 0
        recs = {(r["x_A"], r["x_B"]): r[field] for r in json.loads(out.read_text())}
        assert len(recs) == 36
        for xa, xb, value in cells(expected):
            assert round(recs[(xa, xb)], 4) == pytest.approx(value, abs=1e-12)

    def test_failure_leaves_no_file(self, capsys, tmp_path):
        out = tmp_path / "bad.json"
        code, _, _ = run(capsys, "sweep", "--game", "fisher", "--N", "9", "--M", "2",
                         "--out", str(out))
        assert code == 1
        assert list(tmp_path.iterdir()) == []

    def test_needs_a_grid(self, capsys, tmp_path):
        code, _, _ = run(capsys, "sweep", "--out", str(tmp_path / "x.json"))
        assert code == 1


def tiles(svg):
    out = []
    for m in re.finditer(r'<rect class="(\w+)" x="([^"]+)" y="([^"]+)" width="([^"]+)" height="([^"]+)"/>', svg):
        out.append((m.group(1), *map(float, m.groups()[1:])))
    return out


class TestStrategyPlot:
    def test_smallest_layout(self):
        svg = strategy_svg(GameSpec(1, 0, 1, 2), size=600)
        ts = tiles(svg)
        xs = sorted({t[1] for t in ts})
        ys = sorted({t[2] for t in ts})
        # A column of width 1/3, two B columns sharing 2/3
        assert xs == pytest.approx([0, 200, 400])
        # phi_hat block 2/3 high (two samples), phi_check 1/3
        assert ys == pytest.approx([0, 200, 400, 500])

    @pytest.mark.parametrize("params", [(1, 0, 1, 2), (2, 1, 3, 4), (2, 2, 4, 7), (3, 2, 2, 5), (2, 0, 1, 2)])
    def test_win_area_is_value(self, params):
        from statgames.fisher import solve_fisher

        size = 600
        ts = tiles(strategy_svg(GameSpec(*params), size))
        win = sum(w * h for c, _, _, w, h in ts if c == "win") / size**2
        total = sum(w * h for _, _, _, w, h in ts) / size**2
        assert total == pytest.approx(1, abs=1e-9)
        assert win == pytest.approx(float(solve_fisher(GameSpec(*params)).v_star), abs=1e-9)

    def test_tile_counts(self):
        ts = tiles(strategy_svg(GameSpec(2, 2, 4, 7)))
        assert len({t[1] for t in ts}) == math.comb(7, 2) + math.comb(7, 4)
        assert len({t[2] for t in ts}) == math.comb(7, 2) * 2

    def test_file_and_determinism(self, capsys, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        for p in (a, b):
            code, _, _ = run(capsys, "strategy-plot", "--N", "1", "--KA", "0", "--KB", "1",
                             "--M", "2", "--out", str(p))
            assert code == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().startswith("<?xml")

    def test_too_large(self, capsys, tmp_path):
        code, _, err = run(capsys, "strategy-plot", "--N", "10", "--KA", "10", "--KB", "20",
                           "--M", "40", "--out", str(tmp_path / "x.svg"))
        assert code == 1 and "guard" in err


class TestVerifySuite:
    def test_default(self, capsys):
        code, out, _ = run(capsys, "verify-suite")
        doc = json.loads(out)
        assert code == 0 and doc["refuted"] == 0
        assert doc["nontrivial_certified"] > 50

    def test_perturb(self, capsys):
        code, out, _ = run(capsys, "verify-suite", "--max-M", "2", "--perturb")
        assert code == 2
        assert json.loads(out)["refuted"] > 0

    def test_small_table(self, capsys):
        code, out, _ = run(capsys, "verify-suite", "--max-M", "2")
        assert code == 0
        values = {tuple(g["spec"]): Fraction(g["value"]) for g in json.loads(out)["games"]}
        for params, rate in TABLE_RATES.items():
            assert values[params] == rate
        for (N, a, b, M), v in values.items():
            # relabelled twins of the tabulated games
            assert v == values.get((N, min(a, b), max(a, b), M))

    def test_random_larger(self, capsys):
        code, out, _ = run(capsys, "verify-suite", "--max-M", "1", "--seed", "7", "--samples", "5",
                           "--jobs", "2")
        doc = json.loads(out)
        assert code == 0
        assert sum(g["spec"][3] > 1 for g in doc["games"]) == 5
