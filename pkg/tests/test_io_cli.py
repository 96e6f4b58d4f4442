import json

import numpy as np
import pytest

from ltispec.cli import main, parse_freqs, parse_pairs, parse_params, UsageError
from ltispec.io import (DocumentError, SpectrumDocument, parse_spectrum_csv, read_spectrum, read_system,
                        system_from_dict, system_to_dict)
from ltispec.models import get_model

FHN_WE = -0.40166510644150456154


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_system(tmp_path, doc, name="sys.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(p)


class TestSystemDocument:
    def test_defaults(self):
        s = system_from_dict({"n": 2, "J": [[-1, 0], [0, -2]]})
        assert np.array_equal(s.L, np.eye(2)) and np.array_equal(s.D, np.ones(2))

    def test_round_trip(self):
        doc = {"n": 2, "m": 1, "J": [[-1.0, 0.3], [0.1, -2.0]], "L": [[1.0], [0.5]], "D": [0.25],
               "labels": ["a", "b"]}
        s = system_from_dict(doc)
        back = system_from_dict(system_to_dict(s))
        assert np.array_equal(back.covariance(), s.covariance()) and back.labels == ["a", "b"]

    @pytest.mark.parametrize("doc, field", [
        ({"J": [[-1]]}, "'n'"),
        ({"n": 2, "J": [[-1, 0]]}, "'J'"),
        ({"n": 1, "J": [["x"]]}, "'J'"),
        ({"n": 2, "m": 1, "J": [[-1, 0], [0, -1]]}, "'L'"),
        ({"n": 1, "J": [[-1]], "D": [1, 2]}, "'D'"),
        ({"n": 1, "J": [[-1]], "labels": ["a", "b"]}, "'labels'"),
        ({"n": 0, "J": []}, "'n'"),
    ])
    def test_field_addressed_errors(self, doc, field):
        with pytest.raises(DocumentError, match=field):
            system_from_dict(doc)

    def test_json_syntax_error_names_line(self, tmp_path):
        with pytest.raises(DocumentError, match="line 2"):
            read_system(write_system(tmp_path, '{"n": 1,\n "J": [[-1]],,}'))


class TestSpectrumDocument:
    def _doc(self):
        f = np.array([0.0, 0.1, 1 / 3, 7.25])
        vals = {(0, 0): np.array([1.0, 0.5, 1e-17, 2 ** -30]),
                (0, 1): np.array([0.1 + 0.2j, -1 / 7 + 1e-300j, 3.0 - 0.0j, np.pi * 1j])}
        return SpectrumDocument(f, vals, {"method": "oracle", "seed": 3}, {"K_1_2": np.array([0.1, 0.2, 0.3, 1.0])})

    @pytest.mark.parametrize("suffix", [".csv", ".json"])
    def test_lossless_round_trip(self, tmp_path, suffix):
        doc = self._doc()
        path = tmp_path / f"s{suffix}"
        doc.write(path)
        back = read_spectrum(path)
        assert np.array_equal(back.freqs, doc.freqs)
        for k, v in doc.values.items():
            assert np.array_equal(back.values[k], v)
        assert np.array_equal(back.extra["K_1_2"], doc.extra["K_1_2"])
        assert back.metadata == doc.metadata

    def test_csv_header(self):
        text = self._doc().to_csv()
        header = [ln for ln in text.splitlines() if not ln.startswith("#")][0]
        assert header == "freq,S_1_1_re,S_1_2_re,S_1_2_im,K_1_2"

    def test_missing_header(self):
        with pytest.raises(DocumentError):
            parse_spectrum_csv("# a=1\n")


class TestParsers:
    def test_pairs_one_based(self):
        assert parse_pairs("1,1; 1,2", 2) == [(0, 0), (0, 1)]
        with pytest.raises(UsageError):
            parse_pairs("1,3", 2)
        with pytest.raises(UsageError):
            parse_pairs("1", 2)

    def test_freqs(self):
        assert np.allclose(parse_freqs("0.1:10:3:log"), [0.1, 1, 10])
        assert np.allclose(parse_freqs("0:1:3:lin"), [0, 0.5, 1])
        for bad in ("1:2:3", "0:1:3:log", "1:2:x:lin", "1:2:3:cubic"):
            with pytest.raises(UsageError):
                parse_freqs(bad)

    def test_params(self, tmp_path):
        p = tmp_path / "p.json"
        p.write_text('{"mu": 0.02, "s": 3}')
        assert parse_params(["mu=0.5", "noise=additive"], str(p)) == {"mu": 0.5, "s": 3, "noise": "additive"}
        with pytest.raises(UsageError):
            parse_params(["mu"])


class TestCoeffs:
    def test_fhn(self, capsys):
        code, out, _ = run(capsys, "coeffs", "--model", "fhn")
        doc = json.loads(out)
        assert code == 0 and doc["q"][-1] == 1.0
        assert doc["P"][0][0][0] == pytest.approx(FHN_WE ** 2 * 1e-6, rel=1e-12)
        assert doc["P"][1][0][0] == pytest.approx(0.0, abs=1e-25)
        assert max(doc["residuals"]["rel1"], doc["residuals"]["rel2"]) <= 1e-12
        assert doc["metadata"]["method"] == "recursive" and "convention" in doc["metadata"]

    def test_fhn_elementwise(self, capsys):
        _, out, _ = run(capsys, "coeffs", "--model", "fhn", "--method", "elementwise")
        p = json.loads(out)["p"]
        assert p[0] == pytest.approx(FHN_WE ** 2 * 1e-6, rel=1e-12) and abs(p[1]) <= 1e-25

    def test_hr_element(self, capsys):
        mu, sg = 0.01, get_model("hr").params["sigma"]
        _, out, _ = run(capsys, "coeffs", "--model", "hr", "--method", "elementwise", "--element", "1,1")
        doc = json.loads(out)
        assert doc["element"] == [1, 1]
        assert np.allclose(doc["p"], [mu ** 2 * sg ** 2, (mu ** 2 + 1) * sg ** 2, sg ** 2], rtol=1e-10, atol=0)

    def test_identity_1d(self, capsys, tmp_path):
        a, c = 1.5, 0.5
        path = write_system(tmp_path, {"n": 1, "J": [[-a]], "L": [[c]]})
        _, out, _ = run(capsys, "coeffs", "--system", path)
        doc = json.loads(out)
        assert np.allclose(doc["q"], [a ** 2, 1]) and doc["P"][0][0][0] == pytest.approx(c ** 2)

    def test_out_file(self, capsys, tmp_path):
        out = tmp_path / "c.json"
        assert run(capsys, "coeffs", "--model", "ou", "--out", str(out))[0] == 0
        assert json.loads(out.read_text())["q"] == [1.0, 1.0]


class TestSpectrum:
    def test_ou_monotone(self, capsys):
        code, out, _ = run(capsys, "spectrum", "--model", "ou", "--freqs", "0.01:10:40:log")
        doc = parse_spectrum_csv(out)
        S = doc.values[(0, 0)]
        assert code == 0 and np.all(np.diff(S) < 0)
        assert doc.metadata["method"] == "recursive"

    def test_oracle_vs_recursive(self, capsys, tmp_path):
        docs = {}
        for method in ("oracle", "recursive", "elementwise"):
            path = tmp_path / f"{method}.json"
            run(capsys, "spectrum", "--model", "hr", "--pairs", "1,1;1,2;2,3", "--method", method, "--out", str(path))
            docs[method] = read_spectrum(path)
        ref = docs["oracle"].values
        for method in ("recursive", "elementwise"):
            for (i, j), v in docs[method].values.items():
                assert np.max(np.abs(v - ref[(i, j)]) / np.abs(ref[(i, j)])) <= 1e-8, (method, i, j)

    def test_wc4_coherence_columns(self, capsys):
        _, out, _ = run(capsys, "spectrum", "--model", "wc4", "--pairs", "1,2", "--coherence",
                        "--freqs", "0.1:100:30:log")
        doc = parse_spectrum_csv(out)
        K = doc.extra["K_1_2"]
        assert set(doc.values) == {(0, 1), (0, 0), (1, 1)}
        assert np.all((K >= 0) & (K <= 1 + 1e-12))
        S01, S00, S11 = doc.values[(0, 1)], doc.values[(0, 0)], doc.values[(1, 1)]
        assert np.allclose(K, np.abs(S01) ** 2 / (S00 * S11), rtol=1e-12)

    def test_default_grid(self, capsys):
        _, out, _ = run(capsys, "spectrum", "--model", "fhn")
        assert len(parse_spectrum_csv(out).freqs) > 10

    def test_bit_identical_reruns(self, capsys):
        a = run(capsys, "spectrum", "--model", "hr", "--pairs", "1,2")[1]
        b = run(capsys, "spectrum", "--model", "hr", "--pairs", "1,2")[1]
        assert a == b


class TestSimulateCommand:
    ARGS = ("--segment-length", "256", "--realizations", "2")

    def test_fhn_seed_is_deterministic(self, capsys, tmp_path):
        outs = []
        for k in range(2):
            path = tmp_path / f"w{k}.csv"
            assert run(capsys, "simulate", "--model", "fhn", "--seed", "7", *self.ARGS, "--out", str(path))[0] == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]
        meta = read_spectrum(tmp_path / "w0.csv").metadata
        assert meta["method"] == "welch" and meta["seed"] == 7 and meta["segments"] >= 16
        assert meta["rng"] == "Philox"

    def test_rps_large_configuration_runs(self, capsys, tmp_path):
        traj = tmp_path / "t.csv"
        code, out, _ = run(capsys, "simulate", "--model", "rps", "--param", "n=31", "--param", "mu=5e-4",
                           "--pairs", "1,2", "--segment-length", "64", "--trajectory-out", str(traj))
        assert code == 0
        doc = parse_spectrum_csv(out)
        assert doc.metadata["params"]["n"] == 31 and "K_1_2" in doc.extra
        rows = [ln for ln in traj.read_text().splitlines() if not ln.startswith("#")]
        assert len(rows[0].split(",")) == 32

    def test_blow_up_exit_code(self, capsys):
        code, _, err = run(capsys, "simulate", "--model", "ou", "--param", "tau=-0.01", "--dt", "0.1",
                           "--segment-length", "64", "--t-total", "200")
        assert code == 5 and "step" in err

    def test_needs_model(self, capsys, tmp_path):
        assert run(capsys, "simulate", "--system", write_system(tmp_path, {"n": 1, "J": [[-1]]}))[0] == 2


class TestCompare:
    @pytest.mark.parametrize("model, pairs, tol", [("fhn", "1,1;1,2", 1e-9), ("hr", "1,1;1,2;2,3", 1e-8)])
    def test_analytic_agreement(self, capsys, model, pairs, tol):
        code, out, _ = run(capsys, "compare", "--model", model, "--pairs", pairs, "--tol", str(tol))
        rep = json.loads(out)
        assert code == 0 and rep["pass"]
        for entry in rep["pairs"].values():
            assert entry["recursive_vs_oracle"] <= tol and entry["elementwise_vs_oracle"] <= tol

    def test_failure_returns_numerical_code(self, capsys):
        code, out, _ = run(capsys, "compare", "--model", "hr", "--pairs", "1,2", "--tol", "1e-300")
        assert code == 4 and not json.loads(out)["pass"]

    def test_welch_needs_model(self, capsys, tmp_path):
        path = write_system(tmp_path, {"n": 1, "J": [[-1]]})
        assert run(capsys, "compare", "--system", path, "--welch")[0] == 2


class TestExitCodes:
    def test_parse_error(self, capsys, tmp_path):
        assert run(capsys, "coeffs", "--system", write_system(tmp_path, {"n": 2, "J": [[1]]}))[0] == 2
        assert run(capsys, "coeffs", "--model", "fhn", "--param", "nope=1")[0] == 2
        assert run(capsys, "coeffs")[0] == 2
        assert run(capsys, "spectrum", "--model", "ou", "--freqs", "1:2")[0] == 2

    def test_argparse_rejects_unknown_model(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["coeffs", "--model", "nope"])
        assert info.value.code == 2

    def test_unstable(self, capsys, tmp_path):
        path = write_system(tmp_path, {"n": 2, "J": [[0.5, 1], [-1, 0]]})
        code, _, err = run(capsys, "spectrum", "--system", path)
        assert code == 3 and "unstable" in err

    def test_marginal_allowed_but_singular(self, capsys, tmp_path):
        path = write_system(tmp_path, {"n": 2, "J": [[0, 1], [-1, 0]]})
        assert run(capsys, "coeffs", "--system", path)[0] == 3
        assert run(capsys, "coeffs", "--system", path, "--allow-marginal")[0] == 0

    def test_models_listing(self, capsys):
        code, out, _ = run(capsys, "models")
        names = json.loads(out)
        assert code == 0 and {"ou", "fhn", "hr", "wc4", "ssn", "rps"} <= set(names)
