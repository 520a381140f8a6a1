"""Tests for the igd-sync command line."""
import sys

sys.path.insert(0, 'src')

import json

import harness
from analysis import Violation
from main import EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_OK, main

SMALL_RUN = [
    "--n", "3",
    "--nodes", "3",
    "--rows", "12",
    "--r", "0.05",
    "--eps", "0.1,1",
    "--trials", "1",
    "--iters", "20",
    "--seed", "5",
]


class TestBoundsCommand:
    """The closed-form bound printer."""

    def test_prints_bounds(self, capsys):
        """Test each eps gets a block of bounds."""
        code = main(["bounds", "--L", "4", "--ell", "2", "--gamma", "0.25", "--r", "0.03",
                     "--eps", "0.1,1", "--nodes", "2"])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert "eps = 0.1" in out
        assert "eps = 1" in out
        assert "gap_bound" in out

    def test_r_too_large(self):
        """Test an r past the contraction limit exits with the config code."""
        assert main(["bounds", "--L", "4", "--ell", "2", "--r", "0.45"]) == EXIT_CONFIG

    def test_bad_eps(self):
        """Test an unparsable eps list exits with the config code."""
        assert main(["bounds", "--L", "4", "--ell", "2", "--eps", "a,b"]) == EXIT_CONFIG


class TestRunCommand:
    """Running experiments from flags and config files."""

    def test_writes_results(self, tmp_path, capsys):
        """Test a tiny run succeeds and writes its CSVs."""
        out_dir = tmp_path / "out"
        code = main(["run", *SMALL_RUN, "--out", str(out_dir)])
        assert code == EXIT_OK
        for name in ("convergence.csv", "syncs.csv", "targets.csv", "communication.csv",
                     "claims.csv", "violations.csv"):
            assert (out_dir / name).exists()
        out = capsys.readouterr().out
        assert "violations: 0" in out
        assert "plateau=" in out
        assert "fewer syncs than igdds" in out

    def test_unknown_algorithm(self, tmp_path):
        """Test an unknown algorithm name exits with the config code."""
        code = main(["run", *SMALL_RUN, "--algos", "alg1,admm", "--out", str(tmp_path)])
        assert code == EXIT_CONFIG

    def test_fail_mode(self, tmp_path, monkeypatch):
        """Test fail mode exits with the certificate code and still writes violations."""
        real = harness.certify_trace

        def failing(trace, problem, config):
            report = real(trace, problem, config)
            report.violations.append(Violation("drift", trace.trial, 0, 0, 1.0, 0.5))
            return report

        monkeypatch.setattr(harness, "certify_trace", failing)
        out_dir = tmp_path / "out"
        code = main(["run", *SMALL_RUN, "--on-violation", "fail", "--out", str(out_dir)])
        assert code == EXIT_CERTIFICATE
        lines = (out_dir / "violations.csv").read_text().splitlines()
        assert lines[0] == "certificate,trial,iter,node,measured,bound"
        assert len(lines) > 1

    def test_sanity_with_config_file(self, tmp_path, capsys):
        """Test sanity reads a config file and flags override it."""
        path = tmp_path / "exp.cfg"
        path.write_text("n = 3\nnodes = 3\nrows = 12\nseed = 5\neps = 0.1\n")
        code = main(["sanity", "--config", str(path), "--r", "0.05"])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert out.startswith("instance: n=3 N=3 seed=5")
        assert "eps=0.1:" in out


class TestCertifyCommand:
    """Certifying saved trace bundles."""

    def write_bundle(self, tmp_path):
        out_dir = tmp_path / "out"
        code = main(["run", *SMALL_RUN, "--algos", "alg1", "--eps", "0.1", "--keep-traces", "1",
                     "--out", str(out_dir)])
        assert code == EXIT_OK
        return out_dir / "trace_alg1_eps0.1_trial0.json"

    def test_clean_bundle(self, tmp_path, capsys):
        """Test a saved alg1 trace certifies cleanly."""
        bundle = self.write_bundle(tmp_path)
        capsys.readouterr()
        assert main(["certify", "--trace", str(bundle)]) == EXIT_OK
        assert "PASS" in capsys.readouterr().out

    def test_tampered_bundle(self, tmp_path, capsys):
        """Test an inflated deviation fails certification and lands in the CSV."""
        bundle = self.write_bundle(tmp_path)
        data = json.loads(bundle.read_text())
        record = next(r for r in data["trace"]["records"] if r["event"] == "indcomp")
        record["deviations"] = [1e6 for _ in record["deviations"]]
        bundle.write_text(json.dumps(data))
        violations = tmp_path / "violations.csv"
        code = main(["certify", "--trace", str(bundle), "--violations", str(violations)])
        assert code == EXIT_CERTIFICATE
        assert "FAIL" in capsys.readouterr().out
        assert len(violations.read_text().splitlines()) > 1

    def test_missing_bundle(self, tmp_path):
        """Test an unreadable bundle exits with the config code."""
        assert main(["certify", "--trace", str(tmp_path / "none.json")]) == EXIT_CONFIG
