import contextlib
import io
import json
import os
import shutil
import subprocess
import sys
import unittest
from pathlib import Path
from uuid import uuid4

from weyllab.cli import COMMANDS, main, run_subcommand
from weyllab.config import ExperimentConfig

REPO_ROOT = Path(__file__).resolve().parents[2]
SINGULAR = "inverse_power(x0=0.5, y0=0.5, alpha=1)"


class CliTests(unittest.TestCase):
    def setUp(self):
        self.base_dir = REPO_ROOT / "target" / f"cli_{uuid4().hex}"

    def tearDown(self):
        shutil.rmtree(self.base_dir, ignore_errors=True)

    def run_main(self, *argv):
        stdout = io.StringIO()
        stderr = io.StringIO()
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            code = main(list(argv))
        return code, stdout.getvalue(), stderr.getvalue()

    def test_every_subcommand_is_registered(self):
        self.assertEqual(
            sorted(COMMANDS),
            sorted(
                [
                    "spectrum",
                    "count",
                    "weyl",
                    "short-interval",
                    "heat-trace",
                    "heat-bound",
                    "riesz",
                    "mollifier",
                    "lp-check",
                    "duhamel",
                    "case-report",
                    "kato",
                    "full-report",
                ]
            ),
        )

    def test_weyl_writes_remainder_table(self):
        code, stdout, _ = self.run_main(
            "weyl", "--out", str(self.base_dir), "--lambda-min", "10", "--lambda-max", "20", "--lambda-step", "1"
        )
        self.assertEqual(code, 0)
        self.assertIn("weyl: passed", stdout)
        lines = (self.base_dir / "weyl.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "lambda,N,R1,R2,R1_norm,R2_norm")
        self.assertTrue(lines[-1].startswith("20,26,"))
        self.assertTrue((self.base_dir / "weyl.svg").exists())
        self.assertIn("V = zero()", (self.base_dir / "config.txt").read_text(encoding="utf-8"))

    def test_config_file_and_flag_override(self):
        self.base_dir.mkdir(parents=True, exist_ok=True)
        config_path = self.base_dir / "experiment.txt"
        config_path.write_text("lambda_min = 5\nlambda_max = 9\nlambda_step = 2\n", encoding="utf-8")
        code, _, _ = self.run_main(
            "count", "--config", str(config_path), "--out", str(self.base_dir / "run"), "--lambda-max", "11"
        )
        self.assertEqual(code, 0)
        lines = (self.base_dir / "run" / "count.csv").read_text(encoding="utf-8").splitlines()
        # pi*sqrt(2), pi*sqrt(5) twice, pi*sqrt(8), pi*sqrt(10) twice.
        self.assertEqual(lines, ["lambda,N", "5,1", "7,1", "9,4", "11,6"])

    def test_grid_spectrum_and_potential_count(self):
        code, _, _ = self.run_main(
            "spectrum", "--out", str(self.base_dir / "spectrum"), "--source", "grid", "--h", "1/9"
        )
        self.assertEqual(code, 0)
        self.assertTrue((self.base_dir / "spectrum" / "operator.bin").exists())
        lines = (self.base_dir / "spectrum" / "spectrum.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(lines), 65)

        code, _, _ = self.run_main(
            "count",
            "--out",
            str(self.base_dir / "count"),
            "--source",
            "grid",
            "--h",
            "1/9",
            "-V",
            "constant(30)",
            "--lambda-min",
            "2",
            "--lambda-max",
            "6",
        )
        self.assertEqual(code, 0)
        payload = json.loads((self.base_dir / "count" / "count.json").read_text(encoding="utf-8"))
        self.assertIn("difference", payload)
        self.assertTrue((self.base_dir / "count" / "count_difference.csv").exists())

    def test_singular_count_on_the_default_grid(self):
        # h = 1/33 puts the Coulomb center on a shared cell corner.
        code, _, stderr = self.run_main(
            "count",
            "--out",
            str(self.base_dir),
            "--source",
            "grid",
            "--h",
            "1/33",
            "-V",
            "inverse_power(0.5, 0.5, 1)",
            "--lambda-min",
            "10",
            "--lambda-max",
            "20",
        )
        self.assertEqual(code, 0, msg=stderr)
        rows = (self.base_dir / "count_difference.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(rows[0], "lambda,N_free,N_V,difference")
        self.assertEqual(len(rows), 12)

    def test_counting_beyond_the_grid_ceiling_is_invalid(self):
        code, _, stderr = self.run_main(
            "count", "--out", str(self.base_dir), "--source", "grid", "--h", "1/9", "--lambda-max", "40"
        )
        self.assertEqual(code, 2)
        self.assertIn("error:", stderr)

    def test_short_interval_passes(self):
        code, _, _ = self.run_main(
            "short-interval",
            "--out",
            str(self.base_dir),
            "--lambda-min",
            "20",
            "--lambda-max",
            "60",
            "--lambda-step",
            "0.5",
            "--eps",
            "1",
        )
        self.assertEqual(code, 0)
        payload = json.loads((self.base_dir / "short_interval.json").read_text(encoding="utf-8"))
        self.assertLessEqual(payload["max_ratio"], 3.0)

    def test_heat_trace_on_disk_is_unsupported(self):
        code, _, _ = self.run_main("heat-trace", "--out", str(self.base_dir), "--shape", "disk")
        self.assertEqual(code, 2)

    def test_identity_subcommands_on_small_grid(self):
        for name in ("duhamel", "riesz", "kato"):
            code, stdout, stderr = self.run_main(
                name,
                "--out",
                str(self.base_dir / name),
                "--h",
                "1/9",
                "-V",
                SINGULAR,
                "--times",
                "0.5,1",
                "--ells",
                "0,1",
            )
            self.assertEqual(code, 0, msg=f"{name}: {stdout}{stderr}")
        kato = json.loads((self.base_dir / "kato" / "kato.json").read_text(encoding="utf-8"))
        self.assertEqual(len(kato["kato_norms"]), 5)

    def test_invalid_arguments_exit_with_two(self):
        self.assertEqual(self.run_main("bogus")[0], 2)
        self.assertEqual(self.run_main("weyl", "--h", "abc")[0], 2)
        self.assertEqual(self.run_main("weyl", "--out", str(self.base_dir), "--eps", "2")[0], 2)
        self.assertEqual(self.run_main("weyl", "--out", str(self.base_dir), "-V", "wobble(1)")[0], 2)

    def test_unknown_subcommand_name(self):
        stderr = io.StringIO()
        with contextlib.redirect_stderr(stderr):
            code = run_subcommand("wobble", ExperimentConfig(out=str(self.base_dir)))
        self.assertEqual(code, 2)
        self.assertIn("unknown subcommand", stderr.getvalue())

    def test_full_report_subset(self):
        code, stdout, _ = self.run_main(
            "full-report",
            "--out",
            str(self.base_dir),
            "--scale",
            "desk",
            "--checks",
            "exact_counting,heat_trace",
        )
        self.assertEqual(code, 0)
        self.assertIn("exact_counting: passed", stdout)
        payload = json.loads((self.base_dir / "full_report.json").read_text(encoding="utf-8"))
        self.assertTrue(payload["passed"])
        self.assertEqual([check["case"] for check in payload["checks"]], ["exact_counting", "heat_trace"])
        self.assertEqual(payload["scale"], "desk")

    def test_full_report_rejects_unknown_checks(self):
        code, _, _ = self.run_main("full-report", "--out", str(self.base_dir), "--checks", "wobble")
        self.assertEqual(code, 2)

    def test_module_entry_point(self):
        env = os.environ.copy()
        pythonpath_parts = [str(REPO_ROOT / "python")]
        if env.get("PYTHONPATH"):
            pythonpath_parts.append(env["PYTHONPATH"])
        env["PYTHONPATH"] = os.pathsep.join(pythonpath_parts)
        env["MPLBACKEND"] = "Agg"
        result = subprocess.run(
            [sys.executable, "-m", "weyllab", "count", "--out", str(self.base_dir), "--lambda-max", "20"],
            env=env,
            capture_output=True,
            text=True,
        )
        self.assertEqual(result.returncode, 0, msg=result.stderr)
        self.assertIn("count: passed", result.stdout)
        self.assertTrue((self.base_dir / "count.csv").exists())


if __name__ == "__main__":
    unittest.main()
