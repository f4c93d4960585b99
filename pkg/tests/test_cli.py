import unittest
import os
import sys
import tempfile
import shutil
import json
import io
import subprocess
from unittest.mock import patch

from pycmc.cli import main as cli_main
from pycmc.estimation import CountTensor, increment, save_counts

REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))


class TestCli(unittest.TestCase):

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        self.out_dir = os.path.join(self.test_dir, "results")

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def _run_cli(self, argv):
        """辅助函数，运行 CLI main 函数并捕获 stdout/stderr 和退出码"""
        code = 0
        with patch('sys.stdout', new_callable=io.StringIO) as mock_stdout:
            with patch('sys.stderr', new_callable=io.StringIO) as mock_stderr:
                try:
                    cli_main(argv)
                except SystemExit as e:
                    code = e.code
                return code, mock_stdout.getvalue(), mock_stderr.getvalue()

    def test_builtins(self):
        code, stdout, _ = self._run_cli(["builtins"])
        self.assertEqual(code, 0)
        lines = stdout.strip().splitlines()
        self.assertEqual(len(lines), 3)
        self.assertTrue(lines[0].startswith("fig1"))
        self.assertIn("p ∈ [0,1]", lines[0])
        self.assertIn("[stand-in]", lines[2])

    def test_no_command_prints_help(self):
        code, stdout, _ = self._run_cli([])
        self.assertEqual(code, 1)
        self.assertIn("explore", stdout)

    def test_explore_writes_artifacts(self):
        code, stdout, stderr = self._run_cli([
            "explore", "-e", "fig1", "-o", self.out_dir, "-N", "10", "-t", "3", "-s", "random,pig_greedy",
        ])
        self.assertEqual(code, 0, stderr)
        self.assertIn("成功将实验产物写入", stdout)
        self.assertIn("random: 3 次试验", stdout)
        self.assertIn("pig_greedy: 1 次试验", stdout)
        for name in ("exploration_random.csv", "exploration_pig_greedy.csv", "curves.csv",
                     "row_curves.csv", "policy_trace.csv", "table1.csv", "table1.json", "config.json"):
            self.assertTrue(os.path.exists(os.path.join(self.out_dir, name)), name)
        with open(os.path.join(self.out_dir, "config.json"), encoding="utf-8") as f:
            config = json.load(f)
        self.assertEqual(config["periods"], 10)
        self.assertEqual(config["strategies"], ["random", "pig_greedy"])

    def test_explore_gzip_and_subset_all(self):
        code, _, stderr = self._run_cli([
            "explore", "-e", "seq3", "-o", self.out_dir, "-N", "5", "-s", "pig_greedy",
            "-c", "gzip", "--subset", "all",
        ])
        self.assertEqual(code, 0, stderr)
        self.assertTrue(os.path.exists(os.path.join(self.out_dir, "curves.csv.gz")))
        with open(os.path.join(self.out_dir, "config.json"), encoding="utf-8") as f:
            self.assertIsNone(json.load(f)["subset"])

    def test_explore_invalid_config_reports_json_error(self):
        code, stdout, stderr = self._run_cli(["explore", "-o", self.out_dir, "-t", "0"])
        self.assertEqual(code, 1)
        error = json.loads(stderr.strip().splitlines()[-1])
        self.assertEqual(error["error"], "ConfigError")
        self.assertIn("trials", error["message"])
        self.assertNotIn("Traceback", stderr)

    def test_usage_errors_report_json(self):
        for argv in (["explore", "-o", self.out_dir, "--nesting", "3"],
                     ["explore", "-o", self.out_dir, "--subset", "a,b"],
                     ["dp-oracle"],
                     ["no-such-command"]):
            code, _, stderr = self._run_cli(argv)
            self.assertEqual(code, 1, argv)
            error = json.loads(stderr.strip().splitlines()[-1])
            self.assertEqual(error["error"], "UsageError")
        self.assertFalse(os.path.exists(self.out_dir))

    def test_explore_subset_out_of_range(self):
        code, _, stderr = self._run_cli(["explore", "-o", self.out_dir, "--subset", "0,7"])
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(stderr.strip().splitlines()[-1])["error"], "ConfigError")

    def test_task_with_exploration_csv(self):
        code, _, stderr = self._run_cli([
            "explore", "-e", "fig4", "-o", self.out_dir, "-s", "pig_greedy,pig_rollout",
        ])
        self.assertEqual(code, 0, stderr)

        greedy_csv = os.path.join(self.out_dir, "exploration_pig_greedy.csv")
        code, stdout, stderr = self._run_cli(["task", "-e", "fig4", "--counts", greedy_csv])
        self.assertEqual(code, 0, stderr)
        result = json.loads(stdout)
        self.assertEqual(result["policy_state1"], 1)
        self.assertAlmostEqual(result["true_cost_state1"], 100.0, places=9)
        self.assertEqual(len(result["policy"]), 100)

        rollout_csv = os.path.join(self.out_dir, "exploration_pig_rollout.csv")
        code, stdout, stderr = self._run_cli(["task", "-e", "fig4", "--counts", rollout_csv])
        self.assertEqual(code, 0, stderr)
        result = json.loads(stdout)
        self.assertEqual(result["policy_state1"], 0)
        self.assertAlmostEqual(result["true_cost_state1"], 2.0, places=9)

    def test_task_with_counts_json(self):
        F = increment(CountTensor.zeros(100, 2), 0, 0, 1)
        counts_path = os.path.join(self.test_dir, "counts.json")
        with open(counts_path, "w", encoding="utf-8") as f:
            f.write(save_counts(F))
        code, stdout, stderr = self._run_cli(["task", "-e", "fig4", "--counts", counts_path])
        self.assertEqual(code, 0, stderr)
        self.assertIn("policy_state1", json.loads(stdout))

    def test_task_missing_counts_file(self):
        code, _, stderr = self._run_cli(["task", "--counts", os.path.join(self.test_dir, "missing.csv")])
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(stderr.strip().splitlines()[-1])["error"], "ArtifactReadError")

    def test_dp_oracle(self):
        code, stdout, stderr = self._run_cli(["dp-oracle", "-e", "fig1", "-N", "4"])
        self.assertEqual(code, 0, stderr)
        result = json.loads(stdout)
        self.assertIn(result["best_control"], (0, 1))
        self.assertGreaterEqual(result["value"], result["rollout_total_pig"] - 1e-12)
        self.assertGreaterEqual(result["rollout_total_pig"], result["greedy_total_pig"] - 1e-12)

    def test_dp_oracle_intractable(self):
        code, _, stderr = self._run_cli(["dp-oracle", "-e", "fig4", "-N", "30"])
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(stderr.strip().splitlines()[-1])["error"], "IntractableHorizonError")

    def test_table1(self):
        code, stdout, stderr = self._run_cli(["table1", "-o", self.out_dir, "-t", "3"])
        self.assertEqual(code, 0, stderr)
        lines = stdout.strip().splitlines()
        self.assertEqual(lines[0], "strategy,policy_state1,true_cost_state1")
        rows = {line.split(",")[0]: line.split(",")[1:] for line in lines[1:-1]}
        self.assertEqual(rows["pig_rollout"][0], "0")
        self.assertEqual(rows["pig_greedy"][0], "1")
        self.assertEqual(rows["jpig_greedy"][0], "1")
        self.assertIn("成功将实验产物写入", lines[-1])

    def test_module_entry_point(self):
        env = os.environ.copy()
        env['PYTHONIOENCODING'] = 'utf-8'
        result = subprocess.run(
            [sys.executable, "-m", "pycmc.cli", "builtins"],
            capture_output=True, text=True, encoding='utf-8', timeout=60, env=env, cwd=REPO_ROOT,
        )
        self.assertEqual(result.returncode, 0, result.stderr)
        self.assertIn("seq3", result.stdout)


if __name__ == '__main__':
    unittest.main()
