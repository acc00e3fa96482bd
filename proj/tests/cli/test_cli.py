"""End-to-end checks of the phasorconv command line.

Usage: test_cli.py PATH_TO_CLI SCHEMA_DIR
"""

import csv
import json
import os
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

import jsonschema

CLI = ""
SCHEMAS = Path()

CSV_COLUMNS = ["backend", "B", "f1", "f2", "N", "K", "P", "stage",
               "median_ns", "iqr_ns", "mul", "add", "div", "sqrt", "trig"]
SMALL_BENCH = ["bench", "--batch", "1,3", "--in-ch", "2", "--out-ch", "3",
               "--image", "8", "--kernel", "3", "--pad", "1",
               "--warmup", "1", "--active", "3"]


def run(*args, env=None):
    full_env = dict(os.environ)
    full_env.pop("PHASORCONV_THREADS", None)
    if env:
        full_env.update(env)
    return subprocess.run([CLI, *args], capture_output=True, text=True,
                          env=full_env, timeout=600)


def validate(kind, doc):
    schema = json.loads((SCHEMAS / f"{kind}.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    jsonschema.validate(doc, schema)


class CliTest(unittest.TestCase):
    def setUp(self):
        self._dir = tempfile.TemporaryDirectory()
        self.tmp = Path(self._dir.name)

    def tearDown(self):
        self._dir.cleanup()

    def report(self, name, *args):
        path = self.tmp / name
        proc = run(*args, str(path))
        self.assertEqual(proc.returncode, 0, proc.stderr)
        return path

    def test_verify_small_passes_and_validates(self):
        path = self.report("v.json", "verify", "--scale", "small", "--json")
        doc = json.loads(path.read_text())
        validate("verify", doc)
        self.assertTrue(doc["passed"])
        self.assertTrue(all(c["passed"] for c in doc["checks"]))

    def test_verify_sabotage_fails_forward_equivalence(self):
        proc = run("verify", "--sabotage-conj", "--json", "-")
        self.assertEqual(proc.returncode, 1)
        doc = json.loads(proc.stdout)
        validate("verify", doc)
        failed = {c["name"] for c in doc["checks"] if not c["passed"]}
        self.assertIn("forward_equivalence", failed)

    def test_flops_defaults_and_schema(self):
        proc = run("flops")
        self.assertEqual(proc.returncode, 0, proc.stderr)
        self.assertIn("4.00x (multiplies)", proc.stdout)
        self.assertIn("3.00x (mul+add)", proc.stdout)
        doc = json.loads(self.report("f.json", "flops", "--json").read_text())
        validate("flops", doc)
        self.assertEqual(doc["baseline_terms"]["product"], 4 * 128 * 64 * 64 * 32 * 32)

    def test_flops_zero_fft_constant(self):
        doc = json.loads(self.report("f.json", "flops", "--c-fft", "0", "--json").read_text())
        self.assertEqual(doc["baseline_terms"]["transform"], 0)

    def test_bench_reports(self):
        j = self.tmp / "b.json"
        c = self.tmp / "b.csv"
        proc = run(*SMALL_BENCH, "--json", str(j), "--csv", str(c))
        self.assertEqual(proc.returncode, 0, proc.stderr)
        doc = json.loads(j.read_text())
        validate("bench", doc)
        self.assertEqual(len(doc["rows"]), 4)
        self.assertEqual(len(doc["comparisons"]), 2)
        for row in doc["rows"]:
            names = [s["stage"] for s in row["stages"]]
            self.assertFalse(any("plan" in n for n in names))
        for cmp in doc["comparisons"]:
            self.assertEqual(cmp["spectral_product_ratio"]["mul"], 4.0)
            self.assertEqual(cmp["spectral_product_ratio"]["mul_add"], 3.0)
            self.assertGreater(cmp["timing"]["speedup"], 0.0)
        with c.open() as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows[0], CSV_COLUMNS)
        self.assertEqual(len(rows) - 1, 4 * 9)

    def test_bench_rejects_too_few_active_reps(self):
        self.assertEqual(run(*SMALL_BENCH[:-2], "--active", "1").returncode, 2)

    def test_bench_rejects_invalid_geometry(self):
        self.assertEqual(run("bench", "--image", "2", "--kernel", "3").returncode, 2)

    def test_train_zero_steps_single_entry(self):
        doc = json.loads(self.report("t.json", "train", "--steps", "0", "--out").read_text())
        validate("train", doc)
        self.assertEqual(len(doc["runs"][0]["entries"]), 1)

    def test_train_compare_parity(self):
        doc = json.loads(self.report("t.json", "train", "--compare", "rect,phasor",
                                     "--steps", "300", "--seed", "7", "--out").read_text())
        validate("train", doc)
        self.assertLessEqual(doc["comparison"]["max_relative_loss_gap"], 1e-3)

    def test_usage_errors_exit_2(self):
        self.assertEqual(run().returncode, 2)
        self.assertEqual(run("nope").returncode, 2)
        self.assertEqual(run("train", "--lr", "-1").returncode, 2)
        self.assertEqual(run("verify", env={"PHASORCONV_THREADS": "zero"}).returncode, 2)
        self.assertEqual(run("train", "--steps", "1", "--out",
                             str(self.tmp / "missing" / "t.json")).returncode, 2)

    def test_double_run_is_byte_identical(self):
        cases = {
            "verify": ["verify", "--omit-timing", "--json"],
            "flops": ["flops", "--json"],
            "bench": [*SMALL_BENCH, "--omit-timing", "--json"],
            "train": ["train", "--compare", "rect,phasor", "--steps", "20", "--omit-timing", "--out"],
        }
        for name, args in cases.items():
            with self.subTest(report=name):
                a = self.report(f"{name}_a.json", *args).read_bytes()
                b = self.report(f"{name}_b.json", *args).read_bytes()
                self.assertEqual(a, b)
                self.assertNotIn(b"timing", a)

    def test_thread_env_override_keeps_results(self):
        args = ["train", "--steps", "5", "--omit-timing", "--out"]
        one = self.report("t1.json", *args).read_bytes()
        proc = run(*args, str(self.tmp / "t4.json"), env={"PHASORCONV_THREADS": "4"})
        self.assertEqual(proc.returncode, 0, proc.stderr)
        four = json.loads((self.tmp / "t4.json").read_text())
        self.assertEqual(four["environment"]["threads"], 4)
        ref = json.loads(one)
        self.assertEqual(ref["runs"], four["runs"])


if __name__ == "__main__":
    CLI = sys.argv[1]
    SCHEMAS = Path(sys.argv[2])
    unittest.main(argv=sys.argv[:1], verbosity=2)
