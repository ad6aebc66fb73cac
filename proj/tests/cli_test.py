"""End-to-end checks of the rfp command line tool."""

import json
import os
import signal
import subprocess
import sys
import tempfile
import time
import unittest
import urllib.request

RFP = os.environ.get("RFP_BIN", "rfp")
SOURCE = os.environ["RFP_SOURCE_DIR"]
PROFILES = os.path.join(SOURCE, "data", "profiles")
FIXTURES = os.path.join(SOURCE, "tests", "data")


def run(*args, timeout=120):
    return subprocess.run([RFP, *args], capture_output=True, text=True, timeout=timeout)


def write_json(directory, name, doc):
    path = os.path.join(directory, name)
    with open(path, "w") as f:
        json.dump(doc, f)
    return path


def load_profile(name):
    with open(os.path.join(PROFILES, name)) as f:
        return json.load(f)


class Plan(unittest.TestCase):
    def test_upper_profile(self):
        with tempfile.TemporaryDirectory() as out:
            r = run("plan", "-p", os.path.join(PROFILES, "upper.json"), "-o", out)
            self.assertEqual(r.returncode, 0, r.stderr)
            self.assertIn("$58,400", r.stdout)
            self.assertTrue(os.path.exists(os.path.join(out, "plan.csv")))
            with open(os.path.join(out, "plan.json")) as f:
                doc = json.load(f)
            self.assertAlmostEqual(doc["c"], 58400.0, places=3)

    def test_json_output(self):
        r = run("plan", "-p", os.path.join(PROFILES, "lower.json"), "--json")
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.loads(r.stdout)
        self.assertEqual(doc["status"], "optimal")

    def test_invalid_profile(self):
        with tempfile.TemporaryDirectory() as d:
            p = load_profile("upper.json")
            p["balances"]["ira"] = -1
            r = run("plan", "-p", write_json(d, "bad.json", p))
            self.assertEqual(r.returncode, 2)
            self.assertIn("balances.ira", r.stderr)

            broken = os.path.join(d, "broken.json")
            with open(broken, "w") as f:
                f.write("{ not json")
            self.assertEqual(run("plan", "-p", broken).returncode, 2)
            self.assertEqual(run("plan", "-p", os.path.join(d, "missing.json")).returncode, 2)

    def test_infeasible(self):
        with tempfile.TemporaryDirectory() as d:
            p = load_profile("lower.json")
            p["target_consumption"] = 1000
            p["liabilities"] = [{"from_age": 67, "to_age": 67, "annual": 5e6}]
            r = run("plan", "-p", write_json(d, "p.json", p))
            self.assertEqual(r.returncode, 1)
            self.assertIn("first infeasible year: 3", r.stderr)

    def test_usage_errors(self):
        self.assertEqual(run("frobnicate").returncode, 2)
        self.assertEqual(run("plan", "--forecast", "psychic").returncode, 2)

    def test_run_config(self):
        with tempfile.TemporaryDirectory() as d:
            cfg = write_json(d, "run.json", {"profile": os.path.join(PROFILES, "upper.json"),
                                             "policy": {"forecast": "fixed"}})
            r = run("plan", "-c", cfg)
            self.assertEqual(r.returncode, 0, r.stderr)
            self.assertIn("$58,400", r.stdout)


class Simulate(unittest.TestCase):
    def test_same_seed_same_summary(self):
        summaries = []
        with tempfile.TemporaryDirectory() as d:
            for k in range(2):
                out = os.path.join(d, str(k))
                r = run("simulate", "-p", os.path.join(PROFILES, "upper.json"), "-n", "1", "-s", "7", "-o", out)
                self.assertEqual(r.returncode, 0, r.stderr)
                with open(os.path.join(out, "summary.csv")) as f:
                    summaries.append(f.read())
        self.assertEqual(summaries[0], summaries[1])
        self.assertEqual(len(summaries[0].strip().splitlines()), 2)

    def test_collar_outputs(self):
        with tempfile.TemporaryDirectory() as out:
            r = run("simulate", "-p", os.path.join(PROFILES, "lower.json"), "-n", "12", "--collar",
                    "--years", "-o", out)
            self.assertEqual(r.returncode, 0, r.stderr)
            for name in ("summary.csv", "metrics.json", "years.csv", "cdf_relative_bequest.csv",
                         "cdf_mpc_bequest.csv", "cdf_benchmark_bequest.csv"):
                self.assertTrue(os.path.exists(os.path.join(out, name)), name)
            with open(os.path.join(out, "metrics.json")) as f:
                metrics = json.load(f)
            self.assertEqual(metrics["trajectory_violations"]["count"], 0)
            self.assertIn("relative bequest", r.stdout)

    def test_bad_count(self):
        self.assertEqual(run("simulate", "-p", os.path.join(PROFILES, "lower.json"), "-n", "0").returncode, 2)


class Fit(unittest.TestCase):
    def test_mixture(self):
        with tempfile.TemporaryDirectory() as d:
            out = os.path.join(d, "preset.json")
            r = run("fit", "--market-returns", os.path.join(FIXTURES, "market_returns.csv"), "-k", "2",
                    "-s", "3", "-o", out)
            self.assertEqual(r.returncode, 0, r.stderr)
            with open(out) as f:
                preset = json.load(f)
            self.assertEqual(len(preset["gmm"]["weights"]), 2)
            # the fitted preset is usable for planning
            r = run("plan", "-p", os.path.join(PROFILES, "lower.json"), "--preset", out)
            self.assertEqual(r.returncode, 0, r.stderr)

    def test_rates(self):
        r = run("fit", "--rates", os.path.join(FIXTURES, "rates.csv"), "--json")
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.loads(r.stdout)
        self.assertEqual(doc["var"]["observations"], 62)
        self.assertLess(doc["var"]["spectral_radius"], 1.0)

    def test_missing_file(self):
        self.assertEqual(run("fit", "--market-returns", "/nonexistent.csv").returncode, 2)
        self.assertEqual(run("fit").returncode, 2)


class Schemas(unittest.TestCase):
    def setUp(self):
        try:
            import jsonschema
            import referencing
        except ImportError:
            self.skipTest("jsonschema not installed")
        schema_dir = os.path.join(SOURCE, "docs", "schemas")
        resources = []
        for name in os.listdir(schema_dir):
            with open(os.path.join(schema_dir, name)) as f:
                doc = json.load(f)
            jsonschema.Draft202012Validator.check_schema(doc)
            resources.append((name, referencing.Resource.from_contents(doc)))
        self.registry = referencing.Registry().with_resources(resources)
        self.jsonschema = jsonschema

    def validate(self, doc, schema):
        validator = self.jsonschema.Draft202012Validator({"$ref": schema}, registry=self.registry)
        validator.validate(doc)

    def test_bundled_documents(self):
        for name in ("upper.json", "lower.json"):
            self.validate(load_profile(name), "profile.schema.json")
        with open(os.path.join(SOURCE, "docs", "run_config.example.json")) as f:
            self.validate(json.load(f), "run_config.schema.json")
        self.validate({"profile": load_profile("lower.json"), "count": 10, "collar": {"enabled": True}},
                      "simulate_request.schema.json")
        with self.assertRaises(self.jsonschema.ValidationError):
            self.validate({"profile": load_profile("lower.json"), "policies": "all"}, "simulate_request.schema.json")

    def test_example_config_runs(self):
        with tempfile.TemporaryDirectory() as d:
            with open(os.path.join(SOURCE, "docs", "run_config.example.json")) as f:
                cfg = json.load(f)
            cfg["profile"] = os.path.join(SOURCE, cfg["profile"])
            cfg["output_dir"] = os.path.join(d, "out")
            cfg["count"] = 5
            r = run("simulate", "-c", write_json(d, "run.json", cfg))
            self.assertEqual(r.returncode, 0, r.stderr)
            self.assertTrue(os.path.exists(os.path.join(d, "out", "summary.csv")))


class Serve(unittest.TestCase):
    def start(self, *args):
        p = subprocess.Popen([RFP, "serve", *args], stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
        line = p.stdout.readline()
        self.assertTrue(line.startswith("listening on"), line + p.stderr.read() if not line else line)
        return p, int(line.strip().rsplit(":", 1)[1])

    def test_lifecycle(self):
        p, port = self.start("--port", "0")
        try:
            with urllib.request.urlopen(f"http://127.0.0.1:{port}/health", timeout=5) as resp:
                self.assertEqual(json.load(resp)["status"], "ok")
            dup = run("serve", "--port", str(port), timeout=10)
            self.assertEqual(dup.returncode, 3)
        finally:
            p.send_signal(signal.SIGTERM)
            start = time.monotonic()
            code = p.wait(timeout=5)
            self.assertLess(time.monotonic() - start, 5)
            p.stdout.close()
            p.stderr.close()
        self.assertEqual(code, 0)


if __name__ == "__main__":
    unittest.main(argv=[sys.argv[0], "-v"])
