import json
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "seqpath.cli"]


def run_cli(*args, cwd=None):
    return subprocess.run(
        [*CLI, *[str(a) for a in args]], capture_output=True, text=True, cwd=cwd
    )


def _write_toy_wide(path):
    path.write_text(
        "id,w1,w2,w3,w4\n"
        "p1,A,A,B,B\n"
        "p2,B,B,A,A\n"
        "p3,A,B,A,B\n"
    )


class TestBasics:
    def test_version_prints_build_hash(self):
        result = run_cli("--version")
        assert result.returncode == 0
        assert result.stdout.startswith("seqpath 0.1.0 (build ")

    def test_explain_lists_defaults(self):
        result = run_cli("--explain")
        assert result.returncode == 0
        assert "--seed = 0" in result.stdout
        assert "pipeline" in result.stdout
        assert "--metric" in result.stdout

    def test_validation_error_exit_code_one(self, tmp_path):
        result = run_cli(
            "cluster", "--matrix", tmp_path / "missing.csv", "--k", 0, cwd=tmp_path
        )
        assert result.returncode == 1
        assert "error:" in result.stderr

    def test_json_errors_flag(self, tmp_path):
        matrix = tmp_path / "m.csv"
        matrix.write_text("id,a,b\na,0.0,1.0\nb,1.0,0.0\n")
        result = run_cli(
            "--json-errors", "cluster", "--matrix", matrix, "--k", 0, cwd=tmp_path
        )
        assert result.returncode == 1
        doc = json.loads(result.stderr.strip().splitlines()[-1])
        assert doc["error"]["type"] == "validation"
        assert "k must be" in doc["error"]["message"]


class TestSimulate:
    def test_single_mode_outputs_and_manifest(self, tmp_path):
        result = run_cli(
            "simulate", "--n", 12, "--t", 8, "--seed", 5, "--single",
            "--out-dir", tmp_path, "--prefix", "toy",
        )
        assert result.returncode == 0, result.stderr
        cohort = tmp_path / "toy.csv"
        assert cohort.exists()
        assert (tmp_path / "toy_alphabet.json").exists()
        assert (tmp_path / "toy_outcomes.csv").exists()
        manifest = json.loads((tmp_path / "toy_manifest.json").read_text())
        assert manifest["subcommand"] == "simulate"
        assert manifest["seed"] == 5
        assert "philox" in manifest["parameters"]["prng"]
        header = cohort.read_text().splitlines()[0]
        assert header == "id," + ",".join(f"t{i}" for i in range(1, 9))

    def test_same_seed_reruns_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            (tmp_path / sub).mkdir()
            run_cli(
                "simulate", "--n", 15, "--t", 6, "--seed", 9, "--mixture",
                "--out-dir", tmp_path / sub, "--prefix", "c",
            )
        for name in ("c.csv", "c_alphabet.json", "c_outcomes.csv", "c_truegroups.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_mixture_writes_true_groups(self, tmp_path):
        result = run_cli(
            "simulate", "--n", 30, "--t", 6, "--mixture",
            "--out-dir", tmp_path, "--prefix", "mix",
        )
        assert result.returncode == 0, result.stderr
        lines = (tmp_path / "mix_truegroups.csv").read_text().splitlines()
        assert lines[0] == "id,true_group"
        assert len(lines) == 31


class TestIngest:
    def test_wide_normalization(self, tmp_path):
        raw = tmp_path / "raw.csv"
        _write_toy_wide(raw)
        result = run_cli(
            "ingest", "--input", raw, "--out-dir", tmp_path, "--prefix", "norm"
        )
        assert result.returncode == 0
        assert "3 sequences x 4 positions, 2 states" in result.stdout
        alphabet = json.loads((tmp_path / "norm_alphabet.json").read_text())
        assert alphabet["states"] == ["A", "B"]

    def test_spell_round_trip(self, tmp_path):
        spells = tmp_path / "spells.csv"
        spells.write_text("id,state,start,duration\np1,A,1,2\np1,B,3,2\np2,B,1,4\n")
        alphabet = tmp_path / "alphabet.json"
        alphabet.write_text('{"states": ["A", "B"]}\n')
        result = run_cli(
            "ingest", "--input", spells, "--format", "spell",
            "--alphabet", alphabet, "--out-dir", tmp_path, "--prefix", "fromspell",
        )
        assert result.returncode == 0, result.stderr
        body = (tmp_path / "fromspell.csv").read_text()
        assert "p1,A,A,B,B" in body
        assert "p2,B,B,B,B" in body

    def test_unknown_token_fails_validation(self, tmp_path):
        raw = tmp_path / "raw.csv"
        _write_toy_wide(raw)
        alphabet = tmp_path / "alphabet.json"
        alphabet.write_text('{"states": ["A"]}\n')
        result = run_cli("ingest", "--input", raw, "--alphabet", alphabet,
                         "--out-dir", tmp_path)
        assert result.returncode == 1
        assert "unknown state token 'B'" in result.stderr


class TestStages:
    def test_describe_indicators_dist(self, tmp_path):
        raw = tmp_path / "raw.csv"
        _write_toy_wide(raw)
        assert run_cli("describe", "--seqs", raw, "--out-dir", tmp_path).returncode == 0
        bundle = json.loads((tmp_path / "describe.json").read_text())
        assert bundle["n"] == 3
        assert (tmp_path / "describe_transitions.csv").exists()

        assert run_cli("indicators", "--seqs", raw, "--out-dir", tmp_path).returncode == 0
        header = (tmp_path / "indicators.csv").read_text().splitlines()[0]
        assert header.startswith("id,entropy,normalized_entropy,turbulence")

        result = run_cli(
            "dist", "--seqs", raw, "--metric", "lcs", "--out-dir", tmp_path,
            "--audit-triangle", 200,
        )
        assert result.returncode == 0
        assert "triangle audit: 0 violation(s)" in result.stdout
        lines = (tmp_path / "dist.csv").read_text().splitlines()
        assert lines[0] == "id,p1,p2,p3"
        assert len(lines) == 4

    def test_dist_two_sequences_square_csv(self, tmp_path):
        raw = tmp_path / "two.csv"
        raw.write_text("id,w1,w2\nx,A,B\ny,B,A\n")
        result = run_cli("dist", "--seqs", raw, "--metric", "lcs", "--out-dir", tmp_path)
        assert result.returncode == 0
        lines = (tmp_path / "dist.csv").read_text().splitlines()
        assert lines[0] == "id,x,y"
        assert lines[1].split(",")[1] == "0.0"
        assert lines[1].split(",")[2] == "2.0"

    def test_dist_binary_format_and_cluster_needs_seqs(self, tmp_path):
        raw = tmp_path / "raw.csv"
        _write_toy_wide(raw)
        result = run_cli(
            "dist", "--seqs", raw, "--format", "binary", "--out-dir", tmp_path
        )
        assert result.returncode == 0
        blob = (tmp_path / "dist.sqdm").read_bytes()
        assert blob[:4] == b"SQDM"
        missing = run_cli(
            "cluster", "--matrix", tmp_path / "dist.sqdm", "--k", 2, cwd=tmp_path
        )
        assert missing.returncode == 1
        assert "--seqs" in missing.stderr
        ok = run_cli(
            "cluster", "--matrix", tmp_path / "dist.sqdm", "--seqs", raw,
            "--k", 2, "--out-dir", tmp_path,
        )
        assert ok.returncode == 0, ok.stderr
        assignment = (tmp_path / "cluster_assignment.csv").read_text().splitlines()
        assert assignment[0] == "id,cluster"
        assert len(assignment) == 4

    def test_cluster_validates_k(self, tmp_path):
        matrix = tmp_path / "m.csv"
        matrix.write_text("id,a,b\na,0.0,1.0\nb,1.0,0.0\n")
        result = run_cli("cluster", "--matrix", matrix, "--k", 0, cwd=tmp_path)
        assert result.returncode == 1
        assert "k must be in 1..2" in result.stderr


@pytest.fixture(scope="module")
def cohort(tmp_path_factory):
    directory = tmp_path_factory.mktemp("cohort")
    result = run_cli(
        "simulate", "--n", 90, "--t", 12, "--seed", 3, "--mixture",
        "--baseline-rate", 0.02, "--out-dir", directory, "--prefix", "c",
    )
    assert result.returncode == 0, result.stderr
    return directory


class TestEndToEnd:
    def test_cluster_profile_assoc_plot(self, cohort):
        assert run_cli(
            "dist", "--seqs", cohort / "c.csv", "--out-dir", cohort,
        ).returncode == 0
        result = run_cli(
            "cluster", "--matrix", cohort / "dist.csv", "--k", 3, "--out-dir", cohort,
        )
        assert result.returncode == 0, result.stderr
        assert "silhouette k=3" in result.stdout

        result = run_cli(
            "profile", "--seqs", cohort / "c.csv",
            "--assignment", cohort / "cluster_assignment.csv", "--out-dir", cohort,
        )
        assert result.returncode == 0, result.stderr
        assert "dominant_state" in (cohort / "profile.txt").read_text()

        result = run_cli(
            "assoc", "--seqs", cohort / "c.csv",
            "--assignment", cohort / "cluster_assignment.csv",
            "--outcomes", cohort / "c_outcomes.csv", "--out-dir", cohort,
        )
        assert result.returncode == 0, result.stderr
        text = (cohort / "assoc.txt").read_text()
        assert "cluster_2" in text and "high_turbulence" in text

        result = run_cli(
            "plot", "--seqs", cohort / "c.csv",
            "--assignment", cohort / "cluster_assignment.csv", "--out-dir", cohort,
        )
        assert result.returncode == 0, result.stderr
        for name in ("plot_index.svg", "plot_dist.svg", "plot_freq.svg", "plot_modal.svg",
                     "plot_dist_cluster1.svg", "plot_freq_cluster3.svg"):
            assert (cohort / name).exists()


class TestPipeline:
    def test_config_file_run_and_flag_override(self, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text(
            "# toy pipeline\n"
            "n = 60\n"
            "t = 10\n"
            "seed = 4\n"
            "k = 3\n"
            "metric = lcs\n"
            "out_dir = WILL_BE_OVERRIDDEN\n"
            "prefix = demo\n"
        )
        out_dir = tmp_path / "out"
        result = run_cli("pipeline", "--config", config, "--out-dir", out_dir)
        assert result.returncode == 0, result.stderr
        expected = [
            "demo_cohort.csv", "demo_cohort_alphabet.json", "demo_cohort_outcomes.csv",
            "demo_describe.json", "demo_indicators.csv", "demo_dist.csv",
            "demo_dendrogram.json", "demo_assignment.csv", "demo_silhouette.csv",
            "demo_profile.csv", "demo_profile.txt", "demo_assoc.csv", "demo_assoc.txt",
            "demo_index.svg", "demo_dist.svg", "demo_freq.svg", "demo_modal.svg",
            "demo_manifest.json",
        ]
        for name in expected:
            assert (out_dir / name).exists(), name

    def test_rerun_is_byte_identical(self, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text("n = 50\nt = 8\nseed = 11\nk = 2\nprefix = again\n")
        for sub in ("one", "two"):
            result = run_cli(
                "pipeline", "--config", config, "--out-dir", tmp_path / sub
            )
            assert result.returncode == 0, result.stderr
        names = sorted(
            p.name for p in (tmp_path / "one").iterdir()
            if not p.name.endswith(".times.json")
        )
        assert names
        for name in names:
            a = (tmp_path / "one" / name).read_bytes()
            b = (tmp_path / "two" / name).read_bytes()
            assert a == b, f"{name} differs between reruns"

    def test_pipeline_accepts_existing_sequences(self, tmp_path):
        raw = tmp_path / "raw.csv"
        _write_toy_wide(raw)
        result = run_cli(
            "pipeline", "--seqs", raw, "--k", 2, "--out-dir", tmp_path / "out",
            "--prefix", "ext",
        )
        assert result.returncode == 0, result.stderr
        assert (tmp_path / "out" / "ext_assignment.csv").exists()
        # no outcome file, so no association stage
        assert not (tmp_path / "out" / "ext_assoc.csv").exists()

    def test_bad_config_key_rejected(self, tmp_path):
        config = tmp_path / "bad.conf"
        config.write_text("bogus = 1\n")
        result = run_cli("pipeline", "--config", config, "--out-dir", tmp_path)
        assert result.returncode == 1
        assert "unknown key" in result.stderr
