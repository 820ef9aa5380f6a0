import numpy as np
import pytest

from falkon import cli
from falkon.baselines import IterTrace
from falkon.data import Dataset, write_dense_csv, write_sparse_index_value
from falkon.solver import falkon_predict, load_model
from falkon.synthetic import make_classification, make_regression


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def test_smoke_run(tmp_path, capsys):
    out = tmp_path / "r"
    assert run_cli("run", "--synthetic", "regression", "--n", 2000, "--centers", 200, "--iters", 20,
                   "--sigma", 1, "--lambda", 1e-4, "--out", out) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("falkon M=200 t=20 lambda=0.0001 rmse=")
    for name in ["report.txt", "metrics.csv", "trace.csv", "model.bin"]:
        assert (out / name).exists()
    report = (out / "report.txt").read_text()
    assert "[settings]" in report and "[metrics]" in report
    assert len((out / "trace.csv").read_text().splitlines()) == 21
    rmse = float((out / "metrics.csv").read_text().splitlines()[1].split(",")[2])
    assert 0 < rmse < 1


def test_no_timestamp_is_byte_identical(tmp_path):
    args = ["run", "--synthetic", "regression", "--n", 400, "--centers", 40, "--iters", 5,
            "--threads", 2, "--no-timestamp"]
    run_cli(*args, "--out", tmp_path / "a")
    run_cli(*args, "--out", tmp_path / "b")
    for name in ["report.txt", "metrics.csv", "trace.csv", "model.bin"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert "timestamp" not in (tmp_path / "a" / "report.txt").read_text()


def test_help_lists_flags_and_formats(capsys):
    with pytest.raises(SystemExit):
        run_cli("run", "--help")
    text = capsys.readouterr().out
    for name, *_ in cli.OPTIONS:
        assert f"--{name}" in text
    for word in ["input formats", "csv", "sparse", "FALKON_THREADS", "compare.csv", "--no-timestamp"]:
        assert word in text


def test_krr_refuses_above_cap(tmp_path, capsys):
    code = run_cli("run", "--synthetic", "regression", "--n", 500, "--solver", "krr", "--dense-cap", 100,
                   "--out", tmp_path)
    assert code == 2
    err = capsys.readouterr().err
    assert "cap of 100" in err and "--dense-cap" in err


def test_config_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# experiment\nsynthetic = regression\nlambda = 0.5\ncenters = 7\nblock-rows = 9\n")
    args = cli.build_parser().parse_args(["run", "--config", str(cfg), "--centers", "11"])
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    s = cli.resolve_settings(args)
    assert (s["lambda"], s["centers"], s["block_rows"], s["threads"]) == (0.5, 11, 9, 3)
    assert s["sigma"] == 1.0
    args = cli.build_parser().parse_args(["run", "--config", str(cfg), "--threads", "1"])
    assert cli.resolve_settings(args)["threads"] == 1


def test_config_errors(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("synthetic = regression\nsigmaa = 2\n")
    assert run_cli("run", "--config", cfg) == 2
    assert "c.cfg:2: unknown field 'sigmaa'" in capsys.readouterr().err
    cfg.write_text("synthetic = regression\ncenters = many\n")
    assert run_cli("run", "--config", cfg) == 2
    assert "c.cfg:2: field 'centers'" in capsys.readouterr().err
    assert run_cli("run", "--out", tmp_path) == 2
    assert "exactly one of --data or --synthetic" in capsys.readouterr().err
    assert run_cli("run", "--synthetic", "regression", "--lambda", -1, "--out", tmp_path) == 2


def test_bad_threads_env(monkeypatch, capsys, tmp_path):
    monkeypatch.setenv(cli.THREADS_ENV, "lots")
    assert run_cli("run", "--synthetic", "regression", "--out", tmp_path) == 2
    assert cli.THREADS_ENV in capsys.readouterr().err


def test_merge_traces_fills_gaps():
    a, b = IterTrace(), IterTrace()
    for k in [1, 2, 3]:
        a.append(k, 0.0, k / 10)
    for k in [2, 4]:
        b.append(k, 0.0, float(k))
    assert cli.merge_traces([("a", a), ("b", b)]) == [
        [1, "0.1", ""], [2, "0.2", "2.0"], [3, "0.3", ""], [4, "", "4.0"]]


def test_compare_writes_merged_csv(tmp_path):
    out = tmp_path / "cmp"
    assert run_cli("compare", "--synthetic", "regression", "--n", 300, "--centers", 30, "--iters", 6,
                   "--solvers", "falkon,cg,nystrom_direct", "--no-timestamp", "--out", out) == 0
    lines = (out / "compare.csv").read_text().splitlines()
    assert lines[0] == "iteration,falkon,cg,nystrom_direct"
    assert len(lines) == 7 and all(line.endswith(",") for line in lines[1:])
    # a compare column is exactly the test metric of that solver's own trace
    own = [row.split(",")[2] for row in (out / "falkon" / "trace.csv").read_text().splitlines()[1:]]
    assert [row.split(",")[1] for row in lines[1:]] == own


def test_compare_single_config_and_mismatch(tmp_path, capsys):
    c1, c2 = tmp_path / "a.cfg", tmp_path / "b.cfg"
    c1.write_text("synthetic = regression\nn = 200\ncenters = 20\niters = 4\nno-timestamp = true\n")
    c2.write_text("synthetic = regression\nn = 250\ncenters = 20\niters = 4\n")
    out = tmp_path / "one"
    assert run_cli("compare", "--out", out, c1) == 0
    assert (out / "compare.csv").read_text().splitlines()[0] == "iteration,falkon"
    assert run_cli("compare", "--out", tmp_path / "two", c1, c2) == 2
    assert "disagree" in capsys.readouterr().err


def test_csv_input_and_saved_model(tmp_path, capsys):
    ds = make_regression(300, 3, sigma=2.0, seed=1)
    path = tmp_path / "d.csv"
    write_dense_csv(ds, path)
    out = tmp_path / "r"
    assert run_cli("run", "--data", path, "--centers", 30, "--iters", 10, "--sigma", 2, "--out", out) == 0
    model = load_model(out / "model.bin")
    assert model.norm_stats is not None and model.centers.shape == (30, 3)
    pred = falkon_predict(model, ds.features)
    assert np.sqrt(np.mean((pred - ds.labels) ** 2)) < np.std(ds.labels)


def test_sparse_binary_input(tmp_path, capsys):
    ds = make_classification(300, 4, seed=2)
    labels = np.where(ds.labels > 0, 1.0, 0.0)
    path = tmp_path / "d.svm"
    import scipy.sparse as sp

    write_sparse_index_value(Dataset(sp.csr_matrix(ds.features), labels), path)
    out = tmp_path / "r"
    assert run_cli("run", "--data", path, "--format", "sparse", "--task", "binary", "--centers", 30,
                   "--out", out) == 0
    header, row = (out / "metrics.csv").read_text().splitlines()
    values = dict(zip(header.split(","), row.split(",")))
    assert 0 <= float(values["c_err"]) < 0.5 and float(values["auc"]) > 0.5


def test_multiclass_encoding():
    y = np.array([3.0, 1.0, 2.0, 3.0])
    targets, ids = cli.encode_labels(y, "multiclass", np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(ids, [2, 0, 1, 2])
    np.testing.assert_array_equal(targets[:, 2], [1, -1, -1, 1])
    t, _ = cli.encode_labels(np.array([5.0, 7.0]), "binary", np.array([5.0, 7.0]))
    np.testing.assert_array_equal(t, [-1, 1])


def test_binary_needs_two_classes(tmp_path, capsys):
    path = tmp_path / "d.csv"
    write_dense_csv(Dataset(np.arange(12.0).reshape(6, 2), np.array([0.0, 1.0, 2.0] * 2)), path)
    assert run_cli("run", "--data", path, "--task", "binary", "--centers", 2, "--out", tmp_path) == 2
    assert "exactly two label values, found 3" in capsys.readouterr().err


def test_diagnostics_block(tmp_path):
    out = tmp_path / "r"
    assert run_cli("run", "--synthetic", "regression", "--n", 300, "--centers", 30, "--iters", 10,
                   "--lambda", 1e-2, "--diagnostics", "--out", out) == 0
    assert "[theory]" in (out / "report.txt").read_text()
    assert "cond_W = " in (out / "report.txt").read_text()


def test_center_labels(tmp_path):
    ds = make_regression(300, 3, sigma=2.0, seed=4)
    path = tmp_path / "d.csv"
    write_dense_csv(Dataset(ds.features, ds.labels + 50.0), path)
    common = ["run", "--data", path, "--kernel", "linear", "--centers", 30, "--lambda", 1e-6]
    assert run_cli(*common, "--out", tmp_path / "raw") == 0
    assert run_cli(*common, "--center-labels", "--out", tmp_path / "centered") == 0

    def rmse(d):
        header, row = (d / "metrics.csv").read_text().splitlines()
        return float(dict(zip(header.split(","), row.split(",")))["rmse"])

    # without an intercept the linear fit cannot reach a label mean of 50
    assert rmse(tmp_path / "centered") < 0.1 * rmse(tmp_path / "raw")
    model = load_model(tmp_path / "centered" / "model.bin")
    assert 45 < model.offset < 55
    assert run_cli("run", "--synthetic", "classification", "--task", "binary", "--center-labels",
                   "--out", tmp_path / "x") == 2


def test_relative_error_choice(tmp_path):
    common = ["run", "--synthetic", "regression", "--n", 300, "--centers", 20, "--no-timestamp"]
    run_cli(*common, "--out", tmp_path / "m")
    run_cli(*common, "--relative-error", "norm", "--out", tmp_path / "n")

    def values(d):
        header, row = (d / "metrics.csv").read_text().splitlines()
        return dict(zip(header.split(","), row.split(",")))

    a, b = values(tmp_path / "m"), values(tmp_path / "n")
    assert a["rmse"] == b["rmse"] and a["relative_error"] != b["relative_error"]
