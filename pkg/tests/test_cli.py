import json

import numpy as np
import pytest
from click.testing import CliRunner

from segstress.cli import main
from segstress.synthgen import SynthConfig, generate_dataset
from segstress.tensorfile import load_tensor, save_tensor
from conftest import random_cell_mask


@pytest.fixture()
def runner():
    return CliRunner()


def test_synth_command(runner, tmp_path):
    result = runner.invoke(
        main,
        ["synth", "--out", str(tmp_path / "ds"), "--n-images", "2", "--width", "32",
         "--height", "32", "--n-cells", "4", "--seed", "3"],
    )
    assert result.exit_code == 0, result.output
    assert "wrote 2 images" in result.output
    assert (tmp_path / "ds" / "manifest.json").exists()


def test_corrupt_command_spec_flags(runner, tmp_path, rng):
    mask = random_cell_mask(rng, 30, 30, 8)
    save_tensor(tmp_path / "mask.sgt", mask.labels)
    result = runner.invoke(
        main,
        ["corrupt", "--in", str(tmp_path / "mask.sgt"), "--out",
         str(tmp_path / "mask_c.sgt"), "--missing", "0.5", "--kmax", "5",
         "--seed", "42", "--connectivity", "8"],
    )
    assert result.exit_code == 0, result.output
    out = load_tensor(tmp_path / "mask_c.sgt")
    assert out.dtype == np.uint32
    survivors = len(set(np.unique(out)) - {0})
    assert survivors <= mask.num_cells - round(0.5 * mask.num_cells)


def test_evaluate_command(runner, tmp_path, rng):
    pred = tmp_path / "pred"
    gt = tmp_path / "gt"
    pred.mkdir()
    gt.mkdir()
    bits = (rng.random((8, 8)) < 0.5).astype(np.uint8)
    save_tensor(gt / "a.sgt", bits.astype(np.uint32))
    save_tensor(pred / "a.sgt", bits.astype(np.float32))
    result = runner.invoke(
        main,
        ["evaluate", "--pred", str(pred), "--gt", str(gt), "--out",
         str(tmp_path / "metrics.csv")],
    )
    assert result.exit_code == 0, result.output
    assert "dsc=1.000" in result.output
    assert (tmp_path / "metrics.csv").exists()


def test_sweep_and_report_commands(runner, tmp_path):
    ds = generate_dataset(
        tmp_path / "ds", 8,
        SynthConfig(width=32, height=32, n_cells=5, noise_sigma=0.1, seed=5),
        name="cli",
    )
    config = {
        "datasets": [{"name": "cli", "manifest": str(ds)}],
        "sweep_fractions": [0.0, 0.5],
        "segmenter": {"cmd": ["segstress-stub", "oracle", "--dataset", str(ds)]},
        "patch_size": 32,
        "seed": 2,
    }
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps(config))
    result = runner.invoke(
        main,
        ["sweep-mc", "--config", str(cfg_path), "--out", str(tmp_path / "out"),
         "--poll-interval", "0.2"],
    )
    assert result.exit_code == 0, result.output
    assert "dsc=1.000" in result.output
    assert (tmp_path / "out" / "summary.json").exists()

    report = runner.invoke(
        main, ["report", "--results", str(tmp_path / "out"), "--out", str(tmp_path / "figs")]
    )
    assert report.exit_code == 0, report.output
    assert (tmp_path / "figs" / "sweep-mc_boxplot.svg").exists()


def test_validate_segmenter_command(runner, tmp_path):
    result = runner.invoke(
        main,
        ["validate-segmenter", "--cmd", "segstress-baseline", "--workdir",
         str(tmp_path / "v"), "--n-patches", "4", "--channels", "6",
         "--patch-size", "32", "--epochs", "1"],
    )
    assert result.exit_code == 0, result.output
    assert '"ok": true' in result.output


def test_cli_surfaces_api_errors(runner, tmp_path):
    result = runner.invoke(
        main,
        ["report", "--results", str(tmp_path), "--out", str(tmp_path / "f")],
    )
    assert result.exit_code != 0


def test_jobs_listing(runner, tmp_path):
    # in-process client: a fresh app has no jobs
    result = runner.invoke(main, ["jobs"])
    assert result.exit_code == 0, result.output


def test_help_names_spec_commands(runner):
    result = runner.invoke(main, ["--help"])
    for cmd in ("corrupt", "evaluate", "synth", "sweep-mc", "sweep-uo", "transfer",
                "bootstrap", "report", "serve"):
        assert cmd in result.output
