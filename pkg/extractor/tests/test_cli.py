"""Command-line behavior: messages, artifacts, and exit codes."""
import pytest

from conftest import build_image_dir
from deepextract import __version__, read_fmx
from deepextract.cli import main


def _extract_args(manifest, out, *extra):
    return [
        "extract",
        "--model",
        "mobilenetv2",
        "--no-fetch",
        "--input-size",
        "64",
        "--batch-size",
        "8",
        "--images",
        str(manifest),
        "--out",
        str(out),
        *extra,
    ]


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_usage_errors_exit_with_config_code():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main(["extract", "--model", "alexnet"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main(["extract", "--mode", "XY"])
    assert err.value.code == 1


def test_extract_writes_fmx_and_reports(manifest_path, tmp_path, capsys):
    out = tmp_path / "features.fmx"
    assert main(_extract_args(manifest_path, out)) == 0
    message = capsys.readouterr().out
    assert "extracted 20 rows x 1280 columns" in message
    assert "mobilenetv2, BN, seeded-init:" in message
    matrix, ids, labels, _ = read_fmx(out)
    assert matrix.shape == (20, 1280)
    assert len(ids) == 20 and labels is not None


def test_unknown_model_exits_1(manifest_path, tmp_path, capsys):
    rc = main(
        [
            "extract",
            "--model",
            "lenet",
            "--no-fetch",
            "--images",
            str(manifest_path),
            "--out",
            str(tmp_path / "o.fmx"),
        ]
    )
    assert rc == 1
    assert "deepextract: unknown model" in capsys.readouterr().err


def test_missing_manifest_exits_4(tmp_path, capsys):
    rc = main(_extract_args(tmp_path / "absent.csv", tmp_path / "o.fmx"))
    assert rc == 4
    assert "deepextract:" in capsys.readouterr().err


def test_undecodable_image_exits_2(tmp_path, capsys):
    manifest = build_image_dir(tmp_path / "imgs")
    (tmp_path / "imgs" / "img009.png").write_text("junk")
    rc = main(_extract_args(manifest, tmp_path / "o.fmx"))
    assert rc == 2
    assert "img009.png" in capsys.readouterr().err


def test_ft_without_labels_exits_1(tmp_path, capsys):
    manifest = build_image_dir(tmp_path / "imgs", with_labels=False)
    rc = main(_extract_args(manifest, tmp_path / "o.fmx", "--mode", "FT"))
    assert rc == 1
    assert "label" in capsys.readouterr().err


def test_single_class_ft_exits_3(tmp_path, capsys):
    manifest = build_image_dir(tmp_path / "imgs")
    lines = manifest.read_text().strip().splitlines()
    flat = [lines[0]] + [line.rsplit(",", 1)[0] + ",only" for line in lines[1:]]
    manifest.write_text("\n".join(flat) + "\n")
    rc = main(
        _extract_args(manifest, tmp_path / "o.fmx", "--mode", "FT", "--epochs", "1")
    )
    assert rc == 3
    assert "classes" in capsys.readouterr().err
