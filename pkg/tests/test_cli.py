"""Command-line interface, exercised in-process through main()."""

import json

import pytest

from denoisebench.cli import main
from denoisebench.image import load_png, png_bit_depth, save_png

from conftest import rand_image


def run_cli(capsys, *argv):
    rc = main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


# --- eval ---------------------------------------------------------------------

def test_eval_json_to_stdout(make_corpus, capsys):
    corpus = make_corpus(3, width=32, height=24)
    rc, out, err = run_cli(capsys, "eval", "--clean", str(corpus), "--sigma", "50")
    assert rc == 0, err
    payload = json.loads(out)
    assert payload["schema"] == "denoisebench/report/v1"
    assert [s["variant"] for s in payload["summaries"]] == ["direct-1pass"]
    assert payload["summaries"][0]["n_images"] == 3
    assert payload["failures"] == []


def test_eval_out_file(make_corpus, capsys, tmp_path):
    corpus = make_corpus(2, width=24, height=24)
    out_path = tmp_path / "report.json"
    rc, out, _ = run_cli(capsys, "eval", "--clean", str(corpus),
                         "--out", str(out_path))
    assert rc == 0
    assert out == ""
    payload = json.loads(out_path.read_text())
    assert payload["summaries"][0]["n_images"] == 2


def test_eval_partial_failure_exit_2(make_corpus, capsys):
    corpus = make_corpus(2, width=24, height=24)
    (corpus / "zzz.png").write_bytes(b"\x89PNG\r\n\x1a\nbroken")
    rc, out, _ = run_cli(capsys, "eval", "--clean", str(corpus))
    assert rc == 2
    payload = json.loads(out)
    assert [f["image_id"] for f in payload["failures"]] == ["zzz"]
    assert payload["summaries"][0]["n_images"] == 2


def test_eval_missing_dir_exit_1(tmp_path, capsys):
    rc, _, err = run_cli(capsys, "eval", "--clean", str(tmp_path / "nope"))
    assert rc == 1
    assert "error:" in err


def test_eval_requires_clean(capsys):
    rc, _, err = run_cli(capsys, "eval", "--sigma", "50")
    assert rc == 1
    assert "--clean is required" in err


def test_eval_gaussian_backend(make_corpus, capsys):
    corpus = make_corpus(2, width=24, height=24)
    rc, out, _ = run_cli(capsys, "eval", "--clean", str(corpus),
                         "--backend", "gaussian:sigma=1.2")
    assert rc == 0
    meta = json.loads(out)["meta"]
    assert meta["backend"] == "gaussian_blur:sigma=1.2,truncate=3.0"


def test_eval_unknown_backend_exit_1(make_corpus, capsys):
    corpus = make_corpus(1, width=24, height=24)
    rc, _, err = run_cli(capsys, "eval", "--clean", str(corpus),
                         "--backend", "wavelet")
    assert rc == 1
    assert "error:" in err


def test_eval_bad_tile_window_exit_1(make_corpus, capsys):
    corpus = make_corpus(1, width=24, height=24)
    rc, _, err = run_cli(capsys, "eval", "--clean", str(corpus),
                         "--tile-window", "100")
    assert rc == 1
    assert "multiple of 8" in err


def test_eval_tiled_variant_name(make_corpus, capsys):
    corpus = make_corpus(1, width=32, height=32)
    rc, out, _ = run_cli(capsys, "eval", "--clean", str(corpus),
                         "--tile-window", "32", "--ensemble", "flips4")
    assert rc == 0
    payload = json.loads(out)
    assert payload["summaries"][0]["variant"] == "wrapped-x4"


def test_eval_canonical_json_deterministic_across_workers(make_corpus, capsys):
    corpus = make_corpus(4, width=32, height=24)
    rc1, out1, _ = run_cli(capsys, "eval", "--clean", str(corpus),
                           "--format", "canonical-json", "--workers", "1")
    rc2, out2, _ = run_cli(capsys, "eval", "--clean", str(corpus),
                           "--format", "canonical-json", "--workers", "2")
    assert rc1 == rc2 == 0
    assert out1 == out2


def test_eval_markdown_and_csv_formats(make_corpus, capsys):
    corpus = make_corpus(2, width=24, height=24)
    rc, out, _ = run_cli(capsys, "eval", "--clean", str(corpus),
                         "--format", "markdown")
    assert rc == 0 and out.startswith("# Evaluation report")
    rc, out, _ = run_cli(capsys, "eval", "--clean", str(corpus),
                         "--format", "csv")
    assert rc == 0 and out.splitlines()[0].startswith("image_id,variant,psnr_db")


# --- config file -------------------------------------------------------------------

def test_config_file_defaults_and_cli_override(make_corpus, capsys, tmp_path):
    corpus = make_corpus(2, width=24, height=24)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults for the nightly run\n"
                   f"clean = {corpus}\n"
                   "sigma = 25\n"
                   "seed = 3\n")
    rc, out, _ = run_cli(capsys, "eval", "--config", str(cfg), "--sigma", "50")
    assert rc == 0
    meta = json.loads(out)["meta"]
    # command line wins over config file; config fills the rest
    assert meta["sigma_8bit"] == "50.0"
    assert meta["seed"] == "3"


def test_config_file_alone_supplies_clean(make_corpus, capsys, tmp_path):
    corpus = make_corpus(1, width=24, height=24)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"clean = {corpus}\nformat = markdown\n")
    rc, out, _ = run_cli(capsys, "eval", "--config", str(cfg))
    assert rc == 0
    assert out.startswith("# Evaluation report")


def test_config_file_unknown_key(make_corpus, capsys, tmp_path):
    corpus = make_corpus(1, width=24, height=24)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("sigm = 25\n")
    rc, _, err = run_cli(capsys, "eval", "--config", str(cfg),
                         "--clean", str(corpus))
    assert rc == 1
    assert "unknown config key" in err


# --- ablate -----------------------------------------------------------------------

def test_ablate_identity_matrix(make_corpus, capsys):
    corpus = make_corpus(2, width=32, height=32)
    rc, out, _ = run_cli(capsys, "ablate", "--clean", str(corpus),
                         "--tile-window", "32")
    assert rc == 0
    payload = json.loads(out)
    assert [s["variant"] for s in payload["summaries"]] == [
        "direct-1pass", "direct-x8", "wrapped-1pass", "wrapped-x8"]
    assert [d["name"] for d in payload["deltas"]] == [
        "ensemble (x8) @ direct", "ensemble (x8) @ wrapped",
        "wrapper @ 1pass", "wrapper @ x8"]
    for d in payload["deltas"]:
        assert d["psnr_delta_db_display"] == "0.0000"


# --- compare ------------------------------------------------------------------------

def write_report(capsys, corpus, path, *extra):
    rc, out, err = run_cli(capsys, "eval", "--clean", str(corpus),
                           "--out", str(path), *extra)
    assert rc == 0, err


def test_compare_runs(make_corpus, capsys, tmp_path):
    corpus = make_corpus(2, width=24, height=24)
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    write_report(capsys, corpus, a)
    write_report(capsys, corpus, b, "--backend", "gaussian:sigma=1.0")
    rc, out, _ = run_cli(capsys, "compare", str(a), str(b),
                         "--label-a", "identity", "--label-b", "blur")
    assert rc == 0
    assert out.startswith("| variant | PSNR identity | PSNR blur |")
    assert "direct-1pass" in out


def test_compare_self_is_zero(make_corpus, capsys, tmp_path):
    corpus = make_corpus(2, width=24, height=24)
    a = tmp_path / "a.json"
    write_report(capsys, corpus, a)
    rc, out, _ = run_cli(capsys, "compare", str(a), str(a), "--format", "json")
    assert rc == 0
    payload = json.loads(out)
    assert all(v["psnr_delta_db"] == 0.0 for v in payload["variants"])


def test_compare_variant_mismatch_exit_1(make_corpus, capsys, tmp_path):
    corpus = make_corpus(1, width=32, height=32)
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    write_report(capsys, corpus, a)
    write_report(capsys, corpus, b, "--tile-window", "32")
    rc, _, err = run_cli(capsys, "compare", str(a), str(b))
    assert rc == 1
    assert "variant sets differ" in err


def test_compare_missing_file_exit_1(capsys, tmp_path):
    rc, _, err = run_cli(capsys, "compare", str(tmp_path / "a.json"),
                         str(tmp_path / "b.json"))
    assert rc == 1
    assert "error:" in err


# --- noise ----------------------------------------------------------------------------

def test_noise_export_then_paired_eval(make_corpus, capsys, tmp_path):
    corpus = make_corpus(2, width=24, height=24)
    noisy_dir = tmp_path / "noisy"
    rc, _, err = run_cli(capsys, "noise", "--clean", str(corpus),
                         "--out-dir", str(noisy_dir), "--clip-noise")
    assert rc == 0, err
    assert sorted(p.name for p in noisy_dir.iterdir()) == [
        "img000.png", "img001.png"]
    rc, out, _ = run_cli(capsys, "eval", "--clean", str(corpus),
                         "--noisy", str(noisy_dir))
    assert rc == 0
    payload = json.loads(out)
    assert payload["meta"]["noise_mode"] == "paired"
    assert payload["summaries"][0]["n_images"] == 2


def test_noise_export_16bit(make_corpus, capsys, tmp_path):
    corpus = make_corpus(1, width=24, height=24)
    noisy_dir = tmp_path / "noisy16"
    rc, _, _ = run_cli(capsys, "noise", "--clean", str(corpus),
                       "--out-dir", str(noisy_dir), "--depth", "16")
    assert rc == 0
    assert png_bit_depth(noisy_dir / "img000.png") == 16


def test_noise_empty_dir_exit_1(capsys, tmp_path):
    src = tmp_path / "empty"
    src.mkdir()
    rc, _, err = run_cli(capsys, "noise", "--clean", str(src),
                         "--out-dir", str(tmp_path / "out"))
    assert rc == 1
    assert "error:" in err


# --- prep-subimages / sample-patches ------------------------------------------------------

def test_prep_subimages_cli(capsys, tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    save_png(rand_image(0, 700, 300), src / "wide.png")
    dst = tmp_path / "dst"
    rc, out, _ = run_cli(capsys, "prep-subimages", "--src", str(src),
                         "--dst", str(dst), "--target", "512", "--min-side", "96")
    assert rc == 0
    summary = json.loads(out)
    assert summary == {"type": "summary", "sources": 1, "tiles": 2,
                       "errors": 0, "discarded": 0}
    assert (dst / "manifest.jsonl").exists()
    assert load_png(dst / "wide_r0c0.png").width == 350


def test_prep_subimages_error_exit_2(capsys, tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    save_png(rand_image(1, 300, 300), src / "ok.png")
    (src / "bad.png").write_bytes(b"nope")
    rc, out, _ = run_cli(capsys, "prep-subimages", "--src", str(src),
                         "--dst", str(tmp_path / "dst"), "--target", "512",
                         "--min-side", "64")
    assert rc == 2
    assert json.loads(out)["errors"] == 1


def test_sample_patches_cli(capsys, tmp_path):
    manifest = tmp_path / "manifest.jsonl"
    rows = [{"type": "tile", "out": f"t{i}.png", "source": f"t{i}.png",
             "width": 1024, "height": 900, "depth": 8,
             "rect": [0, 0, 1024, 900]} for i in range(3)]
    manifest.write_text("".join(json.dumps(r) + "\n" for r in rows))
    out1 = tmp_path / "plan1.jsonl"
    out2 = tmp_path / "plan2.jsonl"
    for out in (out1, out2):
        rc, _, err = run_cli(capsys, "sample-patches", "--manifest", str(manifest),
                             "--stage", "I", "--seed", "5", "--n", "9",
                             "--out", str(out))
        assert rc == 0, err
    assert out1.read_bytes() == out2.read_bytes()
    plan = [json.loads(line) for line in out1.read_text().splitlines()]
    assert len(plan) == 9
    assert [p["patch_size"] for p in plan] == [256, 256, 256, 448, 448, 448,
                                               768, 768, 768]
    for p in plan:
        assert p["tile"] in {"t0.png", "t1.png", "t2.png"}


def test_sample_patches_stage2_too_small(capsys, tmp_path):
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text(json.dumps({"type": "tile", "out": "s.png",
                                    "source": "s.png", "width": 512,
                                    "height": 512, "depth": 8,
                                    "rect": [0, 0, 512, 512]}) + "\n")
    rc, _, err = run_cli(capsys, "sample-patches", "--manifest", str(manifest),
                         "--stage", "II", "--n", "4")
    assert rc == 1
    assert "cannot sample stage II" in err


def test_unknown_subcommand_raises_system_exit(capsys):
    with pytest.raises(SystemExit):
        main(["frobnicate"])
