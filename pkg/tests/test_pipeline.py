import hashlib
import subprocess
import sys

import numpy as np
import pytest

from flowfill import io as media_io
from flowfill.cli import main as cli_main
from flowfill.config import ConfigError, parse_kv_file
from flowfill.pipeline import (
    PipelineError,
    PipelineOptions,
    estimate_memory_mb,
    load_sequence,
    run_pipeline,
)
from flowfill.synthbench import SceneSpec, generate_scene, write_scene


def static_fixture(tmp_path, length=5, seed=11, positive=False):
    spec = SceneSpec(
        height=32,
        width=40,
        length=length,
        seed=seed,
        occluder="disk",
        occ_x=16,
        occ_y=16,
        occ_vx=6.0,
        occ_radius=4,
        wavelength_min=6.0,
        wavelength_max=12.0,
    )
    scene = generate_scene(spec)
    write_scene(scene, tmp_path / "in")
    if positive:
        # a second, static occluder region to preserve
        for i in range(length):
            pos = np.zeros((32, 40), dtype=np.uint8)
            pos[24:30, 4:12] = 1
            from flowfill.types import Mask

            media_io.write_mask(Mask(pos), tmp_path / "in" / "masks" / ("%05d_pos.png" % i))
    return scene


def options(tmp_path, out="out", **kw):
    defaults = dict(
        frames_dir=tmp_path / "in" / "frames",
        masks_dir=tmp_path / "in" / "masks",
        flows_dir=tmp_path / "in" / "flows",
        out_dir=tmp_path / out,
        reference_mode="fallback",
        figures=False,
    )
    defaults.update(kw)
    return PipelineOptions(**defaults)


def report_dict(path):
    out = {}
    for line in path.read_text().splitlines():
        key, value = line.split(" = ", 1)
        out[key] = value
    return out


def test_end_to_end_recovers_static_scene(tmp_path):
    scene = static_fixture(tmp_path)
    report = run_pipeline(options(tmp_path))
    assert sum(report.residual_final) == 0
    for i in range(5):
        out = media_io.read_frame(tmp_path / "out" / "frames" / ("%05d.png" % i))
        gt = media_io.read_frame(tmp_path / "in" / "gt" / ("%05d.png" % i))
        assert np.array_equal(out.data, gt.data)


def test_hole_free_input_is_identity(tmp_path):
    spec = SceneSpec(height=24, width=24, length=3, seed=2, occluder="none")
    scene = generate_scene(spec)
    write_scene(scene, tmp_path / "in")
    report = run_pipeline(options(tmp_path))
    assert sum(report.filled) == 0
    assert sum(report.invalid) == 0
    rep = report_dict(tmp_path / "out" / "report.txt")
    assert rep["total_filled"] == "0"
    for i in range(3):
        src = media_io.read_frame(tmp_path / "in" / "frames" / ("%05d.png" % i))
        out = media_io.read_frame(tmp_path / "out" / "frames" / ("%05d.png" % i))
        assert np.array_equal(src.data, out.data)


def test_positive_mask_region_bit_identical(tmp_path):
    static_fixture(tmp_path, positive=True)
    run_pipeline(options(tmp_path, positive_masks=True))
    for i in range(5):
        src = media_io.read_frame(tmp_path / "in" / "frames" / ("%05d.png" % i))
        out = media_io.read_frame(tmp_path / "out" / "frames" / ("%05d.png" % i))
        assert np.array_equal(out.data[24:30, 4:12], src.data[24:30, 4:12])


def test_determinism_across_thread_counts(tmp_path):
    static_fixture(tmp_path)

    def digest(out):
        run_pipeline(options(tmp_path, out=out, threads=int(out[-1])))
        h = hashlib.sha256()
        for p in sorted((tmp_path / out / "frames").iterdir()):
            h.update(p.read_bytes())
        h.update((tmp_path / out / "report.txt").read_bytes())
        return h.hexdigest()

    assert digest("out1") == digest("out4") == digest("out8")


def test_missing_inputs_name_the_file(tmp_path):
    static_fixture(tmp_path)
    (tmp_path / "in" / "flows" / "fwd_00001.flo").unlink()
    with pytest.raises(PipelineError, match="fwd_00001.flo"):
        run_pipeline(options(tmp_path))


def test_missing_mask_named(tmp_path):
    static_fixture(tmp_path)
    (tmp_path / "in" / "masks" / "00002.png").unlink()
    with pytest.raises(PipelineError, match="00002"):
        load_sequence(options(tmp_path))


def test_frame_index_gap_detected(tmp_path):
    static_fixture(tmp_path)
    (tmp_path / "in" / "frames" / "00001.png").unlink()
    with pytest.raises(PipelineError, match="00001"):
        load_sequence(options(tmp_path))


def test_memory_budget_enforced(tmp_path):
    static_fixture(tmp_path)
    with pytest.raises(PipelineError, match="budget"):
        run_pipeline(options(tmp_path, memory_budget_mb=0))
    # the model scales with the raster volume
    assert estimate_memory_mb(1200, 2160, 10) > estimate_memory_mb(240, 432, 10)


def test_report_structure_and_timings_split(tmp_path):
    static_fixture(tmp_path)
    run_pipeline(options(tmp_path))
    rep = report_dict(tmp_path / "out" / "report.txt")
    assert rep["schema"] == "flowfill-report-v1"
    assert rep["stage_order"].startswith("validate,dilate,merge_positive,flow_complete")
    assert "frame_00000_filled" in rep
    assert not any(k.endswith("_s") for k in rep)  # timings live elsewhere
    timing = (tmp_path / "out" / "timings.txt").read_text()
    assert "stage_collect_s = " in timing and "peak_rss_mb = " in timing


def test_dilate_radius_grows_working_mask(tmp_path):
    static_fixture(tmp_path)
    r0 = run_pipeline(options(tmp_path, out="o0"))
    r2 = run_pipeline(options(tmp_path, out="o2", dilate_radius=2))
    assert sum(r2.filled) > sum(r0.filled)


def test_provenance_dump(tmp_path):
    static_fixture(tmp_path)
    run_pipeline(options(tmp_path, provenance=True))
    lines = (tmp_path / "out" / "provenance.tsv").read_text().splitlines()
    assert lines[0].split("\t") == [
        "frame",
        "y",
        "x",
        "direction",
        "source_frame",
        "source_x",
        "source_y",
    ]
    assert len(lines) > 1


def test_reference_file_mode_requests_key_frame(tmp_path):
    # a hole no internal source can fill, no reference file on disk:
    # the report must name the requested key frame
    from flowfill.types import Mask

    spec = SceneSpec(height=24, width=24, length=3, seed=4, occluder="none")
    scene = generate_scene(spec)
    write_scene(scene, tmp_path / "in")
    hole = np.zeros((24, 24), dtype=np.uint8)
    hole[8:14, 8:14] = 1
    for i in range(3):
        media_io.write_mask(Mask(hole), tmp_path / "in" / "masks" / ("%05d.png" % i))
    report = run_pipeline(options(tmp_path, reference_mode="file"))
    assert len(report.key_rounds) == 1
    assert report.key_rounds[0].aborted
    rep = report_dict(tmp_path / "out" / "report.txt")
    assert "key_frame_0" in rep
    assert sum(report.residual_final) > 0  # left for per-frame completion


def test_reference_file_mode_uses_supplied_image(tmp_path, rng):
    from flowfill.types import Mask

    spec = SceneSpec(height=24, width=24, length=3, seed=4, occluder="none")
    scene = generate_scene(spec)
    write_scene(scene, tmp_path / "in")
    hole = np.zeros((24, 24), dtype=np.uint8)
    hole[8:14, 8:14] = 1
    for i in range(3):
        media_io.write_mask(Mask(hole), tmp_path / "in" / "masks" / ("%05d.png" % i))
    ref_dir = tmp_path / "refs"
    ref_dir.mkdir()
    from conftest import random_image

    ref = random_image(24, 24, rng)
    for i in range(3):
        media_io.write_frame(ref, ref_dir / ("%05d.png" % i))
    report = run_pipeline(
        options(tmp_path, reference_mode="file", reference_dir=ref_dir)
    )
    assert report.key_rounds and not report.key_rounds[0].aborted
    k = report.key_rounds[0].key_frame
    out = media_io.read_frame(tmp_path / "out" / "frames" / ("%05d.png" % k))
    # compare against the reference as stored on disk (8-bit codes)
    ref_codes = media_io.read_frame(ref_dir / ("%05d.png" % k))
    assert np.array_equal(out.data[8:14, 8:14], ref_codes.data[8:14, 8:14])


# --- config and CLI ----------------------------------------------------


def test_config_parsing(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("a = 1\n# comment\nb = two  # trailing\nrepeat = x\nrepeat = y\n")
    values = parse_kv_file(cfg)
    assert values == {"a": "1", "b": "two", "repeat": ["x", "y"]}


def test_config_rejects_malformed_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no equals sign here\n")
    with pytest.raises(ConfigError):
        parse_kv_file(cfg)


def test_cli_inpaint_with_config_and_flag_override(tmp_path, monkeypatch):
    static_fixture(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("reference_mode = fallback\ndilate_radius = 5\nthreads = 1\n")
    code = cli_main(
        [
            "inpaint",
            "--frames", str(tmp_path / "in" / "frames"),
            "--masks", str(tmp_path / "in" / "masks"),
            "--flows", str(tmp_path / "in" / "flows"),
            "--out", str(tmp_path / "cli_out"),
            "--config", str(cfg),
            "--dilate-radius", "0",  # flag wins over the file's 5
            "--no-figures",
        ]
    )
    assert code == 0
    rep = report_dict(tmp_path / "cli_out" / "report.txt")
    assert rep["dilate_radius"] == "0"
    assert rep["reference_mode"] == "fallback"


def test_cli_env_var_thread_override(tmp_path, monkeypatch):
    static_fixture(tmp_path)
    monkeypatch.setenv("FLOWFILL_THREADS", "2")
    code = cli_main(
        [
            "inpaint",
            "--frames", str(tmp_path / "in" / "frames"),
            "--masks", str(tmp_path / "in" / "masks"),
            "--flows", str(tmp_path / "in" / "flows"),
            "--out", str(tmp_path / "env_out"),
            "--reference-mode", "fallback",
            "--no-figures",
        ]
    )
    assert code == 0


def test_cli_synth_and_flowcheck(tmp_path):
    spec = tmp_path / "scene.cfg"
    spec.write_text(
        "height = 24\nwidth = 28\nlength = 4\nseed = 3\n"
        "occluder = disk\nocc_x = 12\nocc_y = 12\nocc_vx = 5\nocc_radius = 3\n"
    )
    assert cli_main(["synth", "--spec", str(spec), "--out", str(tmp_path / "fx")]) == 0
    assert (tmp_path / "fx" / "frames" / "00003.png").is_file()
    assert (tmp_path / "fx" / "flows" / "bwd_00002.flo").is_file()
    assert (
        cli_main(
            [
                "flowcheck",
                "--spec", str(spec),
                "--out", str(tmp_path / "fc"),
                "--no-figures",
            ]
        )
        == 0
    )
    table = (tmp_path / "fc" / "flowcheck.tsv").read_text().splitlines()
    assert table[0].startswith("scene\ttarget\tsource")
    assert len(table) == 3


def test_cli_bench_writes_table_and_figures(tmp_path):
    spec = tmp_path / "scene.cfg"
    spec.write_text(
        "height = 24\nwidth = 28\nlength = 4\nseed = 3\n"
        "occluder = disk\nocc_x = 12\nocc_y = 12\nocc_vx = 5\nocc_radius = 3\n"
    )
    suite = tmp_path / "suite.cfg"
    suite.write_text(f"scene = {spec}\n")
    assert cli_main(["bench", "--suite", str(suite), "--out", str(tmp_path / "b")]) == 0
    table = (tmp_path / "b" / "bench_results.tsv").read_text().splitlines()
    assert table[0].startswith("scene\tinternal\treference")
    assert len(table) == 6  # 5 strategy rows
    assert (tmp_path / "b" / "bench_psnr.png").is_file()
    assert (tmp_path / "b" / "bench_ssim.png").is_file()


def test_cli_module_entry_point(tmp_path):
    spec = tmp_path / "scene.cfg"
    spec.write_text("height = 16\nwidth = 16\nlength = 2\nocc_x = 8\nocc_y = 8\nocc_radius = 2\n")
    proc = subprocess.run(
        [sys.executable, "-m", "flowfill", "synth", "--spec", str(spec), "--out", str(tmp_path / "fx")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "fx" / "frames" / "00001.png").is_file()


def test_figures_rendered_when_enabled(tmp_path):
    static_fixture(tmp_path)
    run_pipeline(options(tmp_path, figures=True))
    assert (tmp_path / "out" / "report_fill_counts.png").is_file()


def test_single_frame_sequence_short_circuits(tmp_path):
    # one frame, no flow files: the hole is resolved frame-locally
    spec = SceneSpec(height=24, width=24, length=1, seed=6, occluder="disk", occ_x=12, occ_y=12, occ_radius=4)
    write_scene(generate_scene(spec), tmp_path / "in", write_gt=False)
    report = run_pipeline(options(tmp_path))
    assert report.frames == 1
    assert sum(report.residual_final) == 0
    out = media_io.read_frame(tmp_path / "out" / "frames" / "00000.png")
    assert out.data.shape == (24, 24, 3)


def test_full_frame_mask_flagged_in_report(tmp_path):
    from flowfill.types import Mask

    spec = SceneSpec(height=16, width=16, length=2, seed=6, occluder="none")
    write_scene(generate_scene(spec), tmp_path / "in", write_gt=False)
    for i in range(2):
        media_io.write_mask(
            Mask(np.ones((16, 16), dtype=np.uint8)),
            tmp_path / "in" / "masks" / ("%05d.png" % i),
        )
    report = run_pipeline(options(tmp_path, reference_mode="file"))
    assert report.full_frame_flow_fallbacks == ["0", "1"]
    assert report.full_frame_fill_fallbacks == [0, 1]
    rep = report_dict(tmp_path / "out" / "report.txt")
    assert rep["full_frame_flow_fallbacks"] == "0,1"
    # mid-gray fallback fills the whole frame
    out = media_io.read_frame(tmp_path / "out" / "frames" / "00000.png")
    assert np.all(out.data == np.float32(128 / 255))
