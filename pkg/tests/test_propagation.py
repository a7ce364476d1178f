import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowfill.flow_complete import complete_sequence_flows
from flowfill.propagation import (
    chain_step,
    collect_bidirectional,
    collect_bidirectional_with_provenance,
    collect_frame,
    identity_map,
    verify_pair,
)
from flowfill.types import FlowField, Sequence, ValidationError
from flowfill.warp import bilinear_sample

import oracles
from conftest import (
    box_mask,
    const_flow,
    empty_mask,
    random_image,
    solid_image,
    static_sequence,
    zero_flow,
)


# --- chaining ---------------------------------------------------------


def test_identity_map_is_zero_and_valid():
    base = identity_map(2, 4, 5)
    assert np.all(base.flow.data == 0.0)
    assert base.flow.valid.all()
    assert base.target == base.source == 2


def test_chain_of_constant_translations():
    base = identity_map(0, 6, 8)
    step1 = chain_step(base, const_flow(6, 8, 2.0, 0.0), 1)
    step2 = chain_step(step1, const_flow(6, 8, 3.0, 0.0), 2)
    sel = step2.flow.valid.astype(bool)
    assert sel.any()
    assert np.allclose(step2.flow.data[sel][:, 0], 5.0)
    assert np.allclose(step2.flow.data[sel][:, 1], 0.0)


def test_chain_direction_must_stay_consistent():
    base = identity_map(1, 4, 4)
    fwd = chain_step(base, zero_flow(4, 4), 2)
    with pytest.raises(ValidationError):
        chain_step(fwd, zero_flow(4, 4), 1)  # turning back toward the target
    with pytest.raises(ValidationError):
        chain_step(base, zero_flow(4, 4), 3)  # skipping a frame


def test_chain_matches_affine_composition():
    h, w = 24, 30
    a1 = np.array([[1.01, 0.002, 0.4], [-0.001, 0.99, -0.3]])
    a2 = np.array([[0.995, -0.003, -0.2], [0.002, 1.005, 0.5]])
    f1 = FlowField(oracles.affine_flow(h, w, a1).astype(np.float32))
    f2 = FlowField(oracles.affine_flow(h, w, a2).astype(np.float32))
    chained = chain_step(chain_step(identity_map(0, h, w), f1, 1), f2, 2)
    expect = oracles.affine_flow(h, w, oracles.affine_compose(a1, a2))
    sel = chained.flow.valid.astype(bool)
    assert sel.mean() > 0.8
    assert np.abs(chained.flow.data[sel] - expect[sel]).max() < 1e-3


def test_chain_invalidates_pixels_leaving_the_frame():
    base = identity_map(0, 4, 6)
    step = chain_step(base, const_flow(4, 6, 4.0, 0.0), 1)
    step = chain_step(step, const_flow(4, 6, 0.0, 0.0), 2)
    assert not step.flow.valid[:, 3:].any()  # walked off the right edge
    assert step.flow.valid[:, 0].all()


# --- verification -----------------------------------------------------


def test_verify_agreement_averages():
    color, v = verify_pair(np.array([0.2, 0.4, 0.6]), np.array([0.2, 0.4, 0.6]))
    assert v == 0
    assert np.allclose(color, [0.2, 0.4, 0.6])


def test_verify_maximal_disagreement_flags():
    color, v = verify_pair(np.zeros(3), np.ones(3))
    assert color is None and v == 1


def test_verify_below_threshold_averages():
    color, v = verify_pair(np.zeros(3), np.full(3, 0.3))
    assert v == 0
    assert np.allclose(color, 0.15)


def test_verify_single_candidate_accepted():
    color, v = verify_pair(np.array([0.1, 0.2, 0.3]), None)
    assert v == 0 and np.allclose(color, [0.1, 0.2, 0.3])
    color, v = verify_pair(None, np.array([0.9, 0.8, 0.7]))
    assert v == 0 and np.allclose(color, [0.9, 0.8, 0.7])


def test_verify_neither_stays_missing():
    color, v = verify_pair(None, None)
    assert color is None and v == 0


def test_verify_threshold_must_be_positive():
    with pytest.raises(ValueError):
        verify_pair(np.zeros(3), np.zeros(3), threshold=0.0)


@settings(max_examples=60, deadline=None)
@given(
    st.one_of(st.none(), st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))),
    st.one_of(st.none(), st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))),
)
def test_verify_partition_property(cf, cb):
    f = np.asarray(cf) if cf is not None else None
    b = np.asarray(cb) if cb is not None else None
    color, v = verify_pair(f, b, threshold=1.0)
    outcomes = [color is not None and v == 0, color is None and v == 1, color is None and v == 0]
    assert sum(outcomes) == 1
    if v == 1:
        assert f is not None and b is not None and np.abs(f - b).sum() > 1.0


# --- bi-directional collection ---------------------------------------


def make_static_scene(rng):
    """Static background, occluder hole in frame 1 only."""
    background = random_image(10, 12, rng)
    frames = [background, background, background]
    masks = [empty_mask(10, 12), box_mask(10, 12, 3, 7, 4, 8), empty_mask(10, 12)]
    return static_sequence(frames, masks), background


def test_zero_flow_hole_filled_exactly(rng):
    seq, background = make_static_scene(rng)
    state = collect_bidirectional(seq, complete_sequence_flows(seq))
    assert state.residual_total() == 0
    assert sum(m.count() for m in state.invalid) == 0
    assert np.array_equal(state.images[1].data, background.data)


def test_known_pixels_never_touched(rng):
    seq, _ = make_static_scene(rng)
    state = collect_bidirectional(seq, complete_sequence_flows(seq))
    for i in range(3):
        known = seq.masks[i].data == 0
        assert np.array_equal(state.images[i].data[known], seq.frames[i].data[known])
        assert not state.masks[i].data[known].any()


def test_one_sided_availability_accepted_without_flag(rng):
    # hole in the FIRST frame: only the forward pass can see sources
    background = random_image(8, 9, rng)
    frames = [background, background]
    masks = [box_mask(8, 9, 2, 6, 2, 6), empty_mask(8, 9)]
    seq = static_sequence(frames, masks)
    state = collect_bidirectional(seq, complete_sequence_flows(seq))
    assert state.residual_total() == 0
    assert sum(m.count() for m in state.invalid) == 0
    assert np.array_equal(state.images[0].data, background.data)


def test_unfillable_pixels_stay_masked(rng):
    # the hole is masked in every frame: nothing can fill it
    background = random_image(8, 8, rng)
    hole = box_mask(8, 8, 2, 5, 2, 5)
    seq = static_sequence([background] * 3, [hole] * 3)
    state = collect_bidirectional(seq, complete_sequence_flows(seq))
    for i in range(3):
        assert np.array_equal(state.masks[i].data, hole.data)
        assert state.invalid[i].count() == 0


def test_conflicting_directions_flagged_unreliable():
    # frame 0 black, frame 2 white: candidates differ by the full swing
    black = solid_image(6, 6, (0.0, 0.0, 0.0))
    white = solid_image(6, 6, (1.0, 1.0, 1.0))
    gray = solid_image(6, 6, (0.5, 0.5, 0.5))
    masks = [empty_mask(6, 6), box_mask(6, 6, 1, 5, 1, 5), empty_mask(6, 6)]
    seq = static_sequence([black, gray, white], masks)
    state = collect_bidirectional(seq, complete_sequence_flows(seq))
    hole = masks[1].data != 0
    assert np.array_equal(state.invalid[1].data != 0, hole)
    assert state.masks[1].count() == 0
    # the unreliable pixels keep the input content for later zeroing
    assert np.array_equal(state.images[1].data, gray.data)


def test_partition_of_hole_outcomes(rng):
    seq, _ = make_static_scene(rng)
    state = collect_bidirectional(seq, complete_sequence_flows(seq))
    hole = seq.masks[1].data != 0
    filled = hole & (state.masks[1].data == 0) & (state.invalid[1].data == 0)
    assert np.array_equal(
        filled | (state.masks[1].data != 0) | (state.invalid[1].data != 0), hole
    )


def test_nearest_source_wins(rng):
    # frames 1 and 3 could both fill frame 0's hole; provenance must
    # name frame 1 (the nearer one)
    bg = random_image(8, 8, rng)
    masks = [box_mask(8, 8, 2, 6, 2, 6)] + [empty_mask(8, 8)] * 3
    seq = static_sequence([bg] * 4, masks)
    state, prov = collect_bidirectional_with_provenance(
        seq, complete_sequence_flows(seq)
    )
    rows = list(prov[0].rows())
    assert rows
    assert all(src == 1 for (_, _, _, d, src, _, _) in rows if d == "f")


def test_one_shot_property_via_provenance(rng):
    # every filled color equals one bilinear sample of an original frame
    spec_frames = [random_image(12, 14, rng) for _ in range(4)]
    masks = [
        empty_mask(12, 14),
        box_mask(12, 14, 3, 9, 4, 10),
        box_mask(12, 14, 5, 8, 2, 6),
        empty_mask(12, 14),
    ]
    seq = Sequence(
        frames=tuple(spec_frames),
        masks=tuple(masks),
        fwd_flows=tuple(const_flow(12, 14, 0.3, -0.2) for _ in range(3)),
        bwd_flows=tuple(const_flow(12, 14, -0.3, 0.2) for _ in range(3)),
    )
    state, prov = collect_bidirectional_with_provenance(
        seq, complete_sequence_flows(seq)
    )
    for frame_prov, frame_state in zip(prov, state.images):
        if frame_prov is None:
            continue
        per_pixel: dict[tuple[int, int], list] = {}
        for _, y, x, d, src, sx, sy in frame_prov.rows():
            sample = bilinear_sample(
                seq.frames[src].data, sx, sy, known=seq.masks[src]
            )
            assert sample.valid == 1
            per_pixel.setdefault((y, x), []).append(sample.value)
        for (y, x), samples in per_pixel.items():
            expect = np.mean(samples, axis=0)
            assert np.abs(frame_state.data[y, x] - expect).max() < 1e-6


def test_chained_positions_match_trace_oracle(rng):
    # moderately wavy flows; filled provenance positions must agree
    # with the independent hop-by-hop trace
    from flowfill.synthbench import random_smooth_flow

    h, w, length = 16, 18, 6
    child = np.random.default_rng(7)
    fwd = tuple(random_smooth_flow(h, w, child, amplitude=0.8) for _ in range(length - 1))
    bwd = tuple(random_smooth_flow(h, w, child, amplitude=0.8) for _ in range(length - 1))
    frames = [random_image(h, w, rng) for _ in range(length)]
    masks = [empty_mask(h, w)] * 2 + [box_mask(h, w, 4, 12, 5, 13)] + [empty_mask(h, w)] * 3
    seq = Sequence(frames=tuple(frames), masks=tuple(masks), fwd_flows=fwd, bwd_flows=bwd)
    flows = complete_sequence_flows(seq)
    state, prov = collect_bidirectional_with_provenance(seq, flows)
    checked = 0
    for _, y, x, d, src, sx, sy in prov[2].rows():
        pos = oracles.trace_position(flows.fwd, flows.bwd, 2, src, float(x), float(y))
        assert pos is not None
        assert abs(pos[0] - sx) < 1e-3 and abs(pos[1] - sy) < 1e-3
        checked += 1
    assert checked > 0


def test_collect_frame_no_hole_returns_input(rng):
    seq, _ = make_static_scene(rng)
    img, rem, inv, _ = collect_frame(seq, complete_sequence_flows(seq), 0)
    assert np.array_equal(img.data, seq.frames[0].data)
    assert rem.count() == 0 and inv.count() == 0


def test_threaded_collection_matches_serial(rng):
    seq, _ = make_static_scene(rng)
    flows = complete_sequence_flows(seq)
    serial = collect_bidirectional(seq, flows, threads=1)
    pooled = collect_bidirectional(seq, flows, threads=4)
    for a, b in zip(serial.images, pooled.images):
        assert np.array_equal(a.data, b.data)
