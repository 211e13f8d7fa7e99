import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from talaseg.config import PipelineConfig
from talaseg.evaluation import evaluate_boundaries
from talaseg.features import grid_times
from talaseg.novelty import NoveltyCurve
from talaseg.pipeline import candidates, extract_features, segment
from talaseg.segmentation import (BoundaryCandidates, Segmentation, combo_average, fuse_majority,
                                  merge_segments, pick_peaks)
from talaseg.synthesis import (ConcertSpec, SectionSpec, generate_concert, pause_fixture,
                               speed_change_fixture)


def bumps(n, centres, heights, width=2.0):
    """Sum of Gaussian bumps on an n-frame grid (centres in frames)."""
    i = np.arange(n)
    v = np.zeros(n)
    for c, h in zip(centres, heights):
        v += h * np.exp(-0.5 * ((i - c) / width) ** 2)
    return v


# -- pick_peaks ------------------------------------------------------------------

def test_pick_zero_curve():
    assert len(pick_peaks(np.zeros(100))) == 0


def test_pick_respects_min_interval():
    v = bumps(200, [80, 92], [0.9, 0.8])  # 12 frames = 6 s apart
    c = pick_peaks(v, 0.1)
    assert len(c) == 1
    assert c.times[0] == pytest.approx(grid_times(200)[80])
    assert c.scores[0] == pytest.approx(0.9, abs=1e-3)


def test_pick_threshold():
    v = bumps(200, [50, 150], [0.9, 0.3])
    assert len(pick_peaks(v, 0.5)) == 1
    assert len(pick_peaks(v, 0.2)) == 2


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.9), st.floats(1.0, 30.0))
def test_picked_peaks_spaced(seed, thr, interval):
    v = np.random.default_rng(seed).random(300)
    c = pick_peaks(v, thr, interval)
    assert np.all(np.diff(c.times) >= interval - 1e-9)
    assert np.all(c.scores > thr)


@pytest.fixture(scope="module")
def three_section():
    spec = ConcertSpec(21, [SectionSpec("Pe", 90.0, 6.0, [1, 1, 2]),
                            SectionSpec("Ka", 90.0, 12.0, [1]),
                            SectionSpec("GTC", 90.0, 17.0, [2, 1, 1])])
    g = generate_concert(spec)
    return g, extract_features(g.audio)


@pytest.mark.parametrize("label", ["NF-R", "NF-P", "ASD-D", "NF-RF"])
def test_every_truth_boundary_has_a_peak(three_section, label):
    g, b = three_section
    c = pick_peaks(b.novelty.curve(label), 0.1)
    for t in g.truth.boundaries:
        assert np.min(np.abs(c.times - t)) <= 5.0


# -- Combo-1 -----------------------------------------------------------------------

def test_combo_identical_inputs():
    v = bumps(100, [30, 70], [1.0, 0.5])
    out = combo_average({"ASD-D": v, "NF-R": v, "NF-P": v})
    np.testing.assert_allclose(out.values, v / v.max())
    assert out.label == "Combo-1"


def test_combo_mean_bounds():
    rng = np.random.default_rng(0)
    curves = {k: rng.random(50) for k in ("ASD-D", "NF-R", "NF-P")}
    raw = np.mean(list(curves.values()), axis=0)
    out = combo_average(curves).values * raw.max()
    lo = np.min(list(curves.values()), axis=0)
    assert np.all(out >= lo - 1e-12)


def test_combo_deemphasizes_single_curve_peak():
    n = 200
    true = bumps(n, [60], [1.0])
    spur = bumps(n, [140], [1.0])
    out = combo_average({"ASD-D": true + spur, "NF-R": true, "NF-P": true}).values
    assert out[60] > out[140]


def test_combo_label_set():
    with pytest.raises(ValueError):
        combo_average({"ASD-D": np.zeros(5), "NF-RF": np.zeros(5), "NF-P": np.zeros(5)})


# -- Combo-2 -----------------------------------------------------------------------

def _cands(times, label=""):
    return BoundaryCandidates(np.asarray(times, float), np.ones(len(times)), label)


def test_fusion_votes():
    ref = _cands([100.0, 200.0])
    voters = {"ASD-D": _cands([98.0, 230.0]), "NF-RF": _cands([103.0]), "NF-R": _cands([101.0, 204.0])}
    seg = fuse_majority(voters, ref, 400.0)
    # 100 has 3/3 support; 200 has only NF-R within 5 s
    np.testing.assert_array_equal(seg.boundaries, [100.0])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(11, 489), max_size=12),
       st.lists(st.lists(st.floats(0, 500), max_size=12), min_size=3, max_size=3))
def test_fusion_output_subset_of_reference(ref_times, voter_times):
    ref = _cands(sorted(set(ref_times)))
    voters = {k: _cands(sorted(set(t))) for k, t in zip(("ASD-D", "NF-RF", "NF-R"), voter_times)}
    seg = fuse_majority(voters, ref, 500.0)
    assert set(seg.boundaries.tolist()) <= set(ref.times.tolist())


@pytest.fixture(scope="module")
def pause_suite():
    out = []
    for seed in range(4001, 4021):
        spec, _ = pause_fixture(seed)
        g = generate_concert(spec)
        out.append((g, extract_features(g.audio)))
    return out


def _pooled_precision(suite, method, merge):
    tp = fp = 0
    for g, b in suite:
        r = evaluate_boundaries(segment(b, PipelineConfig(method=method, merge=merge)).boundaries,
                                g.truth.boundaries)
        tp, fp = tp + r.tp, fp + r.fp
    return tp / (tp + fp)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="ASD-D and NF-RF both fire on a 2-4 s silence, so the "
                                       "majority vote keeps some pauses that the Combo-1 average drops")
def test_fusion_precision_on_pause_suite(pause_suite):
    assert _pooled_precision(pause_suite, "combo2", False) >= _pooled_precision(pause_suite, "combo1", False)


@pytest.mark.slow
def test_pipeline_precision_on_pause_suite(pause_suite):
    # with the merge step (the pipeline default) both reach the same precision
    assert _pooled_precision(pause_suite, "combo2", True) >= _pooled_precision(pause_suite, "combo1", True)


@pytest.mark.slow
def test_fusion_never_adds_to_reference(pause_suite):
    cfg = PipelineConfig(merge=False, lead_in=False)
    for _, b in pause_suite:
        ref = set(candidates(b, cfg, "NF-P").times.tolist())
        assert set(segment(b, cfg).boundaries.tolist()) <= ref


# -- merge -------------------------------------------------------------------------

def _post(classes, k=3):
    p = np.full((len(classes), k), 0.1 / (k - 1))
    p[np.arange(len(classes)), classes] = 0.9
    return p


def test_merge_close_density_same_class():
    asd = np.r_[np.full(40, 10.1), np.full(40, 9.0)]
    seg = merge_segments(Segmentation([grid_times(80)[40]], 44.0), asd, _post(np.zeros(80, int)))
    assert len(seg.boundaries) == 0


def test_merge_far_density_kept():
    asd = np.r_[np.full(40, 10.0), np.full(40, 14.0)]
    seg = merge_segments(Segmentation([grid_times(80)[40]], 44.0), asd, _post(np.zeros(80, int)))
    assert len(seg.boundaries) == 1


def test_merge_different_class_kept():
    asd = np.full(80, 10.0)
    cls = np.r_[np.zeros(40, int), np.ones(40, int)]
    seg = merge_segments(Segmentation([grid_times(80)[40]], 44.0), asd, _post(cls))
    assert len(seg.boundaries) == 1


@pytest.mark.parametrize("seed", [3101, 3102, 3103])
def test_merge_fixtures(seed):
    for make, should_merge in ((pause_fixture, True), (speed_change_fixture, False)):
        spec, split = make(seed)
        g = generate_concert(spec)
        b = extract_features(g.audio)
        seg = Segmentation.from_times(np.r_[g.truth.boundaries, split], b.duration)
        out = merge_segments(seg, b.asd, b.posteriors)
        kept = np.any(np.abs(out.boundaries - split) < 1e-9)
        assert kept != should_merge, make.__name__


def _random_merge_case(seed):
    rng = np.random.default_rng(seed)
    n = 200
    asd = np.repeat(rng.uniform(4, 16, 8), 25) + rng.normal(0, 0.5, n)
    cls = np.repeat(rng.integers(0, 3, 8), 25)
    cuts = np.sort(rng.choice(np.arange(5, n - 5), rng.integers(1, 10), replace=False))
    times = np.unique(grid_times(n)[cuts])
    return Segmentation.from_times(times, 104.0, min_length=1.0), asd, _post(cls)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_merge_idempotent_and_subset(seed):
    seg, asd, post = _random_merge_case(seed)
    once = merge_segments(seg, asd, post)
    twice = merge_segments(once, asd, post)
    np.testing.assert_array_equal(once.boundaries, twice.boundaries)
    assert set(once.boundaries.tolist()) <= set(seg.boundaries.tolist())


def test_merge_grid_mismatch():
    with pytest.raises(ValueError):
        merge_segments(Segmentation([], 20.0), np.zeros(10), np.zeros((11, 3)))


# -- Segmentation type ---------------------------------------------------------------

def test_segmentation_invariants():
    with pytest.raises(ValueError):
        Segmentation([0.0, 5.0], 10.0)
    with pytest.raises(ValueError):
        Segmentation([5.0, 4.0], 10.0)
    s = Segmentation.from_times([3.0, 50.0, 50.0, 95.0], 100.0)
    np.testing.assert_array_equal(s.boundaries, [50.0])
    assert s.segments == [(0.0, 50.0), (50.0, 100.0)]
