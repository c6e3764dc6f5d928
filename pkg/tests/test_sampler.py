import math

import numpy as np
import pytest
from scipy import stats

from spatial_hom.detection import (BUCKET, RESOLVING, SINGLE_CAMERA, DetectorModel, SceneParams,
                                   bin_probability, bucket_probs)
from spatial_hom.errors import InvalidParameterError, NoDataError, ParseError
from spatial_hom.sampler import (BLOCK_SIZE, derive_seed, read_events_csv, sample_batch,
                                 sample_event, sample_pairs, stream, write_events_csv)
from spatial_hom.wavepacket import envelope, make_gaussian

ENV1 = envelope(make_gaussian(1.0))
WIDE = DetectorModel(RESOLVING, None, (-math.inf, math.inf))


def scene(dx, nu, env=ENV1):
    return SceneParams(dx, nu, env)


def chi2_pvalue(samples, s, edges, labels="AB"):
    """Chi-square of (dk bin, X) counts against exact bin probabilities."""
    used = ~samples.lost
    dk, x = samples.dk[used], samples.x[used]
    observed, expected = [], []
    for label in labels:
        observed.append(np.histogram(dk[x == label], edges)[0])
        expected.append([bin_probability(lo, hi, label, s) for lo, hi in zip(edges[:-1], edges[1:])])
    observed = np.concatenate(observed).astype(float)
    expected = np.asarray(expected).ravel()
    expected *= observed.sum() / expected.sum()
    keep = expected > 0
    return stats.chisquare(observed[keep], expected[keep]).pvalue


def equal_mass_edges(n_bins, sigma_k=1.0):
    # Equal-probability bins of the envelope, outer edges at the truncation.
    inner = stats.norm(scale=math.sqrt(2) * sigma_k).ppf(np.arange(1, n_bins) / n_bins)
    w = 12 * sigma_k
    return np.concatenate([[-w], inner, [w]])


# -- examples -------------------------------------------------------------------

def test_perfect_bunching_at_zero_separation():
    s = sample_batch(20_000, 1, scene(0.0, 1.0), WIDE)
    assert np.all(s.x == "B")


def test_no_interference_is_a_fair_coin_independent_of_dk():
    s = sample_batch(100_000, 2, scene(3.0, 0.0), WIDE)
    b = s.x == "B"
    assert abs(b.mean() - 0.5) < 3 * math.sqrt(0.25 / b.size)
    small = np.abs(s.dk) < 1.0
    table = [[np.sum(b & small), np.sum(~b & small)], [np.sum(b & ~small), np.sum(~b & ~small)]]
    assert stats.chi2_contingency(table).pvalue > 0.01


def test_sample_event_fields():
    ev = sample_event(stream(5, 0), scene(1.0, 0.5))
    assert ev.x in ("A", "B") and math.isfinite(ev.dk) and not ev.lost


def test_deterministic_and_worker_invariant():
    args = (3 * BLOCK_SIZE + 17, 1234, scene(4.0, 0.9), DetectorModel.default(1.0))
    one = sample_batch(*args)
    again = sample_batch(*args)
    many = sample_batch(*args, workers=4)
    assert one.same_events(again) and one.same_events(many)
    other = sample_batch(args[0], 1235, *args[2:])
    assert not one.same_events(other)


def test_prefix_stability():
    # Counter-based streams: a longer run extends a shorter one.
    short = sample_batch(1000, 9, scene(2.0, 1.0), WIDE)
    long = sample_batch(BLOCK_SIZE + 5, 9, scene(2.0, 1.0), WIDE)
    assert np.array_equal(short.dk, long.dk[:1000])


def test_derived_seeds_distinct():
    seeds = {derive_seed(42, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert derive_seed(42, 7) == derive_seed(42, 7)


def test_lost_fraction_outside_range():
    det = DetectorModel(RESOLVING, None, (-1.0, 1.0))
    s = sample_batch(200_000, 3, scene(1.0, 1.0), det)
    p_out = 2 * stats.norm(scale=math.sqrt(2)).sf(1.0)
    frac = s.lost.mean()
    assert abs(frac - p_out) < 4 * math.sqrt(p_out * (1 - p_out) / s.n_requested)
    assert s.n_used == s.n_requested - int(s.lost.sum())
    assert np.all(np.abs(s.dk[~s.lost]) <= 1.0)


def test_twelve_sigma_range_loses_nothing_measurable():
    det = DetectorModel(RESOLVING, None, (-12.0, 12.0))
    s = sample_batch(100_000, 4, scene(1.0, 1.0), det)
    assert s.n_used == s.n_requested


def test_snapping_to_pixel_centres():
    det = DetectorModel(RESOLVING, 0.25, (-2.0, 2.0), None, True)
    s = sample_batch(20_000, 5, scene(1.0, 1.0), det)
    kept = s.dk[~s.lost]
    centres = -2.0 + 0.25 * (np.arange(16) + 0.5)
    assert np.all(np.isin(kept, centres))


def test_invalid_count():
    with pytest.raises(InvalidParameterError):
        sample_batch(0, 1, scene(1.0, 1.0), WIDE)
    with pytest.raises(InvalidParameterError):
        sample_pairs(0, 1, scene(1.0, 1.0), make_gaussian(1.0))


# -- exact-distribution checks at n = 1e5 ------------------------------------------

@pytest.mark.parametrize("nu,dx", [(1.0, 4.0), (0.7, 1.5), (0.9, 0.0)])
def test_chi2_resolving(nu, dx):
    s = scene(dx, nu)
    samples = sample_batch(100_000, 11, s, WIDE)
    assert chi2_pvalue(samples, s, equal_mass_edges(32)) > 0.01


def test_chi2_single_camera():
    s = scene(2.0, 0.9)
    det = DetectorModel(SINGLE_CAMERA, None, (-8.0, 8.0))
    samples = sample_batch(100_000, 12, s, det)
    assert np.all(samples.x[~samples.lost] == "B")
    # Only bunching events on the one camera survive: rate p_B / 2.
    rate = bucket_probs(s)[1] / 2
    assert abs(samples.n_used / 1e5 - rate) < 3 * math.sqrt(rate * (1 - rate) / 1e5)
    assert chi2_pvalue(samples, s, equal_mass_edges(32), labels="B") > 0.01


@pytest.mark.parametrize("nu,dx", [(1.0, 1.0), (0.8, 0.4)])
def test_bucket_counts_binomial(nu, dx):
    s = scene(dx, nu)
    samples = sample_batch(100_000, 13, s, DetectorModel(BUCKET))
    assert np.all(np.isnan(samples.dk))
    n_a, n_b = samples.counts()
    p_a, _ = bucket_probs(s)
    assert n_a + n_b == 100_000
    assert abs(n_a - 1e5 * p_a) <= 3 * math.sqrt(1e5 * p_a * (1 - p_a))


def test_tabulated_envelope_sampler(skewed_dist):
    env = envelope(skewed_dist)
    s = scene(1.0, 0.8, env)
    samples = sample_batch(100_000, 14, s, WIDE)
    # equal-mass bins of the numeric envelope
    grid = np.linspace(-env.half_width(), env.half_width(), 20001)
    cdf = np.cumsum(env(grid))
    cdf /= cdf[-1]
    inner = np.interp(np.arange(1, 32) / 32, cdf, grid)
    edges = np.concatenate([[grid[0]], inner, [grid[-1]]])
    assert chi2_pvalue(samples, s, edges) > 0.01


@pytest.mark.parametrize("x", ["A", "B"])
def test_pair_sampler_agrees_with_difference_sampler(x):
    s = scene(2.0, 0.9)
    k, kp, xs = sample_pairs(100_000, 21, s, make_gaussian(1.0))
    batch = sample_batch(100_000, 22, s, WIDE)
    a = (k - kp)[xs == x]
    b = batch.dk[batch.x == x]
    assert stats.ks_2samp(a, b).pvalue > 0.01


# -- CSV ---------------------------------------------------------------------------

@pytest.mark.parametrize("det", [WIDE, DetectorModel(BUCKET), DetectorModel(RESOLVING, 0.1, (-3.0, 3.0), None, True),
                                 DetectorModel(SINGLE_CAMERA, None, (-5.0, 5.0))])
def test_csv_round_trip(tmp_path, det):
    s = sample_batch(3000, 31, scene(4.0, 0.9), det)
    path = tmp_path / "events.csv"
    write_events_csv(s, path)
    back = read_events_csv(path)
    assert back.same_events(s)
    assert back.seed == s.seed
    assert back.scene.nu == s.scene.nu and back.scene.delta_x == s.scene.delta_x
    assert back.detector == det


def test_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("# seed=1\nevent_index,dk,x,lost\n", encoding="utf-8")
    with pytest.raises(NoDataError):
        read_events_csv(path)


@pytest.mark.parametrize("body,line", [
    ("event_index,dk,x,lost\n0,0.5,C,0\n", 3),
    ("event_index,dk,x,lost\n0,0.5,A\n", 3),
    ("index,k\n", 2),
    ("event_index,dk,x,lost\n0,0.1,A,0\n1,zz,B,0\n", 4),
])
def test_csv_malformed(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text("# sigma_k=1.0\n" + body, encoding="utf-8")
    with pytest.raises(ParseError) as info:
        read_events_csv(path)
    assert info.value.line == line


def test_csv_missing_metadata(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("event_index,dk,x,lost\n0,0.1,A,0\n", encoding="utf-8")
    with pytest.raises(ParseError):
        read_events_csv(path)
