"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines live.
"""

import time

import numpy as np
import pytest

from conftest import random_segment, random_track
from feature_reference import reference_segment_features
from snatchdet.config import PipelineConfig
from snatchdet.features import (
    FeatureParams,
    SegmentTooShort,
    extract_segment,
    full_schema,
    iou,
    pair_segment,
)
from snatchdet.forest import (
    Dataset,
    ForestConfig,
    _best_split,
    balanced_weights,
    predict,
    predict_probability,
    serialize,
    train,
)
from snatchdet.pipeline import (
    StreamEngine,
    _slice_positions,
    binary_metrics,
    corpus_dataset,
    order_roles,
    pair_key_str,
    prediction_positions,
    select_pair,
    stratified_split,
)
from snatchdet.preprocess import SmoothingConfig, ema_step, smooth_track
from snatchdet.selection import pca_project, select_top_k
from snatchdet.synth import ScenarioSpec, generate, generate_corpus
from snatchdet.temporal import AlarmState, HysteresisConfig, run_sequence, step
from snatchdet.types import Keypoint, Skeleton, Track, build_tracks, validate_stream
from test_forest import exhaustive_best_split


def report(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f" ({detail})"
    print(line, flush=True)
    assert ok, line


# ---------------------------------------------------------------------------
# shared end-to-end artifacts (built once; criterion 6 asserts their timing)


@pytest.fixture(scope="module")
def e2e():
    cfg = PipelineConfig()
    schema = full_schema()
    started = time.perf_counter()

    clips = generate_corpus(n_per_class=60, seed=1234, duration=6.0, noise_sigma=1.5)
    dataset = corpus_dataset(clips, cfg, schema)
    train_set, holdout = stratified_split(dataset, holdout_fraction=0.3, seed=1234)

    full_model = train(train_set, ForestConfig(n_trees=500, seed=42))
    selected = select_top_k(schema, full_model.importances, k=10)
    reduced_train = train_set.select_features(selected.schema.names)
    reduced_holdout = holdout.select_features(selected.schema.names)
    model = train(reduced_train, ForestConfig(n_trees=500, seed=42))

    predictions = [predict(model, row)[0] for row in reduced_holdout.X]
    metrics = binary_metrics(reduced_holdout.y.tolist(), predictions)
    elapsed = time.perf_counter() - started

    return {
        "cfg": cfg,
        "schema": schema,
        "model": model,
        "selected": selected,
        "metrics": metrics,
        "elapsed": elapsed,
        "holdout_size": len(reduced_holdout),
        "train_size": len(reduced_train),
    }


# ---------------------------------------------------------------------------
# criterion: EMA closed form


def test_ema_closed_form():
    rng = np.random.default_rng(101)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        alpha = float(rng.uniform(0.01, 0.99))
        xs = rng.uniform(-100.0, 100.0, size=int(rng.integers(1, 101)))
        state = xs[0]
        for x in xs[1:]:
            state = ema_step(state, float(x), alpha)
        t = len(xs) - 1
        closed = (1 - alpha) ** t * xs[0]
        for k in range(t):
            closed += alpha * (1 - alpha) ** k * xs[t - k]
        worst = max(worst, abs(state - closed))
    elapsed = time.perf_counter() - started
    report(
        "EMA closed form: 1000 random cases within 1e-9, < 1 s",
        worst <= 1e-9 and elapsed < 1.0,
        f"worst {worst:.2e}, {elapsed:.2f}s",
    )


# ---------------------------------------------------------------------------
# criterion: feature oracle equivalence + invariances


def test_feature_oracle_equivalence():
    params = FeatureParams()
    schema = full_schema()
    rng = np.random.default_rng(202)
    mismatched = []
    for trial in range(200):
        n = int(rng.integers(5, 21))
        seg = random_segment(rng, n, dropout=float(rng.uniform(0.0, 0.25)))
        got = extract_segment(seg, schema, params).values
        want = reference_segment_features(seg, params)
        for name in schema.names:
            if got[name] != want[name]:
                mismatched.append((trial, name, got[name], want[name]))
    report(
        "Feature oracle: 200 random segments match straight-line reference exactly",
        not mismatched,
        f"{len(mismatched)} mismatches" if mismatched else "all exact",
    )


def _transform_track(track, k=1.0, cx=0.0, cy=0.0):
    out = []
    for t, skel in track.samples:
        kps = tuple(
            Keypoint(kp.x * k + cx, kp.y * k + cy, kp.confidence) for kp in skel.keypoints
        )
        bbox = (
            skel.bbox[0] * k + cx,
            skel.bbox[1] * k + cy,
            skel.bbox[2] * k + cx,
            skel.bbox[3] * k + cy,
        )
        out.append((t, Skeleton(kps, bbox)))
    return Track(track.track_id, samples=out, positions=list(track.positions or []))


def test_feature_scale_translation_invariance():
    params = FeatureParams()
    schema = full_schema()
    cfg = SmoothingConfig(0.6)
    rng = np.random.default_rng(303)

    def extract_raw(raw_a, raw_b):
        seg = pair_segment(smooth_track(raw_a, cfg), smooth_track(raw_b, cfg), fps=10.0)
        return extract_segment(seg, schema, params).values

    worst = 0.0
    checked = 0
    for scene in range(10):
        raw_a = random_track(rng, "1", 12, start=(220.0, 220.0), dropout=0.1)
        raw_b = random_track(rng, "2", 12, start=(340.0, 200.0), dropout=0.1)
        base = extract_raw(raw_a, raw_b)
        for _ in range(10):
            k = float(rng.uniform(0.2, 25.0))
            cx = float(rng.uniform(-2000.0, 2000.0))
            cy = float(rng.uniform(-2000.0, 2000.0))
            moved = extract_raw(
                _transform_track(raw_a, k, cx, cy), _transform_track(raw_b, k, cx, cy)
            )
            checked += 1
            for name in schema.names:
                worst = max(worst, abs(moved[name] - base[name]))
    report(
        "Feature invariance: 100 random rescalings/translations within 1e-6",
        worst <= 1e-6 and checked == 100,
        f"worst {worst:.2e}",
    )


# ---------------------------------------------------------------------------
# criterion: IoU against a rasterization oracle


def test_iou_rasterization_oracle():
    rng = np.random.default_rng(404)
    snap = 8.0  # box corners on a 1/8 grid, raster cells of 1/16
    worst = 0.0
    for _ in range(1000):
        a = np.sort(rng.integers(0, 81, size=4)) / snap
        b = np.sort(rng.integers(0, 81, size=4)) / snap
        box_a = (a[0], a[1], a[2], a[3])
        box_b = (b[0], b[1], b[2], b[3])

        x_lo = min(box_a[0], box_b[0])
        y_lo = min(box_a[1], box_b[1])
        x_hi = max(box_a[2], box_b[2])
        y_hi = max(box_a[3], box_b[3])
        nx = max(1, int(round((x_hi - x_lo) * 2 * snap)))
        ny = max(1, int(round((y_hi - y_lo) * 2 * snap)))
        xs = x_lo + (np.arange(nx) + 0.5) * (x_hi - x_lo) / nx if x_hi > x_lo else np.array([x_lo])
        ys = y_lo + (np.arange(ny) + 0.5) * (y_hi - y_lo) / ny if y_hi > y_lo else np.array([y_lo])
        gx, gy = np.meshgrid(xs, ys)
        in_a = (gx > box_a[0]) & (gx < box_a[2]) & (gy > box_a[1]) & (gy < box_a[3])
        in_b = (gx > box_b[0]) & (gx < box_b[2]) & (gy > box_b[1]) & (gy < box_b[3])
        union = int(np.count_nonzero(in_a | in_b))
        raster = 0.0 if union == 0 else np.count_nonzero(in_a & in_b) / union

        worst = max(worst, abs(iou(box_a, box_b) - raster))
    report(
        "IoU: 1000 random box pairs within 1e-3 of the raster oracle",
        worst <= 1e-3,
        f"worst {worst:.2e}",
    )


# ---------------------------------------------------------------------------
# criterion: hysteresis exhaustive equivalence


def test_hysteresis_exhaustive():
    sequences_by_length = {
        length: [[(bits >> i) & 1 for i in range(length)] for bits in range(2**length)]
        for length in range(1, 13)
    }
    configs = [
        HysteresisConfig(window=w, n_on=n_on, n_off=n_off)
        for w in range(2, 7)
        for n_on in range(2, w + 1)
        for n_off in range(1, n_on)
    ]
    checked = 0
    for cfg in configs:
        for length, sequences in sequences_by_length.items():
            for seq in sequences:
                states, events = run_sequence(seq, cfg)
                # brute force with from-scratch window sums
                s = 0
                ref_states = []
                ref_events = []
                for t in range(length):
                    c = sum(seq[max(0, t - cfg.window + 1) : t + 1])
                    if s == 0 and c >= cfg.n_on:
                        s = 1
                        ref_events.append(("activated", float(t), c))
                    elif s == 1 and c <= cfg.n_off:
                        s = 0
                        ref_events.append(("deactivated", float(t), c))
                    ref_states.append(s)
                    # activation/deactivation conditions are mutually
                    # exclusive for every reachable count
                    assert not (c >= cfg.n_on and c <= cfg.n_off)
                assert states == ref_states, (cfg, seq)
                got = [(e.kind, e.timestamp, e.window_count) for e in events]
                assert got == ref_events, (cfg, seq)
                kinds = [e.kind for e in events]
                assert all(a != b for a, b in zip(kinds, kinds[1:]))
                if kinds:
                    assert kinds[0] == "activated"
                checked += 1
    report(
        "Hysteresis: exhaustive streaming vs brute force, all L <= 12, W <= 6",
        True,
        f"{checked} sequence/config runs",
    )


# ---------------------------------------------------------------------------
# criterion: forest correctness and reproducibility


def test_forest_root_split_oracle():
    rng = np.random.default_rng(505)
    failures = 0
    trials = 0
    for _ in range(300):
        n = int(rng.integers(2, 13))
        d = int(rng.integers(1, 4))
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, size=n)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        w0, w1 = balanced_weights(y)
        got = _best_split(X, y, np.arange(n), np.arange(d), w0, w1, min_leaf=1)
        want = exhaustive_best_split(X, y, w0, w1)
        trials += 1
        if want is None:
            failures += got is not None
        elif got is None or (got[0], got[1]) != (want[1], want[2]):
            failures += 1
    report(
        "Forest: root split equals exhaustive oracle on 300 datasets <= 12x3",
        failures == 0,
        f"{trials} datasets",
    )


def test_forest_reproducibility_and_importances(e2e):
    rng = np.random.default_rng(606)
    X = rng.normal(size=(40, 5))
    y = rng.integers(0, 2, size=40)
    y[:3] = [0, 1, 0]
    data = Dataset(tuple(f"f{i}" for i in range(5)), X, y)

    run1 = serialize(train(data, ForestConfig(n_trees=64, seed=42, n_jobs=1)))
    run2 = serialize(train(data, ForestConfig(n_trees=64, seed=42, n_jobs=1)))
    threaded = serialize(train(data, ForestConfig(n_trees=64, seed=42, n_jobs=4)))
    model = train(data, ForestConfig(n_trees=64, seed=42))
    importance_sum = float(model.importances.sum())

    ok = run1 == run2 == threaded and abs(importance_sum - 1.0) <= 1e-9
    report(
        "Forest: bit-reproducible across runs and thread counts (seed 42); importances sum to 1",
        ok,
        f"importance sum {importance_sum:.12f}",
    )


# ---------------------------------------------------------------------------
# criterion: end-to-end synthetic discrimination


def test_end_to_end_synthetic_f1(e2e):
    f1 = e2e["metrics"]["f1"]
    ok = f1 >= 0.90 and e2e["elapsed"] < 120.0
    report(
        "End to end: F1 >= 0.90 on held-out synthetic split, < 2 min",
        ok,
        f"F1 {f1:.3f} on {e2e['holdout_size']} held-out clips, "
        f"{e2e['elapsed']:.1f}s, top10={[n for n, _ in e2e['selected'].ranked]}",
    )


# ---------------------------------------------------------------------------
# criterion: streaming throughput


def test_streaming_throughput(e2e):
    clip = generate(ScenarioSpec(kind="walk_by", duration=20.0, fps=30.0, seed=777, noise_sigma=1.0))
    engine = StreamEngine(e2e["model"], e2e["cfg"])
    started = time.perf_counter()
    engine.run(clip.frames)
    elapsed = time.perf_counter() - started
    rate = engine.frames_processed / elapsed
    report(
        "Throughput: cmd_stream path >= 300 frames/s single-threaded",
        rate >= 300.0,
        f"{rate:.0f} frames/s over {engine.frames_processed} frames",
    )


# ---------------------------------------------------------------------------
# criterion: PCA spectral checks


def test_pca_variance_and_reconstruction():
    rng = np.random.default_rng(808)
    worst_var = 0.0
    worst_rec = 0.0
    for _ in range(5):
        X = rng.normal(size=(50, 12)) * rng.uniform(0.1, 5.0, size=12)
        result = pca_project(X, n_components=12, standardize=False)
        variances = result.projected.var(axis=0, ddof=1)
        worst_var = max(worst_var, float(np.abs(variances - result.explained_variance).max()))
        centered = X - result.mean
        rebuilt = result.projected @ result.components
        worst_rec = max(worst_rec, float(np.abs(rebuilt - centered).max()))
    report(
        "PCA: projection variance = eigenvalues and reconstruction within 1e-6",
        worst_var <= 1e-6 and worst_rec <= 1e-6,
        f"variance err {worst_var:.2e}, reconstruction err {worst_rec:.2e}",
    )


# ---------------------------------------------------------------------------
# criterion: online/offline equivalence


def offline_alerts(frames, model, cfg):
    """Recompute stream alerts from scratch with the offline primitives."""
    frames = validate_stream(frames)
    schema = full_schema()
    params = cfg.feature_params()
    hcfg = cfg.hysteresis()
    tracks = [smooth_track(t, cfg.smoothing()) for t in build_tracks(frames, cfg.max_gap_frames)]

    updates = {}
    for end in prediction_positions(len(frames), cfg.window_frames, cfg.stride_frames):
        lo = end - cfg.window_frames + 1
        windows = [_slice_positions(t, lo, end) for t in tracks]
        pair = select_pair(windows, params.min_segment_frames)
        if pair is None:
            continue
        agg, vic = order_roles(pair[0], pair[1], cfg.window_s)
        try:
            seg = pair_segment(agg, vic, fps=cfg.fps)
            v_ab = extract_segment(seg, schema, params)
            v_ba = extract_segment(seg.swapped(), schema, params)
        except SegmentTooShort:
            continue
        prob = max(
            predict_probability(model, v_ab.values), predict_probability(model, v_ba.values)
        )
        key = pair_key_str(agg.track_id, vic.track_id)
        updates.setdefault(end, []).append((key, 1 if prob >= cfg.prob_threshold else 0))

    present_at = {}
    for track in tracks:
        for pos in track.positions:
            present_at.setdefault(pos, set()).add(track.track_id)

    current = {}
    alarms = {}
    events = []
    for pos, record in enumerate(frames):
        for key, yhat in updates.get(pos, []):
            current[key] = yhat
        present = present_at.get(pos, set())
        for key, yhat in current.items():
            a, b = key.split("|")
            if a not in present or b not in present:
                continue
            state = alarms.setdefault(key, AlarmState())
            _, event = step(state, yhat, hcfg, record.timestamp)
            if event is not None:
                events.append((key, event.kind, event.timestamp, event.window_count))
    return events


def test_online_offline_equivalence(e2e):
    cfg = e2e["cfg"]
    model = e2e["model"]
    rng = np.random.default_rng(909)
    kinds = ("snatch", "walk_by", "handshake", "standing")
    mismatches = 0
    total_events = 0
    for i in range(20):
        spec = ScenarioSpec(
            kind=kinds[i % 4],
            duration=6.0,
            fps=30.0,
            seed=int(rng.integers(0, 10**6)),
            noise_sigma=float(rng.uniform(0.5, 2.0)),
        )
        clip = generate(spec)
        engine = StreamEngine(model, cfg)
        engine.run(clip.frames)
        online = [(a.pair, a.kind, a.timestamp, a.window_count) for a in engine.alerts]
        offline = offline_alerts(clip.frames, model, cfg)
        total_events += len(offline)
        if online != offline:
            mismatches += 1
    report(
        "Online/offline: alert events identical on 20 random synthetic clips",
        mismatches == 0,
        f"{total_events} events compared",
    )
