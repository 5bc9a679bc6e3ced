#!/usr/bin/env python3
"""Throughput benchmark for the streaming detection engine.

Trains a small model on a synthetic corpus, then times the engine over a
long two-person stream.

    python3 scripts/bench_stream.py --duration 60
"""

import argparse
import time

from snatchdet.config import PipelineConfig
from snatchdet.features import full_schema
from snatchdet.forest import ForestConfig, train
from snatchdet.pipeline import StreamEngine, corpus_dataset
from snatchdet.selection import select_top_k
from snatchdet.synth import ScenarioSpec, generate, generate_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--duration", type=float, default=60.0, help="stream length, seconds")
    parser.add_argument("--fps", type=float, default=30.0)
    parser.add_argument("--n-trees", type=int, default=500)
    parser.add_argument("--top-k", type=int, default=10)
    parser.add_argument("--full-schema", action="store_true",
                        help="classify on all features instead of the top-k")
    args = parser.parse_args()

    cfg = PipelineConfig(n_trees=args.n_trees)
    schema = full_schema()
    print("training model on a 20-clip corpus ...")
    dataset = corpus_dataset(generate_corpus(n_per_class=10, seed=7), cfg, schema)
    full_model = train(dataset, ForestConfig(n_trees=args.n_trees, seed=cfg.seed))
    if args.full_schema:
        model = full_model
    else:
        selected = select_top_k(schema, full_model.importances, args.top_k)
        model = train(
            dataset.select_features(selected.schema.names),
            ForestConfig(n_trees=args.n_trees, seed=cfg.seed),
        )

    clip = generate(
        ScenarioSpec(kind="walk_by", duration=args.duration, fps=args.fps, seed=99, noise_sigma=1.0)
    )
    engine = StreamEngine(model, cfg)
    started = time.perf_counter()
    engine.run(clip.frames)
    elapsed = time.perf_counter() - started
    rate = engine.frames_processed / elapsed
    print(
        f"{engine.frames_processed} frames in {elapsed:.2f}s -> {rate:.0f} frames/s "
        f"({rate / args.fps:.1f}x realtime at {args.fps:.0f} fps), "
        f"{len(engine.alerts)} events"
    )


if __name__ == "__main__":
    main()
