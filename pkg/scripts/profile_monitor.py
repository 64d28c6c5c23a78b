#!/usr/bin/env python3
"""Throughput probe: how fast does the monitor chew through audio?

Renders a normal scenario of the requested length, runs the full
inference + detection chain over it in-process, and reports the
realtime factor. Needs a trained model bundle.

Usage:
    python scripts/profile_monitor.py --model model.bsm [--seconds 60]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from breathsentinel import dsp, load_model  # noqa: E402
from breathsentinel.stream import infer_stream  # noqa: E402
from breathsentinel.synthgen import ScenarioSpec, gen_scenario  # noqa: E402
from breathsentinel.vigil import run_detection  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", required=True)
    parser.add_argument("--seconds", type=float, default=60.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    bundle = load_model(args.model)
    spec = ScenarioSpec(kind="normal", duration=args.seconds,
                        onset=args.seconds / 2, seed=args.seed)
    clip, _ = gen_scenario(spec)
    frames, _ = dsp.frame_signal(clip)

    started = time.perf_counter()
    events = alerts = 0
    for item in run_detection(infer_stream(bundle.ae, bundle.rnn, iter(frames))):
        if hasattr(item, "statistic"):
            alerts += 1
        else:
            events += 1
    elapsed = time.perf_counter() - started

    print(f"audio_seconds,{args.seconds:.3f}")
    print(f"wall_seconds,{elapsed:.3f}")
    print(f"realtime_factor,{args.seconds / elapsed:.2f}")
    print(f"events,{events}")
    print(f"alerts,{alerts}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
