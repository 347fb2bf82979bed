"""Regenerate ``regression.json``: archived Monte Carlo runs used as regression oracles.

    python3 tests/fixtures/make_fixtures.py
"""
import json
from pathlib import Path

from hermvar.harness import estimate_weak_distance, stable_convergence_check, test_function
from hermvar.variations import VariationConfig
from hermvar.weights import weight

HERE = Path(__file__).parent
SEED = 20240611


def main():
    weak = estimate_weak_distance(VariationConfig(2, 0.6, 1024), weight("x"),
                                  test_function("cos"), 100_000, SEED)
    stable = stable_convergence_check(VariationConfig(2, 0.6, 2048), weight("x"),
                                      test_function("cos"), test_function("sin"), 20_000, SEED)
    out = {}
    for name, r in (("weak_distance", weak), ("stable_convergence", stable)):
        d = r.to_dict()
        d.pop("wall_time")
        out[name] = d
    (HERE / "regression.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
