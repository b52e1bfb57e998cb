"""Smoke test for the edgebid_py extension module."""

import sys
import tempfile
from pathlib import Path

import edgebid_py as eb


def check(cond, msg):
    if not cond:
        print(f"FAIL {msg}")
        sys.exit(1)
    print(f"ok   {msg}")


def main():
    cfg = eb.Config.preset("test")
    check(cfg.total_capacity() == 10.0, "test preset capacity")
    back = eb.Config.from_toml(cfg.to_toml())
    check(back.to_toml() == cfg.to_toml(), "toml round trip")

    try:
        eb.Config.from_toml('preset = "test"\nwindow = 0')
        check(False, "invalid config rejected")
    except ValueError:
        check(True, "invalid config rejected")

    # three bids for two slots: the top two win and pay the third price
    r = eb.run_auction([(0, 0, 0.9), (1, 0, 0.5), (2, 0, 0.7)], [2])
    check(r["won"] == [True, False, True], "auction winners")
    check(abs(r["types"][0]["payment"] - 0.5) < 1e-12, "uniform payment")

    check(abs(eb.jain_fairness([1.0, 1.0, 1.0]) - 1.0) < 1e-12, "jain equal")
    check(abs(eb.jain_fairness([1.0, 0.0]) - 0.5) < 1e-12, "jain single payer")
    check(eb.parse_seeds("1..3") == [1, 2, 3], "seed ranges")

    small = eb.Config.preset("train")
    small.population = {"moody": 3, "random": 1}
    small.epochs = 1
    small.epoch_steps = 3000
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp)
        summary = eb.train(small, [1], out / "train")
        check(summary[0]["shots"] > 0, "training produced shots")

        dep = eb.Config.preset("test")
        dep.population = {"moody": 3, "random": 1}
        dep.horizon = 2000
        report = eb.test(dep, [1], out / "test", checkpoint=out / "train", audit=True)
        check("moody" in report["aggregate"], "report aggregates per algorithm")
        check((out / "test" / "seed-1" / "metrics.csv").exists(), "metrics csv written")

        rows = eb.simulate(dep, checkpoint=out / "train")
        check(rows and set(rows[0]) == {"step", "window", "bidder", "algo", "metric", "value"},
              "in-memory metric rows")

    rep = eb.oracle(seed=1)
    check(rep["checks"] and all(c["passed"] for c in rep["checks"]), "oracle suite")
    bad = {c["name"]: c["passed"] for c in eb.oracle(seed=1, mutate="payment")["checks"]}
    check(not bad["auction"], "payment fault caught")

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
