"""Smoke test for the auction_ddpg_py extension module.

Build and install first, e.g.:

    pip install maturin
    maturin build --release -m crates/py/Cargo.toml
    pip install target/wheels/auction_ddpg_py-*.whl
"""

import math
import tempfile
from datetime import date, timedelta
from pathlib import Path

import auction_ddpg_py as ad


def check_market():
    m = ad.MarketConfig()
    assert m.costs == [10.0, 30.0, 60.0] and m.action_dim() == 6
    r = ad.settle(m, [30, 200, 800], [20, 40, 70], 50.0)
    best = ad.max_reward(m, 50.0)
    assert r == 2300.0 and best == 5200.0, (r, best)
    assert ad.normalize_reward(r, best) == 2300.0 / 5200.0
    oracle = ad.oracle_curve(m, 50.0)
    assert ad.normalize_reward(ad.settle(m, *zip(*oracle), 50.0), best) == 1.0
    try:
        ad.settle(m, [31, 0, 0], [0, 0, 0], 50.0)
    except ValueError:
        pass
    else:
        raise AssertionError("over-capacity volume accepted")


def check_network_and_noise():
    net = ad.Network([168, 64, 64, 6], ["relu", "relu", "tanh"], seed=1)
    assert net.param_count() == 15366
    out = net.predict([0.1] * 168)
    assert len(out) == 6 and all(-1.0 <= v <= 1.0 for v in out)
    small = ad.Network([6, 5, 2], ["relu", "tanh"], seed=2)
    assert small.grad_check([0.3, -0.2, 0.5, 0.1, -0.7, 0.9]) < 1e-4

    ou = ad.OuNoise(1, theta=0.15, mu=1.0, sigma=2.0, dt=1.0, seed=3)
    ou.step_with([0.0])
    assert ou.state == [1.0]
    samples = [ou.step()[0] for _ in range(20000)]
    assert abs(sum(samples) / len(samples) - 1.0) < 0.3


def write_prices(path, days):
    lines = ["Date;Hour;PUN"]
    start = date(2017, 1, 1)
    for t in range(days * 24):
        day = start + timedelta(days=t // 24)
        price = 50 + 20 * math.sin(2 * math.pi * (t % 24) / 24)
        lines.append(f"{day:%Y%m%d};{t % 24 + 1};{price:.2f}".replace(".", ","))
    path.write_text("\n".join(lines) + "\n")


def check_training(tmp):
    data = tmp / "pun.csv"
    write_prices(data, 40)
    series = ad.PriceSeries.load_csv(str(data))
    assert len(series) == 40 * 24
    train_starts, test_starts = series.split(0.8, 0)
    assert not set(train_starts) & set(test_starts)

    config = tmp / "run.toml"
    config.write_text(
        f'[data]\npath = "{data}"\n'
        "[ddpg]\nepisodes = 3\nepisode_days = 1\nhidden_size = 8\n"
        "batch_size = 16\nwarmup_transitions = 32\n"
        f'[output]\ndir = "{tmp / "out"}"\nrecord_wall_time = false\n'
    )
    rows = ad.train(str(config), seed=4)
    assert [r["episode"] for r in rows] == [1, 2, 3]
    checkpoint = tmp / "out" / "checkpoint_final.json"
    report = ad.evaluate(str(checkpoint), str(config))
    assert 0.0 <= report["mean_normalized_reward"] <= 1.0 and report["hours"] > 0

    agent = ad.Agent.load(str(checkpoint))
    mean, std = series.norm_stats(train_starts)
    action, curve = agent.act(series.window(test_starts[0], mean, std))
    assert len(action) == 6 and len(curve) == 3
    fresh = ad.Agent(ad.MarketConfig(), hidden_size=8, seed=1)
    assert "hidden_size = 8" in fresh.hyperparameters()

    try:
        ad.train(str(config), overrides=["ddpg.gamma=2"])
    except RuntimeError as e:
        assert "exit 1" in str(e)
    else:
        raise AssertionError("invalid gamma accepted")


def main():
    check_market()
    check_network_and_noise()
    with tempfile.TemporaryDirectory() as d:
        check_training(Path(d))
    actor_err, critic_err = ad.gradcheck(0)
    assert actor_err < 1e-4 and critic_err < 1e-4
    print("smoke test passed")


if __name__ == "__main__":
    main()
