"""Smoke test for the pywaypt3d extension module."""

import os
import tempfile

import pywaypt3d as w


def main():
    scene = w.Scene.generate(3, preset="corner", clutter=0.5, dims=[24, 24, 12], voxel=0.25)
    print(scene, "occupied", round(scene.occupied_fraction(), 3))
    assert w.Scene.parse(scene.to_text()).to_text() == scene.to_text()

    m = w.evaluate([scene], episodes=4, seed=1)
    print("expert", m)
    assert m["episodes"] == 4
    assert m["successes"] + m["collisions"] + m["timeouts"] + m["no_path"] == 4

    with tempfile.TemporaryDirectory() as d:
        data = w.Dataset(8)
        for i in range(32):
            data.push([float((i + k) % 5) for k in range(8)], [0.1 * i, 0.0, 0.0, 0.0])
        path = os.path.join(d, "data.wpds")
        data.save(path)
        assert len(w.Dataset.load(path)) == 32

        policy = w.fresh_policy(data, hidden=[16], seed=0)
        trained, losses = w.train(policy, data, epochs=20, lr=1e-3)
        print("loss", losses[0], "->", losses[-1])
        assert losses[-1] < losses[0]

        path = os.path.join(d, "p.wpnn")
        trained.save(path)
        assert w.Policy.load(path) == trained
        assert len(trained.predict([0.0] * 8)) == 4

        try:
            w.Policy.load(os.path.join(d, "data.wpds"))
        except ValueError as e:
            print("rejected:", e)
        else:
            raise AssertionError("bad policy file accepted")

    print("ok")


if __name__ == "__main__":
    main()
