import numpy as np
import pytest

from thermobench.config import ExperimentConfig


def make_blobs(n=4000, sep=8.0, seed=0, extra_dims=0):
    """Four unit-variance Gaussian blobs on the corners of a square of side ``sep``."""
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [sep, 0.0], [0.0, sep], [sep, sep]])
    y = np.arange(n) % 4
    rng.shuffle(y)
    X = centers[y] + rng.standard_normal((n, 2))
    if extra_dims:
        X = np.hstack([X, rng.standard_normal((n, extra_dims))])
    return X, y


def split_half(X, y):
    h = len(X) // 2
    return X[:h], y[:h], X[h:], y[h:]


def small_config(tmp_path=None, **overrides) -> ExperimentConfig:
    """A two-country, three-year synthetic experiment that trains in seconds."""
    base = {
        "name": "small",
        "data": {"synthetic": {"start_year": 2008, "end_year": 2010, "countries": 2}},
        "split": {"train": [2008, 2008], "val": [2009, 2009], "test": [2010, 2010]},
        "selection": {"k": 64, "max_rows": 4000, "forest": {"n_trees": 10},
                      "rfe": {"epochs": 100}},
        "models": {
            "roster": ["majority", "logreg", "tree", "mlp", "pg-mlp", "ensemble"],
            "hyper": {"mlp": {"hidden": [32, 16], "epochs": 3},
                      "pg-mlp": {"hidden": [32, 16], "epochs": 3},
                      "logreg": {"epochs": 100}},
            "ensemble": {"members": ["logreg", "tree"]},
        },
        "seeds": [0, 1],
    }
    if tmp_path is not None:
        base["output"] = {"dir": str(tmp_path)}
    cfg = ExperimentConfig.from_dict(base)
    return cfg.with_overrides(overrides) if overrides else cfg


@pytest.fixture
def blobs():
    X, y = make_blobs()
    return split_half(X, y)


def random_toy(seed, mode, rng, n=8, d=5, hidden=(7, 6, 5)):
    """Toy net with every parameter drawn from N(0, 0.7), plus a matching batch."""
    from thermobench import nn
    from thermobench.physics import LossWeights, PhysicsSignals

    cfg = nn.MlpConfig(input_dim=d, hidden=hidden, dropout=0.3, physics_mode=mode,
                       weights=LossWeights(0.1, 0.05))
    model = nn.init_model(cfg, seed)
    for p in model.parameters():
        p[...] = rng.normal(0.0, 0.7, p.shape)
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 4, n)
    signals = PhysicsSignals.build(rng.uniform(310, 330, n), rng.uniform(270, 300, n),
                                   rng.uniform(0.5, 2.0, n), cop=rng.uniform(2.0, 6.0, n))
    return model, X, y, signals


def kink_distance(model, X, signals, masks):
    """Smallest distance from a ReLU input or active hinge residual to its kink."""
    from thermobench import nn

    _, cop, (pre, _, _) = nn._forward(model, X, masks)
    d = min(float(np.abs(u).min()) for u in pre)
    if model.config.physics_mode == "hinge":
        for edge in (signals.cop_lo, signals.cop_hi, signals.cop_carnot):
            d = min(d, float(np.abs(cop - edge).min()))
    return d


def smooth_toy(mode, rng, margin=1e-2):
    """Redraw toy networks until finite differences cannot straddle a kink."""
    from thermobench import nn

    while True:
        model, X, y, s = random_toy(0, mode, rng)
        masks = nn.dropout_masks(model, len(X), rng)
        if kink_distance(model, X, s, masks) >= margin:
            return model, X, y, s, masks
