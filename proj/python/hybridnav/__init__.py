"""Hybrid learned/planned collision avoidance for a simulated quadrotor."""

import json as _json

from ._core import (
    ArtifactError,
    ConfigError,
    DataError,
    TrainingError,
    World,
    apply_depth_noise,
    astar_plan,
    config_hash,
    default_config,
    generate_course,
    gradcheck,
    huber,
    min_pool,
    normalize_config,
    normalize_depth,
    render_depth,
    render_rgb,
)
from . import _core


def run_episode(controller, seed, config=None):
    """Run one episode; returns the record as a dict."""
    return _json.loads(_core.run_episode(controller, seed, _dump(config)))


def evaluate(controller, episodes, seed, config=None, workers=1):
    """Seeded evaluation; returns the report as a dict."""
    return _json.loads(_core.evaluate(controller, episodes, seed, _dump(config), workers))


def _dump(config):
    if config is None:
        return ""
    return config if isinstance(config, str) else _json.dumps(config)


__all__ = [
    "ArtifactError",
    "ConfigError",
    "DataError",
    "TrainingError",
    "World",
    "apply_depth_noise",
    "astar_plan",
    "config_hash",
    "default_config",
    "evaluate",
    "generate_course",
    "gradcheck",
    "huber",
    "min_pool",
    "normalize_config",
    "normalize_depth",
    "render_depth",
    "render_rgb",
    "run_episode",
]
