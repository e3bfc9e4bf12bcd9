"""Shared fixtures: camera preset, test wireframe, and pose synthesis helpers.

The synthesis oracle used throughout is geometric: poses are drawn at random,
their keypoints projected with the forward pinhole model, and solvers are
judged by how well they invert that forward map.
"""

from __future__ import annotations

import numpy as np
import pytest

from satpose import (
    DEFAULT_CAMERA,
    Correspondence,
    Pose,
    example_wireframe,
    project,
)
from satpose.rng import stream
from satpose.sampler import sample_attitude


@pytest.fixture(scope="session")
def cam():
    return DEFAULT_CAMERA


@pytest.fixture(scope="session")
def wireframe():
    return example_wireframe()


def random_pose(rng: np.random.Generator) -> Pose:
    """A pose in the working envelope: 36-70 m range, mild lateral offset."""
    position = np.array(
        [rng.normal(0.0, 2.0), rng.normal(0.0, 1.5), rng.uniform(36.0, 70.0)]
    )
    return Pose(position=position, attitude=sample_attitude(rng))


def synthesize(pose: Pose, cam, wireframe, noise_sigma: float = 0.0, rng=None):
    """Project the wireframe under ``pose`` into a correspondence list."""
    pixels = project(pose, cam, wireframe.keypoints)
    if noise_sigma > 0.0:
        pixels = pixels + rng.normal(0.0, noise_sigma, size=pixels.shape)
    return [
        Correspondence(image=pixels[k], world=wireframe.keypoints[k], id=k)
        for k in range(wireframe.count)
    ]


@pytest.fixture()
def make_case(cam, wireframe):
    """Factory: seeded (pose, correspondences) pairs for solver tests."""

    def factory(seed: int, noise_sigma: float = 0.0):
        rng = stream(seed, "test-case")
        pose = random_pose(rng)
        corrs = synthesize(pose, cam, wireframe, noise_sigma=noise_sigma, rng=rng)
        return pose, corrs

    return factory
